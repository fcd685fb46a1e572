#pragma once

namespace plmc {

// Every tolerance used by the library lives here. Functions that compare
// against a tolerance take a policy argument defaulting to default_policy().
struct NumericPolicy {
    double symmetry_tol = 1e-12;       // |A_ij - A_ji| <= tol * max(1, |A_ij|)
    double spd_relative_floor = 1e-12; // reject lambda_min <= floor * lambda_max
    double degenerate_relative_floor = 1e-10;  // estimator degeneracy threshold
    double boundary_relative_tol = 1e-12;      // slack on closed admissibility bounds
    double certify_tol = 1e-12;        // absolute slack on relative_error <= Delta
    double oracle_slack = 1e-8;        // slack on exact W2 comparisons
    int oracle_max_dim = 4000;         // d*N guard for the joint-law oracle
    double fd_relative_tol = 1e-5;     // gradient vs finite differences
    double sqrt_roundtrip_tol = 1e-10; // relative Frobenius error of R*R vs A
};

inline const NumericPolicy& default_policy() {
    static const NumericPolicy p{};
    return p;
}

// a <= b with a relative slack, for closed upper bounds evaluated in floating point.
inline bool le_rel(double a, double b, const NumericPolicy& pol = default_policy()) {
    return a <= b + pol.boundary_relative_tol * (b < 0 ? -b : b);
}

// a < b strictly, treating values within the relative slack as equal (so they fail).
inline bool lt_rel(double a, double b, const NumericPolicy& pol = default_policy()) {
    return a < b - pol.boundary_relative_tol * (b < 0 ? -b : b);
}

}  // namespace plmc
