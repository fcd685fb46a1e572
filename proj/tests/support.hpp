#pragma once

#include <cmath>
#include <vector>

#include "plmc/budget.hpp"
#include "plmc/linalg.hpp"
#include "plmc/rng.hpp"
#include "plmc/target_spec.hpp"

namespace plmc::testing {

// Eigenvalues spread log-uniformly in [1, kappa], random orientation.
inline Mat random_spd_matrix(Eigen::Index d, double kappa, RandomStream& rng, double scale = 1.0) {
    const Mat q = random_orthogonal(d, rng);
    Vec lam(d);
    for (Eigen::Index i = 0; i < d; ++i) lam(i) = scale * std::pow(kappa, rng.uniform());
    if (d > 1) {
        lam(0) = scale;
        lam(d - 1) = scale * kappa;
    }
    return symmetrize(q * lam.asDiagonal() * q.transpose());
}

inline SpdMatrix random_spd(Eigen::Index d, double kappa, RandomStream& rng, double scale = 1.0) {
    return SpdMatrix(random_spd_matrix(d, kappa, rng, scale));
}

inline Vec random_vector(Eigen::Index d, RandomStream& rng, double scale = 1.0) { return scale * rng.normal_vector(d); }

// A ULA budget with hand-picked counts, bypassing the admissibility rules of the planners.
inline Budget manual_ula_budget(const Target& t, double h, std::uint64_t k_burn, std::uint64_t k_thin, std::uint64_t N) {
    Budget b;
    b.family = KernelFamily::ula;
    b.h = h;
    b.cp = contraction_params_ula(t, h);
    b.k_burn = k_burn;
    b.k_thin = k_thin;
    b.N = N;
    b.k_burn_real = double(k_burn);
    b.k_thin_real = double(k_thin);
    b.trace_sigma = t.trace_sigma_upper();
    return b;
}

inline double rel_frobenius(const Mat& a, const Mat& b) { return (a - b).norm() / b.norm(); }

}  // namespace plmc::testing
