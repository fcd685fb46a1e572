#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "linalg.hpp"
#include "rng.hpp"

namespace plmc {

enum class TargetKind { gaussian, logcosh_product, custom };
enum class PreconditionerKind { covariance, fisher };

inline const char* to_string(PreconditionerKind k) {
    return k == PreconditionerKind::covariance ? "covariance" : "fisher";
}

// Matrices bounding the Hessian of U from below and above over all of R^d.
struct HessianWitness {
    Mat lower;
    Mat upper;
};

struct Target {
    TargetKind kind = TargetKind::custom;
    std::string description;
    Eigen::Index dim = 0;
    std::function<double(const Vec&)> potential;
    std::function<Vec(const Vec&)> gradient;
    double m = 0;  // strong convexity
    double L = 0;  // smoothness
    std::optional<SpdMatrix> analytic_covariance;
    std::optional<SpdMatrix> analytic_fisher;
    std::optional<Vec> analytic_mean;
    std::optional<Vec> mode;
    std::optional<SpdMatrix> precision;  // Gaussian targets only
    std::optional<HessianWitness> hessian_witness;
    std::function<Vec(RandomStream&)> exact_sampler;  // optional IID draws from the target
    double gradient_flops = 0;

    double kappa() const { return L / m; }
    bool is_gaussian() const { return kind == TargetKind::gaussian && precision && analytic_mean; }

    GaussianLaw gaussian_law() const {
        if (!is_gaussian()) throw Error(ErrorCode::oracle_unsupported, "target is not Gaussian");
        return GaussianLaw(*analytic_mean, *analytic_covariance);
    }

    // Trace of the target covariance, exact when known and d/m otherwise.
    double trace_sigma_upper() const {
        return analytic_covariance ? analytic_covariance->trace() : double(dim) / m;
    }
    // Lower bound on the same trace, d/L when no analytic covariance exists.
    double trace_sigma_lower() const {
        return analytic_covariance ? analytic_covariance->trace() : double(dim) / L;
    }
};

inline void validate_target(const Target& t) {
    if (t.dim <= 0) throw Error(ErrorCode::invalid_argument, "target dimension must be positive");
    if (!(t.m > 0) || !(t.L >= t.m) || !std::isfinite(t.L))
        throw Error(ErrorCode::invalid_argument, "target constants must satisfy 0 < m <= L < inf");
    if (!t.potential || !t.gradient) throw Error(ErrorCode::invalid_argument, "target needs potential and gradient");
    if (t.analytic_covariance) {
        const auto& s = *t.analytic_covariance;
        if (s.dim() != t.dim) throw Error(ErrorCode::dimension_mismatch, "covariance dimension");
        const double tol = 1e-9;
        if (s.lambda_min() < (1.0 / t.L) * (1 - tol) || s.lambda_max() > (1.0 / t.m) * (1 + tol))
            throw Error(ErrorCode::invalid_argument, "covariance spectrum is outside [1/L, 1/m]");
    }
}

inline Target make_gaussian_target(const Vec& mean, const SpdMatrix& covariance) {
    if (mean.size() != covariance.dim()) throw Error(ErrorCode::dimension_mismatch, "mean/covariance size");
    Target t;
    t.kind = TargetKind::gaussian;
    t.dim = mean.size();
    const SpdMatrix prec = covariance.inverse();
    t.precision = prec;
    t.analytic_covariance = covariance;
    t.analytic_fisher = prec;
    t.analytic_mean = mean;
    t.mode = mean;
    t.m = prec.lambda_min();
    t.L = prec.lambda_max();
    t.potential = [prec, mean](const Vec& x) {
        const Vec r = x - mean;
        return 0.5 * r.dot(prec.matrix() * r);
    };
    t.gradient = [prec, mean](const Vec& x) -> Vec { return prec.matrix() * (x - mean); };
    t.hessian_witness = HessianWitness{prec.matrix(), prec.matrix()};
    const Mat chol = covariance.cholesky_lower();
    t.exact_sampler = [chol, mean](RandomStream& rng) -> Vec {
        return mean + chol * rng.normal_vector(mean.size());
    };
    const double d = double(t.dim);
    t.gradient_flops = 2.0 * d * d;
    std::ostringstream os;
    os << "gaussian(d=" << t.dim << ", m=" << t.m << ", L=" << t.L << ")";
    t.description = os.str();
    return t;
}

// Replace the constants of a target with looser ones (m' <= m, L' >= L).
// Useful to pose a planning problem with a prescribed condition number, e.g.
// kappa > 1 in one dimension.
inline Target with_declared_bounds(Target t, double m, double L) {
    if (!(m > 0) || m > t.m * (1 + 1e-12) || L < t.L * (1 - 1e-12))
        throw Error(ErrorCode::invalid_argument, "declared bounds must contain the exact constants");
    t.m = m;
    t.L = L;
    validate_target(t);
    return t;
}

namespace detail {

inline double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

struct LogCoshMoments {
    double variance;      // E[Y^2] for density proportional to exp(-y^2/2) / cosh(y)
    double mean_sech2;    // E[sech^2(Y)]
};

inline const LogCoshMoments& logcosh_moments() {
    static const LogCoshMoments mom = [] {
        using boost::math::quadrature::gauss_kronrod;
        const double inf = std::numeric_limits<double>::infinity();
        auto dens = [](double y) { return std::exp(-0.5 * y * y - log_cosh(y)); };
        const double z = gauss_kronrod<double, 61>::integrate(dens, 0.0, inf, 15, 1e-15);
        const double m2 = gauss_kronrod<double, 61>::integrate(
            [&](double y) { return y * y * dens(y); }, 0.0, inf, 15, 1e-15);
        const double s2 = gauss_kronrod<double, 61>::integrate(
            [&](double y) {
                const double c = 1.0 / std::cosh(y);
                return c * c * dens(y);
            },
            0.0, inf, 15, 1e-15);
        return LogCoshMoments{m2 / z, s2 / z};
    }();
    return mom;
}

}  // namespace detail

// U(x) = sum_i (x_i/s_i)^2 / 2 + log cosh(x_i / s_i); each factor has
// Hessian between 1/s_i^2 and 2/s_i^2.
inline Target make_logcosh_product_target(const Vec& scales) {
    if (scales.size() == 0 || !(scales.minCoeff() > 0))
        throw Error(ErrorCode::invalid_argument, "logcosh scales must be positive");
    Target t;
    t.kind = TargetKind::logcosh_product;
    t.dim = scales.size();
    const Vec inv2 = scales.array().square().inverse();
    t.m = inv2.minCoeff();
    t.L = 2.0 * inv2.maxCoeff();
    t.potential = [scales](const Vec& x) {
        double u = 0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double y = x(i) / scales(i);
            u += 0.5 * y * y + detail::log_cosh(y);
        }
        return u;
    };
    t.gradient = [scales](const Vec& x) -> Vec {
        Vec g(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double y = x(i) / scales(i);
            g(i) = (y + std::tanh(y)) / scales(i);
        }
        return g;
    };
    const auto& mom = detail::logcosh_moments();
    t.analytic_covariance = SpdMatrix::diagonal(scales.array().square() * mom.variance);
    t.analytic_fisher = SpdMatrix::diagonal(inv2 * (1.0 + mom.mean_sech2));
    t.analytic_mean = Vec::Zero(t.dim);
    t.mode = Vec::Zero(t.dim);
    t.hessian_witness = HessianWitness{Mat(inv2.asDiagonal()), Mat((2.0 * inv2).asDiagonal())};
    // Rejection from N(0, s^2): accept with probability 1/cosh(y).
    t.exact_sampler = [scales](RandomStream& rng) -> Vec {
        Vec x(scales.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            for (;;) {
                const double y = rng.normal();
                if (rng.uniform() * std::cosh(y) < 1.0) {
                    x(i) = scales(i) * y;
                    break;
                }
            }
        }
        return x;
    };
    t.gradient_flops = 20.0 * double(t.dim);
    std::ostringstream os;
    os << "logcosh-product(d=" << t.dim << ")";
    t.description = os.str();
    validate_target(t);
    return t;
}

struct PreconditionedConstants {
    double m_M = 0;
    double L_M = 0;
    double kappa_M = 0;
    bool exact = false;

    static PreconditionedConstants from(double m, double L, bool exact = false) {
        if (!(m > 0) || !(L >= m * (1 - 1e-12)))
            throw Error(ErrorCode::invalid_argument, "preconditioned constants need 0 < m <= L");
        return {m, std::max(L, m), std::max(L, m) / m, exact};
    }
};

inline void require_same_dim(const SpdMatrix& a, const SpdMatrix& b) {
    if (a.dim() != b.dim()) throw Error(ErrorCode::dimension_mismatch, "matrices have different dimensions");
}

// Exact for Gaussian targets; for other targets the bracket implied by the
// Hessian witness.
inline PreconditionedConstants preconditioned_constants(const Target& t, const SpdMatrix& M) {
    if (M.dim() != t.dim) throw Error(ErrorCode::dimension_mismatch, "preconditioner dimension");
    if (t.kind == TargetKind::gaussian && t.precision) {
        const auto es = sym_eig(whiten(M, t.precision->matrix()));
        return PreconditionedConstants::from(es.eigenvalues()(0), es.eigenvalues()(t.dim - 1), true);
    }
    if (!t.hessian_witness)
        throw Error(ErrorCode::unsupported_target, "non-Gaussian target without Hessian witnesses");
    const auto lo = sym_eig(whiten(M, t.hessian_witness->lower));
    const auto hi = sym_eig(whiten(M, t.hessian_witness->upper));
    return PreconditionedConstants::from(lo.eigenvalues()(0), hi.eigenvalues()(t.dim - 1), false);
}

// Bracket on (m_{M1}, L_{M1}) from the constants of M2.
inline std::pair<double, double> ostrowski_bounds(const SpdMatrix& M1, const SpdMatrix& M2,
                                                  const PreconditionedConstants& c2) {
    require_same_dim(M1, M2);
    const auto es = sym_eig(whiten(M1, M2.matrix()));
    return {es.eigenvalues()(0) * c2.m_M, es.eigenvalues()(M1.dim() - 1) * c2.L_M};
}

inline double condition_number_transfer(const SpdMatrix& M1, const SpdMatrix& M2, double kappa_M2) {
    require_same_dim(M1, M2);
    const auto es = sym_eig(whiten(M1, M2.matrix()));
    return es.eigenvalues()(M1.dim() - 1) / es.eigenvalues()(0) * kappa_M2;
}

// Constants valid for any estimate within relative error Delta of the
// reference preconditioner. A covariance estimate enters inverted, a Fisher
// estimate enters directly, so the two brackets differ in their m and L sides.
inline PreconditionedConstants estimated_preconditioner_bracket(
    double Delta, const PreconditionedConstants& ref, PreconditionerKind kind = PreconditionerKind::covariance) {
    if (!(Delta >= 0) || !(Delta < 1))
        throw Error(ErrorCode::invalid_tolerance, "Delta must lie in [0, 1)");
    const double grow = (1 + Delta) / (1 - Delta);
    if (kind == PreconditionerKind::covariance) {
        const double m = (1 - Delta) * ref.m_M, L = (1 + Delta) * ref.L_M;
        return {m, L, grow * ref.kappa_M, false};
    }
    const double m = ref.m_M / (1 + Delta), L = ref.L_M / (1 - Delta);
    return {m, L, grow * ref.kappa_M, false};
}

// W2(pi, delta_x)^2 = tr(Sigma) + |x - mu|^2 for any pi with known mean and covariance.
inline double w2_to_point(const Target& t, const Vec& x) {
    if (!t.analytic_covariance || !t.analytic_mean)
        throw Error(ErrorCode::invalid_argument, "W2 to a point needs the target mean and covariance");
    return std::sqrt(t.analytic_covariance->trace() + (x - *t.analytic_mean).squaredNorm());
}

}  // namespace plmc
