#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "rng.hpp"
#include "target.hpp"

namespace plmc {

enum class KernelFamily { ula, underdamped };

inline const char* to_string(KernelFamily f) { return f == KernelFamily::ula ? "ula" : "underdamped"; }

struct ContractionParams {
    double Gamma = 1;
    double gamma = 0;  // per-iteration exponential rate
    double b = 0;      // W2 bias
    double h_max = 0;
    double h = 0;      // step size the parameters were evaluated at
    std::string source;
};

struct UnderdampedOptions {
    double friction = 2.0;
    std::optional<double> velocity_scale;  // defaults to 1/L
    double init_distance = 0.0;            // bound on |x0 - mode|
};

struct KernelConfig {
    KernelFamily family = KernelFamily::ula;
    double h = 0;
    std::optional<SpdMatrix> preconditioner;
    UnderdampedOptions underdamped;
};

// FLOPs per step outside the gradient call, per coordinate.
inline constexpr double ula_flops_per_coord = 4.0;          // scale g, subtract, scale noise, add
inline constexpr double underdamped_flops_per_coord = 12.0;  // two affine updates plus correlated noise

inline double ula_step_flops(const Target& t) { return t.gradient_flops + ula_flops_per_coord * double(t.dim); }
inline double preconditioned_step_flops(const Target& t) {
    const double d = double(t.dim);
    return ula_step_flops(t) + 4.0 * d * d;
}
inline double underdamped_step_flops(const Target& t) {
    return t.gradient_flops + underdamped_flops_per_coord * double(t.dim);
}

namespace detail {

[[noreturn]] inline void fail_nonfinite(const char* what, const Vec& x, std::uint64_t iter) {
    throw NumericalFailure(std::string(what) + " is not finite", iter, std::vector<double>(x.data(), x.data() + x.size()));
}

inline Vec checked_gradient(const Target& t, const Vec& x, std::uint64_t iter) {
    Vec g = t.gradient(x);
    if (!g.allFinite()) fail_nonfinite("gradient", x, iter);
    return g;
}

}  // namespace detail

inline Vec ula_step(const Vec& x, const Target& t, double h, RandomStream& rng, std::uint64_t iter = 0) {
    if (!(h > 0)) throw Error(ErrorCode::invalid_argument, "step size must be positive");
    const Vec g = detail::checked_gradient(t, x, iter);
    const Vec xi = rng.normal_vector(x.size());
    const double s = std::sqrt(2.0 * h);
    Vec out = x - h * g + s * xi;
    if (!out.allFinite()) detail::fail_nonfinite("state", x, iter);
    return out;
}

// ULA on the pushforward of the target under y = M^{1/2} x.
inline Vec preconditioned_ula_step(const Vec& y, const Target& t, const SpdMatrix& M, double h, RandomStream& rng,
                                   std::uint64_t iter = 0) {
    if (!(h > 0)) throw Error(ErrorCode::invalid_argument, "step size must be positive");
    const Mat& w = M.inv_sqrt_matrix();
    const Vec x = w * y;
    const Vec g = w * detail::checked_gradient(t, x, iter);
    const Vec xi = rng.normal_vector(y.size());
    const double s = std::sqrt(2.0 * h);
    Vec out = y - h * g + s * xi;
    if (!out.allFinite()) detail::fail_nonfinite("state", y, iter);
    return out;
}

struct PhaseState {
    Vec x;
    Vec v;
};

namespace detail {

// 2z - 3 + 4e^{-z} - e^{-2z}, accurate for small z.
inline double ud_position_var_factor(double z) {
    if (z < 1e-2) {
        double term = z * z * z, sum = 0;
        double fact = 6.0;
        for (int n = 3; n < 14; ++n) {
            const double c = 4.0 * ((n % 2) ? -1.0 : 1.0) - std::pow(-2.0, n);
            sum += c * term / fact;
            term *= z;
            fact *= double(n + 1);
        }
        return sum;
    }
    return 2 * z - 3 + 4 * std::exp(-z) - std::exp(-2 * z);
}

// e^{-z} - 1 + z, accurate for small z.
inline double expm1_plus_z(double z) {
    if (z < 1e-2) {
        double term = z * z / 2, sum = 0;
        for (int n = 2; n < 14; ++n) {
            sum += term;
            term *= -z / double(n + 1);
        }
        return sum;
    }
    return std::expm1(-z) + z;
}

}  // namespace detail

// Exact integration of the kinetic Langevin SDE
//   dv = -f v dt - u grad U(x) dt + sqrt(2 f u) dB,  dx = v dt
// over one step with the gradient frozen at the start of the step.
inline PhaseState underdamped_step(const PhaseState& s, const Target& t, double h, RandomStream& rng,
                                   const UnderdampedOptions& opt = {}, std::uint64_t iter = 0) {
    if (!(h > 0) || h > 1) throw Error(ErrorCode::step_size_too_large, "underdamped step needs 0 < h <= 1");
    const double f = opt.friction;
    const double u = opt.velocity_scale.value_or(1.0 / t.L);
    const double z = f * h;
    const double a = -std::expm1(-z);  // 1 - e^{-fh}
    const double var_x = u / (f * f) * detail::ud_position_var_factor(z);
    const double cov_xv = u / f * a * a;
    const double var_v = u * a * (2 - a);
    const double nx = std::sqrt(var_x);
    const double cross = var_x > 0 ? cov_xv / nx : 0.0;
    const double nv = std::sqrt(std::max(0.0, var_v - cross * cross));

    const Vec g = detail::checked_gradient(t, s.x, iter);
    const Vec xi1 = rng.normal_vector(s.x.size());
    const Vec xi2 = rng.normal_vector(s.x.size());
    PhaseState out;
    out.x = s.x + (a / f) * s.v - (u / (f * f)) * detail::expm1_plus_z(z) * g + nx * xi1;
    out.v = (1 - a) * s.v - (u / f) * a * g + cross * xi1 + nv * xi2;
    if (!out.x.allFinite() || !out.v.allFinite()) detail::fail_nonfinite("state", s.x, iter);
    return out;
}

inline ContractionParams contraction_params_ula(Eigen::Index d, double m, double L, double h) {
    if (!(h > 0)) throw Error(ErrorCode::invalid_argument, "step size must be positive");
    const double h_max = 2.0 / (L + m);
    if (!le_rel(h, h_max)) {
        std::ostringstream os;
        os << "h = " << h << " exceeds h_max = 2/(L+m) = " << h_max;
        throw Error(ErrorCode::step_size_too_large, os.str());
    }
    const double kappa = L / m;
    return {1.0, m * h, 1.65 * kappa * std::sqrt(double(d) * h), h_max, h, "ula: Gamma=1, gamma=m h, b=1.65 kappa sqrt(d h)"};
}

inline ContractionParams contraction_params_ula(const Target& t, double h) {
    return contraction_params_ula(t.dim, t.m, t.L, h);
}

inline double underdamped_energy(Eigen::Index d, double m, double D) { return 26.0 * (double(d) / m + D * D); }

inline ContractionParams contraction_params_underdamped(Eigen::Index d, double m, double L, double h, double D) {
    if (!(h > 0)) throw Error(ErrorCode::invalid_argument, "step size must be positive");
    if (h > 1) throw Error(ErrorCode::step_size_too_large, "underdamped preset needs h <= h_max = 1");
    if (!(D >= 0)) throw Error(ErrorCode::invalid_argument, "initial distance bound must be nonnegative");
    const double kappa = L / m;
    const double ek = underdamped_energy(d, m, D);
    return {4.0, h / (2 * kappa), 16.0 * kappa * std::sqrt(2 * ek / 5) * h, 1.0, h,
            "underdamped: Gamma=4, gamma=h/(2 kappa), b=16 kappa sqrt(2 E_K/5) h"};
}

inline ContractionParams contraction_params_underdamped(const Target& t, double h, double D) {
    return contraction_params_underdamped(t.dim, t.m, t.L, h, D);
}

// Preset for unadjusted HMC with integration time T; no HMC kernel exists in this library.
inline ContractionParams contraction_params_hmc_preset(const Target& t, double h, double T) {
    if (!(T > 0) || !le_rel(T, 1.0 / std::sqrt(8 * t.L)))
        throw Error(ErrorCode::invalid_argument, "HMC preset needs 0 < T <= 1/sqrt(8 L)");
    if (!(h > 0) || !le_rel(h, T)) throw Error(ErrorCode::invalid_argument, "HMC preset needs 0 < h <= T");
    const double kappa = t.kappa();
    const double b = 1704.0 * std::pow(t.L, 0.25) * std::sqrt(double(t.dim) * kappa) / (t.m * T * T) * std::pow(h, 1.5);
    return {1.0, t.m * T * T / 6, b, T, h, "hmc preset: Gamma=1, gamma=m T^2/6"};
}

// Maps a step size to contraction parameters and solves 3 Gamma^2 b(h) = eps/2.
struct ContractionProvider {
    KernelFamily family = KernelFamily::ula;
    std::function<ContractionParams(double)> params;
    std::function<double(double)> step_for_epsilon;
    // Coefficients of gamma = theta h^k1 and b = phi h^k2.
    double theta = 0, k1 = 1, phi = 0, k2 = 0.5, h0 = 0, Gamma = 1;
};

inline ContractionProvider ula_provider(Eigen::Index d, double m, double L) {
    ContractionProvider p;
    p.family = KernelFamily::ula;
    p.params = [=](double h) { return contraction_params_ula(d, m, L, h); };
    const double kappa = L / m;
    p.step_for_epsilon = [=](double eps) { return 100.0 / (99.0 * 99.0) / (kappa * kappa * double(d)) * eps * eps; };
    p.theta = m;
    p.k1 = 1;
    p.phi = 1.65 * kappa * std::sqrt(double(d));
    p.k2 = 0.5;
    p.h0 = 2.0 / (L + m);
    p.Gamma = 1;
    return p;
}

inline ContractionProvider ula_provider(const Target& t) { return ula_provider(t.dim, t.m, t.L); }

inline ContractionProvider underdamped_provider(Eigen::Index d, double m, double L, double D) {
    ContractionProvider p;
    p.family = KernelFamily::underdamped;
    p.params = [=](double h) { return contraction_params_underdamped(d, m, L, h, D); };
    const double kappa = L / m;
    const double ek = underdamped_energy(d, m, D);
    p.step_for_epsilon = [=](double eps) { return eps / (1536.0 * kappa * std::sqrt(2 * ek / 5)); };
    p.theta = 1.0 / (2 * kappa);
    p.k1 = 1;
    p.phi = 16.0 * kappa * std::sqrt(2 * ek / 5);
    p.k2 = 1;
    p.h0 = 1;
    p.Gamma = 4;
    return p;
}

inline ContractionProvider underdamped_provider(const Target& t, double D) {
    return underdamped_provider(t.dim, t.m, t.L, D);
}

}  // namespace plmc
