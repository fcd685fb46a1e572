#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "kernels.hpp"
#include "target.hpp"

namespace plmc {

struct InequalityCheck {
    std::string name;
    double lhs = 0;
    std::string relation;  // "<", "<=", "info"
    double rhs = 0;
    bool holds = false;
};

struct Budget {
    KernelFamily family = KernelFamily::ula;
    double h = 0;
    std::uint64_t k_burn = 0;
    std::uint64_t k_thin = 1;
    std::uint64_t N = 1;
    double epsilon = 0;
    std::optional<double> delta;
    std::optional<double> Delta;
    ContractionParams cp;
    double trace_sigma = 0;
    double w2_init = 0;
    double k_burn_real = 0;
    double k_thin_real = 0;
    std::vector<InequalityCheck> checks;
    std::map<std::string, std::string> sources;  // field -> rule that produced it
    bool depends_on_C = false;
    std::vector<std::string> notes;

    // Kernel steps k_burn + (N - 1) k_thin; throws when they do not fit in 64 bits.
    std::uint64_t total_steps() const {
        std::uint64_t thin = 0, total = 0;
        if (__builtin_mul_overflow(N - 1, k_thin, &thin) || __builtin_add_overflow(k_burn, thin, &total))
            throw Error(ErrorCode::budget_overflow, "total kernel steps exceed the 64-bit range");
        return total;
    }
    double total_steps_real() const { return double(k_burn) + double(N - 1) * double(k_thin); }
    bool total_steps_fit() const {
        std::uint64_t thin = 0, total = 0;
        return !__builtin_mul_overflow(N - 1, k_thin, &thin) && !__builtin_add_overflow(k_burn, thin, &total);
    }
};

// Starting distribution of a chain: a point mass or a Gaussian, with an
// optional user bound on its W2 distance to the target.
struct InitialLaw {
    enum class Kind { point, gaussian } kind = Kind::point;
    Vec mean;
    Mat cov;
    std::optional<double> w2_bound;

    static InitialLaw point(const Vec& x) { return {Kind::point, x, Mat::Zero(x.size(), x.size()), std::nullopt}; }
    static InitialLaw gaussian(const Vec& mean, const Mat& cov) { return {Kind::gaussian, mean, cov, std::nullopt}; }
    static InitialLaw at_mode(const Target& t) {
        if (!t.mode) throw Error(ErrorCode::invalid_argument, "target mode unknown; supply an initial law");
        return point(*t.mode);
    }

    GaussianLaw law() const { return GaussianLaw(mean, cov); }

    Vec draw(RandomStream& rng) const {
        if (kind == Kind::point) return mean;
        return mean + psd_sqrt(cov) * rng.normal_vector(mean.size());
    }

    // Image under x -> A x.
    InitialLaw mapped(const Mat& A) const {
        InitialLaw out{kind, A * mean, symmetrize(A * cov * A.transpose()), std::nullopt};
        return out;
    }
};

inline double w2_initial(const Target& t, const InitialLaw& mu0) {
    if (mu0.w2_bound) return *mu0.w2_bound;
    if (mu0.mean.size() != t.dim) throw Error(ErrorCode::dimension_mismatch, "initial law dimension");
    if (mu0.kind == InitialLaw::Kind::point && t.analytic_covariance && t.analytic_mean)
        return w2_to_point(t, mu0.mean);
    if (t.is_gaussian()) return bures_w2(t.gaussian_law(), mu0.law());
    throw Error(ErrorCode::invalid_argument, "W2(pi, mu0) is not computable for this target; supply a bound");
}

namespace detail {

inline std::uint64_t ceil_count(double x, std::uint64_t floor_value) {
    if (std::isnan(x)) throw Error(ErrorCode::budget_overflow, "iteration bound is NaN");
    if (x > 9.0e18) throw Error(ErrorCode::budget_overflow, "iteration bound exceeds 64-bit range");
    const double c = std::ceil(x);
    if (c <= double(floor_value)) return floor_value;
    return std::uint64_t(c);
}

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline void add_check(Budget& b, std::string name, double lhs, const char* rel, double rhs, bool holds) {
    b.checks.push_back({std::move(name), lhs, rel, rhs, holds});
}

}  // namespace detail

// Burn-in and thinning counts that make the thinned chain sqrt(N) eps
// approximately IID for a (Gamma, gamma, b) contraction.
inline Budget plan_thinned(const ContractionParams& cp, double eps, std::uint64_t N, double trace_sigma, double w2_init) {
    if (N < 1) throw Error(ErrorCode::invalid_argument, "N must be at least 1");
    if (!(eps > 0)) throw Error(ErrorCode::invalid_argument, "eps must be positive");
    if (!(cp.Gamma >= 1) || !(cp.gamma > 0) || !(cp.b >= 0))
        throw Error(ErrorCode::invalid_argument, "contraction parameters need Gamma >= 1, gamma > 0, b >= 0");
    if (!(trace_sigma > 0) || !(w2_init >= 0)) throw Error(ErrorCode::invalid_argument, "trace and W2 inputs");
    const double G = cp.Gamma, b = cp.b;
    const double bias = 3 * G * G * b;
    const double upper = G * G * (3 * trace_sigma + 4 * b * b) + 2 * b * b;

    Budget out;
    out.epsilon = eps;
    out.N = N;
    out.cp = cp;
    out.h = cp.h;
    out.trace_sigma = trace_sigma;
    out.w2_init = w2_init;
    const bool lower_ok = lt_rel(bias, eps);
    detail::add_check(out, "3 Gamma^2 b < eps", bias, "<", eps, lower_ok);
    if (!lower_ok) {
        std::ostringstream os;
        os << "eps = " << eps << " is not above 3 Gamma^2 b = " << bias
           << "; eps must lie in (3 Gamma^2 b, sqrt(3 tr Sigma)] -- decrease h or increase eps";
        throw Error(ErrorCode::bias_dominates, os.str());
    }
    const bool upper_ok = le_rel(eps * eps, upper);
    detail::add_check(out, "eps^2 <= Gamma^2 (3 tr Sigma + 4 b^2) + 2 b^2", eps * eps, "<=", upper, upper_ok);
    if (!upper_ok) {
        std::ostringstream os;
        os << "eps^2 = " << eps * eps << " exceeds Gamma^2 (3 tr Sigma + 4 b^2) + 2 b^2 = " << upper;
        throw Error(ErrorCode::epsilon_too_large, os.str());
    }
    out.k_burn_real = w2_init > 0 ? std::log(3 * G * G * G * w2_init / (eps - bias)) / cp.gamma : 0.0;
    out.k_thin_real = std::log(2 * G * G * (3 * trace_sigma + 4 * b * b) / (eps * eps - 2 * b * b)) / (2 * cp.gamma);
    out.k_burn = detail::ceil_count(out.k_burn_real, 0);
    out.k_thin = detail::ceil_count(out.k_thin_real, 1);
    out.sources["k_burn"] = "ceil((1/gamma) log(3 Gamma^3 W2(pi,mu0) / (eps - 3 Gamma^2 b)))";
    out.sources["k_thin"] = "max(1, ceil((1/(2 gamma)) log(2 Gamma^2 (3 tr Sigma + 4 b^2) / (eps^2 - 2 b^2))))";
    return out;
}

inline void assert_step_valid(const Budget& b) {
    if (!(b.h > 0) || !le_rel(b.h, b.cp.h_max))
        throw Error(ErrorCode::step_size_too_large, "budget step size violates its contraction parametrization");
}

inline Budget plan_ula_unpreconditioned(const Target& t, double eps, std::uint64_t N, const InitialLaw& mu0) {
    const double d = double(t.dim), kappa = t.kappa();
    const double bound_step = 10 * kappa * std::sqrt(d) / std::sqrt(t.L);
    const double bound_trace = std::sqrt(3 * t.trace_sigma_lower());
    if (!(eps > 0) || !le_rel(eps, bound_step) || !le_rel(eps, bound_trace)) {
        std::ostringstream os;
        os << "eps = " << eps << " must satisfy eps <= 10 kappa sqrt(d)/sqrt(L) = " << bound_step
           << " and eps <= sqrt(3 tr Sigma) = " << bound_trace;
        throw Error(ErrorCode::epsilon_out_of_range, os.str());
    }
    const double h = eps * eps / (100 * d * kappa * kappa);
    const auto cp = contraction_params_ula(t, h);
    Budget b = plan_thinned(cp, eps, N, t.trace_sigma_upper(), w2_initial(t, mu0));
    b.family = KernelFamily::ula;
    b.checks.insert(b.checks.begin(), {"eps <= 10 kappa sqrt(d)/sqrt(L)", eps, "<=", bound_step, true});
    b.checks.insert(b.checks.begin() + 1, {"eps <= sqrt(3 tr Sigma)", eps, "<=", bound_trace, true});
    b.sources["h"] = "eps^2 / (100 d kappa^2)";
    assert_step_valid(b);
    return b;
}

struct LearnSpec {
    double delta = 0.25;
    double Delta = 0.5;
    PreconditionerKind kind = PreconditionerKind::covariance;
    std::optional<double> beta_lower;   // lower bound on lambda_min(Sigma); default 1/L
    std::optional<double> alpha_lower;  // lower bound on lambda_min(Fisher); default m
    std::optional<double> K_constant;   // sub-Gaussian constant; default from the log-concavity bound
    double C_absolute = 1.0;
    std::optional<double> step_size_override;
};

// Lower bound on the strong convexity constant after whitening by the exact covariance.
inline double whitened_covariance_m(const Target& t) {
    if (t.analytic_covariance && (t.precision || t.hessian_witness))
        return preconditioned_constants(t, t.analytic_covariance->inverse()).m_M;
    return 1.0 / t.kappa();
}

// Upper bound on the smoothness constant after preconditioning by the exact Fisher matrix.
inline double fisher_preconditioned_L(const Target& t) {
    if (t.analytic_fisher && (t.precision || t.hessian_witness))
        return preconditioned_constants(t, *t.analytic_fisher).L_M;
    return t.kappa();
}

inline double default_K(const Target& t, PreconditionerKind kind) {
    if (kind == PreconditionerKind::covariance) return std::sqrt(8.0 / (3.0 * whitened_covariance_m(t)));
    return std::sqrt(8.0 / 3.0 * fisher_preconditioned_L(t));
}

inline Budget plan_learning(const Target& t, const LearnSpec& spec, const ContractionProvider& provider,
                            const InitialLaw& mu0) {
    const double delta = spec.delta, Delta = spec.Delta;
    if (!(delta >= 0 && delta < 1) || !(Delta >= 0 && Delta < 1))
        throw Error(ErrorCode::invalid_tolerance, "delta and Delta must lie in (0, 1)");
    if (!(spec.C_absolute > 0)) throw Error(ErrorCode::invalid_argument, "C must be positive");
    const double d = double(t.dim);
    const double dD = delta * Delta;
    const bool cov = spec.kind == PreconditionerKind::covariance;
    const double beta = spec.beta_lower.value_or(1.0 / t.L);
    const double alpha = spec.alpha_lower.value_or(t.m);
    if (!(beta > 0) || !(alpha > 0)) throw Error(ErrorCode::invalid_argument, "beta/alpha lower bounds must be positive");

    const double eps = cov ? std::sqrt(2.0) / 120.0 * dD / std::sqrt(d) * std::sqrt(beta)
                           : 3.0 / 8.0 * dD / (t.L * std::sqrt(d)) * std::sqrt(alpha);
    // With delta * Delta = 0 the learning tolerance vanishes and so does the
    // step size; report it through the admissibility interval instead.
    double h = spec.step_size_override.value_or(eps > 0 ? provider.step_for_epsilon(eps) : 0.0);
    ContractionParams cp;
    if (h > 0) cp = provider.params(h);
    const double G = cp.Gamma;
    const double tr_lo = t.trace_sigma_lower();
    double lower, upper;
    std::string lname, uname;
    if (cov) {
        lower = 360 * G * G * cp.b * std::sqrt(d) / std::sqrt(beta);
        upper = 120 * G * std::sqrt(tr_lo * d) / std::sqrt(beta);
        lname = "360 Gamma^2 b sqrt(d) beta^{-1/2} < delta Delta";
        uname = "delta Delta <= 120 Gamma sqrt(tr Sigma d) beta^{-1/2}";
    } else {
        lower = 8 * G * G * cp.b * t.L * std::sqrt(d) / std::sqrt(alpha);
        upper = 8.0 / 3.0 * G * t.L * std::sqrt(3 * tr_lo * d) / std::sqrt(alpha);
        lname = "8 Gamma^2 b L sqrt(d) alpha^{-1/2} < delta Delta";
        uname = "delta Delta <= (8/3) Gamma L sqrt(3 tr Sigma d) alpha^{-1/2}";
    }
    const bool lo_ok = dD > 0 && h > 0 && lt_rel(lower, dD);
    const bool up_ok = le_rel(dD, upper);
    if (!lo_ok || !up_ok) {
        std::ostringstream os;
        os << "delta*Delta = " << dD << " must lie in (" << lower << ", " << upper << "] ["
           << (lo_ok ? uname : lname) << "]";
        throw Error(ErrorCode::inadmissible_tolerance, os.str());
    }

    const double K = spec.K_constant.value_or(default_K(t, spec.kind));
    const double CK2 = spec.C_absolute * K * K;
    const double conc = 2 * CK2 * (d + std::log(4 / delta)) * std::sqrt(CK2 + 2 * Delta) / Delta;
    const double n_real = cov ? std::max(5 * d / dD, conc) : conc;
    const std::uint64_t N = detail::ceil_count(n_real, 1);

    Budget b = plan_thinned(cp, eps, N, t.trace_sigma_upper(), w2_initial(t, mu0));
    b.family = provider.family;
    b.delta = delta;
    b.Delta = Delta;
    b.depends_on_C = true;
    b.checks.insert(b.checks.begin(), {lname, lower, "<", dD, true});
    b.checks.insert(b.checks.begin() + 1, {uname, dD, "<=", upper, true});
    b.sources["epsilon"] = cov ? "(sqrt(2)/120) (delta Delta / sqrt(d)) sqrt(beta)" : "(3/8) (delta Delta / (L sqrt(d))) sqrt(alpha)";
    b.sources["h"] = spec.step_size_override ? "user override" : "solves 3 Gamma^2 b(h) = eps/2";
    b.sources["N"] = cov ? "max(5d/(delta Delta), 2 C K^2 (d + log(4/delta)) sqrt(C K^2 + 2 Delta)/Delta)"
                         : "2 C K^2 (d + log(4/delta)) sqrt(C K^2 + 2 Delta)/Delta";
    b.sources["K"] = detail::fmt(K) + (spec.K_constant ? " (user)" : " (sub-Gaussian bound for log-concave laws)");
    b.sources["C"] = detail::fmt(spec.C_absolute);
    b.notes.push_back("learning sample size depends on the unspecified absolute constant C");
    assert_step_valid(b);
    return b;
}

// Constants of the preconditioner an exact learning phase would target.
inline PreconditionedConstants reference_constants(const Target& t, PreconditionerKind kind) {
    const auto& ref = kind == PreconditionerKind::covariance ? t.analytic_covariance : t.analytic_fisher;
    if (!ref) throw Error(ErrorCode::unsupported_target, "target lacks the reference matrix for this preconditioner kind");
    return preconditioned_constants(t, kind == PreconditionerKind::covariance ? ref->inverse() : *ref);
}

// Phase-two schedule for ULA preconditioned by an estimate within relative
// error Delta of the reference. The accuracy eps refers to the preconditioned
// coordinates y = M^{1/2} x.
inline Budget plan_ula_preconditioned(const Target& t, PreconditionerKind kind, double Delta, double eps,
                                      std::uint64_t N, const InitialLaw& mu0,
                                      const std::optional<SpdMatrix>& M_hat = std::nullopt) {
    if (!(Delta >= 0) || !(Delta < 1)) throw Error(ErrorCode::invalid_tolerance, "Delta must lie in [0, 1)");
    const double d = double(t.dim);
    const auto ref = reference_constants(t, kind);
    const auto br = estimated_preconditioner_bracket(Delta, ref, kind);
    const bool cov = kind == PreconditionerKind::covariance;

    // Step-size admissibility: kappa of the estimate is at least
    // kappa_ref (1-Delta)/(1+Delta) and its L at most the bracket L.
    const double bound_step = 10 * ref.kappa_M * (1 - Delta) / (1 + Delta) * std::sqrt(d) / std::sqrt(br.L_M);
    const double statement_step = 2 * ref.kappa_M * std::sqrt(d) / std::sqrt(ref.L_M);
    const double trace_lo = cov ? d / (1 + Delta) : (1 - Delta) * d;
    const double bound_trace = std::sqrt(3 * trace_lo);
    if (!(eps > 0) || !le_rel(eps, bound_step) || !le_rel(eps, bound_trace)) {
        std::ostringstream os;
        os << "eps = " << eps << " must satisfy eps <= " << bound_step
           << " (10 kappa sqrt(d)/sqrt(L) with bracketed constants) and eps <= sqrt(3 tr) = " << bound_trace;
        throw Error(ErrorCode::epsilon_out_of_range, os.str());
    }

    const double h = eps * eps / (100 * d * br.kappa_M * br.kappa_M);
    const auto cp = contraction_params_ula(t.dim, br.m_M, br.L_M, h);

    double trace_up, w2;
    const double w2_orig = w2_initial(t, mu0);
    if (M_hat && t.analytic_covariance) {
        trace_up = whiten(M_hat->inverse(), t.analytic_covariance->matrix()).trace();
    } else if (cov) {
        trace_up = d / (1 - Delta);
    } else {
        const Mat fs = t.analytic_fisher->sqrt_matrix();
        const double ref_trace = t.analytic_covariance
                                     ? symmetrize(fs * t.analytic_covariance->matrix() * fs).trace()
                                     : d * t.kappa();
        trace_up = (1 + Delta) * ref_trace;
    }
    if (M_hat) {
        if (t.analytic_covariance && t.analytic_mean && mu0.kind == InitialLaw::Kind::point && !mu0.w2_bound) {
            const Mat& s = M_hat->sqrt_matrix();
            const Vec y0 = s * mu0.mean, my = s * *t.analytic_mean;
            w2 = std::sqrt(trace_up + (y0 - my).squaredNorm());
        } else {
            w2 = std::sqrt(M_hat->lambda_max()) * w2_orig;
        }
    } else {
        const auto& refm = cov ? t.analytic_covariance->inverse() : *t.analytic_fisher;
        const double norm_bound = cov ? refm.lambda_max() / (1 - Delta) : refm.lambda_max() * (1 + Delta);
        w2 = std::sqrt(norm_bound) * w2_orig;
    }

    Budget b = plan_thinned(cp, eps, N, trace_up, w2);
    b.family = KernelFamily::ula;
    b.Delta = Delta;
    b.checks.insert(b.checks.begin(), {"eps <= 10 kappa_ref ((1-Delta)/(1+Delta)) sqrt(d)/sqrt((1+Delta) L_ref)", eps, "<=", bound_step, true});
    b.checks.insert(b.checks.begin() + 1, {"eps <= sqrt(3 tr Sigma_pre)", eps, "<=", bound_trace, true});
    b.checks.push_back({"eps <= 2 kappa_ref sqrt(d)/sqrt(L_ref) (statement form, informational)", eps, "info",
                        statement_step, eps <= statement_step});
    b.sources["h"] = "eps^2 / (100 d kappa_bracket^2)";
    b.sources["bracket"] = "m=" + detail::fmt(br.m_M) + " L=" + detail::fmt(br.L_M) + " kappa=" + detail::fmt(br.kappa_M);
    b.sources["space"] = "preconditioned coordinates y = M^{1/2} x";
    assert_step_valid(b);
    return b;
}

// Schedule for a kernel with gamma = theta h^k1 and b = phi h^k2 valid for h <= h0.
inline Budget plan_generalized(double theta, double k1, double phi, double k2, double h0, double eps, std::uint64_t N,
                               double trace_sigma, double w2_init, double Gamma) {
    if (!(theta > 0) || !(k1 > 0) || !(phi > 0) || !(k2 > 0) || !(h0 > 0) || !(Gamma >= 1))
        throw Error(ErrorCode::invalid_argument, "generalized planner coefficients must be positive, Gamma >= 1");
    if (N < 1) throw Error(ErrorCode::invalid_argument, "N must be at least 1");
    const double G2 = Gamma * Gamma;
    const double bound_step = 6 * G2 * phi * std::pow(h0, k2);
    const double bound_trace = std::sqrt(3 * trace_sigma);
    if (!(eps > 0) || !le_rel(eps, bound_step) || !le_rel(eps, bound_trace)) {
        std::ostringstream os;
        os << "eps = " << eps << " must satisfy eps <= 6 Gamma^2 phi h0^k2 = " << bound_step
           << " and eps <= sqrt(3 tr Sigma) = " << bound_trace;
        throw Error(ErrorCode::epsilon_out_of_range, os.str());
    }
    const double h = std::min(h0, std::pow(eps / (6 * G2 * phi), 1.0 / k2));
    const double pre = std::pow(6 * G2 * phi / eps, k1 / k2) / theta;

    Budget b;
    b.epsilon = eps;
    b.N = N;
    b.h = h;
    b.cp = {Gamma, theta * std::pow(h, k1), phi * std::pow(h, k2), h0, h, "generalized (theta, k1, phi, k2)"};
    b.trace_sigma = trace_sigma;
    b.w2_init = w2_init;
    b.k_burn_real = w2_init > 0 ? pre * std::log(6 * G2 * Gamma * w2_init / eps) : 0.0;
    const double G4 = G2 * G2;
    b.k_thin_real = pre / 2 * std::log(4 * G4 * G2 * (27 * G4 * trace_sigma + eps * eps) / ((18 * G4 - 1) * eps * eps));
    b.k_burn = detail::ceil_count(b.k_burn_real, 0);
    b.k_thin = detail::ceil_count(b.k_thin_real, 1);
    b.checks.push_back({"eps <= 6 Gamma^2 phi h0^k2", eps, "<=", bound_step, true});
    b.checks.push_back({"eps <= sqrt(3 tr Sigma)", eps, "<=", bound_trace, true});
    b.sources["h"] = "(eps / (6 Gamma^2 phi))^{1/k2}";
    b.sources["k_burn"] = "(1/theta) (6 Gamma^2 phi/eps)^{k1/k2} log(6 Gamma^3 W2/eps)";
    b.sources["k_thin"] = "(1/(2 theta)) (6 Gamma^2 phi/eps)^{k1/k2} log(4 Gamma^6 (27 Gamma^4 tr + eps^2)/((18 Gamma^4 - 1) eps^2))";
    return b;
}

inline Budget plan_underdamped_unpreconditioned(const Target& t, double eps, std::uint64_t N, const InitialLaw& mu0,
                                                std::optional<double> D = std::nullopt) {
    double dist = 0;
    if (D) {
        dist = *D;
    } else if (t.mode) {
        dist = (mu0.mean - *t.mode).norm() + (mu0.kind == InitialLaw::Kind::gaussian ? std::sqrt(std::max(0.0, mu0.cov.trace())) : 0.0);
    }
    const auto p = underdamped_provider(t, dist);
    Budget b = plan_generalized(p.theta, p.k1, p.phi, p.k2, p.h0, eps, N, t.trace_sigma_upper(), w2_initial(t, mu0), p.Gamma);
    b.family = KernelFamily::underdamped;
    b.cp = p.params(b.h);
    b.sources["E_K"] = detail::fmt(underdamped_energy(t.dim, t.m, dist)) + " = 26 (d/m + D^2)";
    assert_step_valid(b);
    return b;
}

// Human-readable report.
inline void write_budget_report(std::ostream& os, const Budget& b) {
    os << "kernel       " << to_string(b.family) << "\n";
    os << "h            " << detail::fmt(b.h) << "\n";
    os << "k_burn       " << b.k_burn << "\n";
    os << "k_thin       " << b.k_thin << "\n";
    os << "N            " << b.N << "\n";
    os << "eps          " << detail::fmt(b.epsilon) << "\n";
    if (b.delta) os << "delta        " << detail::fmt(*b.delta) << "\n";
    if (b.Delta) os << "Delta        " << detail::fmt(*b.Delta) << "\n";
    if (b.total_steps_fit()) os << "total steps  " << b.total_steps() << "\n";
    else os << "total steps  " << detail::fmt(b.total_steps_real()) << " (beyond 64-bit counters)\n";
    os << "contraction  Gamma=" << detail::fmt(b.cp.Gamma) << " gamma=" << detail::fmt(b.cp.gamma)
       << " b=" << detail::fmt(b.cp.b) << " h_max=" << detail::fmt(b.cp.h_max) << "\n";
    os << "checks:\n";
    for (const auto& c : b.checks)
        os << "  [" << (c.relation == "info" ? "info" : (c.holds ? "ok" : "FAIL")) << "] " << c.name << ": "
           << detail::fmt(c.lhs) << " " << c.relation << " " << detail::fmt(c.rhs) << "\n";
    for (const auto& [k, v] : b.sources) os << "  source " << k << ": " << v << "\n";
    if (b.depends_on_C) os << "  note: depends on the absolute constant C\n";
    for (const auto& n : b.notes) os << "  note: " << n << "\n";
}

// Machine-readable flat key = value record.
inline std::map<std::string, std::string> budget_record(const Budget& b) {
    std::map<std::string, std::string> r;
    auto g17 = [](double x) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    r["budget.kernel"] = to_string(b.family);
    r["budget.h"] = g17(b.h);
    r["budget.k_burn"] = std::to_string(b.k_burn);
    r["budget.k_thin"] = std::to_string(b.k_thin);
    r["budget.N"] = std::to_string(b.N);
    r["budget.eps"] = g17(b.epsilon);
    r["budget.total_steps"] = b.total_steps_fit() ? std::to_string(b.total_steps()) : g17(b.total_steps_real());
    r["budget.Gamma"] = g17(b.cp.Gamma);
    r["budget.gamma"] = g17(b.cp.gamma);
    r["budget.b"] = g17(b.cp.b);
    r["budget.h_max"] = g17(b.cp.h_max);
    r["budget.trace_sigma"] = g17(b.trace_sigma);
    r["budget.w2_init"] = g17(b.w2_init);
    r["budget.depends_on_C"] = b.depends_on_C ? "true" : "false";
    if (b.delta) r["budget.delta"] = g17(*b.delta);
    if (b.Delta) r["budget.Delta"] = g17(*b.Delta);
    return r;
}

}  // namespace plmc
