#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "budget.hpp"
#include "ensemble.hpp"
#include "estimators.hpp"
#include "gaussian_oracle.hpp"
#include "kernels.hpp"
#include "rng.hpp"
#include "target.hpp"

namespace plmc {

// How the chain is advanced between stored states. For ULA on a Gaussian
// target, k kernel steps have a closed-form Gaussian law, so a jump draws the
// state after k steps directly from it. The ledger still counts k steps.
enum class AdvanceMode { automatic, step, exact_jump };

inline constexpr std::uint64_t jump_threshold_steps = 2'000'000;

inline const char* to_string(AdvanceMode m) {
    switch (m) {
    case AdvanceMode::automatic: return "automatic";
    case AdvanceMode::step: return "step";
    case AdvanceMode::exact_jump: return "exact-gaussian-jump";
    }
    return "?";
}

namespace detail {

struct JumpSampler {
    UlaGaussianTransition tr;
    Mat burn_power, burn_root, thin_power, thin_root;

    JumpSampler(const Vec& mean, const Mat& precision, double h, std::uint64_t k_burn, std::uint64_t k_thin)
        : tr(mean, precision, h),
          burn_power(tr.power(k_burn)),
          burn_root(psd_sqrt(tr.noise_cov(k_burn))),
          thin_power(tr.power(k_thin)),
          thin_root(psd_sqrt(tr.noise_cov(k_thin))) {}

    Vec advance(const Vec& x, bool burn, RandomStream& rng) const {
        const Mat& A = burn ? burn_power : thin_power;
        const Mat& R = burn ? burn_root : thin_root;
        return tr.mean() + A * (x - tr.mean()) + R * rng.normal_vector(x.size());
    }
};

}  // namespace detail

// Thinned sampler: burn in for k_burn steps, then keep one state every
// k_thin steps until N states are stored. With a preconditioner the chain
// runs on y = M^{1/2} x and the stored states are in y.
inline Ensemble run_thinned(const KernelConfig& kc, const Target& t, const InitialLaw& mu0, const Budget& b,
                            RandomStream rng, AdvanceMode mode = AdvanceMode::automatic) {
    if (b.N < 1) throw Error(ErrorCode::invalid_argument, "budget N must be at least 1");
    if (!(kc.h > 0)) throw Error(ErrorCode::invalid_argument, "kernel step size must be positive");
    if (kc.family != b.family) throw Error(ErrorCode::invalid_argument, "kernel family differs from the budget's");
    if (!le_rel(kc.h, b.cp.h_max)) throw Error(ErrorCode::step_size_too_large, "kernel step exceeds the budget's h_max");
    const Eigen::Index d = t.dim;
    const bool pre = kc.preconditioner.has_value();
    if (pre && kc.family != KernelFamily::ula)
        throw Error(ErrorCode::invalid_argument, "preconditioning is implemented for ULA only");

    const std::uint64_t total = b.total_steps();
    const bool can_jump = kc.family == KernelFamily::ula && t.is_gaussian();
    bool jump = false;
    if (mode == AdvanceMode::exact_jump) {
        if (!can_jump) throw Error(ErrorCode::invalid_argument, "exact jumps need ULA on a Gaussian target");
        jump = true;
    } else if (mode == AdvanceMode::automatic) {
        jump = can_jump && total > jump_threshold_steps;
    }

    Ensemble e;
    e.states.resize(d, Eigen::Index(b.N));
    e.meta.seed = rng.seed();
    e.meta.stream = rng.stream_id();
    e.meta.kernel = std::string(to_string(kc.family)) + (pre ? "+preconditioned" : "");
    e.meta.advance_mode = jump ? to_string(AdvanceMode::exact_jump) : to_string(AdvanceMode::step);
    e.meta.budget = budget_record(b);
    if (kc.family == KernelFamily::underdamped)
        e.meta.notes.push_back("integrator: exact OU with frozen gradient, friction " + detail::fmt(kc.underdamped.friction) +
                               ", velocity scale " + detail::fmt(kc.underdamped.velocity_scale.value_or(1.0 / t.L)) +
                               "; positions stored, velocities discarded");
    FlopLedger& led = e.meta.ledger;
    led = FlopLedger(t.gradient_flops);

    const double per_step_other =
        (kc.family == KernelFamily::ula ? ula_flops_per_coord : underdamped_flops_per_coord) * double(d);
    const double per_step_matvec = pre ? 4.0 * double(d) * double(d) : 0.0;
    auto charge = [&](std::uint64_t steps) {
        led.add_steps(steps);
        led.add_gradient_calls(steps);
        led.add_other(per_step_other * double(steps));
        led.add_matvec(per_step_matvec * double(steps));
    };

    Vec x = mu0.draw(rng);
    if (x.size() != d) throw Error(ErrorCode::dimension_mismatch, "initial law dimension");
    if (pre) x = kc.preconditioner->sqrt_matrix() * x;

    std::uint64_t iter = 0;
    if (jump) {
        Vec mean = *t.analytic_mean;
        Mat prec = t.precision->matrix();
        if (pre) {
            mean = kc.preconditioner->sqrt_matrix() * mean;
            prec = whiten(*kc.preconditioner, prec);
        }
        const detail::JumpSampler js(mean, prec, kc.h, b.k_burn, b.k_thin);
        if (b.k_burn > 0) x = js.advance(x, true, rng);
        iter += b.k_burn;
        charge(b.k_burn);
        e.states.col(0) = x;
        e.meta.output_iterations.push_back(iter);
        for (std::uint64_t s = 1; s < b.N; ++s) {
            x = js.advance(x, false, rng);
            iter += b.k_thin;
            charge(b.k_thin);
            e.states.col(Eigen::Index(s)) = x;
            e.meta.output_iterations.push_back(iter);
        }
        if (!e.states.allFinite()) throw NumericalFailure("jump produced a non-finite state", iter, {});
        return e;
    }

    PhaseState ps{x, Vec::Zero(d)};
    auto run = [&](std::uint64_t k) {
        for (std::uint64_t i = 0; i < k; ++i, ++iter) {
            if (kc.family == KernelFamily::underdamped)
                ps = underdamped_step(ps, t, kc.h, rng, kc.underdamped, iter);
            else if (pre)
                ps.x = preconditioned_ula_step(ps.x, t, *kc.preconditioner, kc.h, rng, iter);
            else
                ps.x = ula_step(ps.x, t, kc.h, rng, iter);
        }
        charge(k);
    };
    run(b.k_burn);
    e.states.col(0) = ps.x;
    e.meta.output_iterations.push_back(iter);
    for (std::uint64_t s = 1; s < b.N; ++s) {
        run(b.k_thin);
        e.states.col(Eigen::Index(s)) = ps.x;
        e.meta.output_iterations.push_back(iter);
    }
    return e;
}

inline KernelConfig kernel_for(const Budget& b, std::optional<SpdMatrix> M = std::nullopt) {
    KernelConfig kc;
    kc.family = b.family;
    kc.h = b.h;
    kc.preconditioner = std::move(M);
    return kc;
}

// FLOPs charged for building a preconditioner from N learning samples.
inline double estimate_flops(const Target& t, PreconditionerKind kind, std::uint64_t N) {
    const double d = double(t.dim), n = double(N);
    const double accum = 2.0 * n * d * d;
    return kind == PreconditionerKind::covariance ? accum : accum + n * t.gradient_flops;
}

inline double factorization_flops(Eigen::Index d) { return std::pow(double(d), 3) / 3.0; }

struct PreconditionedOptions {
    AdvanceMode advance = AdvanceMode::automatic;
    std::optional<SpdMatrix> forced_preconditioner;  // skip estimation and use this M
};

struct PreconditionedResult {
    Ensemble output;         // states mapped back to the original coordinates
    Ensemble raw;            // phase-two chain states in y = M^{1/2} x
    Ensemble learning;       // phase-one samples
    SpdMatrix M;
    std::optional<Certificate> certificate;
    Budget learn_budget;
    Budget sample_budget;
    FlopLedger learn_ledger;
    FlopLedger sample_ledger;
    FlopLedger total_ledger() const {
        FlopLedger t = learn_ledger;
        t += sample_ledger;
        return t;
    }
};

inline PreconditionedResult run_preconditioned(const Target& t, const LearnSpec& spec, double eps, std::uint64_t N,
                                               const InitialLaw& mu0, RandomStream rng,
                                               const PreconditionedOptions& opt = {}) {
    const Eigen::Index d = t.dim;
    const Budget lb = plan_learning(t, spec, ula_provider(t), mu0);
    Ensemble z = run_thinned(kernel_for(lb), t, mu0, lb, rng.substream(1), opt.advance);
    FlopLedger learn = z.meta.ledger;

    std::optional<SpdMatrix> M;
    std::optional<Certificate> cert;
    if (opt.forced_preconditioner) {
        M = *opt.forced_preconditioner;
    } else if (spec.kind == PreconditionerKind::covariance) {
        const SpdMatrix s = empirical_covariance(z);
        learn.add_other(estimate_flops(t, spec.kind, lb.N));
        if (t.analytic_covariance) cert = certify(s, *t.analytic_covariance, spec.Delta);
        M = s.inverse();
    } else {
        FlopLedger est(t.gradient_flops);
        const SpdMatrix f = empirical_fisher(z, t, &est);
        learn += est;
        if (t.analytic_fisher) cert = certify(f, *t.analytic_fisher, spec.Delta);
        M = f;
    }
    learn.add_factorization(factorization_flops(d));

    const Budget sb = plan_ula_preconditioned(t, spec.kind, spec.Delta, eps, N, mu0, M);
    Ensemble raw = run_thinned(kernel_for(sb, M), t, mu0, sb, rng.substream(2), opt.advance);
    FlopLedger sample = raw.meta.ledger;
    Ensemble out = raw;
    out.states = M->inv_sqrt_matrix() * raw.states;
    sample.add_matvec(2.0 * double(d) * double(d) * double(N));
    out.meta.ledger = sample;
    out.meta.notes.push_back("outputs mapped back through M^{-1/2}");
    if (cert)
        out.meta.notes.push_back("certificate: relative error " + detail::fmt(cert->relative_error) +
                                 (cert->certified ? " <= " : " > ") + "Delta " + detail::fmt(cert->Delta));
    return {std::move(out), std::move(raw), std::move(z), *M, cert, lb, sb, learn, sample};
}

enum class Mode { unpre, cov, fisher };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::unpre: return "unpre";
    case Mode::cov: return "cov";
    case Mode::fisher: return "fisher";
    }
    return "?";
}

struct FlopForecast {
    Mode mode = Mode::unpre;
    KernelFamily family = KernelFamily::ula;
    double learn_total = 0;
    double sample_total = 0;
    double total = 0;
    std::optional<Budget> learn_budget;
    Budget sample_budget;
    std::string asymptotic;
};

// Exact FLOP total of the two-phase pipeline implied by its planned budgets.
inline FlopForecast total_flops_forecast(const Target& t, const LearnSpec& spec, double eps, std::uint64_t N,
                                         const InitialLaw& mu0) {
    FlopForecast f;
    f.mode = spec.kind == PreconditionerKind::covariance ? Mode::cov : Mode::fisher;
    const double d = double(t.dim);
    f.learn_budget = plan_learning(t, spec, ula_provider(t), mu0);
    f.learn_total = f.learn_budget->total_steps_real() * ula_step_flops(t) +
                    estimate_flops(t, spec.kind, f.learn_budget->N) + factorization_flops(t.dim);
    f.sample_budget = plan_ula_preconditioned(t, spec.kind, spec.Delta, eps, N, mu0);
    f.sample_total = f.sample_budget.total_steps_real() * preconditioned_step_flops(t) + 2.0 * d * d * double(N);
    f.asymptotic = f.mode == Mode::cov
                       ? "O~(delta^{-2} d^3 (d + G) kappa^3 max(delta^{-1}, K_cov^3) + (d^2 + G) kappa_pre^2 N eps^{-2})"
                       : "O~(delta^{-2} d^3 (d + G) kappa^4 K_Fisher^3 + (d^2 + G) kappa_pre^2 N eps^{-2})";
    f.total = f.learn_total + f.sample_total;
    return f;
}

inline FlopForecast total_flops_forecast(const Target& t, Mode mode, double eps, std::uint64_t N, double delta,
                                         double Delta, const InitialLaw& mu0,
                                         KernelFamily family = KernelFamily::ula, double C = 1.0) {
    if (mode != Mode::unpre) {
        if (family != KernelFamily::ula)
            throw Error(ErrorCode::invalid_argument, "preconditioned forecasts are implemented for ULA");
        LearnSpec spec;
        spec.delta = delta;
        spec.Delta = Delta;
        spec.kind = mode == Mode::cov ? PreconditionerKind::covariance : PreconditionerKind::fisher;
        spec.C_absolute = C;
        return total_flops_forecast(t, spec, eps, N, mu0);
    }
    FlopForecast f;
    f.mode = mode;
    f.family = family;
    if (family == KernelFamily::underdamped) {
        f.sample_budget = plan_underdamped_unpreconditioned(t, eps, N, mu0);
        f.sample_total = f.sample_budget.total_steps_real() * underdamped_step_flops(t);
        f.asymptotic = "O~((d + G) kappa^2 sqrt(E_K) N / eps)";
    } else {
        f.sample_budget = plan_ula_unpreconditioned(t, eps, N, mu0);
        f.sample_total = f.sample_budget.total_steps_real() * ula_step_flops(t);
        f.asymptotic = "O~(m^{-1} (d + G) kappa^2 N eps^{-2})";
    }
    f.total = f.sample_total;
    return f;
}

}  // namespace plmc
