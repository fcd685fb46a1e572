// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "plmc/experiments.hpp"
#include "plmc/io.hpp"
#include "plmc/sampler.hpp"
#include "plmc/target_spec.hpp"

using namespace plmc;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Mat random_spd_matrix(Eigen::Index d, double kappa, RandomStream& rng) {
    const Mat q = random_orthogonal(d, rng);
    Vec lam(d);
    for (Eigen::Index i = 0; i < d; ++i) lam(i) = std::pow(kappa, rng.uniform());
    if (d > 1) {
        lam(0) = 1;
        lam(d - 1) = kappa;
    }
    return symmetrize(q * lam.asDiagonal() * q.transpose());
}

Target gaussian(int d, double kappa, std::uint64_t rotate, double m = 1.0) {
    TargetSpec s;
    s.d = d;
    s.kappa = kappa;
    s.m = m;
    s.rotate = rotate;
    return build_target(s);
}

// 1. Planner budgets are sqrt(N) eps approximately IID under the exact joint law.
Outcome aiid_soundness() {
    int cases = 0, violations = 0;
    double worst_ratio = 0;
    for (int d : {1, 2, 3})
        for (double kappa : {1.0, 4.0, 25.0}) {
            const Target t = gaussian(d, kappa, d > 1 ? std::uint64_t(10 * d + kappa) : 0);
            const InitialLaw mu0 = InitialLaw::point(*t.mode + Vec::Constant(d, 1.0));
            const double eps_max = std::min(10 * t.kappa() * std::sqrt(double(d)) / std::sqrt(t.L),
                                            std::sqrt(3 * t.trace_sigma_lower()));
            for (double frac : {0.02, 0.25, 1.0})
                for (std::uint64_t N : {5u, 20u, 50u}) {
                    const double eps = frac * eps_max;
                    const Budget b = plan_ula_unpreconditioned(t, eps, N, mu0);
                    const double w2 = joint_w2(exact_joint_law(t.gaussian_law(), b, mu0.law()));
                    const double bound = std::sqrt(double(N)) * eps;
                    ++cases;
                    worst_ratio = std::max(worst_ratio, w2 / bound);
                    if (w2 > bound + 1e-8) ++violations;
                }
        }
    std::ostringstream os;
    os << cases << " cases, " << violations << " violations, max W2/(sqrt(N) eps) = " << worst_ratio;
    return {violations == 0, os.str()};
}

// 2. ULA satisfies the contraction inequality against the exact marginal law.
Outcome contraction_literal() {
    RandomStream rng(2002);
    int violations = 0;
    double worst_slack = 1e300;
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::Index d = 1 + rep % 4;
        const double kappa = 1 + 29 * rng.uniform();
        const SpdMatrix cov(random_spd_matrix(d, kappa, rng) / (1 + 2 * rng.uniform()));
        const Target t = make_gaussian_target(rng.normal_vector(d), cov);
        const double h = (2.0 / (t.L + t.m)) * (0.01 + 0.99 * rng.uniform());
        const auto cp = contraction_params_ula(t, h);
        const std::uint64_t k = 1 + std::uint64_t(300 * rng.uniform());
        // Start either at a point or from a Gaussian.
        const GaussianLaw start = rep % 2 == 0
                                      ? GaussianLaw::point_mass(*t.mode + 3 * rng.normal_vector(d))
                                      : GaussianLaw(rng.normal_vector(d), random_spd_matrix(d, 5, rng));
        const GaussianLaw pi = t.gaussian_law();
        const double lhs = bures_w2(pi, exact_marginal_law(pi, h, k, start));
        const double rhs = cp.Gamma * std::exp(-cp.gamma * double(k)) * bures_w2(pi, start) + cp.b;
        worst_slack = std::min(worst_slack, rhs - lhs);
        if (lhs > rhs + 1e-12) ++violations;
    }
    std::ostringstream os;
    os << "50 tuples, " << violations << " violations, min slack " << worst_slack;
    return {violations == 0, os.str()};
}

// 3. Learning-phase certification frequency for both preconditioners.
Outcome learning_frequency() {
    bool pass = true;
    std::ostringstream os;
    for (Mode mode : {Mode::cov, Mode::fisher}) {
        ExperimentSpec spec;
        spec.target = parse_target_spec("gaussian:d=2,kappa=4");
        spec.mode = mode;
        spec.delta = 0.25;
        spec.Delta = 0.5;
        spec.C = 1;
        spec.repetitions = 200;
        spec.seed = 31;
        spec.threads = resolve_threads(0);
        const auto rep = run_thm5_frequency(spec);
        pass = pass && rep.pass;
        os << rep.kind << " " << rep.certified << "/" << rep.repetitions << " (99% CI upper "
           << rep.interval.upper << " vs 0.75); ";
    }
    return {pass, os.str()};
}

// 4. Preconditioned-constant brackets and condition-number scale invariance.
Outcome bracket_properties() {
    RandomStream rng(4004);
    int ostrowski_bad = 0, bracket_bad = 0, scale_bad = 0;
    const double tol = 1e-9;
    for (int rep = 0; rep < 1000; ++rep) {
        const Eigen::Index d = 2 + rep % 7;
        const Target t = make_gaussian_target(Vec::Zero(d), SpdMatrix(random_spd_matrix(d, 50, rng)));
        const SpdMatrix m1(random_spd_matrix(d, 20, rng)), m2(random_spd_matrix(d, 20, rng));
        const auto e1 = preconditioned_constants(t, m1), e2 = preconditioned_constants(t, m2);
        const auto [lo, hi] = ostrowski_bounds(m1, m2, e2);
        if (lo > e1.m_M * (1 + tol) || hi < e1.L_M * (1 - tol) ||
            condition_number_transfer(m1, m2, e2.kappa_M) < e1.kappa_M * (1 - tol))
            ++ostrowski_bad;
    }
    for (int rep = 0; rep < 1000; ++rep) {
        const Eigen::Index d = 2 + rep % 7;
        const double Delta = 0.95 * rng.uniform();
        const SpdMatrix cov(random_spd_matrix(d, 40, rng));
        const Target t = make_gaussian_target(Vec::Zero(d), cov);
        const Mat q = random_orthogonal(d, rng);
        Vec f(d);
        for (Eigen::Index i = 0; i < d; ++i) f(i) = 1 + Delta * (2 * rng.uniform() - 1);
        const Mat pert = q * f.asDiagonal() * q.transpose();
        const SpdMatrix cov_hat(symmetrize(cov.sqrt_matrix() * pert * cov.sqrt_matrix()));
        const auto br = estimated_preconditioner_bracket(Delta, preconditioned_constants(t, cov.inverse()));
        const auto ex = preconditioned_constants(t, cov_hat.inverse());
        const SpdMatrix& fisher = *t.analytic_fisher;
        const SpdMatrix fisher_hat(symmetrize(fisher.sqrt_matrix() * pert * fisher.sqrt_matrix()));
        const auto brf =
            estimated_preconditioner_bracket(Delta, preconditioned_constants(t, fisher), PreconditionerKind::fisher);
        const auto exf = preconditioned_constants(t, fisher_hat);
        if (ex.m_M < br.m_M * (1 - tol) || ex.L_M > br.L_M * (1 + tol) || ex.kappa_M > br.kappa_M * (1 + tol) ||
            exf.m_M < brf.m_M * (1 - tol) || exf.L_M > brf.L_M * (1 + tol) || exf.kappa_M > brf.kappa_M * (1 + tol))
            ++bracket_bad;
    }
    for (int rep = 0; rep < 1000; ++rep) {
        const Eigen::Index d = 2 + rep % 7;
        const SpdMatrix m2(random_spd_matrix(d, 100, rng));
        const double c = std::exp(6 * (rng.uniform() - 0.5));
        const double kappa2 = 1 + 99 * rng.uniform();
        if (std::abs(condition_number_transfer(m2.scaled(c), m2, kappa2) - kappa2) > 1e-8 * kappa2) ++scale_bad;
    }
    std::ostringstream os;
    os << "violations: ostrowski " << ostrowski_bad << "/1000, estimate brackets " << bracket_bad
       << "/1000, scale invariance " << scale_bad << "/1000";
    return {ostrowski_bad + bracket_bad + scale_bad == 0, os.str()};
}

// 5. Consequence bounds on planner-certified chains, checked on an exact coupling.
Outcome consequence_bounds() {
    RandomStream rng(5005);
    int failures = 0;
    double worst_z = -1e300;
    std::string worst_name;
    for (int rep = 0; rep < 20; ++rep) {
        const SpdMatrix cov(random_spd_matrix(2, 1 + 24 * rng.uniform(), rng));
        const Target t = make_gaussian_target(rng.normal_vector(2), cov);
        const InitialLaw mu0 = InitialLaw::point(*t.mode + 2 * rng.normal_vector(2));
        const double eps_max = std::min(10 * t.kappa() * std::sqrt(2.0) / std::sqrt(t.L), std::sqrt(3 * t.trace_sigma_lower()));
        const double eps = eps_max * (0.2 + 0.8 * rng.uniform());
        const Budget b = plan_ula_unpreconditioned(t, eps, 10, mu0);
        const ChainLaw chain = exact_joint_law(t.gaussian_law(), b, mu0.law());
        Mat B(1, 2);
        B << rng.normal(), rng.normal();
        Vec c(1);
        c << rng.normal();
        const auto res = aiid_consequence_checks(chain, t.gaussian_law(), eps, 100000, rng.substream(rep), {{B, c}}, 3.0);
        if (res.rows.size() != 5) ++failures;
        for (const auto& r : res.rows) {
            if (!r.pass) ++failures;
            const double z = r.se > 0 ? (r.lhs - r.rhs) / r.se : (r.lhs <= r.rhs ? -1e300 : 1e300);
            if (z > worst_z) {
                worst_z = z;
                worst_name = r.name;
            }
        }
    }
    std::ostringstream os;
    os << "20 replications x 5 bounds, " << failures << " failures; closest: " << worst_name << " with margin "
       << -worst_z << " standard errors below the bound";
    return {failures == 0, os.str()};
}

// 6. Exponent fits of planned totals.
Outcome complexity_scaling() {
    auto total = [](const Target& t, double eps, KernelFamily fam) {
        return total_flops_forecast(t, Mode::unpre, eps, 10, 0.25, 0.5, InitialLaw::at_mode(t), fam).total;
    };
    auto fits = [&](int d, double m, double& k_exp, double& e_exp, double& u_exp) {
        std::vector<double> ks{10, 30, 100}, inv_eps{2.5, 5, 10}, yk, ye, yu;
        for (double k : ks) yk.push_back(total(gaussian(d, k, 0, m), 0.1, KernelFamily::ula));
        const Target t = gaussian(d, 30, 0, m);
        for (double ie : inv_eps) {
            ye.push_back(total(t, 1 / ie, KernelFamily::ula));
            yu.push_back(total(t, 1 / ie, KernelFamily::underdamped));
        }
        k_exp = loglog_slope(ks, yk);
        e_exp = loglog_slope(inv_eps, ye);
        u_exp = loglog_slope(inv_eps, yu);
    };
    double k, e, u;
    fits(20, 0.01, k, e, u);
    const bool pass = std::abs(k - 2) <= 0.2 && std::abs(e - 2) <= 0.2 && std::abs(u - 1) <= 0.2;
    double k2, e2, u2;
    fits(2, 1.0, k2, e2, u2);
    std::ostringstream os;
    os << "d=20, m=0.01: kappa " << k << ", 1/eps " << e << ", underdamped 1/eps " << u
       << " | informational d=2, m=1: kappa " << k2 << ", 1/eps " << e2 << ", underdamped 1/eps " << u2;
    return {pass, os.str()};
}

// 7. Existence of an amortization crossover and the two-term ledger split.
Outcome amortization_crossover() {
    ExperimentSpec spec;
    spec.target = parse_target_spec("gaussian:d=20,kappa=100,m=1");
    spec.eps = 5e-4;
    std::vector<std::uint64_t> grid;
    for (int p = 4; p <= 20; ++p) grid.push_back(std::uint64_t(1) << p);
    const auto rep = run_complexity_comparison(spec, grid);
    const Target t = build_target(spec.target);
    bool split_ok = std::abs(t.gradient_flops - 2.0 * 20 * 20) < 1e-9;
    const double learn0 = rep.rows.front().cov_learn;
    for (const auto& r : rep.rows) {
        split_ok = split_ok && r.cov_learn == learn0;
        split_ok = split_ok && std::abs(r.cov_total - (r.cov_learn + r.cov_sample)) <= 1e-12 * r.cov_total;
        split_ok = split_ok && std::abs(r.fisher_total - (r.fisher_learn + r.fisher_sample)) <= 1e-12 * r.fisher_total;
    }
    // The sampling term grows linearly in N up to the log factor of the burn-in.
    std::vector<double> ns, samples;
    for (const auto& r : rep.rows) ns.push_back(double(r.N)), samples.push_back(r.cov_sample);
    const double sample_slope = loglog_slope(ns, samples);
    split_ok = split_ok && std::abs(sample_slope - 1) < 0.05;
    // Cross-check the learning term against an executed learning ledger on a small problem.
    const Target small = build_target(parse_target_spec("gaussian:d=3,kappa=20,rotate=9"));
    const auto f = total_flops_forecast(small, Mode::cov, 0.2, 4, 0.25, 0.5, InitialLaw::at_mode(small));
    const auto run = run_preconditioned(small, LearnSpec{}, 0.2, 4, InitialLaw::at_mode(small), RandomStream(70));
    split_ok = split_ok && std::abs(run.learn_ledger.total() - f.learn_total) <= 1e-9 * f.learn_total;
    bool evidence_ok = !rep.evidence.empty();
    for (const auto& e : rep.evidence) evidence_ok = evidence_ok && e.pass;
    std::ostringstream os;
    os << "N* cov = " << (rep.crossover_cov ? std::to_string(*rep.crossover_cov) : "none")
       << ", N* fisher = " << (rep.crossover_fisher ? std::to_string(*rep.crossover_fisher) : "none")
       << ", learn cov = " << learn0 << " FLOPs, sample slope in N " << sample_slope
       << ", ledger split " << (split_ok ? "ok" : "mismatch") << ", oracle evidence " << (evidence_ok ? "ok" : "failed");
    return {rep.crossover_cov.has_value() && split_ok && evidence_ok, os.str()};
}

std::string ensemble_bytes(const Ensemble& e) {
    std::ostringstream os;
    write_ensemble_csv(os, e);
    os << meta_json(e.meta).dump();
    return os.str();
}

double fd_max_rel_error(const Target& t, const Vec& x) {
    const Vec g = t.gradient(x);
    double worst = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(x(i)));
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        const double fd = (t.potential(xp) - t.potential(xm)) / (2 * h);
        worst = std::max(worst, std::abs(fd - g(i)) / std::max(1.0, std::abs(g(i))));
    }
    return worst;
}

// 8. Determinism, gradient consistency and square-root accuracy.
Outcome determinism_and_numerics() {
    bool same = true;
    {
        const Target t = gaussian(3, 9, 4);
        const InitialLaw mu0 = InitialLaw::point(Vec::Constant(3, 2.0));
        const Budget b = plan_ula_unpreconditioned(t, 0.4, 8, mu0);
        for (AdvanceMode mode : {AdvanceMode::step, AdvanceMode::exact_jump}) {
            const auto a = ensemble_bytes(run_thinned(kernel_for(b), t, mu0, b, RandomStream(8), mode));
            const auto c = ensemble_bytes(run_thinned(kernel_for(b), t, mu0, b, RandomStream(8), mode));
            same = same && a == c;
        }
        const Budget u = plan_underdamped_unpreconditioned(t, 0.8, 3, mu0);
        Budget shortu = u;
        shortu.k_burn = std::min<std::uint64_t>(u.k_burn, 2000);
        shortu.k_thin = std::min<std::uint64_t>(u.k_thin, 500);
        same = same && ensemble_bytes(run_thinned(kernel_for(shortu), t, mu0, shortu, RandomStream(8))) ==
                           ensemble_bytes(run_thinned(kernel_for(shortu), t, mu0, shortu, RandomStream(8)));
        const auto p1 = run_preconditioned(t, LearnSpec{}, 0.3, 5, mu0, RandomStream(8));
        const auto p2 = run_preconditioned(t, LearnSpec{}, 0.3, 5, mu0, RandomStream(8));
        same = same && ensemble_bytes(p1.output) == ensemble_bytes(p2.output);
        ExperimentSpec spec;
        spec.target = parse_target_spec("gaussian:d=2,kappa=3");
        spec.repetitions = 8;
        spec.threads = 1;
        const auto f1 = run_thm5_frequency(spec);
        spec.threads = 4;
        const auto f2 = run_thm5_frequency(spec);
        same = same && f1.relative_errors == f2.relative_errors;
    }

    RandomStream rng(8008);
    double fd_worst = 0;
    std::vector<Target> shipped;
    for (int d : {1, 2, 5, 10}) shipped.push_back(gaussian(d, 50, d > 1 ? 3 : 0));
    shipped.push_back(make_gaussian_target(rng.normal_vector(4), SpdMatrix(random_spd_matrix(4, 100, rng))));
    {
        TargetSpec lc;
        lc.kind = "logcosh-product";
        for (int d : {1, 3, 6}) {
            lc.d = d;
            lc.scale = 0.5 + d / 3.0;
            shipped.push_back(build_target(lc));
        }
    }
    for (const auto& t : shipped)
        for (int k = 0; k < 200; ++k) fd_worst = std::max(fd_worst, fd_max_rel_error(t, 3 * rng.normal_vector(t.dim)));

    double sqrt_worst = 0;
    for (int rep = 0; rep < 500; ++rep) {
        const Eigen::Index d = 1 + rep % 30;
        const double kappa = std::pow(10.0, rep % 7);
        const Mat a = random_spd_matrix(d, kappa, rng) * (0.01 + rng.uniform());
        const Mat r = spd_sqrt(SpdMatrix(a)).matrix();
        sqrt_worst = std::max(sqrt_worst, (r * r - a).norm() / a.norm());
    }
    std::ostringstream os;
    os << "repeated runs " << (same ? "identical" : "DIFFER") << ", max FD relative error " << fd_worst
       << ", max sqrt round-trip error " << sqrt_worst;
    return {same && fd_worst <= 1e-5 && sqrt_worst <= 1e-10, os.str()};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 AIID soundness", aiid_soundness},
        {"2 contraction literal check", contraction_literal},
        {"3 learning certification frequency", learning_frequency},
        {"4 bracket property suites", bracket_properties},
        {"5 consequence bounds", consequence_bounds},
        {"6 complexity scaling", complexity_scaling},
        {"7 amortization crossover", amortization_crossover},
        {"8 determinism and numerics", determinism_and_numerics},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
