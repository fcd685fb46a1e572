#pragma once

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "budget.hpp"
#include "config.hpp"
#include "estimators.hpp"
#include "experiments.hpp"
#include "gaussian_oracle.hpp"
#include "io.hpp"
#include "sampler.hpp"
#include "target_spec.hpp"

namespace plmc {

namespace detail {

// Budget for the unpreconditioned chain described by the configuration.
inline Budget unpre_budget(const RunConfig& c, const Target& t, const InitialLaw& mu0) {
    if (c.kernel == KernelFamily::underdamped) return plan_underdamped_unpreconditioned(t, c.eps, c.N, mu0, c.D);
    if (!c.h) return plan_ula_unpreconditioned(t, c.eps, c.N, mu0);
    const auto cp = contraction_params_ula(t, *c.h);
    if (!le_rel(*c.h, cp.h_max)) {
        std::ostringstream os;
        os << "h = " << *c.h << " exceeds 2/(L+m) = " << cp.h_max;
        throw Error(ErrorCode::step_size_too_large, os.str());
    }
    Budget b = plan_thinned(cp, c.eps, c.N, t.trace_sigma_upper(), w2_initial(t, mu0));
    b.family = KernelFamily::ula;
    b.sources["h"] = "user override";
    return b;
}

inline LearnSpec learn_spec(const RunConfig& c) {
    LearnSpec ls;
    ls.delta = c.delta;
    ls.Delta = c.Delta;
    ls.kind = c.mode == Mode::fisher ? PreconditionerKind::fisher : PreconditionerKind::covariance;
    ls.C_absolute = c.C;
    ls.step_size_override = c.learn_h;
    return ls;
}

inline ExperimentSpec experiment_spec(const RunConfig& c) {
    ExperimentSpec s;
    s.name = c.name;
    s.target = c.target;
    s.mode = c.mode;
    s.family = c.kernel;
    s.eps = c.eps;
    s.N = c.N;
    s.delta = c.delta;
    s.Delta = c.Delta;
    s.C = c.C;
    s.repetitions = c.repetitions;
    s.seed = c.seed;
    s.threads = c.threads;
    return s;
}

inline void write_record(std::ostream& os, const std::map<std::string, std::string>& r) {
    for (const auto& [k, v] : r) os << k << " = " << v << "\n";
}

// Writes the text to the stream and to <out>/<file>.
inline void emit(std::ostream& out, const RunConfig& c, const std::string& file, const std::string& text) {
    out << text;
    const auto dir = ensure_dir(c.out_dir);
    write_file(dir / file, [&](std::ostream& os) { os << text; });
}

inline nlohmann::ordered_json certificate_json(const std::optional<Certificate>& cert) {
    if (!cert) return nullptr;
    nlohmann::ordered_json j;
    j["relative_error"] = cert->relative_error;
    j["Delta"] = cert->Delta;
    j["certified"] = cert->certified;
    return j;
}

}  // namespace detail

inline int cmd_plan(const RunConfig& c, std::ostream& out) {
    const Target t = build_target(c.target);
    const InitialLaw mu0 = InitialLaw::at_mode(t);
    std::ostringstream os;
    os << "target       " << t.description << "\nmode         " << to_string(c.mode) << "\n";
    std::map<std::string, std::string> rec = config_record(c);
    if (c.mode == Mode::unpre) {
        const Budget b = detail::unpre_budget(c, t, mu0);
        write_budget_report(os, b);
        for (auto& [k, v] : budget_record(b)) rec[k] = v;
        const double per_step = b.family == KernelFamily::ula ? ula_step_flops(t) : underdamped_step_flops(t);
        const double flops = b.total_steps_real() * per_step;
        os << "forecast FLOPs " << detail::fmt(flops) << "\n";
        rec["forecast.total_flops"] = g17(flops);
    } else {
        const auto f = total_flops_forecast(t, detail::learn_spec(c), c.eps, c.N, mu0);
        os << "-- phase 1: learning --\n";
        write_budget_report(os, *f.learn_budget);
        os << "N_learn      " << f.learn_budget->N << "\n";
        os << "-- phase 2: sampling (eps in preconditioned coordinates) --\n";
        write_budget_report(os, f.sample_budget);
        os << "forecast FLOPs learn=" << detail::fmt(f.learn_total) << " sample=" << detail::fmt(f.sample_total)
           << " total=" << detail::fmt(f.total) << "\n";
        os << "asymptotic   " << f.asymptotic << "\n";
        for (auto& [k, v] : budget_record(*f.learn_budget)) rec["learn." + k] = v;
        for (auto& [k, v] : budget_record(f.sample_budget)) rec["sample." + k] = v;
        rec["forecast.learn_flops"] = g17(f.learn_total);
        rec["forecast.sample_flops"] = g17(f.sample_total);
        rec["forecast.total_flops"] = g17(f.total);
    }
    detail::emit(out, c, "plan.txt", os.str());
    write_file(ensure_dir(c.out_dir) / "plan.kv", [&](std::ostream& o) { detail::write_record(o, rec); });
    return 0;
}

inline int cmd_run(const RunConfig& c, std::ostream& out) {
    const Target t = build_target(c.target);
    const InitialLaw mu0 = InitialLaw::at_mode(t);
    const RandomStream rng(c.seed);
    nlohmann::ordered_json meta;
    meta["config"] = config_record(c);
    Ensemble result;
    std::ostringstream sum;
    if (c.mode == Mode::unpre) {
        const Budget b = detail::unpre_budget(c, t, mu0);
        KernelConfig kc = kernel_for(b);
        if (c.D) kc.underdamped.init_distance = *c.D;
        result = run_thinned(kc, t, mu0, b, rng, c.advance);
        meta["ensemble"] = meta_json(result.meta);
        sum << "mode unpre, kernel " << to_string(b.family) << ", " << b.total_steps() << " kernel steps, "
            << result.size() << " samples\n";
    } else {
        PreconditionedOptions opt;
        opt.advance = c.advance;
        const auto r = run_preconditioned(t, detail::learn_spec(c), c.eps, c.N, mu0, rng, opt);
        result = r.output;
        meta["ensemble"] = meta_json(r.output.meta);
        meta["learning"] = meta_json(r.learning.meta);
        meta["certificate"] = detail::certificate_json(r.certificate);
        meta["ledger"]["learn"] = ledger_json(r.learn_ledger);
        meta["ledger"]["sample"] = ledger_json(r.sample_ledger);
        meta["ledger"]["total"] = ledger_json(r.total_ledger());
        write_file(ensure_dir(c.out_dir) / "preconditioner.spd", [&](std::ostream& o) { write_spd_text(o, r.M); });
        sum << "mode " << to_string(c.mode) << ": learned from " << r.learning.size() << " samples ("
            << r.learn_budget.total_steps() << " steps), sampled " << r.output.size() << " ("
            << r.sample_budget.total_steps() << " steps)\n";
        if (r.certificate)
            sum << "certificate: relative error " << detail::fmt(r.certificate->relative_error)
                << (r.certificate->certified ? " <= " : " > ") << "Delta " << detail::fmt(c.Delta) << "\n";
        sum << "FLOPs learn=" << detail::fmt(r.learn_ledger.total()) << " sample=" << detail::fmt(r.sample_ledger.total())
            << "\n";
    }
    const auto dir = ensure_dir(c.out_dir);
    write_file(dir / "ensemble.csv", [&](std::ostream& o) { write_ensemble_csv(o, result); });
    write_file(dir / "ensemble.meta.json", [&](std::ostream& o) { o << meta.dump(2) << "\n"; });
    detail::emit(out, c, "summary.txt", sum.str());
    return 0;
}

inline int cmd_learn(const RunConfig& c, std::ostream& out) {
    if (c.mode == Mode::unpre) throw Error(ErrorCode::config, "learn needs --mode cov or --mode fisher");
    std::ostringstream sum;
    const auto dir = ensure_dir(c.out_dir);
    if (c.repetitions > 1) {
        const auto rep = run_thm5_frequency(detail::experiment_spec(c));
        write_file(dir / "frequency.csv", [&](std::ostream& o) {
            o << "repetition,relative_error,certified\n";
            for (std::size_t i = 0; i < rep.relative_errors.size(); ++i)
                o << i << "," << g17(rep.relative_errors[i]) << ","
                  << int(rep.relative_errors[i] <= c.Delta + c.policy.certify_tol) << "\n";
        });
        sum << "frequency " << rep.kind << ": " << rep.certified << "/" << rep.repetitions << " certified ("
            << detail::fmt(rep.frequency) << "), 99% interval [" << detail::fmt(rep.interval.lower) << ", "
            << detail::fmt(rep.interval.upper) << "], required 1-delta = " << detail::fmt(rep.target_probability)
            << "\nplanned iterations per repetition " << rep.planned_iterations << " (N_learn " << rep.budget.N
            << ")\nresult " << (rep.pass ? "PASS" : "FAIL") << "\n";
        detail::emit(out, c, "learn_summary.txt", sum.str());
        return rep.pass ? 0 : 4;
    }
    const Target t = build_target(c.target);
    const InitialLaw mu0 = InitialLaw::at_mode(t);
    const LearnSpec ls = detail::learn_spec(c);
    const Budget b = plan_learning(t, ls, ula_provider(t), mu0);
    const Ensemble z = run_thinned(kernel_for(b), t, mu0, b, RandomStream(c.seed).substream(1), c.advance);
    const bool cov = ls.kind == PreconditionerKind::covariance;
    const SpdMatrix est = cov ? empirical_covariance(z) : empirical_fisher(z, t);
    const SpdMatrix M = cov ? est.inverse() : est;
    write_file(dir / "preconditioner.spd", [&](std::ostream& o) { write_spd_text(o, M); });
    write_budget_report(sum, b);
    sum << "N_learn      " << b.N << "\n";
    const auto& ref = cov ? t.analytic_covariance : t.analytic_fisher;
    if (ref) {
        const Certificate cert = certify(est, *ref, c.Delta, c.policy);
        sum << "certificate  relative error " << detail::fmt(cert.relative_error) << (cert.certified ? " <= " : " > ")
            << "Delta " << detail::fmt(c.Delta) << "\n";
    }
    detail::emit(out, c, "learn_summary.txt", sum.str());
    return 0;
}

inline int cmd_verify(const RunConfig& c, std::ostream& out) {
    const Target t = build_target(c.target);
    if (!t.is_gaussian()) throw Error(ErrorCode::oracle_unsupported, "oracle unsupported: the exact joint law needs a Gaussian target");
    if (c.kernel != KernelFamily::ula) throw Error(ErrorCode::oracle_unsupported, "oracle unsupported: joint law implemented for ULA");
    const InitialLaw mu0 = InitialLaw::at_mode(t);
    const GaussianLaw pi = t.gaussian_law();
    Budget b;
    std::optional<SpdMatrix> M;
    if (c.mode == Mode::unpre) {
        b = detail::unpre_budget(c, t, mu0);
    } else {
        const LearnSpec ls = detail::learn_spec(c);
        const Budget lb = plan_learning(t, ls, ula_provider(t), mu0);
        const Ensemble z = run_thinned(kernel_for(lb), t, mu0, lb, RandomStream(c.seed).substream(1), c.advance);
        M = ls.kind == PreconditionerKind::covariance ? empirical_covariance(z).inverse() : empirical_fisher(z, t);
        b = plan_ula_preconditioned(t, ls.kind, c.Delta, c.eps, c.N, mu0, M);
    }
    const bool informational = c.k_burn_scale != 1.0;
    if (informational) b.k_burn = std::uint64_t(std::floor(double(b.k_burn) * c.k_burn_scale));

    const ChainLaw chain = exact_joint_law(pi, b, mu0.law(), M, c.policy);
    const double w2 = joint_w2(chain);
    const double bound = std::sqrt(double(b.N)) * c.eps;
    const bool w2_ok = w2 <= bound + c.policy.oracle_slack;
    std::ostringstream sum;
    sum << "budget h=" << detail::fmt(b.h) << " k_burn=" << b.k_burn << " k_thin=" << b.k_thin << " N=" << b.N
        << (informational ? " (k_burn scaled; informational)" : "") << "\n";
    sum << "joint W2 " << detail::fmt(w2) << " <= sqrt(N) eps " << detail::fmt(bound) << " margin "
        << detail::fmt(bound - w2) << " " << (w2_ok ? "PASS" : "FAIL") << "\n";
    bool all = w2_ok;
    if (w2_ok) {
        const auto rep = aiid_consequence_checks(chain, chain.target, c.eps, c.mc_draws, RandomStream(c.seed).substream(3),
                                                 {}, c.z, c.policy);
        for (const auto& r : rep.rows) {
            sum << r.name << ": " << detail::fmt(r.lhs) << " (se " << detail::fmt(r.se) << ") vs " << detail::fmt(r.rhs)
                << " margin " << detail::fmt(r.margin()) << " " << (r.pass ? "PASS" : "FAIL") << "\n";
        }
        all = all && rep.all_pass();
        write_file(ensure_dir(c.out_dir) / "verify.csv",
                   [&](std::ostream& o) { write_consequence_csv(o, {{0, rep}}); });
    }
    sum << "result " << (all ? "PASS" : "FAIL") << "\n";
    detail::emit(out, c, "verify_summary.txt", sum.str());
    if (informational) return 0;
    return all ? 0 : 4;
}

inline int cmd_compare(const RunConfig& c, std::ostream& out) {
    std::vector<std::uint64_t> grid = c.N_grid;
    if (grid.empty()) grid = {c.N};
    const auto rep = run_complexity_comparison(detail::experiment_spec(c), grid);
    write_file(ensure_dir(c.out_dir) / "compare.csv", [&](std::ostream& o) { write_comparison_csv(o, rep); });
    std::ostringstream sum;
    sum << "unpre  " << rep.asymptotic_unpre << "\ncov    " << rep.asymptotic_cov << "\nfisher " << rep.asymptotic_fisher
        << "\n";
    for (const auto& r : rep.rows)
        sum << "N=" << r.N << " unpre=" << detail::fmt(r.unpre) << " cov=" << detail::fmt(r.cov_total) << " ("
            << detail::fmt(r.cov_learn) << " + " << detail::fmt(r.cov_sample) << ") fisher=" << detail::fmt(r.fisher_total)
            << "\n";
    sum << "crossover cov: " << (rep.crossover_cov ? std::to_string(*rep.crossover_cov) : "none") << "\n";
    sum << "crossover fisher: " << (rep.crossover_fisher ? std::to_string(*rep.crossover_fisher) : "none") << "\n";
    bool ok = true;
    for (const auto& e : rep.evidence) {
        sum << "oracle " << e.what << ": W2 " << detail::fmt(e.w2) << " <= " << detail::fmt(e.bound) << " "
            << (e.pass ? "PASS" : "FAIL") << "\n";
        ok = ok && e.pass;
    }
    detail::emit(out, c, "compare_summary.txt", sum.str());
    return ok ? 0 : 4;
}

// Parses arguments and dispatches; failures become exit codes 2, 3 or 4.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Preconditioned Langevin sampling: plan, run, learn, verify, compare"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, target, mode, kernel, advance, grid;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed, N;
    std::optional<int> threads, reps;
    std::optional<std::string> out_dir;
    std::optional<double> eps, delta, Delta, C;
    app.add_option("--config", config_path, "configuration file (sectioned key = value)");
    app.add_option("--seed", seed, "master seed (u64)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads; falls back to PRECOND_LANGEVIN_THREADS");
    app.add_option("--set", sets, "override section.key=value (repeatable)");
    app.add_option("--mode", mode, "unpre | cov | fisher");
    app.add_option("--target", target, "target spec, e.g. gaussian:d=2,kappa=4");
    app.add_option("--kernel", kernel, "ula | underdamped");
    app.add_option("--eps", eps, "accuracy per sample");
    app.add_option("--N", N, "number of output samples");
    app.add_option("--delta", delta, "failure probability of learning");
    app.add_option("--Delta", Delta, "relative accuracy of the preconditioner");
    app.add_option("--C", C, "absolute constant of the learning sample size");
    app.add_option("--repetitions", reps, "independent repetitions (learn)");
    app.add_option("--grid", grid, "comma separated N grid (compare)");
    app.add_option("--advance", advance, "automatic | step | exact_jump");
    app.add_subcommand("plan", "print the schedule, FLOP forecast and every checked inequality");
    app.add_subcommand("run", "run the sampler and write the ensemble CSV with metadata");
    app.add_subcommand("learn", "run the learning phase, or a frequency experiment with --repetitions > 1");
    app.add_subcommand("verify", "check the planned chain against the exact Gaussian oracle");
    app.add_subcommand("compare", "planned FLOP totals of unpre, cov and fisher across an N grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        RunConfig c;
        if (!config_path.empty()) load_config_file(c, config_path);
        if (seed) c.seed = *seed;
        if (out_dir) c.out_dir = *out_dir;
        if (threads) apply_setting(c, "global.threads", std::to_string(*threads));
        if (!target.empty()) c.target = parse_target_spec(target);
        if (!mode.empty()) c.mode = detail::parse_mode(mode);
        if (!kernel.empty()) c.kernel = detail::parse_kernel(kernel);
        if (!advance.empty()) c.advance = detail::parse_advance(advance);
        if (eps) apply_setting(c, "plan.eps", g17(*eps));
        if (N) c.N = *N;
        if (delta) c.delta = *delta;
        if (Delta) c.Delta = *Delta;
        if (C) apply_setting(c, "plan.C", g17(*C));
        if (reps) c.repetitions = *reps;
        if (!grid.empty()) apply_setting(c, "experiment.N_grid", grid);
        for (const auto& s : sets) apply_override(c, s);
        validate(c);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "plan") return cmd_plan(c, out);
        if (cmd == "run") return cmd_run(c, out);
        if (cmd == "learn") return cmd_learn(c, out);
        if (cmd == "verify") return cmd_verify(c, out);
        return cmd_compare(c, out);
    } catch (const NumericalFailure& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace plmc
