#pragma once

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "budget.hpp"
#include "estimators.hpp"
#include "gaussian_oracle.hpp"
#include "parallel.hpp"
#include "sampler.hpp"
#include "target_spec.hpp"

namespace plmc {

struct ExperimentSpec {
    std::string name = "experiment";
    TargetSpec target;
    Mode mode = Mode::cov;
    KernelFamily family = KernelFamily::ula;
    double eps = 0.1;
    std::uint64_t N = 10;
    double delta = 0.25;
    double Delta = 0.5;
    double C = 1.0;
    int repetitions = 200;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct BinomialInterval {
    double lower = 0;
    double upper = 1;
};

// Exact (Clopper-Pearson) two-sided interval at the given confidence.
inline BinomialInterval clopper_pearson(std::uint64_t k, std::uint64_t n, double confidence = 0.99) {
    const double a = 1 - confidence;
    BinomialInterval ci;
    ci.lower = k == 0 ? 0.0 : boost::math::ibeta_inv(double(k), double(n - k + 1), a / 2);
    ci.upper = k == n ? 1.0 : boost::math::ibeta_inv(double(k + 1), double(n - k), 1 - a / 2);
    return ci;
}

struct FrequencyReport {
    std::string kind;
    int repetitions = 0;
    int certified = 0;
    double frequency = 0;
    BinomialInterval interval;
    double target_probability = 0;  // 1 - delta
    bool pass = false;
    Budget budget;
    std::uint64_t planned_iterations = 0;
    std::vector<double> relative_errors;
};

inline LearnSpec learn_spec_for(const ExperimentSpec& spec) {
    if (spec.mode == Mode::unpre) throw Error(ErrorCode::config, "frequency experiments need a preconditioner mode");
    LearnSpec ls;
    ls.delta = spec.delta;
    ls.Delta = spec.Delta;
    ls.kind = spec.mode == Mode::cov ? PreconditionerKind::covariance : PreconditionerKind::fisher;
    ls.C_absolute = spec.C;
    return ls;
}

// R independent learning phases; counts how often the estimate is certified.
inline FrequencyReport run_thm5_frequency(const ExperimentSpec& spec) {
    if (spec.repetitions < 1) throw Error(ErrorCode::config, "repetitions must be at least 1");
    const Target t = build_target(spec.target);
    const LearnSpec ls = learn_spec_for(spec);
    const InitialLaw mu0 = InitialLaw::at_mode(t);
    const Budget b = plan_learning(t, ls, ula_provider(t), mu0);
    const auto& ref = ls.kind == PreconditionerKind::covariance ? t.analytic_covariance : t.analytic_fisher;
    if (!ref) throw Error(ErrorCode::unsupported_target, "frequency experiment needs the reference matrix");
    const RandomStream root(spec.seed);

    const auto errs = parallel_map<double>(std::size_t(spec.repetitions), resolve_threads(spec.threads), [&](std::size_t r) {
        const Ensemble z = run_thinned(kernel_for(b), t, mu0, b, root.substream(r));
        try {
            const SpdMatrix est = ls.kind == PreconditionerKind::covariance ? empirical_covariance(z) : empirical_fisher(z, t);
            return relative_error(est, *ref);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::degenerate_ensemble) throw;
            return std::numeric_limits<double>::infinity();
        }
    });

    FrequencyReport rep;
    rep.kind = to_string(ls.kind);
    rep.repetitions = spec.repetitions;
    rep.relative_errors = errs;
    for (double e : errs) rep.certified += (e <= spec.Delta + default_policy().certify_tol) ? 1 : 0;
    rep.frequency = double(rep.certified) / double(rep.repetitions);
    rep.interval = clopper_pearson(std::uint64_t(rep.certified), std::uint64_t(rep.repetitions));
    rep.target_probability = 1 - spec.delta;
    rep.pass = rep.interval.upper >= rep.target_probability;
    rep.budget = b;
    rep.planned_iterations = b.total_steps();
    return rep;
}

struct ComparisonRow {
    std::uint64_t N = 0;
    double unpre = 0;
    double cov_learn = 0, cov_sample = 0, cov_total = 0;
    double fisher_learn = 0, fisher_sample = 0, fisher_total = 0;
};

struct OracleEvidence {
    std::string what;
    double w2 = 0;
    double bound = 0;
    bool pass = false;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    std::optional<std::uint64_t> crossover_cov;
    std::optional<std::uint64_t> crossover_fisher;
    std::vector<OracleEvidence> evidence;
    std::string asymptotic_unpre, asymptotic_cov, asymptotic_fisher;
};

// Smallest grid value from which the candidate stays below the baseline.
inline std::optional<std::uint64_t> crossover(const std::vector<std::uint64_t>& ns, const std::vector<double>& cand,
                                              const std::vector<double>& base) {
    std::optional<std::uint64_t> out;
    for (std::size_t i = ns.size(); i-- > 0;) {
        if (cand[i] < base[i]) out = ns[i];
        else break;
    }
    return out;
}

inline ComparisonReport run_complexity_comparison(const ExperimentSpec& spec, const std::vector<std::uint64_t>& grid) {
    if (grid.empty()) throw Error(ErrorCode::config, "N grid must be non-empty");
    const Target t = build_target(spec.target);
    const InitialLaw mu0 = InitialLaw::at_mode(t);
    ComparisonReport rep;
    std::vector<double> un, cv, fi;
    for (std::uint64_t n : grid) {
        ComparisonRow row;
        row.N = n;
        const auto fu = total_flops_forecast(t, Mode::unpre, spec.eps, n, spec.delta, spec.Delta, mu0, spec.family, spec.C);
        const auto fc = total_flops_forecast(t, Mode::cov, spec.eps, n, spec.delta, spec.Delta, mu0, KernelFamily::ula, spec.C);
        const auto ff = total_flops_forecast(t, Mode::fisher, spec.eps, n, spec.delta, spec.Delta, mu0, KernelFamily::ula, spec.C);
        row.unpre = fu.total;
        row.cov_learn = fc.learn_total;
        row.cov_sample = fc.sample_total;
        row.cov_total = fc.total;
        row.fisher_learn = ff.learn_total;
        row.fisher_sample = ff.sample_total;
        row.fisher_total = ff.total;
        rep.asymptotic_unpre = fu.asymptotic;
        rep.asymptotic_cov = fc.asymptotic;
        rep.asymptotic_fisher = ff.asymptotic;
        rep.rows.push_back(row);
        un.push_back(row.unpre);
        cv.push_back(row.cov_total);
        fi.push_back(row.fisher_total);
    }
    rep.crossover_cov = crossover(grid, cv, un);
    rep.crossover_fisher = crossover(grid, fi, un);

    const std::uint64_t n0 = grid.front();
    if (t.is_gaussian() && spec.family == KernelFamily::ula && double(t.dim) * double(n0) <= default_policy().oracle_max_dim) {
        const GaussianLaw pi = t.gaussian_law();
        const Budget bu = plan_ula_unpreconditioned(t, spec.eps, n0, mu0);
        const double wu = joint_w2(exact_joint_law(pi, bu, mu0.law()));
        const double bound = std::sqrt(double(n0)) * spec.eps;
        rep.evidence.push_back({"unpre N=" + std::to_string(n0), wu, bound, wu <= bound + default_policy().oracle_slack});
        // The exact covariance preconditioner lies inside every Delta bracket.
        const SpdMatrix M = t.analytic_covariance->inverse();
        const Budget bc = plan_ula_preconditioned(t, PreconditionerKind::covariance, spec.Delta, spec.eps, n0, mu0, M);
        const double wc = joint_w2(exact_joint_law(pi, bc, mu0.law(), M));
        rep.evidence.push_back({"cov phase 2 (exact M) N=" + std::to_string(n0), wc, bound, wc <= bound + default_policy().oracle_slack});
    }
    return rep;
}

inline void write_comparison_csv(std::ostream& os, const ComparisonReport& rep) {
    os << "N,unpre_total,cov_learn,cov_sample,cov_total,fisher_learn,fisher_sample,fisher_total\n";
    char buf[512];
    for (const auto& r : rep.rows) {
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", (unsigned long long)r.N, r.unpre,
                      r.cov_learn, r.cov_sample, r.cov_total, r.fisher_learn, r.fisher_sample, r.fisher_total);
        os << buf;
    }
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= double(n);
    my /= double(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace plmc
