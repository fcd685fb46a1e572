#pragma once

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "numeric_policy.hpp"
#include "sampler.hpp"
#include "target_spec.hpp"

namespace plmc {

inline constexpr int config_schema_version = 1;

// Everything a subcommand needs. Defaults apply to keys that are absent.
struct RunConfig {
    // [global]
    std::uint64_t seed = 1;
    int threads = 0;  // 0 defers to PRECOND_LANGEVIN_THREADS, then 1
    std::string out_dir = "plmc-out";
    // [target]
    TargetSpec target;
    // [plan]
    Mode mode = Mode::unpre;
    KernelFamily kernel = KernelFamily::ula;
    double eps = 0.1;
    std::uint64_t N = 10;
    double delta = 0.25;
    double Delta = 0.5;
    double C = 1.0;
    std::optional<double> D;  // underdamped initial-distance constant
    std::optional<double> h;  // explicit ULA step; bypasses the step-size rule
    std::optional<double> learn_h;  // explicit learning-phase step
    // [run]
    AdvanceMode advance = AdvanceMode::automatic;
    // [verify]
    std::uint64_t mc_draws = 2000;
    double k_burn_scale = 1.0;
    double z = 3.0;
    // [experiment]
    std::string name = "experiment";
    int repetitions = 1;
    std::vector<std::uint64_t> N_grid;
    // [policy]
    NumericPolicy policy = default_policy();
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* first = v.data();
    const char* last = v.data() + v.size();
    if (!v.empty() && v[0] == '+') ++first;
    const auto [p, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || p != last || first == last)
        throw Error(ErrorCode::config, "key '" + key + "' expects a number, got '" + v + "'");
    return out;
}

inline double parse_positive(const std::string& key, const std::string& v) {
    const double x = parse_number<double>(key, v);
    if (!(x > 0)) throw Error(ErrorCode::config, "key '" + key + "' must be positive");
    return x;
}

inline Mode parse_mode(const std::string& v) {
    if (v == "unpre") return Mode::unpre;
    if (v == "cov") return Mode::cov;
    if (v == "fisher") return Mode::fisher;
    throw Error(ErrorCode::config, "mode must be unpre, cov or fisher, got '" + v + "'");
}

inline KernelFamily parse_kernel(const std::string& v) {
    if (v == "ula") return KernelFamily::ula;
    if (v == "underdamped") return KernelFamily::underdamped;
    throw Error(ErrorCode::config, "kernel must be ula or underdamped, got '" + v + "'");
}

inline AdvanceMode parse_advance(const std::string& v) {
    if (v == "automatic") return AdvanceMode::automatic;
    if (v == "step") return AdvanceMode::step;
    if (v == "exact_jump") return AdvanceMode::exact_jump;
    throw Error(ErrorCode::config, "advance must be automatic, step or exact_jump, got '" + v + "'");
}

inline std::vector<std::uint64_t> parse_grid(const std::string& key, const std::string& v) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<std::uint64_t>(key, trim(item)));
    if (out.empty()) throw Error(ErrorCode::config, "key '" + key + "' needs at least one value");
    return out;
}

struct KeySpec {
    const char* type;
    const char* help;
    std::function<void(RunConfig&, const std::string&, const std::string&)> apply;
};

}  // namespace detail

// The versioned schema: every accepted "section.key" with its type.
inline const std::map<std::string, detail::KeySpec>& config_schema() {
    using namespace detail;
    static const std::map<std::string, KeySpec> schema = {
        {"global.seed", {"u64", "master seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }}},
        {"global.threads", {"int", "worker threads (0 = environment)", [](RunConfig& c, auto& k, auto& v) {
             c.threads = parse_number<int>(k, v);
             if (c.threads < 0) throw Error(ErrorCode::config, "threads must be >= 0");
         }}},
        {"global.out", {"string", "output directory", [](RunConfig& c, auto&, auto& v) { c.out_dir = v; }}},
        {"target.kind", {"string", "gaussian | logcosh-product", [](RunConfig& c, auto&, auto& v) { c.target.kind = v; }}},
        {"target.d", {"int", "dimension", [](RunConfig& c, auto& k, auto& v) { c.target.d = parse_number<int>(k, v); }}},
        {"target.kappa", {"double", "condition number", [](RunConfig& c, auto& k, auto& v) { c.target.kappa = parse_positive(k, v); }}},
        {"target.m", {"double", "smallest precision eigenvalue", [](RunConfig& c, auto& k, auto& v) { c.target.m = parse_positive(k, v); }}},
        {"target.rotate", {"u64", "rotation seed (0 = axis aligned)", [](RunConfig& c, auto& k, auto& v) { c.target.rotate = parse_number<std::uint64_t>(k, v); }}},
        {"target.file", {"string", "covariance in SPD text format", [](RunConfig& c, auto&, auto& v) { c.target.covariance_file = v; }}},
        {"target.scale", {"double", "logcosh coordinate scale", [](RunConfig& c, auto& k, auto& v) { c.target.scale = parse_positive(k, v); }}},
        {"target.mean", {"double", "value of every mean coordinate", [](RunConfig& c, auto& k, auto& v) { c.target.mean_offset = parse_number<double>(k, v); }}},
        {"plan.mode", {"enum", "unpre | cov | fisher", [](RunConfig& c, auto&, auto& v) { c.mode = parse_mode(v); }}},
        {"plan.kernel", {"enum", "ula | underdamped", [](RunConfig& c, auto&, auto& v) { c.kernel = parse_kernel(v); }}},
        {"plan.eps", {"double", "accuracy per sample", [](RunConfig& c, auto& k, auto& v) { c.eps = parse_positive(k, v); }}},
        {"plan.N", {"u64", "number of output samples", [](RunConfig& c, auto& k, auto& v) { c.N = parse_number<std::uint64_t>(k, v); }}},
        {"plan.delta", {"double", "failure probability", [](RunConfig& c, auto& k, auto& v) { c.delta = parse_number<double>(k, v); }}},
        {"plan.Delta", {"double", "preconditioner relative accuracy", [](RunConfig& c, auto& k, auto& v) { c.Delta = parse_number<double>(k, v); }}},
        {"plan.C", {"double", "absolute constant of the sample-size rule", [](RunConfig& c, auto& k, auto& v) { c.C = parse_positive(k, v); }}},
        {"plan.D", {"double", "underdamped initial distance to the mode", [](RunConfig& c, auto& k, auto& v) { c.D = parse_number<double>(k, v); }}},
        {"plan.h", {"double", "explicit ULA step size (unpre mode)", [](RunConfig& c, auto& k, auto& v) { c.h = parse_positive(k, v); }}},
        {"plan.learn_h", {"double", "explicit learning-phase step size", [](RunConfig& c, auto& k, auto& v) { c.learn_h = parse_positive(k, v); }}},
        {"run.advance", {"enum", "automatic | step | exact_jump", [](RunConfig& c, auto&, auto& v) { c.advance = parse_advance(v); }}},
        {"verify.mc_draws", {"u64", "coupled Monte Carlo draws", [](RunConfig& c, auto& k, auto& v) { c.mc_draws = parse_number<std::uint64_t>(k, v); }}},
        {"verify.k_burn_scale", {"double", "multiplier applied to k_burn (informational runs)", [](RunConfig& c, auto& k, auto& v) { c.k_burn_scale = parse_number<double>(k, v); }}},
        {"verify.z", {"double", "standard errors of Monte Carlo slack", [](RunConfig& c, auto& k, auto& v) { c.z = parse_positive(k, v); }}},
        {"experiment.name", {"string", "label used in reports", [](RunConfig& c, auto&, auto& v) { c.name = v; }}},
        {"experiment.repetitions", {"int", "independent repetitions", [](RunConfig& c, auto& k, auto& v) { c.repetitions = parse_number<int>(k, v); }}},
        {"experiment.N_grid", {"list", "comma separated sample counts", [](RunConfig& c, auto& k, auto& v) { c.N_grid = parse_grid(k, v); }}},
        {"policy.oracle_slack", {"double", "absolute slack of oracle comparisons", [](RunConfig& c, auto& k, auto& v) { c.policy.oracle_slack = parse_number<double>(k, v); }}},
        {"policy.oracle_max_dim", {"int", "largest d*N the oracle accepts", [](RunConfig& c, auto& k, auto& v) { c.policy.oracle_max_dim = parse_number<int>(k, v); }}},
        {"policy.certify_tol", {"double", "tolerance of the certification test", [](RunConfig& c, auto& k, auto& v) { c.policy.certify_tol = parse_number<double>(k, v); }}},
    };
    return schema;
}

inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    const auto& schema = config_schema();
    const auto it = schema.find(key);
    if (it == schema.end()) throw Error(ErrorCode::config, "unknown key '" + key + "'");
    it->second.apply(c, key, value);
}

// Applies "section.key=value".
inline void apply_override(RunConfig& c, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::config, "override '" + assignment + "' lacks '='");
    apply_setting(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

// Reads the sectioned key = value format. '#' starts a comment. The first
// non-comment line must be "schema = 1".
inline void load_config(RunConfig& c, std::istream& in, const std::string& origin = "<config>") {
    std::string line, section;
    int lineno = 0;
    bool saw_schema = false;
    auto fail = [&](const std::string& msg) {
        throw Error(ErrorCode::config, origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
        if (section.empty() && key == "schema") {
            if (value != std::to_string(config_schema_version)) fail("unsupported schema version " + value);
            saw_schema = true;
            continue;
        }
        if (!saw_schema) fail("first setting must be 'schema = " + std::to_string(config_schema_version) + "'");
        if (section.empty()) fail("key '" + key + "' outside a section");
        try {
            apply_setting(c, section + "." + key, value);
        } catch (const Error& e) {
            fail(e.what());
        }
    }
}

inline void load_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::config, "cannot open config " + path);
    load_config(c, in, path);
}

// Cross-field checks run before any computation.
inline void validate(const RunConfig& c) {
    if (c.N < 1) throw Error(ErrorCode::config, "plan.N must be at least 1");
    if (c.repetitions < 1) throw Error(ErrorCode::config, "experiment.repetitions must be at least 1");
    if (c.mode != Mode::unpre && c.kernel != KernelFamily::ula)
        throw Error(ErrorCode::config, "preconditioned modes use the ula kernel");
    if (c.target.d < 1) throw Error(ErrorCode::config, "target.d must be positive");
    if (!(c.k_burn_scale >= 0)) throw Error(ErrorCode::config, "verify.k_burn_scale must be >= 0");
    if (c.h && (c.mode != Mode::unpre || c.kernel != KernelFamily::ula))
        throw Error(ErrorCode::config, "plan.h applies to unpreconditioned ula only");
    if (c.mc_draws < 2) throw Error(ErrorCode::config, "verify.mc_draws must be at least 2");
}

// Canonical "section.key = value" listing of the resolved configuration.
inline std::map<std::string, std::string> config_record(const RunConfig& c) {
    auto g = [](double x) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    std::map<std::string, std::string> r;
    r["schema"] = std::to_string(config_schema_version);
    r["global.seed"] = std::to_string(c.seed);
    r["global.threads"] = std::to_string(c.threads);
    r["global.out"] = c.out_dir;
    r["target.kind"] = c.target.kind;
    r["target.d"] = std::to_string(c.target.d);
    r["target.kappa"] = g(c.target.kappa);
    r["target.m"] = g(c.target.m);
    r["target.rotate"] = std::to_string(c.target.rotate);
    r["target.file"] = c.target.covariance_file;
    r["target.scale"] = g(c.target.scale);
    r["target.mean"] = g(c.target.mean_offset);
    r["plan.mode"] = to_string(c.mode);
    r["plan.kernel"] = to_string(c.kernel);
    r["plan.eps"] = g(c.eps);
    r["plan.N"] = std::to_string(c.N);
    r["plan.delta"] = g(c.delta);
    r["plan.Delta"] = g(c.Delta);
    r["plan.C"] = g(c.C);
    if (c.D) r["plan.D"] = g(*c.D);
    if (c.h) r["plan.h"] = g(*c.h);
    if (c.learn_h) r["plan.learn_h"] = g(*c.learn_h);
    r["run.advance"] = to_string(c.advance);
    r["verify.mc_draws"] = std::to_string(c.mc_draws);
    r["verify.k_burn_scale"] = g(c.k_burn_scale);
    r["verify.z"] = g(c.z);
    r["experiment.name"] = c.name;
    r["experiment.repetitions"] = std::to_string(c.repetitions);
    std::string grid;
    for (auto n : c.N_grid) grid += (grid.empty() ? "" : ",") + std::to_string(n);
    r["experiment.N_grid"] = grid;
    r["policy.oracle_slack"] = g(c.policy.oracle_slack);
    r["policy.oracle_max_dim"] = std::to_string(c.policy.oracle_max_dim);
    r["policy.certify_tol"] = g(c.policy.certify_tol);
    return r;
}

}  // namespace plmc
