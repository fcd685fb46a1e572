#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "ensemble.hpp"
#include "errors.hpp"

namespace plmc {

inline std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

// One row per sample, columns x1..xd.
inline void write_ensemble_csv(std::ostream& os, const Ensemble& e) {
    for (Eigen::Index j = 0; j < e.dim(); ++j) os << (j ? "," : "") << "x" << (j + 1);
    os << "\n";
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        for (Eigen::Index j = 0; j < e.dim(); ++j) os << (j ? "," : "") << g17(e.states(j, i));
        os << "\n";
    }
}

inline nlohmann::ordered_json ledger_json(const FlopLedger& l) {
    nlohmann::ordered_json j;
    j["gradient_calls"] = l.gradient_calls();
    j["steps"] = l.steps();
    j["gradient_flops"] = l.gradient_flops();
    j["matvec_flops"] = l.matvec_flops();
    j["factorization_flops"] = l.factorization_flops();
    j["other_flops"] = l.other_flops();
    j["total_flops"] = l.total();
    return j;
}

inline nlohmann::ordered_json meta_json(const EnsembleMeta& m) {
    nlohmann::ordered_json j;
    j["seed"] = m.seed;
    j["stream"] = m.stream;
    j["kernel"] = m.kernel;
    j["advance_mode"] = m.advance_mode;
    j["budget"] = m.budget;
    j["output_iterations"] = m.output_iterations;
    j["ledger"] = ledger_json(m.ledger);
    j["notes"] = m.notes;
    return j;
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create directory " + dir + ": " + ec.message());
    return dir;
}

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& body) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::io, "cannot write " + path.string());
    body(os);
    if (!os) throw Error(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace plmc
