#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace plmc {

// FLOP tally: one FLOP per scalar add or multiply.
class FlopLedger {
public:
    FlopLedger() = default;
    explicit FlopLedger(double gradient_cost) : gradient_cost_(gradient_cost) {}

    void add_gradient_calls(std::uint64_t n) { gradient_calls_ += n; }
    void add_matvec(double f) { matvec_ += f; }
    void add_factorization(double f) { factorization_ += f; }
    void add_other(double f) { other_ += f; }
    void add_steps(std::uint64_t n) { steps_ += n; }

    std::uint64_t gradient_calls() const { return gradient_calls_; }
    double gradient_cost() const { return gradient_cost_; }
    double gradient_flops() const { return double(gradient_calls_) * gradient_cost_; }
    double matvec_flops() const { return matvec_; }
    double factorization_flops() const { return factorization_; }
    double other_flops() const { return other_; }
    std::uint64_t steps() const { return steps_; }
    double total() const { return gradient_flops() + matvec_ + factorization_ + other_; }

    FlopLedger& operator+=(const FlopLedger& o) {
        gradient_calls_ += o.gradient_calls_;
        if (gradient_cost_ == 0) gradient_cost_ = o.gradient_cost_;
        matvec_ += o.matvec_;
        factorization_ += o.factorization_;
        other_ += o.other_;
        steps_ += o.steps_;
        return *this;
    }

private:
    std::uint64_t gradient_calls_ = 0;
    double gradient_cost_ = 0;
    double matvec_ = 0;
    double factorization_ = 0;
    double other_ = 0;
    std::uint64_t steps_ = 0;
};

struct EnsembleMeta {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string kernel;
    std::string advance_mode = "step";
    std::map<std::string, std::string> budget;
    std::vector<std::uint64_t> output_iterations;  // kernel-step index of each stored state
    FlopLedger ledger;
    std::vector<std::string> notes;
};

// N states in R^d stored column-wise.
struct Ensemble {
    Mat states;
    EnsembleMeta meta;

    Eigen::Index dim() const { return states.rows(); }
    Eigen::Index size() const { return states.cols(); }
    Vec state(Eigen::Index t) const { return states.col(t); }

    static Ensemble from_states(const Mat& s) {
        if (s.cols() < 1 || s.rows() < 1) throw Error(ErrorCode::invalid_argument, "ensemble must be non-empty");
        if (!s.allFinite()) throw Error(ErrorCode::invalid_argument, "ensemble states must be finite");
        Ensemble e;
        e.states = s;
        return e;
    }
};

}  // namespace plmc
