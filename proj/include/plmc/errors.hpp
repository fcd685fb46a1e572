#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace plmc {

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    not_symmetric,
    not_positive_definite,
    factorization_failure,
    unsupported_target,
    step_size_too_large,
    bias_dominates,
    epsilon_too_large,
    epsilon_out_of_range,
    inadmissible_tolerance,
    invalid_tolerance,
    degenerate_ensemble,
    numerical_failure,
    instability,
    oracle_too_large,
    oracle_unsupported,
    precondition_unverified,
    budget_overflow,
    config,
    io,
    verification_failed,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::not_symmetric: return "not-symmetric";
    case ErrorCode::not_positive_definite: return "not-positive-definite";
    case ErrorCode::factorization_failure: return "factorization-failure";
    case ErrorCode::unsupported_target: return "unsupported-target";
    case ErrorCode::step_size_too_large: return "step-size-too-large";
    case ErrorCode::bias_dominates: return "bias-dominates";
    case ErrorCode::epsilon_too_large: return "epsilon-too-large";
    case ErrorCode::epsilon_out_of_range: return "epsilon-out-of-range";
    case ErrorCode::inadmissible_tolerance: return "inadmissible-tolerance";
    case ErrorCode::invalid_tolerance: return "invalid-tolerance";
    case ErrorCode::degenerate_ensemble: return "degenerate-ensemble";
    case ErrorCode::numerical_failure: return "numerical-failure";
    case ErrorCode::instability: return "instability";
    case ErrorCode::oracle_too_large: return "oracle-too-large";
    case ErrorCode::oracle_unsupported: return "oracle-unsupported";
    case ErrorCode::precondition_unverified: return "precondition-unverified";
    case ErrorCode::budget_overflow: return "budget-overflow";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
    case ErrorCode::verification_failed: return "verification-failed";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Thrown by kernels when a gradient or state stops being finite.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& msg, std::uint64_t iteration, std::vector<double> state)
        : Error(ErrorCode::numerical_failure,
                msg + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration), state_(std::move(state)) {}
    std::uint64_t iteration() const noexcept { return iteration_; }
    const std::vector<double>& state() const noexcept { return state_; }

private:
    std::uint64_t iteration_;
    std::vector<double> state_;
};

// Exit-code contract of the command-line front end.
inline int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::factorization_failure:
    case ErrorCode::degenerate_ensemble:
    case ErrorCode::numerical_failure:
    case ErrorCode::instability:
        return 3;
    case ErrorCode::verification_failed:
        return 4;
    default:
        return 2;
    }
}

}  // namespace plmc
