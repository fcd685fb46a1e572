#pragma once

#include <cmath>
#include <sstream>

#include "ensemble.hpp"
#include "linalg.hpp"
#include "target.hpp"

namespace plmc {

namespace detail {

inline SpdMatrix checked_estimate(const Mat& s, const NumericPolicy& pol, const char* what) {
    auto es = sym_eig(s);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(s.rows() - 1);
    if (!(hi > 0) || lo <= pol.degenerate_relative_floor * hi) {
        std::ostringstream os;
        os << what << " is singular (lambda_min = " << lo << ", lambda_max = " << hi
           << "); use a larger ensemble";
        throw Error(ErrorCode::degenerate_ensemble, os.str());
    }
    return SpdMatrix(s, pol);
}

}  // namespace detail

// (1/N) sum (x_t - xbar)(x_t - xbar)^T
inline SpdMatrix empirical_covariance(const Ensemble& e, const NumericPolicy& pol = default_policy()) {
    if (e.size() < 2) throw Error(ErrorCode::degenerate_ensemble, "covariance estimate needs N >= 2");
    const Vec mean = e.states.rowwise().mean();
    Mat s = Mat::Zero(e.dim(), e.dim());
    for (Eigen::Index t = 0; t < e.size(); ++t) {
        const Vec c = e.states.col(t) - mean;
        s.noalias() += c * c.transpose();
    }
    s /= double(e.size());
    return detail::checked_estimate(symmetrize(s), pol, "covariance estimate");
}

// (1/N) sum grad U(x_t) grad U(x_t)^T
inline SpdMatrix empirical_fisher(const Ensemble& e, const Target& t, FlopLedger* ledger = nullptr,
                                  const NumericPolicy& pol = default_policy()) {
    if (e.size() < 1) throw Error(ErrorCode::degenerate_ensemble, "Fisher estimate needs N >= 1");
    if (e.dim() != t.dim) throw Error(ErrorCode::dimension_mismatch, "ensemble and target dimensions differ");
    Mat s = Mat::Zero(e.dim(), e.dim());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const Vec g = t.gradient(e.states.col(i));
        if (!g.allFinite()) throw Error(ErrorCode::numerical_failure, "non-finite score in Fisher estimate");
        s.noalias() += g * g.transpose();
    }
    s /= double(e.size());
    if (ledger) {
        ledger->add_gradient_calls(std::uint64_t(e.size()));
        ledger->add_other(2.0 * double(e.size()) * double(e.dim() * e.dim()));
    }
    return detail::checked_estimate(symmetrize(s), pol, "Fisher estimate");
}

// Spectral norm of M_ref^{-1/2} M_hat M_ref^{-1/2} - I.
inline double relative_error(const SpdMatrix& M_hat, const SpdMatrix& M_ref) {
    if (M_hat.dim() != M_ref.dim()) throw Error(ErrorCode::dimension_mismatch, "matrices have different dimensions");
    const auto es = sym_eig(whiten(M_ref, M_hat.matrix()));
    return std::max(std::abs(es.eigenvalues()(0) - 1.0), std::abs(es.eigenvalues()(M_hat.dim() - 1) - 1.0));
}

struct Certificate {
    double relative_error = 0;
    double Delta = 0;
    bool certified = false;
};

inline Certificate certify(const SpdMatrix& M_hat, const SpdMatrix& M_ref, double Delta,
                           const NumericPolicy& pol = default_policy()) {
    const double r = relative_error(M_hat, M_ref);
    return {r, Delta, r <= Delta + pol.certify_tol};
}

}  // namespace plmc
