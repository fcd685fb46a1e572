#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include "errors.hpp"
#include "numeric_policy.hpp"

namespace plmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline void require_square(const Mat& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw Error(ErrorCode::dimension_mismatch, std::string(what) + " must be a non-empty square matrix");
}

inline bool is_symmetric(const Mat& a, const NumericPolicy& pol = default_policy()) {
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > pol.symmetry_tol * std::max(1.0, std::abs(a(i, j))))
                return false;
    return true;
}

// Eigendecomposition of a symmetric matrix with eigenvalues in ascending order.
inline Eigen::SelfAdjointEigenSolver<Mat> sym_eig(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    if (es.info() != Eigen::Success)
        throw Error(ErrorCode::factorization_failure, "symmetric eigendecomposition did not converge");
    return es;
}

// V f(Lambda) V^T for a symmetric matrix.
template <class F>
Mat sym_apply(const Eigen::SelfAdjointEigenSolver<Mat>& es, F f) {
    Vec fl = es.eigenvalues().unaryExpr(f);
    return symmetrize(es.eigenvectors() * fl.asDiagonal() * es.eigenvectors().transpose());
}

// Square root of a symmetric positive semidefinite matrix; tiny negative
// eigenvalues from rounding are clamped to zero.
inline Mat psd_sqrt(const Mat& a) {
    auto es = sym_eig(symmetrize(a));
    return sym_apply(es, [](double x) { return x > 0 ? std::sqrt(x) : 0.0; });
}

inline double psd_sqrt_trace(const Mat& a) {
    auto es = sym_eig(symmetrize(a));
    double s = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        s += es.eigenvalues()(i) > 0 ? std::sqrt(es.eigenvalues()(i)) : 0.0;
    return s;
}

class SpdMatrix {
public:
    explicit SpdMatrix(const Mat& a, const NumericPolicy& pol = default_policy()) {
        require_square(a, "SPD matrix");
        if (!a.allFinite()) throw Error(ErrorCode::invalid_argument, "SPD matrix has non-finite entries");
        if (!is_symmetric(a, pol)) throw Error(ErrorCode::not_symmetric, "matrix is not symmetric");
        auto d = std::make_shared<Data>();
        d->a = symmetrize(a);
        auto es = sym_eig(d->a);
        d->evals = es.eigenvalues();
        d->evecs = es.eigenvectors();
        const double lo = d->evals(0), hi = d->evals(d->evals.size() - 1);
        if (!(lo > 0) || lo <= pol.spd_relative_floor * hi) {
            std::ostringstream os;
            os << "smallest eigenvalue " << lo << " is not above " << pol.spd_relative_floor
               << " * largest eigenvalue " << hi;
            throw Error(ErrorCode::not_positive_definite, os.str());
        }
        d->sqrt = sym_apply(es, [](double x) { return std::sqrt(x); });
        d->inv_sqrt = sym_apply(es, [](double x) { return 1.0 / std::sqrt(x); });
        d->inv = sym_apply(es, [](double x) { return 1.0 / x; });
        Eigen::LLT<Mat> llt(d->a);
        if (llt.info() != Eigen::Success)
            throw Error(ErrorCode::factorization_failure, "Cholesky factorization failed");
        d->chol = llt.matrixL();
        data_ = std::move(d);
    }

    static SpdMatrix identity(Eigen::Index d) { return SpdMatrix(Mat::Identity(d, d)); }
    static SpdMatrix diagonal(const Vec& v) { return SpdMatrix(Mat(v.asDiagonal())); }

    Eigen::Index dim() const { return data_->a.rows(); }
    const Mat& matrix() const { return data_->a; }
    const Mat& cholesky_lower() const { return data_->chol; }
    const Mat& sqrt_matrix() const { return data_->sqrt; }
    const Mat& inv_sqrt_matrix() const { return data_->inv_sqrt; }
    const Mat& inverse_matrix() const { return data_->inv; }
    const Vec& eigenvalues() const { return data_->evals; }  // ascending
    const Mat& eigenvectors() const { return data_->evecs; }
    double lambda_min() const { return data_->evals(0); }
    double lambda_max() const { return data_->evals(data_->evals.size() - 1); }
    double trace() const { return data_->a.trace(); }

    SpdMatrix inverse() const { return SpdMatrix(data_->inv); }
    SpdMatrix scaled(double c) const {
        if (!(c > 0)) throw Error(ErrorCode::invalid_argument, "scale must be positive");
        return SpdMatrix(c * data_->a);
    }

private:
    struct Data {
        Mat a, chol, sqrt, inv_sqrt, inv, evecs;
        Vec evals;
    };
    std::shared_ptr<const Data> data_;
};

inline SpdMatrix spd_sqrt(const SpdMatrix& a) { return SpdMatrix(a.sqrt_matrix()); }

inline std::pair<double, double> spectral_bounds(const SpdMatrix& a) {
    return {a.lambda_min(), a.lambda_max()};
}

// Symmetric M^{-1/2} A M^{-1/2}.
inline Mat whiten(const SpdMatrix& m, const Mat& a) {
    return symmetrize(m.inv_sqrt_matrix() * a * m.inv_sqrt_matrix());
}

// Gaussian law whose covariance may be singular (point masses and chain laws
// started from a point are legitimate inputs to the oracle).
class GaussianLaw {
public:
    GaussianLaw(Vec mean, Mat cov, const NumericPolicy& pol = default_policy())
        : mean_(std::move(mean)), cov_(std::move(cov)) {
        require_square(cov_, "covariance");
        if (cov_.rows() != mean_.size())
            throw Error(ErrorCode::dimension_mismatch, "mean and covariance sizes differ");
        if (!cov_.allFinite() || !mean_.allFinite())
            throw Error(ErrorCode::invalid_argument, "Gaussian law has non-finite parameters");
        if (!is_symmetric(cov_, pol)) throw Error(ErrorCode::not_symmetric, "covariance is not symmetric");
        cov_ = symmetrize(cov_);
        auto es = sym_eig(cov_);
        const double hi = std::max(0.0, es.eigenvalues().maxCoeff());
        if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, hi))
            throw Error(ErrorCode::not_positive_definite, "covariance is not positive semidefinite");
    }
    GaussianLaw(Vec mean, const SpdMatrix& cov) : GaussianLaw(std::move(mean), cov.matrix()) {}

    static GaussianLaw point_mass(const Vec& x) {
        return GaussianLaw(x, Mat::Zero(x.size(), x.size()));
    }

    Eigen::Index dim() const { return mean_.size(); }
    const Vec& mean() const { return mean_; }
    const Mat& covariance() const { return cov_; }

private:
    Vec mean_;
    Mat cov_;
};

inline double bures_w2_squared(const GaussianLaw& p, const GaussianLaw& q) {
    if (p.dim() != q.dim()) throw Error(ErrorCode::dimension_mismatch, "laws have different dimensions");
    const Mat qs = psd_sqrt(q.covariance());
    const double cross = psd_sqrt_trace(qs * p.covariance() * qs);
    const double w2 = (p.mean() - q.mean()).squaredNorm() + p.covariance().trace() +
                      q.covariance().trace() - 2.0 * cross;
    return std::max(0.0, w2);
}

inline double bures_w2(const GaussianLaw& p, const GaussianLaw& q) {
    return std::sqrt(bures_w2_squared(p, q));
}

struct AffineMap {
    Mat T;
    Vec c;
    Vec operator()(const Vec& x) const { return T * x + c; }
};

// Monge map pushing p onto q: x -> T x + c.
inline AffineMap optimal_coupling_map(const GaussianLaw& p, const GaussianLaw& q,
                                      const NumericPolicy& pol = default_policy()) {
    if (p.dim() != q.dim()) throw Error(ErrorCode::dimension_mismatch, "laws have different dimensions");
    auto es = sym_eig(p.covariance());
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(es.eigenvalues().size() - 1);
    if (!(lo > 0) || lo <= pol.spd_relative_floor * hi)
        throw Error(ErrorCode::factorization_failure, "source covariance is singular");
    const Mat ps = sym_apply(es, [](double x) { return std::sqrt(x); });
    const Mat pis = sym_apply(es, [](double x) { return 1.0 / std::sqrt(x); });
    const Mat mid = psd_sqrt(ps * q.covariance() * ps);
    Mat t = symmetrize(pis * mid * pis);
    Vec c = q.mean() - t * p.mean();
    return {std::move(t), std::move(c)};
}

// Plain-text format: a header line "spd <d>" followed by d rows of d numbers.
inline void write_spd_text(std::ostream& os, const Mat& a) {
    os << "spd " << a.rows() << "\n";
    char buf[40];
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
            os << (j ? " " : "") << buf;
        }
        os << "\n";
    }
}

inline void write_spd_text(std::ostream& os, const SpdMatrix& a) { write_spd_text(os, a.matrix()); }

inline SpdMatrix read_spd_text(std::istream& is) {
    std::string tag;
    long d = 0;
    if (!(is >> tag >> d) || tag != "spd" || d <= 0)
        throw Error(ErrorCode::io, "expected header 'spd <d>'");
    Mat a(d, d);
    for (long i = 0; i < d; ++i)
        for (long j = 0; j < d; ++j)
            if (!(is >> a(i, j))) throw Error(ErrorCode::io, "truncated SPD matrix body");
    std::string extra;
    if (is >> extra) throw Error(ErrorCode::io, "trailing content after SPD matrix body");
    return SpdMatrix(a);
}

}  // namespace plmc
