#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "budget.hpp"
#include "kernels.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace plmc {

// k-step law of ULA on N(mu, P^{-1}): X_k = mu + A^k (X_0 - mu) + noise_k with
// A = I - h P and Cov(noise_k) = 2h sum_{j<k} A^{2j}.
class UlaGaussianTransition {
public:
    UlaGaussianTransition(const Vec& mean, const Mat& precision, double h) : mean_(mean), h_(h) {
        if (!(h > 0)) throw Error(ErrorCode::invalid_argument, "step size must be positive");
        auto es = sym_eig(symmetrize(precision));
        q_ = es.eigenvectors();
        lam_ = es.eigenvalues();
        for (Eigen::Index i = 0; i < lam_.size(); ++i) {
            const double a = 1.0 - h * lam_(i);
            if (!(std::abs(a) < 1.0)) {
                std::ostringstream os;
                os << "drift matrix has spectral radius " << std::abs(a) << " >= 1 at h = " << h;
                throw Error(ErrorCode::instability, os.str());
            }
        }
    }

    Eigen::Index dim() const { return mean_.size(); }
    const Vec& mean() const { return mean_; }
    double h() const { return h_; }

    // Eigenvalues of A^k.
    Vec power_eigs(std::uint64_t k) const {
        Vec p(lam_.size());
        for (Eigen::Index i = 0; i < lam_.size(); ++i) p(i) = signed_power(i, double(k));
        return p;
    }

    Mat power(std::uint64_t k) const {
        const Vec p = power_eigs(k);
        return symmetrize(q_ * p.asDiagonal() * q_.transpose());
    }

    Vec noise_eigs(std::uint64_t k) const {
        Vec v(lam_.size());
        for (Eigen::Index i = 0; i < lam_.size(); ++i) {
            const double hl = h_ * lam_(i);
            const double one_minus_a2k = k == 0 ? 0.0 : -std::expm1(2.0 * double(k) * log_abs_a(i));
            v(i) = 2.0 * h_ * one_minus_a2k / (hl * (2.0 - hl));
        }
        return v;
    }

    Mat noise_cov(std::uint64_t k) const {
        const Vec v = noise_eigs(k);
        return symmetrize(q_ * v.asDiagonal() * q_.transpose());
    }

    GaussianLaw evolve(const GaussianLaw& start, std::uint64_t k) const {
        if (k == 0) return start;
        const Mat A = power(k);
        Vec m = mean_ + A * (start.mean() - mean_);
        Mat c = symmetrize(A * start.covariance() * A + noise_cov(k));
        return GaussianLaw(std::move(m), std::move(c));
    }

private:
    double log_abs_a(Eigen::Index i) const {
        const double hl = h_ * lam_(i);
        return hl <= 1.0 ? std::log1p(-hl) : std::log(hl - 1.0);
    }
    double signed_power(Eigen::Index i, double k) const {
        if (k == 0) return 1.0;
        const double mag = std::exp(k * log_abs_a(i));
        const bool negative = h_ * lam_(i) > 1.0 && std::fmod(k, 2.0) == 1.0;
        return negative ? -mag : mag;
    }

    Vec mean_;
    double h_;
    Mat q_;
    Vec lam_;
};

inline GaussianLaw pushforward(const GaussianLaw& p, const Mat& A, const Vec& c) {
    return GaussianLaw(A * p.mean() + c, symmetrize(A * p.covariance() * A.transpose()));
}

inline GaussianLaw pushforward(const GaussianLaw& p, const Mat& A) {
    return pushforward(p, A, Vec::Zero(A.rows()));
}

inline GaussianLaw exact_marginal_law(const GaussianLaw& target, double h, std::uint64_t k, const GaussianLaw& mu0) {
    if (target.dim() != mu0.dim()) throw Error(ErrorCode::dimension_mismatch, "target and initial law dimensions");
    const SpdMatrix cov(target.covariance());
    UlaGaussianTransition tr(target.mean(), cov.inverse_matrix(), h);
    return tr.evolve(mu0, k);
}

inline GaussianLaw product_law(const GaussianLaw& p, Eigen::Index N) {
    const Eigen::Index d = p.dim();
    Vec m(d * N);
    Mat c = Mat::Zero(d * N, d * N);
    for (Eigen::Index t = 0; t < N; ++t) {
        m.segment(t * d, d) = p.mean();
        c.block(t * d, t * d, d, d) = p.covariance();
    }
    return GaussianLaw(std::move(m), std::move(c));
}

struct ChainLaw {
    Eigen::Index d = 0;
    Eigen::Index N = 0;
    Mat drift;         // one-step A
    double noise = 0;  // one-step noise covariance is noise * I
    GaussianLaw target;  // target in the chain's coordinates
    GaussianLaw joint;   // law of (X_1, ..., X_N)
    std::vector<GaussianLaw> marginals;
    std::vector<std::uint64_t> iterations;
    std::uint64_t k_thin = 1;
    Mat thin_power;      // A^{k_thin}
    Mat thin_noise;      // noise covariance accumulated over k_thin steps
};

// Law of the thinned ULA chain. With a preconditioner M, the chain runs on the
// pushforward of the target under y = M^{1/2} x and the law is reported in y.
inline ChainLaw exact_joint_law(const GaussianLaw& target, const Budget& budget, const GaussianLaw& mu0,
                                const std::optional<SpdMatrix>& M = std::nullopt,
                                const NumericPolicy& pol = default_policy()) {
    const Eigen::Index d = target.dim();
    const Eigen::Index N = Eigen::Index(budget.N);
    if (d * N > pol.oracle_max_dim) {
        std::ostringstream os;
        os << "d*N = " << d * N << " exceeds the oracle guard " << pol.oracle_max_dim;
        throw Error(ErrorCode::oracle_too_large, os.str());
    }
    GaussianLaw tgt = target, start = mu0;
    if (M) {
        tgt = pushforward(target, M->sqrt_matrix());
        start = pushforward(mu0, M->sqrt_matrix());
    }
    const SpdMatrix cov(tgt.covariance());
    UlaGaussianTransition tr(tgt.mean(), cov.inverse_matrix(), budget.h);

    ChainLaw out{d, N, tr.power(1), 2 * budget.h, tgt, product_law(tgt, 1), {}, {}, budget.k_thin, tr.power(budget.k_thin),
                 tr.noise_cov(budget.k_thin)};
    out.marginals.reserve(N);
    out.marginals.push_back(tr.evolve(start, budget.k_burn));
    out.iterations.push_back(budget.k_burn);
    for (Eigen::Index t = 1; t < N; ++t) {
        out.marginals.push_back(tr.evolve(out.marginals.back(), budget.k_thin));
        out.iterations.push_back(out.iterations.back() + budget.k_thin);
    }
    Vec m(d * N);
    Mat c(d * N, d * N);
    for (Eigen::Index s = 0; s < N; ++s) {
        m.segment(s * d, d) = out.marginals[s].mean();
        Mat cross = out.marginals[s].covariance();
        c.block(s * d, s * d, d, d) = cross;
        for (Eigen::Index t = s + 1; t < N; ++t) {
            cross = out.thin_power * cross;
            c.block(t * d, s * d, d, d) = cross;
            c.block(s * d, t * d, d, d) = cross.transpose();
        }
    }
    out.joint = GaussianLaw(std::move(m), symmetrize(c));
    return out;
}

// W2 between the chain's joint law and the N-fold product of its target.
inline double joint_w2(const ChainLaw& chain) { return bures_w2(chain.joint, product_law(chain.target, chain.N)); }

// Exact right-hand side of the burn-in/thinning decomposition
// W2(pi, mu0 K^burn)^2 + sum_{t<N} E W2(pi, K^thin(X_t -> .))^2.
inline double decomposition_rhs_exact(const ChainLaw& chain) {
    const auto& pi = chain.target;
    double s = bures_w2_squared(pi, chain.marginals[0]);
    const GaussianLaw kernel_noise(pi.mean(), chain.thin_noise);
    const double cov_part = bures_w2_squared(pi, kernel_noise);
    const Mat& B = chain.thin_power;
    for (Eigen::Index t = 0; t + 1 < chain.N; ++t) {
        const auto& mt = chain.marginals[t];
        const Vec off = mt.mean() - pi.mean();
        const Mat second = mt.covariance() + off * off.transpose();
        s += cov_part + (B * second * B.transpose()).trace();
    }
    return s;
}

struct McEstimate {
    double mean = 0;
    double se = 0;
};

// Same right-hand side with the expectation over X_t estimated by Monte Carlo.
inline McEstimate decomposition_rhs_mc(const ChainLaw& chain, std::uint64_t draws, RandomStream rng) {
    const auto& pi = chain.target;
    const double head = bures_w2_squared(pi, chain.marginals[0]);
    const double cov_part = bures_w2_squared(pi, GaussianLaw(pi.mean(), chain.thin_noise));
    const Mat& B = chain.thin_power;
    std::vector<Mat> roots;
    for (Eigen::Index t = 0; t + 1 < chain.N; ++t) roots.push_back(psd_sqrt(chain.marginals[t].covariance()));
    double sum = 0, sum2 = 0;
    for (std::uint64_t i = 0; i < draws; ++i) {
        double v = head;
        for (Eigen::Index t = 0; t + 1 < chain.N; ++t) {
            const Vec x = chain.marginals[t].mean() + roots[t] * rng.normal_vector(chain.d);
            v += cov_part + (B * (x - pi.mean())).squaredNorm();
        }
        sum += v;
        sum2 += v * v;
    }
    const double n = double(draws);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
    return {mean, std::sqrt(var / n)};
}

// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
inline double assignment_min_cost(const Mat& cost) {
    const int n = int(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0;
    for (int j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
    return total;
}

// W2 between two uniform empirical measures with the same number of atoms (columns).
inline double empirical_w2(const Mat& x, const Mat& y) {
    const Eigen::Index n = x.cols();
    Mat c(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) c(i, j) = (x.col(i) - y.col(j)).squaredNorm();
    return std::sqrt(std::max(0.0, assignment_min_cost(c)) / double(n));
}

struct ConsequenceRow {
    std::string name;
    double lhs = 0;
    double se = 0;  // Monte Carlo standard error of lhs (0 for exact rows)
    double rhs = 0;
    bool pass = false;
    double margin() const { return rhs - lhs; }
};

struct ConsequenceReport {
    double eps = 0;
    double joint_w2 = 0;
    std::uint64_t draws = 0;
    std::vector<ConsequenceRow> rows;
    bool all_pass() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }
};

struct LinearMap {
    Mat B;
    Vec c;
};

inline ConsequenceReport aiid_consequence_checks(const ChainLaw& chain, const GaussianLaw& target, double eps,
                                                 std::uint64_t mc_draws, RandomStream rng,
                                                 std::vector<LinearMap> maps = {}, double z = 3.0,
                                                 const NumericPolicy& pol = default_policy()) {
    const Eigen::Index d = chain.d, N = chain.N;
    if (target.dim() != d) throw Error(ErrorCode::dimension_mismatch, "target dimension");
    if (mc_draws < 2) throw Error(ErrorCode::invalid_argument, "need at least two Monte Carlo draws");
    const GaussianLaw prod = product_law(target, N);
    ConsequenceReport rep;
    rep.eps = eps;
    rep.draws = mc_draws;
    rep.joint_w2 = bures_w2(chain.joint, prod);
    const double sqn = std::sqrt(double(N));
    if (rep.joint_w2 > sqn * eps + pol.oracle_slack) {
        std::ostringstream os;
        os << "chain is not sqrt(N) eps approximately IID: W2 = " << rep.joint_w2 << " > " << sqn * eps;
        throw Error(ErrorCode::precondition_unverified, os.str());
    }

    const double tr = target.covariance().trace();
    const double str = std::sqrt(tr);
    const AffineMap T = optimal_coupling_map(prod, chain.joint, pol);
    const Mat root = psd_sqrt(target.covariance());

    struct Acc {
        double s = 0, s2 = 0;
        void add(double v) { s += v, s2 += v * v; }
        McEstimate est(double n) const {
            const double m = s / n;
            return {m, std::sqrt(std::max(0.0, (s2 - n * m * m) / (n - 1)) / n)};
        }
    } mean_err, w2_emp, cov_diff;
    std::vector<Vec> bars;
    bars.reserve(mc_draws);
    Vec y(d * N);
    Mat xs(d, N), ys(d, N);
    for (std::uint64_t i = 0; i < mc_draws; ++i) {
        for (Eigen::Index t = 0; t < N; ++t) y.segment(t * d, d) = target.mean() + root * rng.normal_vector(d);
        const Vec x = T(y);
        for (Eigen::Index t = 0; t < N; ++t) {
            xs.col(t) = x.segment(t * d, d);
            ys.col(t) = y.segment(t * d, d);
        }
        const Vec bar = xs.rowwise().mean();
        bars.push_back(bar);
        mean_err.add((bar - target.mean()).squaredNorm());
        w2_emp.add(empirical_w2(xs, ys));
        const Mat xc = xs.colwise() - target.mean();
        const Mat yc = ys.colwise() - target.mean();
        cov_diff.add(((xc * xc.transpose() - yc * yc.transpose()) / double(N)).norm());
    }
    const double n = double(mc_draws);

    auto push = [&](std::string name, McEstimate e, double rhs) {
        rep.rows.push_back({std::move(name), e.mean, e.se, rhs, e.mean - z * e.se <= rhs});
    };
    push("sample mean error", mean_err.est(n), std::pow(eps + std::sqrt(tr / double(N)), 2));

    Vec bar_mean = Vec::Zero(d);
    for (const auto& b : bars) bar_mean += b;
    bar_mean /= n;
    Acc var_acc;
    for (const auto& b : bars) var_acc.add((b - bar_mean).squaredNorm());
    McEstimate var_est = var_acc.est(n);
    var_est.mean *= n / (n - 1);
    var_est.se *= n / (n - 1);
    push("sample mean variance", var_est, (std::pow(str + eps, 2)) / double(N) + (2 * str + eps) * eps);
    push("empirical measure W2", w2_emp.est(n), eps);
    push("second moment difference", cov_diff.est(n), 2 * str * eps + eps * eps);

    if (maps.empty()) maps.push_back({Mat::Identity(d, d), Vec::Zero(d)});
    for (std::size_t k = 0; k < maps.size(); ++k) {
        const auto& F = maps[k];
        const Eigen::Index r = F.B.rows();
        Mat big = Mat::Zero(r * N, d * N);
        Vec off(r * N);
        for (Eigen::Index t = 0; t < N; ++t) {
            big.block(t * r, t * d, r, d) = F.B;
            off.segment(t * r, r) = F.c;
        }
        const GaussianLaw fx = pushforward(chain.joint, big, off);
        const GaussianLaw fpi = pushforward(target, F.B, F.c);
        const double lhs = bures_w2(fx, product_law(fpi, N));
        const double lip = Eigen::JacobiSVD<Mat>(F.B).singularValues()(0);
        const double rhs = sqn * lip * eps;
        rep.rows.push_back({"linear map " + std::to_string(k) + " W2", lhs, 0.0, rhs, lhs <= rhs + pol.oracle_slack});
    }
    return rep;
}

inline void write_consequence_csv(std::ostream& os, const std::vector<std::pair<int, ConsequenceReport>>& reps,
                                  bool header = true) {
    if (header) os << "replication,check,lhs,se,rhs,margin,pass\n";
    char buf[256];
    for (const auto& [rep_id, rep] : reps)
        for (const auto& r : rep.rows) {
            std::snprintf(buf, sizeof buf, "%d,\"%s\",%.17g,%.17g,%.17g,%.17g,%d\n", rep_id, r.name.c_str(), r.lhs, r.se,
                          r.rhs, r.margin(), int(r.pass));
            os << buf;
        }
}

// Position marginal of the kinetic Langevin integrator on a Gaussian target,
// propagated exactly through the (x, v) linear recursion.
inline GaussianLaw exact_underdamped_position_law(const GaussianLaw& target, double h, std::uint64_t k, const Vec& x0,
                                                  const Vec& v0, const UnderdampedOptions& opt = {}) {
    const Eigen::Index d = target.dim();
    const SpdMatrix cov(target.covariance());
    const Mat& P = cov.inverse_matrix();
    const double f = opt.friction;
    const double u = opt.velocity_scale.value_or(1.0 / cov.inverse().lambda_max());
    const double z = f * h;
    const double a = -std::expm1(-z);
    const double cx = u / (f * f) * detail::expm1_plus_z(z);
    const double cv = u / f * a;
    Mat F = Mat::Zero(2 * d, 2 * d);
    const Mat I = Mat::Identity(d, d);
    F.topLeftCorner(d, d) = I - cx * P;
    F.topRightCorner(d, d) = (a / f) * I;
    F.bottomLeftCorner(d, d) = -cv * P;
    F.bottomRightCorner(d, d) = (1 - a) * I;
    Vec shift(2 * d);
    shift.head(d) = cx * (P * target.mean());
    shift.tail(d) = cv * (P * target.mean());
    Mat Q = Mat::Zero(2 * d, 2 * d);
    const double vx = u / (f * f) * detail::ud_position_var_factor(z), cxv = u / f * a * a, vv = u * a * (2 - a);
    Q.topLeftCorner(d, d) = vx * I;
    Q.topRightCorner(d, d) = cxv * I;
    Q.bottomLeftCorner(d, d) = cxv * I;
    Q.bottomRightCorner(d, d) = vv * I;
    Vec m(2 * d);
    m << x0, v0;
    Mat C = Mat::Zero(2 * d, 2 * d);
    for (std::uint64_t i = 0; i < k; ++i) {
        m = F * m + shift;
        C = symmetrize(F * C * F.transpose() + Q);
    }
    return GaussianLaw(m.head(d), C.topLeftCorner(d, d));
}

}  // namespace plmc
