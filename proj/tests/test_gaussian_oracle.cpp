#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "plmc/gaussian_oracle.hpp"
#include "plmc/target_spec.hpp"
#include "support.hpp"

using namespace plmc;
using plmc::testing::random_spd;

TEST(UlaGaussianTransition, ScalarClosedForms) {
    const double lam = 3.0, h = 0.1, a = 1 - h * lam;
    Vec mean(1);
    mean << 0.5;
    Mat prec(1, 1);
    prec << lam;
    const UlaGaussianTransition tr(mean, prec, h);
    for (std::uint64_t k : {0u, 1u, 2u, 7u, 40u}) {
        double noise = 0;
        for (std::uint64_t j = 0; j < k; ++j) noise += 2 * h * std::pow(a, 2.0 * double(j));
        EXPECT_NEAR(tr.noise_cov(k)(0, 0), noise, 1e-14) << k;
        EXPECT_NEAR(tr.power(k)(0, 0), std::pow(a, double(k)), 1e-14) << k;
    }
}

TEST(UlaGaussianTransition, NegativeDriftEigenvalue) {
    Mat prec(1, 1);
    prec << 15.0;  // h lambda = 1.5, so A = -0.5
    const UlaGaussianTransition tr(Vec::Zero(1), prec, 0.1);
    EXPECT_NEAR(tr.power(3)(0, 0), -0.125, 1e-15);
    EXPECT_NEAR(tr.power(2)(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(tr.noise_cov(2)(0, 0), 0.2 * (1 + 0.25), 1e-15);
}

TEST(UlaGaussianTransition, UnstableStepRejected) {
    Mat prec(1, 1);
    prec << 25.0;
    try {
        UlaGaussianTransition(Vec::Zero(1), prec, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::instability);
        EXPECT_EQ(exit_code_for(e.code()), 3);
    }
}

TEST(UlaGaussianTransition, EvolveComposes) {
    RandomStream rng(1);
    const SpdMatrix cov = random_spd(3, 6, rng);
    const UlaGaussianTransition tr(rng.normal_vector(3), cov.inverse_matrix(), 0.05);
    const GaussianLaw start(rng.normal_vector(3), random_spd(3, 3, rng).matrix());
    GaussianLaw stepped = start;
    for (int i = 0; i < 9; ++i) stepped = tr.evolve(stepped, 1);
    const GaussianLaw jumped = tr.evolve(start, 9);
    EXPECT_LT((stepped.mean() - jumped.mean()).norm(), 1e-12);
    EXPECT_LT((stepped.covariance() - jumped.covariance()).norm(), 1e-12);
}

TEST(ExactMarginalLaw, ConvergesToBiasedStationaryLaw) {
    Vec v(2);
    v << 1.0, 0.25;
    const GaussianLaw target(Vec::Zero(2), Mat(v.asDiagonal()));
    const double h = 0.2;
    const GaussianLaw far = exact_marginal_law(target, h, 100000, GaussianLaw::point_mass(Vec::Ones(2)));
    for (int i = 0; i < 2; ++i) {
        const double lam = 1.0 / v(i);
        EXPECT_NEAR(far.covariance()(i, i), 1.0 / (lam * (1 - h * lam / 2)), 1e-12);
        EXPECT_NEAR(far.mean()(i), 0.0, 1e-12);
    }
}

TEST(ExactJointLaw, MatchesSimulatedChain) {
    const Target t = build_target(parse_target_spec("gaussian:d=2,kappa=3,rotate=5"));
    const InitialLaw mu0 = InitialLaw::point(Vec::Constant(2, 1.5));
    const Budget b = plmc::testing::manual_ula_budget(t, 0.1, 4, 2, 3);
    const ChainLaw law = exact_joint_law(t.gaussian_law(), b, mu0.law());
    ASSERT_EQ(law.joint.dim(), 6);
    EXPECT_EQ(law.iterations, (std::vector<std::uint64_t>{4, 6, 8}));

    const int chains = 20000;
    Mat ys(6, chains);
    const RandomStream root(3);
    for (int c = 0; c < chains; ++c) {
        RandomStream rng = root.substream(c);
        Vec x = mu0.mean;
        int col = 0;
        for (int k = 1; k <= 8; ++k) {
            x = ula_step(x, t, 0.1, rng);
            if (k == 4 || k == 6 || k == 8) ys.col(c).segment(2 * col++, 2) = x;
        }
    }
    const Vec mean = ys.rowwise().mean();
    const Mat cen = ys.colwise() - mean;
    const Mat cov = cen * cen.transpose() / double(chains - 1);
    for (int i = 0; i < 6; ++i) {
        const double sd = std::sqrt(law.joint.covariance()(i, i));
        EXPECT_NEAR(mean(i), law.joint.mean()(i), 4 * sd / std::sqrt(double(chains)));
        for (int j = 0; j < 6; ++j) {
            const double sj = std::sqrt(law.joint.covariance()(j, j));
            // Standard error of a sample covariance is at most sd_i sd_j sqrt(2/n).
            EXPECT_NEAR(cov(i, j), law.joint.covariance()(i, j), 4 * sd * sj * std::sqrt(2.0 / chains)) << i << "," << j;
        }
    }
}

TEST(ExactJointLaw, GuardAndPreconditionedCoordinates) {
    const Target t = build_target(parse_target_spec("gaussian:d=2,kappa=3"));
    const InitialLaw mu0 = InitialLaw::at_mode(t);
    Budget b = plan_ula_unpreconditioned(t, 0.3, 3, mu0);
    NumericPolicy tight;
    tight.oracle_max_dim = 5;
    try {
        exact_joint_law(t.gaussian_law(), b, mu0.law(), std::nullopt, tight);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::oracle_too_large);
    }
    const SpdMatrix M = t.analytic_covariance->inverse();
    const ChainLaw pre = exact_joint_law(t.gaussian_law(), b, mu0.law(), M);
    EXPECT_LT((pre.target.covariance() - Mat::Identity(2, 2)).norm(), 1e-12);
}

TEST(Decomposition, ExactMatchesMonteCarloAndBoundsJointW2) {
    RandomStream rng(6);
    for (int rep = 0; rep < 5; ++rep) {
        const SpdMatrix cov = random_spd(2, 5, rng);
        const Target t = make_gaussian_target(rng.normal_vector(2), cov);
        const InitialLaw mu0 = InitialLaw::point(*t.mode + 2 * rng.normal_vector(2));
        const Budget b = plan_ula_unpreconditioned(t, 0.4, 4, mu0);
        const ChainLaw law = exact_joint_law(t.gaussian_law(), b, mu0.law());
        const double exact = decomposition_rhs_exact(law);
        const McEstimate mc = decomposition_rhs_mc(law, 20000, rng.substream(rep));
        EXPECT_NEAR(mc.mean, exact, 4 * mc.se + 1e-12);
        const double w2 = joint_w2(law);
        EXPECT_LE(w2 * w2, exact * (1 + 1e-10));
        EXPECT_LE(exact, 4 * 0.4 * 0.4 * (1 + 1e-10));  // N eps^2
    }
}

TEST(Assignment, MatchesBruteForce) {
    RandomStream rng(12);
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 1 + rep % 6;
        Mat c(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) c(i, j) = rng.uniform();
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = 1e300;
        do {
            double s = 0;
            for (int i = 0; i < n; ++i) s += c(i, perm[i]);
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        EXPECT_NEAR(assignment_min_cost(c), best, 1e-12);
    }
}

TEST(EmpiricalW2, SortedMatchingInOneDimension) {
    RandomStream rng(13);
    Mat x(1, 7), y(1, 7);
    for (int i = 0; i < 7; ++i) x(0, i) = rng.normal(), y(0, i) = rng.normal();
    std::vector<double> xs(x.data(), x.data() + 7), ys(y.data(), y.data() + 7);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double s = 0;
    for (int i = 0; i < 7; ++i) s += (xs[i] - ys[i]) * (xs[i] - ys[i]);
    EXPECT_NEAR(empirical_w2(x, y), std::sqrt(s / 7), 1e-12);
    EXPECT_NEAR(empirical_w2(x, x), 0.0, 1e-12);
}

TEST(ConsequenceChecks, PassForPlannedChainAndRefuseUnverifiedInput) {
    const Target t = build_target(parse_target_spec("gaussian:d=2,kappa=4,rotate=2"));
    const InitialLaw mu0 = InitialLaw::point(Vec::Constant(2, 1.0));
    const double eps = 0.3;
    const Budget b = plan_ula_unpreconditioned(t, eps, 5, mu0);
    const ChainLaw law = exact_joint_law(t.gaussian_law(), b, mu0.law());
    Mat B(1, 2);
    B << 2.0, -1.0;
    Vec c(1);
    c << 0.5;
    const ConsequenceReport rep = aiid_consequence_checks(law, t.gaussian_law(), eps, 400, RandomStream(5), {{B, c}});
    EXPECT_TRUE(rep.all_pass());
    EXPECT_EQ(rep.rows.size(), 5u);
    EXPECT_LE(rep.joint_w2, std::sqrt(5.0) * eps);
    for (const auto& r : rep.rows) EXPECT_TRUE(r.pass) << r.name << " " << r.lhs << " vs " << r.rhs;

    try {
        aiid_consequence_checks(law, t.gaussian_law(), rep.joint_w2 / std::sqrt(5.0) * 0.5, 10, RandomStream(5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::precondition_unverified);
    }
    std::ostringstream os;
    write_consequence_csv(os, {{0, rep}});
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "replication,check,lhs,se,rhs,margin,pass");
}

TEST(UnderdampedPositionLaw, MatchesSimulation) {
    const Target t = build_target(parse_target_spec("gaussian:d=2,kappa=3,rotate=4"));
    const double h = 0.3;
    const Vec x0 = Vec::Constant(2, 1.0), v0 = Vec::Zero(2);
    const GaussianLaw law = exact_underdamped_position_law(t.gaussian_law(), h, 5, x0, v0);
    const int chains = 20000;
    Mat xs(2, chains);
    const RandomStream root(8);
    for (int c = 0; c < chains; ++c) {
        RandomStream rng = root.substream(c);
        PhaseState s{x0, v0};
        for (int k = 0; k < 5; ++k) s = underdamped_step(s, t, h, rng);
        xs.col(c) = s.x;
    }
    const Vec mean = xs.rowwise().mean();
    const Mat cen = xs.colwise() - mean;
    const Mat cov = cen * cen.transpose() / double(chains - 1);
    for (int i = 0; i < 2; ++i) {
        const double sd = std::sqrt(law.covariance()(i, i));
        EXPECT_NEAR(mean(i), law.mean()(i), 4 * sd / std::sqrt(double(chains)));
        EXPECT_NEAR(cov(i, i), law.covariance()(i, i), 4 * sd * sd * std::sqrt(2.0 / chains));
    }
}
