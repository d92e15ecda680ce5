#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <boost/math/constants/constants.hpp>

#include "analytic.hpp"
#include "fixtures.hpp"
#include "lassopsi/errors.hpp"
#include "lassopsi/inference.hpp"

namespace lassopsi {
namespace {

using testing::make_instance;

// Pooled draws of q columns, `groups` equal chains, each column N(shift_k, 1).
ConditionedDraws synthetic_draws(int groups, int per_group, int q, std::uint64_t seed,
                                 double spread = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ConditionedDraws d;
    d.nu_star.resize(groups * per_group, q);
    for (int k = 0; k < groups; ++k) {
        const double shift = spread * normal(rng);
        for (int i = 0; i < per_group; ++i) {
            for (int j = 0; j < q; ++j) d.nu_star(k * per_group + i, j) = shift + normal(rng);
            d.k_index.push_back(k);
        }
    }
    return d;
}

TEST(Inference, ChiSquareQuantiles) {
    EXPECT_NEAR(chi_square_quantile(1, 0.975), 5.023886187314888, 1e-10);
    EXPECT_NEAR(chi_square_quantile(2, 0.95), -2.0 * std::log(0.05), 1e-10);
    EXPECT_NEAR(chi_square_quantile(10, 0.5), 9.341817765591966, 1e-10);
    EXPECT_THROW(chi_square_quantile(0, 0.5), Error);
}

TEST(Inference, SingleCoordinateEllipsoid) {
    const int n = 20;
    MatrixXd X = testing::gaussian_matrix(n, 30, 2);
    X.col(5) *= std::sqrt(static_cast<double>(n)) / X.col(5).norm();
    const DesignContext ctx = DesignContext::build(X);
    const VectorXd y = testing::gaussian_vector(n, 3);
    const ConfidenceEllipsoid ell = build_C_A(ctx, y, {5}, 0.49, 0.05);
    EXPECT_NEAR(ell.nu_hat[0], X.col(5).dot(y) / n, 1e-12);
    const double z = 2.241402727604947; // standard normal 1 - 0.05/4 quantile
    const double half = z * 0.7 / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(std::sqrt(ell.radius2 / ell.shape(0, 0)), half, 1e-9);
    const BoundaryDraws bd = sample_boundary(ell, 200, 1);
    for (int k = 0; k < 200; ++k)
        EXPECT_NEAR(std::abs(bd.nu(k, 0) - ell.nu_hat[0]), half, 1e-9);
    const ConfidenceEllipsoid doubled = build_C_A(ctx, y, {5}, 0.98, 0.05);
    EXPECT_NEAR(doubled.radius2, 2.0 * ell.radius2, 1e-12);
}

TEST(Inference, BoundaryDrawsLieOnTheEllipsoid) {
    const auto inst = make_instance(30, 60, 4, 0.3, DesignKind::Toeplitz);
    const ConfidenceEllipsoid ell = build_C_A(inst.ctx, inst.y, inst.fit.active, 1.0, 0.05);
    EXPECT_LT((ell.mu_hat() - ell.X_active * ell.nu_hat).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(ell.quadratic_form(ell.nu_hat), 0.0);
    const BoundaryDraws bd = sample_boundary(ell, 500, 9);
    ASSERT_EQ(bd.nu.rows(), 500);
    ASSERT_EQ(bd.mu.cols(), 500);
    for (int k = 0; k < 500; ++k) {
        const VectorXd nu = bd.nu.row(k).transpose();
        EXPECT_NEAR(ell.quadratic_form(nu), ell.radius2, 1e-10 * std::max(1.0, ell.radius2));
        EXPECT_LT((bd.mu.col(k) - ell.X_active * nu).cwiseAbs().maxCoeff(), 1e-12);
    }
    // Sphere-uniform directions average out to the center.
    const VectorXd mean = bd.nu.colwise().mean().transpose();
    const double scale = std::sqrt(ell.radius2 * ell.shape.inverse().diagonal().maxCoeff());
    EXPECT_LT((mean - ell.nu_hat).cwiseAbs().maxCoeff(), 5.0 * scale / std::sqrt(500.0));
    const BoundaryDraws again = sample_boundary(ell, 500, 9);
    EXPECT_EQ(again.nu, bd.nu);
}

TEST(Inference, TypeSevenQuantile) {
    const std::vector<double> v = {4, 1, 3, 2};
    EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile(v, 0.9), 3.7);
    EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(quantile({7.0}, 0.3), 7.0);
    EXPECT_THROW(quantile({}, 0.5), Error);
    EXPECT_THROW(quantile(v, 1.5), Error);
}

TEST(Inference, RandomizedIntervalArithmetic) {
    ConditionedDraws d;
    d.nu_star.resize(1001, 1);
    for (int i = 0; i <= 1000; ++i) {
        d.nu_star(i, 0) = 3.0 + (i - 500) / 1000.0;
        d.k_index.push_back(0);
    }
    const VectorXd nu_hat = VectorXd::Constant(1, 3.0);
    const IntervalResult r = build_interval_randomized(d, nu_hat, 0, 0.1, 17);
    // Quantiles at 0.025 and 0.975 of the centered draws are -0.475 and 0.475.
    EXPECT_NEAR(r.lower, 3.0 - 0.475, 1e-12);
    EXPECT_NEAR(r.upper, 3.0 + 0.475, 1e-12);
    EXPECT_EQ(r.feature, 17);
    EXPECT_EQ(r.variant, IntervalVariant::Randomized);
    // Shifted draws move the interval the opposite way.
    d.nu_star.array() += 0.1;
    const IntervalResult s = build_interval_randomized(d, nu_hat, 0, 0.1);
    EXPECT_NEAR(s.lower, r.lower - 0.1, 1e-12);
    EXPECT_NEAR(s.upper, r.upper - 0.1, 1e-12);
}

TEST(Inference, PivotIntervalUsesHalfAlpha) {
    MatrixXd nu(101, 1);
    for (int i = 0; i <= 100; ++i) nu(i, 0) = i / 100.0;
    const VectorXd ref = VectorXd::Constant(1, 0.5);
    const VectorXd nu_hat = VectorXd::Constant(1, 2.0);
    const IntervalResult r = build_interval_pivot(nu, ref, nu_hat, 0, 0.2, IntervalVariant::Plugin);
    EXPECT_NEAR(r.lower, 2.0 - 0.4, 1e-12);
    EXPECT_NEAR(r.upper, 2.0 + 0.4, 1e-12);
    EXPECT_EQ(r.variant, IntervalVariant::Plugin);
}

TEST(Inference, ConservativeWithOneChainEqualsRandomized) {
    const ConditionedDraws d = synthetic_draws(1, 800, 2, 5);
    const VectorXd nu_hat = VectorXd::Constant(2, 0.1);
    for (int j = 0; j < 2; ++j) {
        const IntervalResult a = build_interval_randomized(d, nu_hat, j, 0.05);
        const IntervalResult b = build_interval_conservative(d, nu_hat, j, 0.05);
        EXPECT_DOUBLE_EQ(a.lower, b.lower);
        EXPECT_DOUBLE_EQ(a.upper, b.upper);
    }
}

TEST(Inference, ConservativeContainsRandomized) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const ConditionedDraws d = synthetic_draws(20, 500, 3, 100 + seed, 1.0);
        const VectorXd nu_hat = testing::gaussian_vector(3, seed);
        for (int j = 0; j < 3; ++j) {
            const IntervalResult r = build_interval_randomized(d, nu_hat, j, 0.05);
            const IntervalResult c = build_interval_conservative(d, nu_hat, j, 0.05);
            EXPECT_LE(c.lower, r.lower);
            EXPECT_GE(c.upper, r.upper);
        }
    }
}

TEST(Inference, ConservativeContainsRandomizedForNearlyIdenticalChains) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const ConditionedDraws d = synthetic_draws(2, 100, 1, 300 + seed, 0.0);
        const VectorXd nu_hat = VectorXd::Zero(1);
        const IntervalResult r = build_interval_randomized(d, nu_hat, 0, 0.05);
        const IntervalResult c = build_interval_conservative(d, nu_hat, 0, 0.05);
        ASSERT_LE(c.lower, r.lower) << "seed " << seed;
        ASSERT_GE(c.upper, r.upper) << "seed " << seed;
    }
}

TEST(Inference, SmallerAlphaWidens) {
    const ConditionedDraws d = synthetic_draws(10, 300, 2, 7);
    const VectorXd nu_hat = VectorXd::Zero(2);
    double prev_lo = -1e300, prev_hi = 1e300;
    for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.5}) {
        const IntervalResult r = build_interval_randomized(d, nu_hat, 1, alpha);
        EXPECT_GE(r.lower, prev_lo);
        EXPECT_LE(r.upper, prev_hi);
        EXPECT_LT(r.lower, r.upper);
        prev_lo = r.lower;
        prev_hi = r.upper;
    }
}

TEST(Inference, TooFewDrawsAreRejected) {
    const ConditionedDraws d = synthetic_draws(1, kMinDraws - 1, 1, 8);
    const VectorXd nu_hat = VectorXd::Zero(1);
    for (auto call : {+[](const ConditionedDraws& x, const VectorXd& h) {
                          build_interval_randomized(x, h, 0, 0.05);
                      },
                      +[](const ConditionedDraws& x, const VectorXd& h) {
                          build_interval_conservative(x, h, 0, 0.05);
                      },
                      +[](const ConditionedDraws& x, const VectorXd& h) {
                          build_set(x.nu_star, h, MatrixXd::Identity(1, 1), NormDelta::Two, 0.05);
                      }}) {
        try {
            call(d, nu_hat);
            FAIL() << "expected InsufficientDraws";
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InsufficientDraws);
        }
    }
}

TEST(Inference, SingleSelectorSetMatchesAbsoluteQuantile) {
    const ConditionedDraws d = synthetic_draws(4, 250, 3, 11);
    const VectorXd nu_hat = testing::gaussian_vector(3, 12);
    MatrixXd H = MatrixXd::Zero(1, 3);
    H(0, 2) = 1.0;
    std::vector<double> abs_dev;
    for (int i = 0; i < d.size(); ++i) abs_dev.push_back(std::abs(d.nu_star(i, 2) - nu_hat[2]));
    for (NormDelta delta : {NormDelta::Two, NormDelta::Inf}) {
        const SetResult s = build_set(d.nu_star, nu_hat, H, delta, 0.05);
        EXPECT_NEAR(s.radius, quantile(abs_dev, 0.975), 1e-14);
        EXPECT_DOUBLE_EQ(s.diameter, 2.0 * s.radius);
        EXPECT_NEAR(s.log_volume, std::log(2.0 * s.radius), 1e-14);
        EXPECT_DOUBLE_EQ(s.center[0], nu_hat[2]);
        // The half-width bounds both tails of the randomized interval at alpha / 2.
        const IntervalResult r = build_interval_randomized(d, nu_hat, 2, 0.1);
        EXPECT_GE(s.radius, nu_hat[2] - r.lower - 1e-12);
        EXPECT_GE(s.radius, r.upper - nu_hat[2] - 1e-12);
    }
}

TEST(Inference, BallFormulas) {
    const double pi = boost::math::constants::pi<double>();
    EXPECT_DOUBLE_EQ(ball_diameter(1.5, 4, NormDelta::Two), 3.0);
    EXPECT_DOUBLE_EQ(ball_diameter(1.5, 4, NormDelta::Inf), 3.0 * 2.0);
    EXPECT_NEAR(ball_log_volume(2.0, 2, NormDelta::Two), std::log(pi * 4.0), 1e-14);
    EXPECT_NEAR(ball_log_volume(2.0, 3, NormDelta::Two), std::log(4.0 / 3.0 * pi * 8.0), 1e-13);
    EXPECT_NEAR(ball_log_volume(0.5, 3, NormDelta::Inf), 0.0, 1e-15);
    EXPECT_NEAR(ball_log_volume(1.0, 1, NormDelta::Two), std::log(2.0), 1e-15);
    // Large dimensions stay finite in log space.
    EXPECT_TRUE(std::isfinite(ball_log_volume(0.1, 400, NormDelta::Two)));
    SetResult s;
    s.log_volume = ball_log_volume(0.3, 2, NormDelta::Inf);
    EXPECT_NEAR(s.volume(), 0.36, 1e-15);
    EXPECT_NEAR(s.volume_star(4), std::pow(0.36, 0.25), 1e-15);
}

TEST(Inference, JointSetContainment) {
    const ConditionedDraws d = synthetic_draws(5, 200, 3, 13);
    const VectorXd nu_hat = VectorXd::Zero(3);
    const SetResult s =
        build_set(d.nu_star, nu_hat, MatrixXd::Identity(3, 3), NormDelta::Inf, 0.05);
    int inside = 0;
    for (int i = 0; i < d.size(); ++i) inside += s.contains(d.nu_star.row(i).transpose()) ? 1 : 0;
    EXPECT_NEAR(inside / 1000.0, 0.975, 0.002);
    EXPECT_DOUBLE_EQ(s.diameter, 2.0 * s.radius * std::sqrt(3.0));
    EXPECT_DOUBLE_EQ(s.log_volume, 3.0 * std::log(2.0 * s.radius));
}

TEST(Inference, PairSelectors) {
    const auto pairs = pair_selectors(4);
    ASSERT_EQ(pairs.size(), 6u);
    EXPECT_EQ(pairs[0](0, 0), 1.0);
    EXPECT_EQ(pairs[0](1, 1), 1.0);
    EXPECT_EQ(pairs[5](0, 2), 1.0);
    EXPECT_EQ(pairs[5](1, 3), 1.0);
    EXPECT_EQ(pairs[5].sum(), 2.0);
    EXPECT_TRUE(pair_selectors(1).empty());
}

TEST(Inference, VariantAndNormNames) {
    for (auto v : {IntervalVariant::Oracle, IntervalVariant::Plugin, IntervalVariant::Randomized,
                   IntervalVariant::Conservative})
        EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_EQ(parse_norm("inf"), NormDelta::Inf);
    EXPECT_EQ(parse_norm("2"), NormDelta::Two);
    EXPECT_THROW(parse_norm("1"), Error);
}

Algorithm1Options small_options(int threads) {
    Algorithm1Options o;
    o.K = 4;
    o.N = 150;
    o.burn_in = 100;
    o.seed = 99;
    o.threads = threads;
    o.verify_fraction = 1.0;
    return o;
}

TEST(Algorithm1, DeterministicAcrossThreadCounts) {
    const auto inst = make_instance(20, 40, 14, 0.4, DesignKind::Toeplitz);
    const Algorithm1Result a = run_algorithm1(inst.ctx, inst.y, inst.lambda, 1.0, small_options(1));
    const Algorithm1Result b = run_algorithm1(inst.ctx, inst.y, inst.lambda, 1.0, small_options(4));
    EXPECT_EQ(a.draws.nu_star, b.draws.nu_star);
    EXPECT_EQ(a.draws.k_index, b.draws.k_index);
    ASSERT_EQ(a.randomized.size(), inst.fit.active.size());
    for (std::size_t j = 0; j < a.randomized.size(); ++j) {
        EXPECT_EQ(a.randomized[j].lower, b.randomized[j].lower);
        EXPECT_EQ(a.randomized[j].upper, b.randomized[j].upper);
        EXPECT_TRUE(std::isfinite(a.randomized[j].lower) && std::isfinite(a.randomized[j].upper));
        EXPECT_LE(a.conservative[j].lower, a.randomized[j].lower);
        EXPECT_GE(a.conservative[j].upper, a.randomized[j].upper);
        EXPECT_EQ(a.randomized[j].feature, inst.fit.active[j]);
    }
    EXPECT_EQ(a.draws.size(), 600);
    EXPECT_EQ(a.draws.groups(), 4);
    EXPECT_EQ(a.refit.checked, 600);
    EXPECT_EQ(a.refit.mismatched, 0);
}

TEST(Algorithm1, EmptyModelIsReported) {
    const auto inst = make_instance(20, 40, 15);
    const double lambda = 1.01 * lambda_max(inst.ctx, inst.y);
    try {
        run_algorithm1(inst.ctx, inst.y, lambda, 1.0, small_options(1));
        FAIL() << "expected EmptyModel";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyModel);
    }
}

} // namespace
} // namespace lassopsi
