#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "lassopsi/errors.hpp"
#include "lassopsi/lasso.hpp"

namespace lassopsi {
namespace {

using testing::gaussian_matrix;
using testing::gaussian_vector;

// Independent oracle: accelerated proximal gradient on the same objective.
VectorXd fista(const MatrixXd& X, const VectorXd& y, const VectorXd& w, double lambda, int iters) {
    const double n = static_cast<double>(X.rows());
    const MatrixXd gram = X.transpose() * X / n;
    const VectorXd c = X.transpose() * y / n;
    const double L = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram).eigenvalues().maxCoeff();
    VectorXd beta = VectorXd::Zero(X.cols()), z = beta, prev = beta;
    double t = 1.0;
    for (int k = 0; k < iters; ++k) {
        const VectorXd g = z + (c - gram * z) / L;
        for (Eigen::Index j = 0; j < g.size(); ++j) {
            const double th = lambda * w[j] / L;
            beta[j] = g[j] > th ? g[j] - th : (g[j] < -th ? g[j] + th : 0.0);
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = beta + ((t - 1.0) / t_next) * (beta - prev);
        prev = beta;
        t = t_next;
    }
    return beta;
}

TEST(Lasso, OneDimensionalSoftThreshold) {
    // ||X_1||^2 = n and X_1^T y / n = 0.8, lambda = 0.3 -> beta = 0.5.
    MatrixXd X(4, 1);
    X << 1, 1, 1, 1;
    VectorXd y(4);
    y << 0.8, 0.8, 0.8, 0.8;
    const DesignContext ctx = DesignContext::build_low_dimensional(X);
    const LassoSolution sol = fit_lasso(ctx, y, 0.3);
    EXPECT_NEAR(sol.beta[0], 0.5, 1e-12);
    EXPECT_EQ(sol.active, IndexSet{0});
    EXPECT_DOUBLE_EQ(sol.subgradient[0], 1.0);
}

TEST(Lasso, MatchesProximalGradientOracle) {
    const MatrixXd X = gaussian_matrix(5, 10, 41);
    const VectorXd y = gaussian_vector(5, 42);
    const DesignContext ctx = DesignContext::build(X);
    const double lambda = 0.4 * lambda_max(ctx, y);
    const LassoSolution sol = fit_lasso(ctx, y, lambda);
    const VectorXd oracle = fista(X, y, VectorXd::Ones(10), lambda, 200000);
    EXPECT_LT((sol.beta - oracle).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(lasso_objective(X, y, VectorXd::Ones(10), sol.beta, lambda),
              lasso_objective(X, y, VectorXd::Ones(10), oracle, lambda) + 1e-12);
}

TEST(Lasso, WeightedMatchesOracle) {
    const MatrixXd X = gaussian_matrix(6, 12, 43);
    const VectorXd y = gaussian_vector(6, 44);
    VectorXd w(12);
    for (int j = 0; j < 12; ++j) w[j] = 0.5 + 0.1 * j;
    const DesignContext ctx = DesignContext::build(X, w);
    const double lambda = 0.3 * lambda_max(ctx, y);
    const LassoSolution sol = fit_lasso(ctx, y, lambda);
    EXPECT_LT((sol.beta - fista(X, y, w, lambda, 200000)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(sol.kkt_residual, 1e-8);
}

TEST(Lasso, KktExactnessOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const MatrixXd X = gaussian_matrix(20, 40, 100 + seed);
        const VectorXd y = gaussian_vector(20, 200 + seed);
        const DesignContext ctx = DesignContext::build(X);
        const LassoSolution sol = fit_lasso(ctx, y, 0.2 * lambda_max(ctx, y));
        EXPECT_LE(sol.kkt_residual, 1e-8);
        EXPECT_LE(sol.subgradient.cwiseAbs().maxCoeff(), 1.0);
        for (int j : sol.active) EXPECT_EQ(std::abs(sol.subgradient[j]), 1.0);
        // Independent KKT check from the raw data.
        const VectorXd grad = X.transpose() * (y - X * sol.beta) / 20.0;
        EXPECT_LT((grad - sol.lambda * sol.subgradient).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Lasso, LambdaAtMaxGivesEmptyModel) {
    const MatrixXd X = gaussian_matrix(5, 10, 5);
    const VectorXd y = gaussian_vector(5, 6);
    const DesignContext ctx = DesignContext::build(X);
    const double top = lambda_max(ctx, y);
    EXPECT_NEAR(top, (X.transpose() * y).cwiseAbs().maxCoeff() / 5.0, 1e-14);
    EXPECT_TRUE(fit_lasso(ctx, y, top).active.empty());
    EXPECT_FALSE(fit_lasso(ctx, y, 0.99 * top).active.empty());
}

TEST(Lasso, InvalidLambdaRejected) {
    const DesignContext ctx = DesignContext::build(gaussian_matrix(3, 6, 1));
    EXPECT_THROW(fit_lasso(ctx, VectorXd::Ones(3), 0.0), Error);
    EXPECT_THROW(fit_lasso(ctx, VectorXd::Ones(3), -1.0), Error);
    EXPECT_THROW(fit_lasso(ctx, VectorXd::Ones(4), 0.1), Error);
}

TEST(Lasso, NoConvergenceReported) {
    const MatrixXd X = gaussian_matrix(20, 40, 8);
    const VectorXd y = gaussian_vector(20, 9);
    const DesignContext ctx = DesignContext::build(X);
    LassoOptions opts;
    opts.max_sweeps = 1;
    try {
        fit_lasso(ctx, y, 0.01 * lambda_max(ctx, y), opts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    }
}

TEST(Lasso, GridIsEquallySpacedDownFromLambdaMax) {
    const MatrixXd X = gaussian_matrix(5, 10, 5);
    const VectorXd y = gaussian_vector(5, 6);
    const DesignContext ctx = DesignContext::build(X);
    const auto grid = lambda_grid(ctx, y, 20);
    ASSERT_EQ(grid.size(), 20u);
    EXPECT_DOUBLE_EQ(grid.front(), lambda_max(ctx, y));
    for (std::size_t i = 1; i < grid.size(); ++i)
        EXPECT_NEAR(grid[i - 1] - grid[i], grid.front() / 20.0, 1e-12);
    EXPECT_GT(grid.back(), 0.0);
    EXPECT_THROW(lambda_grid(ctx, VectorXd::Zero(5), 20), Error);
}

TEST(Lasso, CrossValidationOneStandardErrorRule) {
    const auto inst = testing::make_instance(50, 100, 77);
    const auto grid = lambda_grid(inst.ctx, inst.y, 30);
    CvOptions opts;
    opts.seed = 3;
    const CvResult a = cross_validate(inst.ctx, inst.y, grid, opts);
    const CvResult b = cross_validate(inst.ctx, inst.y, grid, opts);
    EXPECT_EQ(a.lambda, b.lambda);
    EXPECT_EQ(a.mean_error, b.mean_error);
    // Chosen lambda is the largest within one SE of the minimum.
    const double threshold = a.mean_error[a.min_index] + a.standard_error[a.min_index];
    EXPECT_LE(a.mean_error[a.index], threshold);
    for (std::size_t l = 0; l < grid.size(); ++l)
        if (grid[l] > a.lambda) EXPECT_GT(a.mean_error[l], threshold);
    EXPECT_GE(a.lambda, grid[a.min_index]);
}

} // namespace
} // namespace lassopsi
