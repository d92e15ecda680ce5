#pragma once

#include <cstdint>
#include <vector>

#include "lassopsi/linalg_geometry.hpp"
#include "lassopsi/types.hpp"

namespace lassopsi {

struct LassoOptions {
    int max_sweeps = 100000;
    // Coordinate descent stops once the KKT violation falls below
    // tol * max(1, ||X^T y / n||_inf).
    double tol = 1e-12;
    double kkt_tol = 1e-8;
    // Subgradient entries within clamp_tol outside [-1, 1] are clamped.
    double clamp_tol = 1e-10;
};

struct LassoSolution {
    VectorXd beta;
    VectorXd subgradient; // S
    IndexSet active;      // {j : beta_j != 0}
    double lambda = 0.0;
    double kkt_residual = 0.0;
    int sweeps = 0;

    VectorXd active_signs() const;
    VectorXd active_coefficients() const;
};

/// Weighted lasso in Gram form:
///   minimize 1/2 b^T gram b - xty_n^T b + lambda * sum_j w_j |b_j|,
/// which for gram = X^T X / n and xty_n = X^T y / n is the usual
/// (1/2n)||y - X b||^2 + lambda ||W b||_1 up to a constant.
/// Cyclic coordinate descent with covariance updates.
LassoSolution solve_lasso_gram(const MatrixXd& gram, const VectorXd& xty_n,
                               const VectorXd& weights, double lambda,
                               const LassoOptions& options = {},
                               const VectorXd* warm_start = nullptr);

LassoSolution fit_lasso(const DesignContext& ctx, const VectorXd& y, double lambda,
                        const LassoOptions& options = {}, const VectorXd* warm_start = nullptr);

double lasso_objective(const MatrixXd& X, const VectorXd& y, const VectorXd& weights,
                       const VectorXd& beta, double lambda);

/// Smallest lambda with an all-zero solution: max_j |X_j^T y| / (n w_j).
double lambda_max(const DesignContext& ctx, const VectorXd& y);

/// Decreasing grid lambda_max * (count - i) / count, i = 0..count-1.
std::vector<double> lambda_grid(const DesignContext& ctx, const VectorXd& y, int count);

struct CvOptions {
    int folds = 10;
    std::uint64_t seed = 0;
    LassoOptions lasso;
};

struct CvResult {
    double lambda = 0.0;
    int index = 0;             // position of lambda in the grid
    int min_index = 0;         // position of the minimum mean error
    std::vector<double> mean_error;
    std::vector<double> standard_error;
};

/// K-fold cross-validation with squared prediction error and the one
/// standard error rule: the largest lambda whose mean error is within one
/// standard error of the minimum.
CvResult cross_validate(const DesignContext& ctx, const VectorXd& y,
                        const std::vector<double>& grid, const CvOptions& options = {});

double cv_lambda_1se(const DesignContext& ctx, const VectorXd& y, int folds,
                     const std::vector<double>& grid, std::uint64_t seed = 0);

} // namespace lassopsi
