#include "lassopsi/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "lassopsi/errors.hpp"

namespace lassopsi {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double kkt_violation(const VectorXd& grad, const VectorXd& beta, const VectorXd& w,
                     double lambda) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double pen = lambda * w[j];
        double v;
        if (beta[j] > 0) v = std::abs(grad[j] - pen);
        else if (beta[j] < 0) v = std::abs(grad[j] + pen);
        else v = std::max(0.0, std::abs(grad[j]) - pen);
        worst = std::max(worst, v);
    }
    return worst;
}

} // namespace

VectorXd LassoSolution::active_signs() const {
    return sign_of(take(beta, active));
}

VectorXd LassoSolution::active_coefficients() const { return take(beta, active); }

LassoSolution solve_lasso_gram(const MatrixXd& gram, const VectorXd& xty_n,
                               const VectorXd& weights, double lambda,
                               const LassoOptions& options, const VectorXd* warm_start) {
    const Eigen::Index p = gram.cols();
    require(gram.rows() == p && xty_n.size() == p && weights.size() == p,
            ErrorCode::InvalidArgument, "lasso inputs have inconsistent sizes");
    require(lambda > 0 && std::isfinite(lambda), ErrorCode::InvalidArgument,
            "lambda must be positive");

    VectorXd beta = VectorXd::Zero(p);
    if (warm_start != nullptr) {
        require(warm_start->size() == p, ErrorCode::InvalidArgument, "warm start has wrong size");
        beta = *warm_start;
    }
    VectorXd grad = xty_n - gram * beta; // X^T (y - X beta) / n
    const double scale = std::max(1.0, xty_n.cwiseAbs().maxCoeff());
    const double stop = options.tol * scale;

    int sweep = 0;
    bool converged = false;
    while (sweep < options.max_sweeps) {
        ++sweep;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double diag = gram(j, j);
            const double old = beta[j];
            double updated = 0.0;
            if (diag > 0) updated = soft_threshold(grad[j] + diag * old, lambda * weights[j]) / diag;
            const double delta = updated - old;
            if (delta != 0.0) {
                beta[j] = updated;
                grad.noalias() -= delta * gram.col(j);
            }
        }
        if (kkt_violation(grad, beta, weights, lambda) <= stop) {
            grad = xty_n - gram * beta;
            if (kkt_violation(grad, beta, weights, lambda) <= stop) {
                converged = true;
                break;
            }
        }
    }
    if (!converged) {
        fail(ErrorCode::NoConvergence,
             "coordinate descent did not converge in " + std::to_string(options.max_sweeps) +
                 " sweeps");
    }

    LassoSolution sol;
    sol.lambda = lambda;
    sol.sweeps = sweep;
    sol.subgradient.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (beta[j] != 0.0) {
            sol.active.push_back(static_cast<int>(j));
            sol.subgradient[j] = beta[j] > 0 ? 1.0 : -1.0;
            continue;
        }
        double s = grad[j] / (lambda * weights[j]);
        if (std::abs(s) > 1.0) {
            require(std::abs(s) - 1.0 <= options.clamp_tol, ErrorCode::NoConvergence,
                    "subgradient of inactive coordinate " + std::to_string(j) +
                        " outside [-1, 1]");
            s = s > 0 ? 1.0 : -1.0;
        }
        sol.subgradient[j] = s;
    }
    sol.kkt_residual =
        (grad - lambda * weights.cwiseProduct(sol.subgradient)).cwiseAbs().maxCoeff();
    require(sol.kkt_residual <= options.kkt_tol, ErrorCode::NoConvergence,
            "KKT residual " + std::to_string(sol.kkt_residual) + " exceeds tolerance");
    sol.beta = std::move(beta);
    return sol;
}

LassoSolution fit_lasso(const DesignContext& ctx, const VectorXd& y, double lambda,
                        const LassoOptions& options, const VectorXd* warm_start) {
    require(y.size() == ctx.n(), ErrorCode::InvalidArgument, "response has wrong length");
    const VectorXd xty_n = ctx.X().transpose() * y / static_cast<double>(ctx.n());
    return solve_lasso_gram(ctx.gram(), xty_n, ctx.weights(), lambda, options, warm_start);
}

double lasso_objective(const MatrixXd& X, const VectorXd& y, const VectorXd& weights,
                       const VectorXd& beta, double lambda) {
    const double n = static_cast<double>(X.rows());
    return (y - X * beta).squaredNorm() / (2.0 * n) +
           lambda * weights.cwiseProduct(beta.cwiseAbs()).sum();
}

double lambda_max(const DesignContext& ctx, const VectorXd& y) {
    require(y.size() == ctx.n(), ErrorCode::InvalidArgument, "response has wrong length");
    const VectorXd c = ctx.X().transpose() * y / static_cast<double>(ctx.n());
    return c.cwiseAbs().cwiseQuotient(ctx.weights()).maxCoeff();
}

std::vector<double> lambda_grid(const DesignContext& ctx, const VectorXd& y, int count) {
    require(count >= 2, ErrorCode::InvalidArgument, "lambda grid needs at least two points");
    const double top = lambda_max(ctx, y);
    require(top > 0, ErrorCode::DegenerateResponse, "X^T y = 0, lambda_max is zero");
    std::vector<double> grid(count);
    for (int i = 0; i < count; ++i) grid[i] = top * static_cast<double>(count - i) / count;
    return grid;
}

CvResult cross_validate(const DesignContext& ctx, const VectorXd& y,
                        const std::vector<double>& grid, const CvOptions& options) {
    require(!grid.empty(), ErrorCode::InvalidArgument, "empty lambda grid");
    const int n = ctx.n();
    require(options.folds >= 2 && options.folds <= n, ErrorCode::InvalidArgument,
            "need 2 <= folds <= n");
    const int L = static_cast<int>(grid.size());

    CvResult out;
    out.mean_error.assign(L, 0.0);
    out.standard_error.assign(L, 0.0);
    if (L == 1) {
        out.lambda = grid.front();
        return out;
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(options.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(n);
    for (int i = 0; i < n; ++i) fold_of[order[i]] = i % options.folds;

    // Grid is visited from the largest lambda down so each fit warm-starts
    // from its sparser neighbour.
    std::vector<int> visit(L);
    std::iota(visit.begin(), visit.end(), 0);
    std::stable_sort(visit.begin(), visit.end(),
                     [&](int a, int b) { return grid[a] > grid[b]; });

    MatrixXd errors(options.folds, L);
    const MatrixXd& X = ctx.X();
    for (int f = 0; f < options.folds; ++f) {
        IndexSet train, test;
        for (int i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
        const MatrixXd X_train = take_rows(X, train);
        const MatrixXd X_test = take_rows(X, test);
        const VectorXd y_train = take(y, train);
        const VectorXd y_test = take(y, test);
        const double n_train = static_cast<double>(train.size());
        const MatrixXd gram = X_train.transpose() * X_train / n_train;
        const VectorXd xty = X_train.transpose() * y_train / n_train;
        VectorXd warm = VectorXd::Zero(ctx.p());
        for (int idx : visit) {
            const LassoSolution sol =
                solve_lasso_gram(gram, xty, ctx.weights(), grid[idx], options.lasso, &warm);
            warm = sol.beta;
            errors(f, idx) = (y_test - X_test * sol.beta).squaredNorm() /
                             static_cast<double>(test.size());
        }
    }

    const double k = static_cast<double>(options.folds);
    for (int l = 0; l < L; ++l) {
        const double mean = errors.col(l).mean();
        const double var = (errors.col(l).array() - mean).square().sum() / (k - 1.0);
        out.mean_error[l] = mean;
        out.standard_error[l] = std::sqrt(var / k);
    }
    int best = 0;
    for (int l = 1; l < L; ++l)
        if (out.mean_error[l] < out.mean_error[best]) best = l;
    out.min_index = best;
    const double threshold = out.mean_error[best] + out.standard_error[best];
    int chosen = best;
    for (int l = 0; l < L; ++l) {
        if (out.mean_error[l] <= threshold && grid[l] > grid[chosen]) chosen = l;
    }
    out.index = chosen;
    out.lambda = grid[chosen];
    return out;
}

double cv_lambda_1se(const DesignContext& ctx, const VectorXd& y, int folds,
                     const std::vector<double>& grid, std::uint64_t seed) {
    CvOptions opts;
    opts.folds = folds;
    opts.seed = seed;
    return cross_validate(ctx, y, grid, opts).lambda;
}

} // namespace lassopsi
