#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lassopsi/lasso.hpp"
#include "lassopsi/linalg_geometry.hpp"
#include "lassopsi/mh_sampler.hpp"
#include "lassopsi/reconstruction.hpp"

namespace lassopsi {

/// Ellipsoidal confidence set for mu_0 induced by X_A^+ y ~ N(nu, sigma2 (X_A^T X_A)^{-1}):
/// D = {b : (b - nu_hat)^T shape (b - nu_hat) <= radius2}, C = X_A D.
struct ConfidenceEllipsoid {
    IndexSet active;
    VectorXd nu_hat;  // X_A^+ y
    MatrixXd shape;   // X_A^T X_A
    double radius2 = 0.0;
    double alpha = 0.0;  // radius2 is the (1 - alpha/2) chi-square quantile times sigma2
    double sigma2 = 0.0;
    MatrixXd X_active;

    int q() const { return static_cast<int>(nu_hat.size()); }
    VectorXd mu_hat() const { return X_active * nu_hat; }
    /// (b - nu_hat)^T shape (b - nu_hat).
    double quadratic_form(const VectorXd& b) const;
};

/// Upper quantile of the chi-square distribution with `dof` degrees of freedom.
double chi_square_quantile(int dof, double prob);

ConfidenceEllipsoid build_C_A(const DesignContext& ctx, const VectorXd& y, const IndexSet& active,
                              double sigma2, double alpha);

struct BoundaryDraws {
    MatrixXd nu; // K x q, coefficient-space points on the ellipsoid boundary
    MatrixXd mu; // n x K, mu_tilde^{(k)} = X_A nu^{(k)}
};

/// nu^{(k)} = nu_hat + sqrt(radius2) L^{-T} z_k with L L^T = shape and z_k
/// uniform on the unit sphere of R^q.
BoundaryDraws sample_boundary(const ConfidenceEllipsoid& ell, int K, std::uint64_t seed);

/// Linear-interpolation sample quantile (type 7) of an ascending sample.
double quantile_sorted(const std::vector<double>& sorted, double prob);
double quantile(std::vector<double> values, double prob);

enum class IntervalVariant { Oracle, Plugin, Randomized, Conservative };
std::string to_string(IntervalVariant v);
IntervalVariant parse_variant(const std::string& name);

struct IntervalResult {
    int position = 0; // index within A
    int feature = 0;  // column of X
    double lower = 0.0;
    double upper = 0.0;
    IntervalVariant variant = IntervalVariant::Randomized;
    double alpha = 0.0;

    double length() const { return upper - lower; }
    bool contains(double v) const { return lower <= v && v <= upper; }
};

/// Minimum pooled draw count accepted by the interval and set builders.
inline constexpr int kMinDraws = 100;

/// [nu_hat_j - q_{1-alpha/4}, nu_hat_j - q_{alpha/4}] with q the pooled
/// quantiles of column j of nu_star - nu_hat.
IntervalResult build_interval_randomized(const ConditionedDraws& draws, const VectorXd& nu_hat,
                                         int j, double alpha, int feature = -1);

/// Single-chain pivot interval [nu_hat_j - q_{1-alpha/2}, nu_hat_j - q_{alpha/2}]
/// with q the quantiles of nu*_j - reference_j. The plug-in variant uses
/// reference = nu_hat (chain at mu_hat); the oracle variant uses reference =
/// X_A^+ mu_0 (chain at mu_0).
IntervalResult build_interval_pivot(const MatrixXd& nu_star, const VectorXd& reference,
                                    const VectorXd& nu_hat, int j, double alpha,
                                    IntervalVariant variant, int feature = -1);

/// Per-k quantiles at alpha/4 and 1 - alpha/4; lower uses the max over k of
/// the upper quantiles, upper uses the min over k of the lower quantiles. The
/// pooled quantiles join both extrema, so the result always contains the
/// randomized interval built from the same draws.
IntervalResult build_interval_conservative(const ConditionedDraws& draws, const VectorXd& nu_hat,
                                           int j, double alpha, int feature = -1);

enum class NormDelta { Two, Inf };
std::string to_string(NormDelta d);
NormDelta parse_norm(const std::string& name);

struct SetResult {
    MatrixXd H;      // m x q
    VectorXd center; // H nu_hat
    double radius = 0.0;
    NormDelta delta = NormDelta::Inf;
    double diameter = 0.0;
    double log_volume = 0.0;
    double alpha = 0.0;

    int m() const { return static_cast<int>(H.rows()); }
    double volume() const;
    /// Volume^{1/q}, computed in log space.
    double volume_star(int q) const;
    bool contains(const VectorXd& eta) const;
};

double norm_of(const VectorXd& v, NormDelta delta);
/// Euclidean diameter of the l_delta ball of radius r in R^m.
double ball_diameter(double r, int m, NormDelta delta);
double ball_log_volume(double r, int m, NormDelta delta);

/// {eta : ||eta - H nu_hat||_delta <= r} with r the (1 - alpha/2) quantile of
/// ||H (nu* - nu_hat)||_delta over the pooled draws.
SetResult build_set(const MatrixXd& nu_star, const VectorXd& nu_hat, const MatrixXd& H,
                    NormDelta delta, double alpha);

/// Selector rows e_i^T, e_j^T for every pair i < j of [0, q).
std::vector<MatrixXd> pair_selectors(int q);

struct ChainBatchOptions {
    int draws = 500;
    int burn_in = 1000;
    int thin = 1;
    double tau_multiplier = 2.0;
    std::uint64_t seed = 0;
    int threads = 1;
    bool check_every_step = false;
};

struct ChainSummary {
    double mean_acceptance_b = 0.0;
    double mean_skipped_b = 0.0;
    double mean_acceptance_sF = 0.0;
    double max_abs_acf_lag1 = 0.0;
};

struct ChainBatch {
    std::vector<std::vector<AugmentedState>> states; // per chain
    std::vector<ChainSummary> summaries;
};

/// Runs one chain per column of `mus`, chain k seeded with
/// derive_seed(options.seed, k), all started at `init`.
ChainBatch run_chains(const DesignContext& ctx, const ActiveSetGeometry& geom, const MatrixXd& mus,
                      double sigma2, double lambda, const AugmentedState& init,
                      const ChainBatchOptions& options);

struct Algorithm1Options {
    double alpha = 0.05;
    int K = 20;
    int N = 500;
    int burn_in = 1000;
    int thin = 1;
    double tau_multiplier = 2.0;
    std::uint64_t seed = 0;
    int threads = 0;
    /// Fraction of pooled draws refit to confirm the conditioning event.
    double verify_fraction = 0.01;
    bool check_every_step = false;
    bool keep_y = false;
    LassoOptions lasso;
};

struct Algorithm1Result {
    LassoSolution fit;
    ConfidenceEllipsoid ellipsoid;
    BoundaryDraws boundary;
    ConditionedDraws draws;
    std::vector<IntervalResult> randomized;
    std::vector<IntervalResult> conservative;
    std::vector<ChainSummary> chains;
    RefitCheck refit;
};

/// Seed streams of the master seed: 0 boundary sampling, 1 refit selection,
/// 16 + k chain k of the randomized batch.
inline constexpr std::uint64_t kStreamBoundary = 0;
inline constexpr std::uint64_t kStreamRefit = 1;
inline constexpr std::uint64_t kStreamChains = 16;

/// fit -> C_A -> K boundary means -> K chains of N kept draws -> nu* ->
/// randomized and conservative intervals for every j in A.
Algorithm1Result run_algorithm1(const DesignContext& ctx, const VectorXd& y, double lambda,
                                double sigma2, const Algorithm1Options& options);

/// Pools the nu* draws of a batch run at the single mean `mu`.
ConditionedDraws single_mean_draws(const DesignContext& ctx, const ActiveSetGeometry& geom,
                                   const VectorXd& mu, double sigma2, double lambda,
                                   const AugmentedState& init, const ChainBatchOptions& options,
                                   ChainSummary* summary = nullptr);

} // namespace lassopsi
