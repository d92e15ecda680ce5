#pragma once

#include <cstdint>
#include <vector>

#include "lassopsi/augmented_density.hpp"
#include "lassopsi/lasso.hpp"
#include "lassopsi/linalg_geometry.hpp"

namespace lassopsi {

struct ChainConfig {
    int n_iter = 0;   // total sweeps, burn-in included
    int burn_in = 1000;
    int thin = 1;
    VectorXd tau;     // normal proposal scale per active coordinate
    std::uint64_t seed = 0;
    int acf_max_lag = 10;
    // Re-verify the feasibility constraints after every accepted move.
    bool check_every_step = false;

    /// Number of states the chain emits.
    int kept() const { return n_iter > burn_in ? (n_iter - burn_in + thin - 1) / thin : 0; }
};

/// Config that keeps exactly `draws` states after `burn_in` sweeps.
ChainConfig chain_config_for(int draws, int burn_in, int thin, VectorXd tau, std::uint64_t seed);

struct ChainOutput {
    std::vector<AugmentedState> states;
    VectorXd acceptance_b;   // accepted / proposed, per active coordinate
    VectorXd skipped_b;      // infeasible sign flips / proposed
    VectorXd acceptance_sF;  // accepted / proposed, per free coordinate
    MatrixXd autocorrelation; // q x acf_max_lag, lags 1.. of each b_A trace
};

/// Coordinate-wise Metropolis-Hastings targeting pi(theta | A; mu_tilde, sigma2, lambda).
///
/// Each sweep updates b_i for i in A (ascending) with a N(b_i, tau_i^2)
/// proposal, then (s_F)_k for k in F (ascending) with a uniform proposal on
/// the feasible range [LB_k, UB_k]. A proposed sign flip whose dependent
/// subgradient leaves the box is skipped without a rejection draw.
ChainOutput run_chain(const DesignContext& ctx, const ActiveSetGeometry& geom,
                      const VectorXd& mu_tilde, double sigma2, double lambda,
                      const AugmentedState& init, const ChainConfig& cfg);

/// The observed augmented estimator (b_A, s_F) of a lasso fit. Throws
/// InconsistentSolution when the recomputed s_D differs from the observed S_D
/// by more than `tol`.
AugmentedState default_init(const LassoSolution& solution, const ActiveSetGeometry& geom,
                            double tol = 1e-6);

/// tau_i = multiplier * sigma * sqrt([(X_A^T X_A)^{-1}]_ii).
VectorXd default_tau(const DesignContext& ctx, const ActiveSetGeometry& geom, double sigma2,
                     double multiplier = 2.0);

/// Sample autocorrelation of `trace` at lags 1..max_lag.
VectorXd autocorrelation(const VectorXd& trace, int max_lag);

} // namespace lassopsi
