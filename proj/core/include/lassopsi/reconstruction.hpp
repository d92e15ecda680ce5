#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lassopsi/augmented_density.hpp"
#include "lassopsi/lasso.hpp"
#include "lassopsi/linalg_geometry.hpp"

namespace lassopsi {

/// Conditioned draws nu* = X_A^+ y*, one row per draw, tagged with the index
/// of the plug-in mean that generated it.
struct ConditionedDraws {
    MatrixXd nu_star;                // N x q
    std::optional<MatrixXd> y_star;  // N x n, only on request
    std::vector<int> k_index;        // N

    int size() const { return static_cast<int>(nu_star.rows()); }
    int groups() const;
    /// Rows belonging to plug-in index k.
    MatrixXd group(int k) const;
};

/// y* = X_A b_A + n lambda (X^T)^+ {W_A sign(b_A) + W_I s_I}.
/// For low-dimensional designs this is the projection of y* onto col(X).
VectorXd reconstruct_y(const DesignContext& ctx, const ActiveSetGeometry& geom,
                       const AugmentedState& state, double lambda);

/// nu* = b_A + n lambda (X_A^T X_A)^{-1} W_AA sign(b_A).
VectorXd project_nu(const DesignContext& ctx, const ActiveSetGeometry& geom,
                    const AugmentedState& state, double lambda);

/// Stacks the states of several chains; chain c contributes rows tagged k = c.
ConditionedDraws collect_draws(const DesignContext& ctx, const ActiveSetGeometry& geom,
                               const std::vector<std::vector<AugmentedState>>& chains,
                               double lambda, bool keep_y = false);

/// True when the lasso refit of reconstruct_y(state) at the same lambda has
/// active set A and signs sign(b_A).
bool refits_to_same_model(const DesignContext& ctx, const ActiveSetGeometry& geom,
                          const AugmentedState& state, double lambda,
                          const LassoOptions& options = {});

struct RefitCheck {
    int checked = 0;
    int mismatched = 0;
};

/// Refits a `fraction` of the states (all when fraction >= 1), chosen by a
/// seeded Bernoulli draw.
RefitCheck verify_conditioning(const DesignContext& ctx, const ActiveSetGeometry& geom,
                               const std::vector<AugmentedState>& states, double lambda,
                               double fraction, std::uint64_t seed);

} // namespace lassopsi
