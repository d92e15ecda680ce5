#pragma once

#include <utility>

#include "lassopsi/linalg_geometry.hpp"
#include "lassopsi/types.hpp"

namespace lassopsi {

/// A point theta = (b_A, s_F) of the augmented space together with the
/// derived dependent subgradient s_D and the cached offset u(s_A).
struct AugmentedState {
    VectorXd b_active;    // b_A, no exact zeros
    VectorXd s_free;      // s_F
    VectorXd s_dependent; // s_D = G_D^{-1}(u - G_F s_F)
    VectorXd u;           // u(s_A) = -V_AN^T W_AA sign(b_A)

    VectorXd signs() const { return sign_of(b_active); }
};

/// u(s_A) = -V_AN^T W_AA s_A.
VectorXd constraint_offset(const ActiveSetGeometry& geom, const VectorXd& s_active);

/// s_D = G_D^{-1}(u(s_A) - G_F s_F). Does not check |s_D| <= 1.
VectorXd resolve_dependent(const ActiveSetGeometry& geom, const VectorXd& s_active,
                           const VectorXd& s_free);

/// Assembles a state from (b_A, s_F), deriving s_D and u.
AugmentedState make_state(const ActiveSetGeometry& geom, VectorXd b_active, VectorXd s_free);

/// Subgradient on the inactive set I, in the order of geom.inactive().
VectorXd inactive_subgradient(const ActiveSetGeometry& geom, const AugmentedState& state);

/// Full p-vectors (beta, S) represented by the state.
std::pair<VectorXd, VectorXd> assemble_full(const ActiveSetGeometry& geom,
                                            const AugmentedState& state);

struct FeasibilityReport {
    double max_abs_free = 0.0;
    double max_abs_dependent = 0.0;
    double equality_residual = 0.0; // ||G_F s_F + G_D s_D - u||_inf
    bool zero_coefficient = false;
    bool feasible = false;
};

/// Checks the box constraints on s_F and s_D (to `box_tol`), the null-space
/// equality (to `equality_tol`) and that b_A has no exact zero.
FeasibilityReport check_feasibility(const ActiveSetGeometry& geom, const AugmentedState& state,
                                    double box_tol = 1e-10, double equality_tol = 1e-8);

/// Spectral KKT coordinates r = V_R^T (Psi beta + lambda W S - X^T mu / n),
/// evaluated densely from the assembled (beta, S).
VectorXd h_map(const DesignContext& ctx, const ActiveSetGeometry& geom,
               const AugmentedState& state, const VectorXd& mu, double lambda);

/// Log of f_R(r; sigma2) up to an additive constant, where f_R is the
/// N(0, sigma2 Lambda / n) density: -(n / 2 sigma2) sum_i r_i^2 / Lambda_i.
/// Returns -infinity for infeasible states.
double log_density(const DesignContext& ctx, const ActiveSetGeometry& geom,
                   const AugmentedState& state, const VectorXd& mu, double sigma2,
                   double lambda);

/// Feasible range [LB_k, UB_k] of the k-th free coordinate with s_A and the
/// other free coordinates held fixed. Throws EmptyRange when UB_k <= LB_k.
std::pair<double, double> proposal_bounds(const ActiveSetGeometry& geom,
                                          const VectorXd& s_active, const VectorXd& s_free,
                                          int k);

/// Same as above, reusing the state's cached s_D.
std::pair<double, double> proposal_bounds(const ActiveSetGeometry& geom,
                                          const AugmentedState& state, int k);

namespace detail {

/// Intersects [-1, 1] with {v : |a_j - M_j v| <= 1 for all j}. Rows with
/// M_j == 0 do not involve v and are skipped.
std::pair<double, double> intersect_bounds(const VectorXd& a, const Eigen::Ref<const VectorXd>& M);

} // namespace detail

} // namespace lassopsi
