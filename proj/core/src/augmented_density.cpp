#include "lassopsi/augmented_density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lassopsi/errors.hpp"

namespace lassopsi {

VectorXd constraint_offset(const ActiveSetGeometry& geom, const VectorXd& s_active) {
    require(s_active.size() == geom.q(), ErrorCode::InvalidArgument, "sign vector has wrong size");
    return geom.offset_map() * s_active;
}

VectorXd resolve_dependent(const ActiveSetGeometry& geom, const VectorXd& s_active,
                           const VectorXd& s_free) {
    require(s_active.size() == geom.q() && s_free.size() == geom.num_free(),
            ErrorCode::InvalidArgument, "state has wrong dimensions");
    return geom.C() * s_active - geom.E() * s_free;
}

AugmentedState make_state(const ActiveSetGeometry& geom, VectorXd b_active, VectorXd s_free) {
    AugmentedState st;
    st.b_active = std::move(b_active);
    st.s_free = std::move(s_free);
    const VectorXd s_active = st.signs();
    st.s_dependent = resolve_dependent(geom, s_active, st.s_free);
    st.u = constraint_offset(geom, s_active);
    return st;
}

VectorXd inactive_subgradient(const ActiveSetGeometry& geom, const AugmentedState& state) {
    VectorXd s(geom.inactive().size());
    for (int k = 0; k < geom.num_free(); ++k) s[geom.free_positions()[k]] = state.s_free[k];
    for (int k = 0; k < geom.num_dependent(); ++k)
        s[geom.dependent_positions()[k]] = state.s_dependent[k];
    return s;
}

std::pair<VectorXd, VectorXd> assemble_full(const ActiveSetGeometry& geom,
                                            const AugmentedState& state) {
    VectorXd beta = VectorXd::Zero(geom.p());
    VectorXd S = VectorXd::Zero(geom.p());
    const VectorXd s_active = state.signs();
    for (int i = 0; i < geom.q(); ++i) {
        beta[geom.active()[i]] = state.b_active[i];
        S[geom.active()[i]] = s_active[i];
    }
    const VectorXd s_inactive = inactive_subgradient(geom, state);
    for (std::size_t i = 0; i < geom.inactive().size(); ++i)
        S[geom.inactive()[i]] = s_inactive[static_cast<Eigen::Index>(i)];
    return {beta, S};
}

FeasibilityReport check_feasibility(const ActiveSetGeometry& geom, const AugmentedState& state,
                                    double box_tol, double equality_tol) {
    FeasibilityReport rep;
    if (state.b_active.size() != geom.q() || state.s_free.size() != geom.num_free() ||
        state.s_dependent.size() != geom.num_dependent()) {
        return rep;
    }
    rep.max_abs_free = state.s_free.size() ? state.s_free.cwiseAbs().maxCoeff() : 0.0;
    rep.max_abs_dependent =
        state.s_dependent.size() ? state.s_dependent.cwiseAbs().maxCoeff() : 0.0;
    rep.zero_coefficient = (state.b_active.array() == 0.0).any();
    if (geom.num_dependent() > 0) {
        const VectorXd u = constraint_offset(geom, state.signs());
        rep.equality_residual =
            (geom.G_free() * state.s_free + geom.G_dependent() * state.s_dependent - u)
                .cwiseAbs()
                .maxCoeff();
    }
    rep.feasible = !rep.zero_coefficient && rep.max_abs_free <= 1.0 + box_tol &&
                   rep.max_abs_dependent <= 1.0 + box_tol &&
                   rep.equality_residual <= equality_tol;
    return rep;
}

VectorXd h_map(const DesignContext& ctx, const ActiveSetGeometry& geom,
               const AugmentedState& state, const VectorXd& mu, double lambda) {
    require(mu.size() == ctx.n(), ErrorCode::InvalidArgument, "mean vector has wrong length");
    const auto [beta, S] = assemble_full(geom, state);
    const VectorXd U = ctx.gram() * beta + lambda * ctx.weights().cwiseProduct(S) -
                       ctx.X().transpose() * mu / static_cast<double>(ctx.n());
    return ctx.row_basis().transpose() * U;
}

double log_density(const DesignContext& ctx, const ActiveSetGeometry& geom,
                   const AugmentedState& state, const VectorXd& mu, double sigma2,
                   double lambda) {
    require(sigma2 > 0, ErrorCode::InvalidArgument, "sigma2 must be positive");
    if (!check_feasibility(geom, state).feasible) return -std::numeric_limits<double>::infinity();
    const VectorXd r = h_map(ctx, geom, state, mu, lambda);
    const double quad = r.cwiseAbs2().cwiseQuotient(ctx.eigenvalues()).sum();
    return -static_cast<double>(ctx.n()) / (2.0 * sigma2) * quad;
}

namespace detail {

std::pair<double, double> intersect_bounds(const VectorXd& a, const Eigen::Ref<const VectorXd>& M) {
    double lo = -1.0;
    double hi = 1.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        const double m = M[j];
        if (m == 0.0) continue;
        // -1 <= a_j - m v <= 1  <=>  (a_j - 1) / m <= v <= (a_j + 1) / m  for m > 0,
        // with the inequalities reversed for m < 0.
        const double x1 = (a[j] - 1.0) / m;
        const double x2 = (a[j] + 1.0) / m;
        if (m > 0) {
            lo = std::max(lo, x1);
            hi = std::min(hi, x2);
        } else {
            lo = std::max(lo, x2);
            hi = std::min(hi, x1);
        }
    }
    return {lo, hi};
}

} // namespace detail

namespace {

std::pair<double, double> bounds_from_dependent(const ActiveSetGeometry& geom,
                                                const VectorXd& s_free,
                                                const VectorXd& s_dependent, int k) {
    require(k >= 0 && k < geom.num_free(), ErrorCode::InvalidArgument,
            "free coordinate index out of range");
    // a = G_D^{-1}u - (G_D^{-1}G_F)_{-k} (s_F)_{-k} = s_D + E_k (s_F)_k.
    const auto M = geom.E().col(k);
    const VectorXd a = s_dependent + M * s_free[k];
    const auto bounds = detail::intersect_bounds(a, M);
    if (!(bounds.second > bounds.first)) {
        fail(ErrorCode::EmptyRange, "empty proposal range for free coordinate " +
                                        std::to_string(k) + " (state is infeasible)");
    }
    return bounds;
}

} // namespace

std::pair<double, double> proposal_bounds(const ActiveSetGeometry& geom,
                                          const VectorXd& s_active, const VectorXd& s_free,
                                          int k) {
    const VectorXd s_dep = resolve_dependent(geom, s_active, s_free);
    return bounds_from_dependent(geom, s_free, s_dep, k);
}

std::pair<double, double> proposal_bounds(const ActiveSetGeometry& geom,
                                          const AugmentedState& state, int k) {
    return bounds_from_dependent(geom, state.s_free, state.s_dependent, k);
}

} // namespace lassopsi
