#include "lassopsi/reconstruction.hpp"

#include <algorithm>
#include <random>

#include "lassopsi/errors.hpp"
#include "lassopsi/random.hpp"

namespace lassopsi {

int ConditionedDraws::groups() const {
    return k_index.empty() ? 0 : *std::max_element(k_index.begin(), k_index.end()) + 1;
}

MatrixXd ConditionedDraws::group(int k) const {
    const auto count = std::count(k_index.begin(), k_index.end(), k);
    MatrixXd out(count, nu_star.cols());
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < k_index.size(); ++i)
        if (k_index[i] == k) out.row(row++) = nu_star.row(static_cast<Eigen::Index>(i));
    return out;
}

VectorXd reconstruct_y(const DesignContext& ctx, const ActiveSetGeometry& geom,
                       const AugmentedState& state, double lambda) {
    const double n_lambda = static_cast<double>(ctx.n()) * lambda;
    return geom.X_active() * state.b_active +
           n_lambda * (geom.recon_active() * state.signs() +
                       geom.recon_inactive() * inactive_subgradient(geom, state));
}

VectorXd project_nu(const DesignContext& ctx, const ActiveSetGeometry& geom,
                    const AugmentedState& state, double lambda) {
    const double n_lambda = static_cast<double>(ctx.n()) * lambda;
    return state.b_active + n_lambda * (geom.debias_map() * state.signs());
}

ConditionedDraws collect_draws(const DesignContext& ctx, const ActiveSetGeometry& geom,
                               const std::vector<std::vector<AugmentedState>>& chains,
                               double lambda, bool keep_y) {
    std::size_t total = 0;
    for (const auto& c : chains) total += c.size();
    ConditionedDraws draws;
    draws.nu_star.resize(static_cast<Eigen::Index>(total), geom.q());
    draws.k_index.reserve(total);
    if (keep_y) draws.y_star = MatrixXd(static_cast<Eigen::Index>(total), ctx.n());
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < chains.size(); ++k) {
        for (const auto& st : chains[k]) {
            draws.nu_star.row(row) = project_nu(ctx, geom, st, lambda).transpose();
            if (keep_y) draws.y_star->row(row) = reconstruct_y(ctx, geom, st, lambda).transpose();
            draws.k_index.push_back(static_cast<int>(k));
            ++row;
        }
    }
    return draws;
}

bool refits_to_same_model(const DesignContext& ctx, const ActiveSetGeometry& geom,
                          const AugmentedState& state, double lambda,
                          const LassoOptions& options) {
    const VectorXd y = reconstruct_y(ctx, geom, state, lambda);
    const LassoSolution sol = fit_lasso(ctx, y, lambda, options);
    if (sol.active != geom.active()) return false;
    return sol.active_signs() == state.signs();
}

RefitCheck verify_conditioning(const DesignContext& ctx, const ActiveSetGeometry& geom,
                               const std::vector<AugmentedState>& states, double lambda,
                               double fraction, std::uint64_t seed) {
    RefitCheck check;
    Rng rng(seed);
    std::bernoulli_distribution pick(std::clamp(fraction, 0.0, 1.0));
    for (const auto& st : states) {
        if (fraction < 1.0 && !pick(rng)) continue;
        ++check.checked;
        if (!refits_to_same_model(ctx, geom, st, lambda)) ++check.mismatched;
    }
    return check;
}

} // namespace lassopsi
