#include <gtest/gtest.h>

#include <cmath>

#include "analytic.hpp"
#include "fixtures.hpp"
#include "lassopsi/mh_sampler.hpp"
#include "lassopsi/reconstruction.hpp"

namespace lassopsi {
namespace {

using testing::make_instance;

std::vector<AugmentedState> chain_states(const testing::Instance& inst,
                                         const ActiveSetGeometry& geom, int draws,
                                         std::uint64_t seed) {
    const ChainConfig cfg =
        chain_config_for(draws, 200, 2, default_tau(inst.ctx, geom, 1.0), seed);
    return run_chain(inst.ctx, geom, inst.y, 1.0, inst.lambda, default_init(inst.fit, geom), cfg)
        .states;
}

TEST(Reconstruction, ObservedFitRecoversY) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto inst = make_instance(15, 30, 100 + seed, 0.4,
                                        static_cast<DesignKind>(seed % 4));
        const ActiveSetGeometry geom = ActiveSetGeometry::build(inst.ctx, inst.fit.active);
        const VectorXd y_star =
            reconstruct_y(inst.ctx, geom, default_init(inst.fit, geom), inst.lambda);
        EXPECT_LT((y_star - inst.y).cwiseAbs().maxCoeff(), 1e-8) << "seed " << seed;
    }
}

TEST(Reconstruction, ArbitraryGaussianResponse) {
    const MatrixXd X = testing::gaussian_matrix(12, 25, 4);
    const DesignContext ctx = DesignContext::build(X);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const VectorXd y = 2.0 * testing::gaussian_vector(12, 900 + seed);
        const double lambda = 0.3 * lambda_max(ctx, y);
        const LassoSolution fit = fit_lasso(ctx, y, lambda);
        if (fit.active.empty()) continue;
        const ActiveSetGeometry geom = ActiveSetGeometry::build(ctx, fit.active);
        const VectorXd y_star = reconstruct_y(ctx, geom, default_init(fit, geom), lambda);
        EXPECT_LT((y_star - y).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Reconstruction, RefitRecoversTheState) {
    const auto inst = make_instance(10, 20, 7, 0.4);
    const ActiveSetGeometry geom = ActiveSetGeometry::build(inst.ctx, inst.fit.active);
    LassoOptions tight;
    tight.tol = 1e-12;
    for (const auto& st : chain_states(inst, geom, 50, 3)) {
        const VectorXd y_star = reconstruct_y(inst.ctx, geom, st, inst.lambda);
        const LassoSolution refit = fit_lasso(inst.ctx, y_star, inst.lambda, tight);
        ASSERT_EQ(refit.active, geom.active());
        EXPECT_LT((take(refit.beta, geom.active()) - st.b_active).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((take(refit.subgradient, geom.inactive()) - inactive_subgradient(geom, st))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-7);
    }
}

TEST(Reconstruction, ProjectionMatchesFullReconstruction) {
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 1000; ++seed) {
        const auto inst = make_instance(10, 20, 40 + seed, 0.3);
        const ActiveSetGeometry geom = ActiveSetGeometry::build(inst.ctx, inst.fit.active);
        for (const auto& st : chain_states(inst, geom, 250, seed)) {
            const VectorXd full =
                geom.active_pinv() * reconstruct_y(inst.ctx, geom, st, inst.lambda);
            const VectorXd fast = project_nu(inst.ctx, geom, st, inst.lambda);
            ASSERT_LT((full - fast).cwiseAbs().maxCoeff(), 1e-8);
            ++checked;
        }
    }
}

TEST(Reconstruction, OneDimensionalDebiasedThreshold) {
    const int n = 9;
    const MatrixXd X = testing::unit_column(n, 8);
    const DesignContext ctx = DesignContext::build_low_dimensional(X);
    const ActiveSetGeometry geom = ActiveSetGeometry::build(ctx, {0});
    for (double b : {0.7, -0.2, 1e-3}) {
        const AugmentedState st = make_state(geom, VectorXd::Constant(1, b), VectorXd(0));
        const double sign = b > 0 ? 1.0 : -1.0;
        EXPECT_NEAR(project_nu(ctx, geom, st, 0.25)[0], b + 0.25 * sign, 1e-12);
        EXPECT_NEAR(project_nu(ctx, geom, st, 1e-12)[0], b, 1e-11);
        // y* is the column of X scaled by the de-biased coefficient.
        const VectorXd y = reconstruct_y(ctx, geom, st, 0.25);
        EXPECT_LT((y - X.col(0) * (b + 0.25 * sign)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Reconstruction, CollectDrawsTagsChains) {
    const auto inst = make_instance(10, 20, 12);
    const ActiveSetGeometry geom = ActiveSetGeometry::build(inst.ctx, inst.fit.active);
    std::vector<std::vector<AugmentedState>> chains = {chain_states(inst, geom, 20, 1),
                                                       chain_states(inst, geom, 30, 2)};
    const ConditionedDraws d = collect_draws(inst.ctx, geom, chains, inst.lambda, true);
    ASSERT_EQ(d.size(), 50);
    EXPECT_EQ(d.groups(), 2);
    EXPECT_EQ(d.group(0).rows(), 20);
    EXPECT_EQ(d.group(1).rows(), 30);
    EXPECT_EQ(d.k_index[19], 0);
    EXPECT_EQ(d.k_index[20], 1);
    ASSERT_TRUE(d.y_star.has_value());
    EXPECT_EQ(d.y_star->rows(), 50);
    const VectorXd nu = project_nu(inst.ctx, geom, chains[1][4], inst.lambda);
    EXPECT_LT((d.nu_star.row(24).transpose() - nu).cwiseAbs().maxCoeff(), 1e-15);
    const VectorXd y = reconstruct_y(inst.ctx, geom, chains[1][4], inst.lambda);
    EXPECT_LT((d.y_star->row(24).transpose() - y).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Reconstruction, EveryChainStateRefitsToTheSameModel) {
    const auto inst = make_instance(12, 30, 21, 0.35, DesignKind::Toeplitz);
    const ActiveSetGeometry geom = ActiveSetGeometry::build(inst.ctx, inst.fit.active);
    const auto states = chain_states(inst, geom, 1000, 5);
    const RefitCheck all = verify_conditioning(inst.ctx, geom, states, inst.lambda, 1.0, 0);
    EXPECT_EQ(all.checked, 1000);
    EXPECT_EQ(all.mismatched, 0);
    const RefitCheck some = verify_conditioning(inst.ctx, geom, states, inst.lambda, 0.1, 3);
    EXPECT_GT(some.checked, 50);
    EXPECT_LT(some.checked, 150);
    const RefitCheck again = verify_conditioning(inst.ctx, geom, states, inst.lambda, 0.1, 3);
    EXPECT_EQ(again.checked, some.checked);
}

TEST(Reconstruction, FlippedSignIsDetected) {
    const auto inst = make_instance(10, 20, 13);
    const ActiveSetGeometry geom = ActiveSetGeometry::build(inst.ctx, inst.fit.active);
    AugmentedState st = default_init(inst.fit, geom);
    EXPECT_TRUE(refits_to_same_model(inst.ctx, geom, st, inst.lambda));
    // A state outside the feasible region reconstructs a y whose fit differs.
    VectorXd s_free = st.s_free;
    s_free[0] = 3.0;
    const AugmentedState bad = make_state(geom, st.b_active, s_free);
    EXPECT_FALSE(refits_to_same_model(inst.ctx, geom, bad, inst.lambda));
}

} // namespace
} // namespace lassopsi
