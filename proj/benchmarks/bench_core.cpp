#include <benchmark/benchmark.h>

#include "lassopsi/harness.hpp"
#include "lassopsi/inference.hpp"
#include "lassopsi/lasso.hpp"
#include "lassopsi/mh_sampler.hpp"
#include "lassopsi/reconstruction.hpp"

using namespace lassopsi;

namespace {

Dataset toeplitz(int n) {
    DesignSpec spec;
    spec.kind = DesignKind::Toeplitz;
    spec.n = n;
    spec.p = 2 * n;
    spec.A0 = support_preset(SupportPreset::Contiguous, 5, spec.p);
    spec.seed = 7;
    return generate_dataset(spec);
}

struct Problem {
    Dataset data;
    DesignContext ctx;
    LassoSolution sol;
    ActiveSetGeometry geom;

    explicit Problem(int n)
        : data(toeplitz(n)), ctx(DesignContext::build(data.X)),
          sol(fit_lasso(ctx, data.y, 0.2 * lambda_max(ctx, data.y))),
          geom(ActiveSetGeometry::build(ctx, sol.active)) {}
};

} // namespace

static void BM_DesignFactor(benchmark::State& state) {
    const Dataset d = toeplitz(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(DesignContext::build(d.X));
}
BENCHMARK(BM_DesignFactor)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_LassoFit(benchmark::State& state) {
    const Dataset d = toeplitz(static_cast<int>(state.range(0)));
    const DesignContext ctx = DesignContext::build(d.X);
    const double lambda = 0.2 * lambda_max(ctx, d.y);
    for (auto _ : state) benchmark::DoNotOptimize(fit_lasso(ctx, d.y, lambda));
}
BENCHMARK(BM_LassoFit)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMicrosecond);

static void BM_ActiveSetGeometry(benchmark::State& state) {
    const Problem pr(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(ActiveSetGeometry::build(pr.ctx, pr.sol.active));
}
BENCHMARK(BM_ActiveSetGeometry)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

// 1000 kept MH sweeps after 100 burn-in sweeps.
static void BM_ChainSweeps(benchmark::State& state) {
    const Problem pr(static_cast<int>(state.range(0)));
    const ChainConfig cfg = chain_config_for(1000, 100, 1, default_tau(pr.ctx, pr.geom, 1.0), 3);
    const AugmentedState init = default_init(pr.sol, pr.geom);
    for (auto _ : state)
        benchmark::DoNotOptimize(run_chain(pr.ctx, pr.geom, pr.data.y, 1.0, pr.sol.lambda, init, cfg));
    state.SetItemsProcessed(state.iterations() * cfg.n_iter);
}
BENCHMARK(BM_ChainSweeps)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_ReconstructY(benchmark::State& state) {
    const Problem pr(static_cast<int>(state.range(0)));
    const AugmentedState st = default_init(pr.sol, pr.geom);
    for (auto _ : state) benchmark::DoNotOptimize(reconstruct_y(pr.ctx, pr.geom, st, pr.sol.lambda));
}
BENCHMARK(BM_ReconstructY)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMicrosecond);

static void BM_ProjectNu(benchmark::State& state) {
    const Problem pr(static_cast<int>(state.range(0)));
    const AugmentedState st = default_init(pr.sol, pr.geom);
    for (auto _ : state) benchmark::DoNotOptimize(project_nu(pr.ctx, pr.geom, st, pr.sol.lambda));
}
BENCHMARK(BM_ProjectNu)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMicrosecond);

static void BM_Algorithm1(benchmark::State& state) {
    const Dataset d = toeplitz(50);
    const DesignContext ctx = DesignContext::build(d.X);
    const double lambda = 0.2 * lambda_max(ctx, d.y);
    Algorithm1Options opts;
    opts.K = 20;
    opts.N = 500;
    opts.threads = 1;
    for (auto _ : state) benchmark::DoNotOptimize(run_algorithm1(ctx, d.y, lambda, 1.0, opts));
}
BENCHMARK(BM_Algorithm1)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
