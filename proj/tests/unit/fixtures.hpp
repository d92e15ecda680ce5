#pragma once

#include <cstdint>
#include <random>

#include "lassopsi/harness.hpp"
#include "lassopsi/lasso.hpp"
#include "lassopsi/linalg_geometry.hpp"

namespace lassopsi::testing {

inline MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

inline VectorXd gaussian_vector(int n, std::uint64_t seed) {
    return gaussian_matrix(n, 1, seed).col(0);
}

// A sparse-signal instance whose lasso fit at lambda = frac * lambda_max
// selects a non-empty active set.
struct Instance {
    DesignContext ctx;
    VectorXd y;
    double lambda;
    LassoSolution fit;
};

inline Instance make_instance(int n, int p, std::uint64_t seed, double frac = 0.5,
                              DesignKind kind = DesignKind::Identity) {
    DesignSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.p = p;
    spec.A0 = support_preset(SupportPreset::Contiguous, std::min(3, p), p);
    spec.seed = seed;
    Dataset d = generate_dataset(spec);
    DesignContext ctx = DesignContext::build(d.X);
    const double lambda = frac * lambda_max(ctx, d.y);
    LassoSolution fit = fit_lasso(ctx, d.y, lambda);
    return {std::move(ctx), d.y, lambda, std::move(fit)};
}

} // namespace lassopsi::testing
