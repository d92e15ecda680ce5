#pragma once

#include <cmath>

#include "fixtures.hpp"

namespace lassopsi::testing {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Single-column design with ||x||^2 = n.
inline MatrixXd unit_column(int n, std::uint64_t seed) {
    MatrixXd x = gaussian_matrix(n, 1, seed);
    x *= std::sqrt(static_cast<double>(n)) / x.norm();
    return x;
}

// Law of b given A = {1} for p = 1 and ||x||^2 = n, with the mean coefficient
// c = x^T mu / n: N(c - lambda, sd^2) on (0, inf) and N(c + lambda, sd^2) on
// (-inf, 0), renormalized jointly.
struct OneDimMixture {
    double c, lambda, sd;

    double mass_pos() const { return normal_cdf((c - lambda) / sd); }
    double mass_neg() const { return normal_cdf(-(c + lambda) / sd); }

    double cdf(double b) const {
        const double z = mass_pos() + mass_neg();
        if (b < 0) return normal_cdf((b - c - lambda) / sd) / z;
        return (mass_neg() + normal_cdf((b - c + lambda) / sd) - normal_cdf(-(c - lambda) / sd)) / z;
    }

    double quantile(double prob) const {
        double lo = c - lambda - 20 * sd, hi = c + lambda + 20 * sd;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cdf(mid) < prob ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
};

} // namespace lassopsi::testing
