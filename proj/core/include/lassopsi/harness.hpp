#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lassopsi/errors.hpp"
#include "lassopsi/inference.hpp"
#include "lassopsi/linalg_geometry.hpp"
#include "lassopsi/reconstruction.hpp"

namespace lassopsi {

enum class DesignKind { Identity, Toeplitz, ExpDecay, Equicorrelation };
std::string to_string(DesignKind kind);
DesignKind parse_design(const std::string& name);

enum class SupportPreset { Contiguous, Spread };
std::string to_string(SupportPreset preset);
SupportPreset parse_support(const std::string& name);

/// Contiguous {0, ..., size-1} or evenly spread {0, p/size, 2p/size, ...}.
IndexSet support_preset(SupportPreset preset, int size, int p);

struct DesignSpec {
    DesignKind kind = DesignKind::Identity;
    int n = 50;
    int p = 100;
    IndexSet A0;
    double beta_low = -1.0;
    double beta_high = 1.0;
    double sigma2 = 1.0;
    std::uint64_t seed = 0;
};

/// Row covariance Sigma of the design. For ExpDecay this is the inverse of
/// the 0.4^|i-j| precision and is only formed for tests and diagnostics.
MatrixXd design_covariance(DesignKind kind, int p);

struct Dataset {
    MatrixXd X;
    VectorXd y;
    VectorXd beta0;
    VectorXd mu0;
};

/// Rows of X i.i.d. N_p(0, Sigma); beta0 uniform on A0; y = X beta0 + N(0, sigma2 I).
Dataset generate_dataset(const DesignSpec& spec);

struct OracleResult {
    IndexSet active;
    MatrixXd b_active;   // accepted x q
    MatrixXd s_inactive; // accepted x |I|
    ConditionedDraws draws;
    long long attempts = 0;
    long long accepted = 0;
    bool exhausted = false;

    double acceptance_rate() const {
        return attempts > 0 ? static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
    }
};

/// Thrown by rejection_oracle when the draw budget runs out; carries the
/// draws accepted so far.
class BudgetExhaustedError : public Error {
public:
    BudgetExhaustedError(const std::string& what, std::shared_ptr<OracleResult> partial)
        : Error(ErrorCode::BudgetExhausted, what), partial_(std::move(partial)) {}
    const OracleResult& partial() const { return *partial_; }

private:
    std::shared_ptr<OracleResult> partial_;
};

/// Draws y* ~ N(mu_tilde, sigma2 I) and keeps those whose lasso active set at
/// `lambda` equals `target` until n_accept are kept.
OracleResult rejection_oracle(const DesignContext& ctx, const VectorXd& mu_tilde, double sigma2,
                              double lambda, const IndexSet& target, int n_accept,
                              long long max_draws, std::uint64_t seed);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
double ks_statistic_cdf(std::vector<double> a, const std::function<double(double)>& cdf);

/// Intervals of one fitted dataset plus the truth they are scored against.
struct ScoredFit {
    int dataset = 0;
    IndexSet active;
    IndexSet A0;
    VectorXd nu_true; // X_A^+ mu0
    std::vector<IntervalResult> intervals;
};

struct CoverageCell {
    long long hits = 0;
    long long total = 0;
    double rate() const { return total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0; }
};

struct VariantMetrics {
    IntervalVariant variant = IntervalVariant::Randomized;
    CoverageCell coverage_A;
    CoverageCell coverage_A0;  // A0 cap A
    CoverageCell coverage_A0c; // A0^c cap A
    CoverageCell power;        // 0 outside, over A0 cap A
    double mean_length_pooled = 0.0;
    double mean_length_by_dataset = 0.0;
    int datasets = 0;
};

/// Coverage, power and length per variant, pooled over (dataset, j) pairs.
std::vector<VariantMetrics> compute_metrics(const std::vector<ScoredFit>& fits);

/// Coverage over A of one variant within one fit, or -1 when absent.
double fit_coverage(const ScoredFit& fit, IntervalVariant variant);

} // namespace lassopsi
