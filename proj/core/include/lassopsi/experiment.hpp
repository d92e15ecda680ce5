#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lassopsi/harness.hpp"
#include "lassopsi/inference.hpp"

namespace lassopsi {

enum class ExperimentMode { Intervals, LambdaSensitivity, Sets };
std::string to_string(ExperimentMode mode);

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::Intervals;
    DesignKind design = DesignKind::Identity;
    int n = 50;
    int p = 100;
    SupportPreset support = SupportPreset::Contiguous;
    int support_size = 5;
    double beta_low = -1.0;
    double beta_high = 1.0;
    double sigma2 = 1.0;
    double alpha = 0.05;
    int replicates = 20;
    int K = 20;
    int N = 500;
    int burn_in = 1000;
    int thin = 1;
    double tau_multiplier = 2.0;
    /// Draws of the single-mean chains (plugin, oracle); 0 means K * N.
    int single_draws = 0;
    std::uint64_t seed = 1;
    /// Fixed lambda; cross-validation with the one-standard-error rule when empty.
    std::optional<double> lambda;
    int cv_folds = 10;
    int cv_grid = 50;
    /// Size of the lambda grid swept in lambda_sensitivity mode.
    int grid_size = 20;
    std::vector<IntervalVariant> variants = {IntervalVariant::Oracle, IntervalVariant::Plugin,
                                             IntervalVariant::Randomized,
                                             IntervalVariant::Conservative};
    bool pairwise = true;
    bool joint = true;
    std::vector<NormDelta> norms = {NormDelta::Two, NormDelta::Inf};
    double verify_fraction = 0.01;
    /// Free-form notes copied into the report (e.g. widened tolerances).
    std::vector<std::string> notes;
    int threads = 0; // not part of the echoed config; results do not depend on it
};

/// Parses a YAML experiment config. Errors carry ErrorCode::Config and a
/// "source:line:column:" prefix.
ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct SetRecord {
    std::string family; // "pairwise" or "joint"
    NormDelta delta = NormDelta::Inf;
    IndexSet positions; // indices within A
    double radius = 0.0;
    double diameter = 0.0;
    double log_volume = 0.0;
    double volume_star = 0.0;
    bool covered = false;
    bool excludes_zero = false;
};

struct FitRecord {
    int lambda_index = -1; // position in the sensitivity grid, -1 otherwise
    double lambda = 0.0;
    std::string status = "ok"; // ok | empty_model
    IndexSet active;
    VectorXd nu_true;
    VectorXd nu_hat;
    std::vector<IntervalResult> intervals;
    std::vector<SetRecord> sets;
    double acceptance_b = 0.0;
    double acceptance_sF = 0.0;
    int refit_checked = 0;
    int refit_mismatched = 0;
};

struct ReplicateResult {
    int dataset = 0;
    IndexSet A0;
    std::vector<FitRecord> fits;
};

nlohmann::json to_json(const ReplicateResult& r);
ReplicateResult replicate_from_json(const nlohmann::json& j);

/// Runs replicate `r` of the experiment (independent of every other replicate).
ReplicateResult run_replicate(const ExperimentConfig& cfg, int r);

/// Aggregated report over replicates (deterministic, ordered by dataset).
nlohmann::json summarize(const ExperimentConfig& cfg, const std::vector<ReplicateResult>& reps);

std::string records_csv(const std::vector<ReplicateResult>& reps);
std::string sets_csv(const std::vector<ReplicateResult>& reps);

struct ExperimentOutput {
    nlohmann::json report;
    std::vector<ReplicateResult> replicates;
    int resumed = 0;
};

/// Runs every replicate, reusing out_dir/replicates/rep_XXXX.json files whose
/// echoed config matches, and writes report.json, records.csv and sets.csv.
/// An empty out_dir keeps everything in memory.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

/// Flattens the summary into ScoredFit entries for compute_metrics.
std::vector<ScoredFit> scored_fits(const std::vector<ReplicateResult>& reps);

} // namespace lassopsi
