#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <string>

#include "lassopsi/errors.hpp"
#include "lassopsi/experiment.hpp"
#include "lassopsi/io.hpp"

namespace lassopsi {
namespace {

namespace fs = std::filesystem;

const char* kMinimal = R"(mode: sets
design: toeplitz
n: 12
p: 24
support_size: 3
sigma2: 1.0
replicates: 2
K: 3
N: 120
burn_in: 100
lambda: cv
cv_folds: 4
cv_grid: 10
seed: 7
sets:
  pairwise: true
  joint: true
  norms: [2, inf]
)";

std::string expect_config_error(const std::string& yaml) {
    try {
        parse_config(yaml, "cfg.yaml");
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Config);
        return e.what();
    }
    ADD_FAILURE() << "config was accepted";
    return {};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lassopsi_" + name);
    fs::remove_all(dir);
    return dir;
}

TEST(ExperimentConfig, ParsesAndEchoes) {
    const ExperimentConfig cfg = parse_config(kMinimal);
    EXPECT_EQ(cfg.mode, ExperimentMode::Sets);
    EXPECT_EQ(cfg.design, DesignKind::Toeplitz);
    EXPECT_EQ(cfg.K, 3);
    EXPECT_FALSE(cfg.lambda.has_value());
    EXPECT_EQ(cfg.norms.size(), 2u);
    const auto j = config_to_json(cfg);
    EXPECT_EQ(j.at("lambda"), "cv");
    EXPECT_EQ(j.at("n"), 12);
    EXPECT_FALSE(j.contains("threads"));
}

TEST(ExperimentConfig, ErrorsCarryLineNumbers) {
    EXPECT_NE(expect_config_error("n: 10\np: 20\nalpha: 1.5\n").find("cfg.yaml:3:"),
              std::string::npos);
    EXPECT_NE(expect_config_error("n: 10\np: 20\nbogus: 1\n").find("cfg.yaml:3:"),
              std::string::npos);
    EXPECT_NE(expect_config_error("n: 10\np: 20\nbogus: 1\n").find("unknown key 'bogus'"),
              std::string::npos);
    EXPECT_NE(expect_config_error("n: 10\np: 5\n").find("cfg.yaml:2:"), std::string::npos);
    EXPECT_NE(expect_config_error("n: 10\np: 20\ndesign: banded\n").find("cfg.yaml:3:"),
              std::string::npos);
    EXPECT_NE(expect_config_error("n: ten\n").find("cfg.yaml:1:"), std::string::npos);
    EXPECT_NE(expect_config_error("n: [1,\n").find("cfg.yaml:"), std::string::npos);
    expect_config_error("- 1\n- 2\n");
}

TEST(Experiment, MinimalRunIsFastAndDeterministic) {
    const ExperimentConfig cfg = parse_config(kMinimal);
    const fs::path a = scratch("exp_a"), b = scratch("exp_b");
    const auto start = std::chrono::steady_clock::now();
    const ExperimentOutput first = run_experiment(cfg, a.string());
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(seconds, 60.0);
    ExperimentConfig threaded = cfg;
    threaded.threads = 3;
    run_experiment(threaded, b.string());
    for (const char* name : {"report.json", "records.csv", "sets.csv"}) {
        ASSERT_TRUE(fs::exists(a / name)) << name;
        EXPECT_EQ(read_file((a / name).string()), read_file((b / name).string())) << name;
    }
    ASSERT_EQ(first.replicates.size(), 2u);
    const auto& report = first.report;
    EXPECT_TRUE(report.contains("config"));
    EXPECT_TRUE(report.contains("intervals"));
    EXPECT_TRUE(report.contains("sets"));
    const std::string csv = read_file((a / "records.csv").string());
    EXPECT_EQ(csv.rfind("dataset_id,lambda_index,lambda,j,position,variant,lower,upper,nu_true,"
                        "covered,length,in_A0\n",
                        0),
              0u);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, ResumesFromStoredReplicates) {
    ExperimentConfig cfg = parse_config(kMinimal);
    cfg.mode = ExperimentMode::Intervals;
    const fs::path dir = scratch("exp_resume");
    const ExperimentOutput first = run_experiment(cfg, dir.string());
    EXPECT_EQ(first.resumed, 0);
    const std::string records = read_file((dir / "records.csv").string());
    const ExperimentOutput second = run_experiment(cfg, dir.string());
    EXPECT_EQ(second.resumed, 2);
    EXPECT_EQ(read_file((dir / "records.csv").string()), records);
    // A different config invalidates the stored replicates.
    cfg.seed = 8;
    const ExperimentOutput third = run_experiment(cfg, dir.string());
    EXPECT_EQ(third.resumed, 0);
    fs::remove_all(dir);
}

TEST(Experiment, ReplicateJsonRoundTrip) {
    ExperimentConfig cfg = parse_config(kMinimal);
    const ReplicateResult r = run_replicate(cfg, 0);
    const ReplicateResult back = replicate_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(records_csv({r}), records_csv({back}));
    EXPECT_EQ(sets_csv({r}), sets_csv({back}));
}

TEST(Experiment, SensitivityModeSweepsTheGrid) {
    ExperimentConfig cfg = parse_config(kMinimal);
    cfg.mode = ExperimentMode::LambdaSensitivity;
    cfg.grid_size = 4;
    cfg.replicates = 1;
    cfg.variants = {IntervalVariant::Randomized};
    const ReplicateResult r = run_replicate(cfg, 0);
    ASSERT_EQ(r.fits.size(), 4u);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(r.fits[i].lambda_index, i);
    // The largest grid point is lambda_max: nothing is selected there.
    EXPECT_EQ(r.fits[0].status, "empty_model");
    const auto report = summarize(cfg, {r});
    EXPECT_TRUE(report.contains("lambda_series"));
}

} // namespace
} // namespace lassopsi
