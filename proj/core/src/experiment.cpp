#include "lassopsi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "lassopsi/io.hpp"
#include "lassopsi/lasso.hpp"
#include "lassopsi/random.hpp"

namespace lassopsi {

namespace fs = std::filesystem;

std::string to_string(ExperimentMode mode) {
    switch (mode) {
    case ExperimentMode::Intervals: return "intervals";
    case ExperimentMode::LambdaSensitivity: return "lambda_sensitivity";
    case ExperimentMode::Sets: return "sets";
    }
    return "unknown";
}

namespace {

// ---- config parsing -------------------------------------------------------

class ConfigReader {
public:
    ConfigReader(const YAML::Node& root, std::string source)
        : root_(root), source_(std::move(source)) {}

    [[noreturn]] void error(const YAML::Node& node, const std::string& what) const {
        const YAML::Mark m = node.Mark();
        std::string where = source_;
        if (!m.is_null()) where += ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1);
        fail(ErrorCode::Config, where + ": " + what);
    }

    YAML::Node get(const std::string& key) {
        seen_.insert(key);
        return root_[key];
    }

    template <typename T>
    void scalar(const std::string& key, T& out) {
        const YAML::Node node = get(key);
        if (!node) return;
        if (!node.IsScalar()) error(node, "'" + key + "' must be a scalar");
        try {
            out = node.as<T>();
        } catch (const YAML::Exception&) {
            error(node, "'" + key + "' has an invalid value '" + node.Scalar() + "'");
        }
    }

    void positive(const std::string& key, int& out, int min = 1) {
        const YAML::Node node = root_[key];
        scalar(key, out);
        if (node && out < min) error(node, "'" + key + "' must be >= " + std::to_string(min));
    }

    void check_unknown() const {
        for (const auto& kv : root_) {
            const std::string key = kv.first.as<std::string>();
            if (!seen_.count(key)) error(kv.first, "unknown key '" + key + "'");
        }
    }

private:
    YAML::Node root_;
    std::string source_;
    std::set<std::string> seen_;
};

template <typename F>
auto parse_enum(ConfigReader& r, const YAML::Node& node, F&& parse) {
    try {
        return parse(node.as<std::string>());
    } catch (const Error& e) {
        r.error(node, e.what());
    } catch (const YAML::Exception&) {
        r.error(node, "expected a string");
    }
}

} // namespace

ExperimentConfig parse_config(const std::string& yaml_text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::ParserException& e) {
        fail(ErrorCode::Config, source + ":" + std::to_string(e.mark.line + 1) + ":" +
                                    std::to_string(e.mark.column + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) fail(ErrorCode::Config, source + ": top level must be a mapping");
    ConfigReader r(root, source);
    ExperimentConfig cfg;

    if (auto node = r.get("mode")) {
        const std::string m = node.as<std::string>();
        if (m == "intervals") cfg.mode = ExperimentMode::Intervals;
        else if (m == "lambda_sensitivity") cfg.mode = ExperimentMode::LambdaSensitivity;
        else if (m == "sets") cfg.mode = ExperimentMode::Sets;
        else r.error(node, "unknown mode '" + m + "' (intervals, lambda_sensitivity, sets)");
    }
    if (auto node = r.get("design")) cfg.design = parse_enum(r, node, parse_design);
    if (auto node = r.get("support")) cfg.support = parse_enum(r, node, parse_support);
    r.positive("n", cfg.n, 2);
    r.positive("p", cfg.p, 2);
    r.positive("support_size", cfg.support_size, 0);
    r.scalar("beta_low", cfg.beta_low);
    r.scalar("beta_high", cfg.beta_high);
    r.scalar("sigma2", cfg.sigma2);
    r.scalar("alpha", cfg.alpha);
    r.positive("replicates", cfg.replicates);
    r.positive("K", cfg.K);
    r.positive("N", cfg.N);
    r.positive("burn_in", cfg.burn_in, 0);
    r.positive("thin", cfg.thin);
    r.scalar("tau_multiplier", cfg.tau_multiplier);
    r.positive("single_draws", cfg.single_draws, 0);
    r.scalar("seed", cfg.seed);
    if (auto node = r.get("lambda")) {
        if (!node.IsScalar()) r.error(node, "'lambda' must be 'cv' or a positive number");
        if (node.Scalar() != "cv") {
            try {
                cfg.lambda = node.as<double>();
            } catch (const YAML::Exception&) {
                r.error(node, "'lambda' must be 'cv' or a positive number");
            }
            if (!(*cfg.lambda > 0)) r.error(node, "'lambda' must be positive");
        }
    }
    r.positive("cv_folds", cfg.cv_folds, 2);
    r.positive("cv_grid", cfg.cv_grid, 2);
    r.positive("grid_size", cfg.grid_size, 2);
    if (auto node = r.get("variants")) {
        if (!node.IsSequence() || node.size() == 0) r.error(node, "'variants' must be a non-empty list");
        cfg.variants.clear();
        for (const auto& v : node) cfg.variants.push_back(parse_enum(r, v, parse_variant));
    }
    if (auto node = r.get("sets")) {
        if (!node.IsMap()) r.error(node, "'sets' must be a mapping");
        for (const auto& kv : node) {
            const std::string key = kv.first.as<std::string>();
            try {
                if (key == "pairwise") cfg.pairwise = kv.second.as<bool>();
                else if (key == "joint") cfg.joint = kv.second.as<bool>();
                else if (key == "norms") {
                    cfg.norms.clear();
                    for (const auto& v : kv.second) cfg.norms.push_back(parse_enum(r, v, parse_norm));
                    if (cfg.norms.empty()) r.error(kv.second, "'norms' must not be empty");
                } else {
                    r.error(kv.first, "unknown key 'sets." + key + "'");
                }
            } catch (const YAML::Exception&) {
                r.error(kv.second, "invalid value for 'sets." + key + "'");
            }
        }
    }
    r.scalar("verify_fraction", cfg.verify_fraction);
    if (auto node = r.get("notes")) {
        if (!node.IsSequence()) r.error(node, "'notes' must be a list of strings");
        for (const auto& v : node) cfg.notes.push_back(v.as<std::string>());
    }
    r.positive("threads", cfg.threads, 0);
    r.check_unknown();

    auto check = [&](bool ok, const char* key, const std::string& what) {
        if (!ok) r.error(root[key] ? root[key] : root, what);
    };
    check(cfg.p > cfg.n, "p", "design must have p > n");
    check(cfg.support_size <= cfg.p, "support_size", "support larger than p");
    check(cfg.sigma2 > 0, "sigma2", "'sigma2' must be positive");
    check(cfg.alpha > 0 && cfg.alpha < 1, "alpha", "'alpha' must lie in (0, 1)");
    check(cfg.beta_low <= cfg.beta_high, "beta_high", "'beta_high' below 'beta_low'");
    check(cfg.tau_multiplier > 0, "tau_multiplier", "'tau_multiplier' must be positive");
    check(cfg.cv_folds <= cfg.n, "cv_folds", "'cv_folds' exceeds n");
    check(cfg.verify_fraction >= 0 && cfg.verify_fraction <= 1, "verify_fraction",
          "'verify_fraction' must lie in [0, 1]");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        fail(ErrorCode::Config, e.what());
    }
    return parse_config(text, path);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["mode"] = to_string(cfg.mode);
    j["design"] = to_string(cfg.design);
    j["n"] = cfg.n;
    j["p"] = cfg.p;
    j["support"] = to_string(cfg.support);
    j["support_size"] = cfg.support_size;
    j["beta_low"] = cfg.beta_low;
    j["beta_high"] = cfg.beta_high;
    j["sigma2"] = cfg.sigma2;
    j["alpha"] = cfg.alpha;
    j["replicates"] = cfg.replicates;
    j["K"] = cfg.K;
    j["N"] = cfg.N;
    j["burn_in"] = cfg.burn_in;
    j["thin"] = cfg.thin;
    j["tau_multiplier"] = cfg.tau_multiplier;
    j["single_draws"] = cfg.single_draws;
    j["seed"] = cfg.seed;
    if (cfg.lambda) j["lambda"] = *cfg.lambda;
    else j["lambda"] = "cv";
    j["cv_folds"] = cfg.cv_folds;
    j["cv_grid"] = cfg.cv_grid;
    j["grid_size"] = cfg.grid_size;
    j["variants"] = nlohmann::json::array();
    for (auto v : cfg.variants) j["variants"].push_back(to_string(v));
    j["sets"] = {{"pairwise", cfg.pairwise}, {"joint", cfg.joint}, {"norms", nlohmann::json::array()}};
    for (auto d : cfg.norms) j["sets"]["norms"].push_back(to_string(d));
    j["verify_fraction"] = cfg.verify_fraction;
    j["notes"] = cfg.notes;
    return j;
}

// ---- replicate records ----------------------------------------------------

namespace {

nlohmann::json interval_json(const IntervalResult& iv) {
    return {{"position", iv.position}, {"feature", iv.feature}, {"variant", to_string(iv.variant)},
            {"lower", iv.lower},       {"upper", iv.upper},     {"alpha", iv.alpha}};
}

IntervalResult interval_from_json(const nlohmann::json& j) {
    IntervalResult iv;
    iv.position = j.at("position").get<int>();
    iv.feature = j.at("feature").get<int>();
    iv.variant = parse_variant(j.at("variant").get<std::string>());
    iv.lower = j.at("lower").get<double>();
    iv.upper = j.at("upper").get<double>();
    iv.alpha = j.at("alpha").get<double>();
    return iv;
}

nlohmann::json set_json(const SetRecord& s) {
    return {{"family", s.family},         {"delta", to_string(s.delta)},
            {"positions", s.positions},   {"radius", s.radius},
            {"diameter", s.diameter},     {"log_volume", s.log_volume},
            {"volume_star", s.volume_star}, {"covered", s.covered},
            {"excludes_zero", s.excludes_zero}};
}

SetRecord set_from_json(const nlohmann::json& j) {
    SetRecord s;
    s.family = j.at("family").get<std::string>();
    s.delta = parse_norm(j.at("delta").get<std::string>());
    s.positions = j.at("positions").get<IndexSet>();
    s.radius = j.at("radius").get<double>();
    s.diameter = j.at("diameter").get<double>();
    s.log_volume = j.at("log_volume").get<double>();
    s.volume_star = j.at("volume_star").get<double>();
    s.covered = j.at("covered").get<bool>();
    s.excludes_zero = j.at("excludes_zero").get<bool>();
    return s;
}

} // namespace

nlohmann::json to_json(const ReplicateResult& r) {
    nlohmann::json j;
    j["dataset"] = r.dataset;
    j["A0"] = r.A0;
    j["fits"] = nlohmann::json::array();
    for (const FitRecord& f : r.fits) {
        nlohmann::json fj;
        fj["lambda_index"] = f.lambda_index;
        fj["lambda"] = f.lambda;
        fj["status"] = f.status;
        fj["active"] = f.active;
        fj["nu_true"] = to_json(f.nu_true);
        fj["nu_hat"] = to_json(f.nu_hat);
        fj["intervals"] = nlohmann::json::array();
        for (const auto& iv : f.intervals) fj["intervals"].push_back(interval_json(iv));
        fj["sets"] = nlohmann::json::array();
        for (const auto& s : f.sets) fj["sets"].push_back(set_json(s));
        fj["acceptance_b"] = f.acceptance_b;
        fj["acceptance_sF"] = f.acceptance_sF;
        fj["refit_checked"] = f.refit_checked;
        fj["refit_mismatched"] = f.refit_mismatched;
        j["fits"].push_back(std::move(fj));
    }
    return j;
}

ReplicateResult replicate_from_json(const nlohmann::json& j) {
    ReplicateResult r;
    r.dataset = j.at("dataset").get<int>();
    r.A0 = j.at("A0").get<IndexSet>();
    for (const auto& fj : j.at("fits")) {
        FitRecord f;
        f.lambda_index = fj.at("lambda_index").get<int>();
        f.lambda = fj.at("lambda").get<double>();
        f.status = fj.at("status").get<std::string>();
        f.active = fj.at("active").get<IndexSet>();
        f.nu_true = vector_from_json(fj.at("nu_true"));
        f.nu_hat = vector_from_json(fj.at("nu_hat"));
        for (const auto& iv : fj.at("intervals")) f.intervals.push_back(interval_from_json(iv));
        for (const auto& s : fj.at("sets")) f.sets.push_back(set_from_json(s));
        f.acceptance_b = fj.at("acceptance_b").get<double>();
        f.acceptance_sF = fj.at("acceptance_sF").get<double>();
        f.refit_checked = fj.at("refit_checked").get<int>();
        f.refit_mismatched = fj.at("refit_mismatched").get<int>();
        r.fits.push_back(std::move(f));
    }
    return r;
}

// ---- pipeline -------------------------------------------------------------

namespace {

bool wants(const ExperimentConfig& cfg, IntervalVariant v) {
    return std::find(cfg.variants.begin(), cfg.variants.end(), v) != cfg.variants.end();
}

// Seed streams below a replicate's inference seed.
constexpr std::uint64_t kStreamCv = 100;
constexpr std::uint64_t kStreamPlugin = 101;
constexpr std::uint64_t kStreamOracle = 102;

SetRecord make_set_record(const SetResult& s, const std::string& family, IndexSet positions,
                          const VectorXd& nu_true, int q) {
    SetRecord rec;
    rec.family = family;
    rec.delta = s.delta;
    rec.positions = std::move(positions);
    rec.radius = s.radius;
    rec.diameter = s.diameter;
    rec.log_volume = s.log_volume;
    rec.volume_star = s.volume_star(q);
    rec.covered = s.contains(s.H * nu_true);
    rec.excludes_zero = !s.contains(VectorXd::Zero(s.m()));
    return rec;
}

FitRecord infer_once(const ExperimentConfig& cfg, const DesignContext& ctx, const Dataset& data,
                     double lambda, int lambda_index, std::uint64_t seed) {
    FitRecord rec;
    rec.lambda = lambda;
    rec.lambda_index = lambda_index;
    const LassoSolution fit = fit_lasso(ctx, data.y, lambda);
    rec.active = fit.active;
    if (fit.active.empty()) {
        rec.status = "empty_model";
        return rec;
    }
    const int q = static_cast<int>(fit.active.size());
    const ActiveSetGeometry geom = ActiveSetGeometry::build(ctx, fit.active);
    rec.nu_true = geom.active_pinv() * data.mu0;

    const bool need_boundary = wants(cfg, IntervalVariant::Randomized) ||
                               wants(cfg, IntervalVariant::Conservative) ||
                               (cfg.mode == ExperimentMode::Sets);
    const int single = cfg.single_draws > 0 ? cfg.single_draws : cfg.K * cfg.N;
    ChainBatchOptions single_opts;
    single_opts.draws = single;
    single_opts.burn_in = cfg.burn_in;
    single_opts.thin = cfg.thin;
    single_opts.tau_multiplier = cfg.tau_multiplier;
    single_opts.threads = 1;

    const ConfidenceEllipsoid ell = build_C_A(ctx, data.y, fit.active, cfg.sigma2, cfg.alpha);
    rec.nu_hat = ell.nu_hat;
    const AugmentedState init = default_init(fit, geom);

    if (need_boundary) {
        Algorithm1Options opts;
        opts.alpha = cfg.alpha;
        opts.K = cfg.K;
        opts.N = cfg.N;
        opts.burn_in = cfg.burn_in;
        opts.thin = cfg.thin;
        opts.tau_multiplier = cfg.tau_multiplier;
        opts.seed = seed;
        opts.threads = 1;
        opts.verify_fraction = cfg.verify_fraction;
        const Algorithm1Result res = run_algorithm1(ctx, data.y, lambda, cfg.sigma2, opts);
        if (wants(cfg, IntervalVariant::Randomized))
            rec.intervals.insert(rec.intervals.end(), res.randomized.begin(), res.randomized.end());
        if (wants(cfg, IntervalVariant::Conservative))
            rec.intervals.insert(rec.intervals.end(), res.conservative.begin(), res.conservative.end());
        double acc_b = 0.0, acc_f = 0.0;
        for (const auto& c : res.chains) {
            acc_b += c.mean_acceptance_b;
            acc_f += c.mean_acceptance_sF;
        }
        rec.acceptance_b = acc_b / static_cast<double>(res.chains.size());
        rec.acceptance_sF = acc_f / static_cast<double>(res.chains.size());
        rec.refit_checked = res.refit.checked;
        rec.refit_mismatched = res.refit.mismatched;

        if (cfg.mode == ExperimentMode::Sets) {
            for (NormDelta delta : cfg.norms) {
                if (cfg.pairwise && q >= 2) {
                    for (int a = 0; a < q; ++a) {
                        for (int b = a + 1; b < q; ++b) {
                            MatrixXd H = MatrixXd::Zero(2, q);
                            H(0, a) = 1.0;
                            H(1, b) = 1.0;
                            const SetResult s = build_set(res.draws.nu_star, ell.nu_hat, H, delta, cfg.alpha);
                            rec.sets.push_back(make_set_record(s, "pairwise", {a, b}, rec.nu_true, q));
                        }
                    }
                }
                if (cfg.joint) {
                    const SetResult s = build_set(res.draws.nu_star, ell.nu_hat,
                                                  MatrixXd::Identity(q, q), delta, cfg.alpha);
                    IndexSet all(q);
                    for (int i = 0; i < q; ++i) all[i] = i;
                    rec.sets.push_back(make_set_record(s, "joint", std::move(all), rec.nu_true, q));
                }
            }
        }
    }
    if (wants(cfg, IntervalVariant::Plugin)) {
        single_opts.seed = derive_seed(seed, kStreamPlugin);
        const ConditionedDraws d =
            single_mean_draws(ctx, geom, ell.mu_hat(), cfg.sigma2, lambda, init, single_opts);
        for (int j = 0; j < q; ++j)
            rec.intervals.push_back(build_interval_pivot(d.nu_star, ell.nu_hat, ell.nu_hat, j,
                                                         cfg.alpha, IntervalVariant::Plugin,
                                                         fit.active[j]));
    }
    if (wants(cfg, IntervalVariant::Oracle)) {
        single_opts.seed = derive_seed(seed, kStreamOracle);
        const ConditionedDraws d =
            single_mean_draws(ctx, geom, data.mu0, cfg.sigma2, lambda, init, single_opts);
        for (int j = 0; j < q; ++j)
            rec.intervals.push_back(build_interval_pivot(d.nu_star, rec.nu_true, ell.nu_hat, j,
                                                         cfg.alpha, IntervalVariant::Oracle,
                                                         fit.active[j]));
    }
    return rec;
}

// A failure in one fit (e.g. a degenerate geometry at an extreme lambda) is
// recorded as that fit's status instead of aborting the experiment.
FitRecord infer_at(const ExperimentConfig& cfg, const DesignContext& ctx, const Dataset& data,
                   double lambda, int lambda_index, std::uint64_t seed) {
    try {
        return infer_once(cfg, ctx, data, lambda, lambda_index, seed);
    } catch (const Error& e) {
        FitRecord rec;
        rec.lambda = lambda;
        rec.lambda_index = lambda_index;
        rec.status = std::string(to_string(e.code()));
        try {
            rec.active = fit_lasso(ctx, data.y, lambda).active;
        } catch (const Error&) {
        }
        return rec;
    }
}

} // namespace

ReplicateResult run_replicate(const ExperimentConfig& cfg, int r) {
    const auto rr = static_cast<std::uint64_t>(r);
    DesignSpec spec;
    spec.kind = cfg.design;
    spec.n = cfg.n;
    spec.p = cfg.p;
    spec.A0 = support_preset(cfg.support, cfg.support_size, cfg.p);
    spec.beta_low = cfg.beta_low;
    spec.beta_high = cfg.beta_high;
    spec.sigma2 = cfg.sigma2;
    spec.seed = derive_seed(cfg.seed, 2 * rr);
    const std::uint64_t inference_seed = derive_seed(cfg.seed, 2 * rr + 1);

    const Dataset data = generate_dataset(spec);
    const DesignContext ctx = DesignContext::build(data.X, VectorXd());
    ReplicateResult out;
    out.dataset = r;
    out.A0 = spec.A0;

    if (cfg.mode == ExperimentMode::LambdaSensitivity) {
        const std::vector<double> grid = lambda_grid(ctx, data.y, cfg.grid_size);
        for (int i = 0; i < cfg.grid_size; ++i) {
            out.fits.push_back(infer_at(cfg, ctx, data, grid[i], i,
                                        derive_seed(inference_seed, static_cast<std::uint64_t>(i))));
        }
        return out;
    }
    double lambda;
    if (cfg.lambda) {
        lambda = *cfg.lambda;
    } else {
        const std::vector<double> grid = lambda_grid(ctx, data.y, cfg.cv_grid);
        lambda = cv_lambda_1se(ctx, data.y, cfg.cv_folds, grid, derive_seed(inference_seed, kStreamCv));
    }
    out.fits.push_back(infer_at(cfg, ctx, data, lambda, -1, inference_seed));
    return out;
}

// ---- aggregation ----------------------------------------------------------

std::vector<ScoredFit> scored_fits(const std::vector<ReplicateResult>& reps) {
    std::vector<ScoredFit> out;
    for (const auto& r : reps) {
        for (const auto& f : r.fits) {
            if (f.status != "ok") continue;
            ScoredFit s;
            s.dataset = r.dataset;
            s.active = f.active;
            s.A0 = r.A0;
            s.nu_true = f.nu_true;
            s.intervals = f.intervals;
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

nlohmann::json cell_json(const CoverageCell& c) {
    return {{"hits", c.hits}, {"total", c.total}, {"rate", c.rate()}};
}

nlohmann::json variant_json(const VariantMetrics& m) {
    return {{"coverage",
             {{"A", cell_json(m.coverage_A)},
              {"A0_and_A", cell_json(m.coverage_A0)},
              {"A0c_and_A", cell_json(m.coverage_A0c)}}},
            {"power", cell_json(m.power)},
            {"mean_length", {{"pooled", m.mean_length_pooled}, {"dataset_mean", m.mean_length_by_dataset}}},
            {"datasets", m.datasets}};
}

nlohmann::json interval_summary(const std::vector<ScoredFit>& fits) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& m : compute_metrics(fits)) j[to_string(m.variant)] = variant_json(m);

    // Per-dataset comparisons between variants.
    int compared = 0, plugin_below = 0, plugin_at_most = 0;
    long long nest_total = 0, nest_hits = 0;
    for (const auto& f : fits) {
        const double cp = fit_coverage(f, IntervalVariant::Plugin);
        const double cr = fit_coverage(f, IntervalVariant::Randomized);
        if (cp >= 0 && cr >= 0) {
            ++compared;
            plugin_below += cp < cr;
            plugin_at_most += cp <= cr;
        }
        std::map<int, const IntervalResult*> rand;
        for (const auto& iv : f.intervals)
            if (iv.variant == IntervalVariant::Randomized) rand[iv.position] = &iv;
        for (const auto& iv : f.intervals) {
            if (iv.variant != IntervalVariant::Conservative) continue;
            auto it = rand.find(iv.position);
            if (it == rand.end()) continue;
            ++nest_total;
            nest_hits += iv.lower <= it->second->lower && it->second->upper <= iv.upper;
        }
    }
    nlohmann::json cmp;
    cmp["datasets_compared"] = compared;
    cmp["plugin_below_randomized"] = compared ? static_cast<double>(plugin_below) / compared : 0.0;
    cmp["plugin_at_most_randomized"] = compared ? static_cast<double>(plugin_at_most) / compared : 0.0;
    cmp["conservative_contains_randomized"] = {
        {"hits", nest_hits},
        {"total", nest_total},
        {"rate", nest_total ? static_cast<double>(nest_hits) / static_cast<double>(nest_total) : 0.0}};
    return {{"variants", j}, {"comparisons", cmp}};
}

nlohmann::json set_summary(const std::vector<ReplicateResult>& reps) {
    struct Acc {
        long long covered = 0, powered = 0, total = 0;
        double diameter = 0.0, volume_star = 0.0, log_volume = 0.0;
        bool finite = true;
        double dataset_cov_sum = 0.0;
        int datasets = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& r : reps) {
        for (const auto& f : r.fits) {
            std::map<std::string, std::pair<long long, long long>> per;
            for (const auto& s : f.sets) {
                const std::string key = s.family + "/" + to_string(s.delta);
                Acc& a = acc[key];
                a.covered += s.covered;
                a.powered += s.excludes_zero;
                a.total += 1;
                a.diameter += s.diameter;
                a.volume_star += s.volume_star;
                a.log_volume += s.log_volume;
                a.finite = a.finite && std::isfinite(s.radius);
                per[key].first += s.covered;
                per[key].second += 1;
            }
            for (const auto& [key, c] : per) {
                acc[key].dataset_cov_sum += static_cast<double>(c.first) / static_cast<double>(c.second);
                acc[key].datasets += 1;
            }
        }
    }
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, a] : acc) {
        const double t = static_cast<double>(a.total);
        j[key] = {{"sets", a.total},
                  {"datasets", a.datasets},
                  {"coverage", static_cast<double>(a.covered) / t},
                  {"coverage_dataset_mean", a.dataset_cov_sum / a.datasets},
                  {"power", static_cast<double>(a.powered) / t},
                  {"mean_diameter", a.diameter / t},
                  {"mean_volume_star", a.volume_star / t},
                  {"mean_log_volume", a.log_volume / t},
                  {"all_radii_finite", a.finite}};
    }
    return j;
}

nlohmann::json lambda_summary(const ExperimentConfig& cfg, const std::vector<ReplicateResult>& reps) {
    nlohmann::json series = nlohmann::json::array();
    for (int i = 0; i < cfg.grid_size; ++i) {
        double lambda_sum = 0.0, q_sum = 0.0;
        int fits = 0, eligible = 0;
        CoverageCell all, elig;
        for (const auto& r : reps) {
            for (const auto& f : r.fits) {
                if (f.lambda_index != i) continue;
                ++fits;
                lambda_sum += f.lambda;
                const int q = static_cast<int>(f.active.size());
                q_sum += q;
                const bool in_range = q >= 2 && q <= 30;
                eligible += in_range;
                for (const auto& iv : f.intervals) {
                    if (iv.variant != IntervalVariant::Randomized) continue;
                    const bool hit = iv.contains(f.nu_true[iv.position]);
                    all.hits += hit;
                    all.total += 1;
                    if (in_range) {
                        elig.hits += hit;
                        elig.total += 1;
                    }
                }
            }
        }
        series.push_back({{"index", i},
                          {"fits", fits},
                          {"mean_lambda", fits ? lambda_sum / fits : 0.0},
                          {"mean_active_size", fits ? q_sum / fits : 0.0},
                          {"coverage", cell_json(all)},
                          {"fits_with_2_to_30_active", eligible},
                          {"coverage_2_to_30_active", cell_json(elig)}});
    }
    return series;
}

} // namespace

nlohmann::json summarize(const ExperimentConfig& cfg, const std::vector<ReplicateResult>& reps) {
    nlohmann::json j;
    j["config"] = config_to_json(cfg);
    int fits = 0, empty = 0, failed = 0, checked = 0, mismatched = 0;
    for (const auto& r : reps) {
        for (const auto& f : r.fits) {
            ++fits;
            empty += f.status == "empty_model";
            failed += f.status != "ok" && f.status != "empty_model";
            checked += f.refit_checked;
            mismatched += f.refit_mismatched;
        }
    }
    j["replicates"] = static_cast<int>(reps.size());
    j["fits"] = fits;
    j["empty_models"] = empty;
    j["failed_fits"] = failed;
    j["refit_check"] = {{"checked", checked}, {"mismatched", mismatched}};
    const auto sf = scored_fits(reps);
    j["intervals"] = interval_summary(sf);
    if (cfg.mode == ExperimentMode::Sets) j["sets"] = set_summary(reps);
    if (cfg.mode == ExperimentMode::LambdaSensitivity) j["lambda_series"] = lambda_summary(cfg, reps);
    j["notes"] = cfg.notes;
    return j;
}

std::string records_csv(const std::vector<ReplicateResult>& reps) {
    std::ostringstream out;
    out << "dataset_id,lambda_index,lambda,j,position,variant,lower,upper,nu_true,covered,length,in_A0\n";
    for (const auto& r : reps) {
        for (const auto& f : r.fits) {
            for (const auto& iv : f.intervals) {
                const double truth = f.nu_true[iv.position];
                out << r.dataset << ',' << f.lambda_index << ',' << format_double(f.lambda) << ','
                    << iv.feature << ',' << iv.position << ',' << to_string(iv.variant) << ','
                    << format_double(iv.lower) << ',' << format_double(iv.upper) << ','
                    << format_double(truth) << ',' << (iv.contains(truth) ? 1 : 0) << ','
                    << format_double(iv.length()) << ','
                    << (std::binary_search(r.A0.begin(), r.A0.end(), iv.feature) ? 1 : 0) << '\n';
            }
        }
    }
    return out.str();
}

std::string sets_csv(const std::vector<ReplicateResult>& reps) {
    std::ostringstream out;
    out << "dataset_id,lambda_index,family,delta,positions,m,radius,diameter,log_volume,volume_star,covered,excludes_zero\n";
    for (const auto& r : reps) {
        for (const auto& f : r.fits) {
            for (const auto& s : f.sets) {
                std::string pos;
                for (std::size_t i = 0; i < s.positions.size(); ++i)
                    pos += (i ? ";" : "") + std::to_string(s.positions[i]);
                out << r.dataset << ',' << f.lambda_index << ',' << s.family << ','
                    << to_string(s.delta) << ',' << pos << ',' << s.positions.size() << ','
                    << format_double(s.radius) << ',' << format_double(s.diameter) << ','
                    << format_double(s.log_volume) << ',' << format_double(s.volume_star) << ','
                    << (s.covered ? 1 : 0) << ',' << (s.excludes_zero ? 1 : 0) << '\n';
            }
        }
    }
    return out.str();
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    ExperimentOutput out;
    out.replicates.resize(cfg.replicates);
    const nlohmann::json echo = config_to_json(cfg);
    std::vector<char> done(cfg.replicates, 0);
    fs::path rep_dir;
    auto rep_path = [&](int r) {
        char name[32];
        std::snprintf(name, sizeof name, "rep_%04d.json", r);
        return rep_dir / name;
    };
    if (!out_dir.empty()) {
        rep_dir = fs::path(out_dir) / "replicates";
        fs::create_directories(rep_dir);
        for (int r = 0; r < cfg.replicates; ++r) {
            const fs::path path = rep_path(r);
            if (!fs::exists(path)) continue;
            try {
                const auto j = nlohmann::json::parse(read_file(path.string()));
                if (j.at("config") != echo) continue;
                out.replicates[r] = replicate_from_json(j.at("replicate"));
                done[r] = 1;
                ++out.resumed;
            } catch (const std::exception&) {
                // Unreadable or stale checkpoint: recompute.
            }
        }
    }
    parallel_for(cfg.replicates, resolve_threads(cfg.threads), [&](int r) {
        if (done[r]) return;
        out.replicates[r] = run_replicate(cfg, r);
        if (!out_dir.empty()) {
            const nlohmann::json j = {{"config", echo}, {"replicate", to_json(out.replicates[r])}};
            write_file_atomic(rep_path(r).string(), j.dump(1) + "\n");
        }
    });
    out.report = summarize(cfg, out.replicates);
    if (!out_dir.empty()) {
        const fs::path dir(out_dir);
        write_file_atomic((dir / "report.json").string(), out.report.dump(2) + "\n");
        write_file_atomic((dir / "records.csv").string(), records_csv(out.replicates));
        if (cfg.mode == ExperimentMode::Sets)
            write_file_atomic((dir / "sets.csv").string(), sets_csv(out.replicates));
    }
    return out;
}

} // namespace lassopsi
