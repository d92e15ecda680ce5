#include "cli.hpp"

#include <cmath>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lassopsi/errors.hpp"
#include "lassopsi/experiment.hpp"
#include "lassopsi/harness.hpp"
#include "lassopsi/inference.hpp"
#include "lassopsi/io.hpp"
#include "lassopsi/lasso.hpp"
#include "lassopsi/mh_sampler.hpp"
#include "lassopsi/random.hpp"
#include "lassopsi/reconstruction.hpp"

namespace lassopsi::cli {

namespace {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::Parse:
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
    case ErrorCode::NonPositiveWeight: return kParseError;
    case ErrorCode::EmptyModel: return kEmptyModel;
    case ErrorCode::InsufficientDraws: return kInsufficientDraws;
    case ErrorCode::BudgetExhausted: return kBudgetExhausted;
    default: return kSolverFailure;
    }
}

void error_line(std::ostream& err, const std::string& code, int exit_code, const std::string& message) {
    err << json{{"error", {{"code", code}, {"exit", exit_code}, {"message", message}}}}.dump() << '\n';
}

struct DataOptions {
    std::string x_path;
    std::string y_path;
    std::string weights_path;
    bool header = false;
    std::optional<double> lambda;
    bool cv = false;
    int cv_folds = 10;
    int cv_grid = 50;
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
    cmd->add_option("--X", o.x_path, "design matrix CSV (n rows, p columns)")->required();
    cmd->add_option("--y", o.y_path, "response CSV (n values)")->required();
    cmd->add_option("--weights", o.weights_path, "penalty weights CSV (p positive values)");
    cmd->add_flag("--header", o.header, "CSV files start with a header line");
    auto* lam = cmd->add_option("--lambda", o.lambda, "lasso penalty")->check(CLI::PositiveNumber);
    auto* cv = cmd->add_flag("--cv", o.cv, "choose lambda by cross-validation (one-SE rule)");
    lam->excludes(cv);
    cmd->add_option("--cv-folds", o.cv_folds, "cross-validation folds")->check(CLI::Range(2, 1000000));
    cmd->add_option("--cv-grid", o.cv_grid, "cross-validation grid size")->check(CLI::Range(2, 1000000));
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--threads", o.threads, "worker threads (0: $LASSOPSI_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
}

json data_echo(const DataOptions& o) {
    json j{{"X", o.x_path},         {"y", o.y_path},       {"header", o.header},
           {"cv_folds", o.cv_folds}, {"cv_grid", o.cv_grid}, {"seed", o.seed},
           {"threads", resolve_threads(o.threads)}};
    j["weights"] = o.weights_path.empty() ? json(nullptr) : json(o.weights_path);
    j["lambda"] = o.lambda ? json(*o.lambda) : json("cv");
    return j;
}

struct Problem {
    DesignContext ctx;
    VectorXd y;
    double lambda = 0.0;
    json cv = nullptr;
};

Problem load_problem(const DataOptions& o) {
    require(o.lambda.has_value() || o.cv, ErrorCode::InvalidArgument,
            "one of --lambda or --cv is required");
    const MatrixXd X = read_csv_matrix(o.x_path, o.header);
    const VectorXd y = read_csv_vector(o.y_path, o.header);
    require(y.size() == X.rows(), ErrorCode::Parse,
            "y has " + std::to_string(y.size()) + " values but X has " +
                std::to_string(X.rows()) + " rows");
    VectorXd w;
    if (!o.weights_path.empty()) {
        w = read_csv_vector(o.weights_path, o.header);
        require(w.size() == X.cols(), ErrorCode::Parse, "weights must have one value per column");
    }
    Problem pr{X.cols() > X.rows() ? DesignContext::build(X, w)
                                   : DesignContext::build_low_dimensional(X, w),
               y, 0.0, nullptr};
    if (o.lambda) {
        pr.lambda = *o.lambda;
    } else {
        const auto grid = lambda_grid(pr.ctx, y, o.cv_grid);
        CvOptions cvo;
        cvo.folds = o.cv_folds;
        cvo.seed = derive_seed(o.seed, 100);
        const CvResult res = cross_validate(pr.ctx, y, grid, cvo);
        pr.lambda = res.lambda;
        pr.cv = {{"lambda", res.lambda},
                 {"index", res.index},
                 {"min_index", res.min_index},
                 {"grid", grid},
                 {"mean_error", res.mean_error},
                 {"standard_error", res.standard_error}};
    }
    return pr;
}

json fit_json(const LassoSolution& sol) {
    json beta = json::array();
    for (int j : sol.active) beta.push_back({{"index", j}, {"value", sol.beta[j]}});
    return {{"lambda", sol.lambda},
            {"active", sol.active},
            {"signs", to_json(sol.active_signs())},
            {"beta", beta},
            {"subgradient", to_json(sol.subgradient)},
            {"kkt_residual", sol.kkt_residual},
            {"sweeps", sol.sweeps}};
}

json chain_json(const ChainSummary& s) {
    return {{"acceptance_b", s.mean_acceptance_b},
            {"skipped_b", s.mean_skipped_b},
            {"acceptance_sF", s.mean_acceptance_sF},
            {"max_abs_acf_lag1", s.max_abs_acf_lag1}};
}

json interval_json(const IntervalResult& iv) {
    return {{"feature", iv.feature}, {"position", iv.position}, {"variant", to_string(iv.variant)},
            {"lower", iv.lower},     {"upper", iv.upper},       {"length", iv.length()},
            {"alpha", iv.alpha}};
}

json set_json(const SetResult& s, const std::string& kind, int q) {
    const double vol = s.volume();
    return {{"kind", kind},
            {"H", to_json(s.H)},
            {"m", s.m()},
            {"center", to_json(s.center)},
            {"radius", s.radius},
            {"delta", to_string(s.delta)},
            {"diameter", s.diameter},
            {"log_volume", s.log_volume},
            {"volume", std::isfinite(vol) ? json(vol) : json(nullptr)},
            {"volume_star", s.volume_star(q)}};
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

// ---- subcommands ------------------------------------------------------------

int cmd_fit(const DataOptions& o, std::ostream& out) {
    Problem pr = load_problem(o);
    const LassoSolution sol = fit_lasso(pr.ctx, pr.y, pr.lambda);
    json j{{"command", "fit"}, {"config", data_echo(o)}, {"n", pr.ctx.n()}, {"p", pr.ctx.p()}};
    j["lambda_max"] = lambda_max(pr.ctx, pr.y);
    j["fit"] = fit_json(sol);
    j["cv"] = pr.cv;
    emit(out, j);
    return kOk;
}

struct ChainOptions {
    double sigma2 = 0.0;
    int burn_in = 1000;
    int thin = 1;
    double tau_multiplier = 2.0;
};

void add_chain_options(CLI::App* cmd, ChainOptions& c) {
    cmd->add_option("--sigma2", c.sigma2, "known noise variance")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--burn-in", c.burn_in, "burn-in sweeps per chain")->check(CLI::NonNegativeNumber);
    cmd->add_option("--thin", c.thin, "thinning interval")->check(CLI::PositiveNumber);
    cmd->add_option("--tau-mult", c.tau_multiplier, "proposal scale multiplier")
        ->check(CLI::PositiveNumber);
}

json chain_echo(const ChainOptions& c) {
    return {{"sigma2", c.sigma2}, {"burn_in", c.burn_in}, {"thin", c.thin},
            {"tau_multiplier", c.tau_multiplier}};
}

struct SampleOptions {
    int draws = 1000;
    std::string mu_path;
    std::string mean = "fit";
    int acf_lags = 10;
};

int cmd_sample(const DataOptions& o, const ChainOptions& c, const SampleOptions& s, std::ostream& out) {
    Problem pr = load_problem(o);
    const LassoSolution sol = fit_lasso(pr.ctx, pr.y, pr.lambda);
    require(!sol.active.empty(), ErrorCode::EmptyModel,
            "lasso selected no variables at lambda = " + std::to_string(pr.lambda));
    const ActiveSetGeometry geom = ActiveSetGeometry::build(pr.ctx, sol.active);
    VectorXd mu;
    if (!s.mu_path.empty()) {
        mu = read_csv_vector(s.mu_path, o.header);
        require(mu.size() == pr.ctx.n(), ErrorCode::Parse, "mean vector must have n values");
    } else if (s.mean == "fit") {
        mu = pr.ctx.X() * sol.beta;
    } else {
        mu = geom.X_active() * (geom.active_pinv() * pr.y);
    }
    ChainConfig cfg = chain_config_for(s.draws, c.burn_in, c.thin,
                                       default_tau(pr.ctx, geom, c.sigma2, c.tau_multiplier), o.seed);
    cfg.acf_max_lag = s.acf_lags;
    const ChainOutput chain = run_chain(pr.ctx, geom, mu, c.sigma2, pr.lambda, default_init(sol, geom), cfg);
    const ConditionedDraws draws = collect_draws(pr.ctx, geom, {chain.states}, pr.lambda);

    MatrixXd b(static_cast<Eigen::Index>(chain.states.size()), geom.q());
    for (std::size_t i = 0; i < chain.states.size(); ++i)
        b.row(static_cast<Eigen::Index>(i)) = chain.states[i].b_active.transpose();

    json config = data_echo(o);
    config.update(chain_echo(c));
    config["draws"] = s.draws;
    config["mean"] = s.mu_path.empty() ? json(s.mean) : json(s.mu_path);
    config["acf_lags"] = s.acf_lags;
    json j{{"command", "sample"}, {"config", config}, {"fit", fit_json(sol)}};
    j["diagnostics"] = {{"acceptance_b", to_json(chain.acceptance_b)},
                        {"skipped_b", to_json(chain.skipped_b)},
                        {"acceptance_sF", to_json(chain.acceptance_sF)},
                        {"autocorrelation", to_json(chain.autocorrelation)}};
    j["draws"] = {{"count", draws.size()},
                  {"b_active", to_json(b)},
                  {"nu_star", to_json(draws.nu_star)},
                  {"nu_star_mean", to_json(VectorXd(draws.nu_star.colwise().mean().transpose()))}};
    emit(out, j);
    return kOk;
}

struct InferOptions {
    double alpha = 0.05;
    int K = 20;
    int N = 500;
    std::string variant = "randomized";
    bool pairs = false;
    bool joint = false;
    std::string H_path;
    std::string delta = "inf";
    double verify_fraction = 0.01;
};

int cmd_infer(const DataOptions& o, const ChainOptions& c, const InferOptions& f, std::ostream& out) {
    Problem pr = load_problem(o);
    Algorithm1Options opts;
    opts.alpha = f.alpha;
    opts.K = f.K;
    opts.N = f.N;
    opts.burn_in = c.burn_in;
    opts.thin = c.thin;
    opts.tau_multiplier = c.tau_multiplier;
    opts.seed = o.seed;
    opts.threads = o.threads;
    opts.verify_fraction = f.verify_fraction;
    const NormDelta delta = parse_norm(f.delta);
    const Algorithm1Result res = run_algorithm1(pr.ctx, pr.y, pr.lambda, c.sigma2, opts);
    const int q = res.ellipsoid.q();
    const VectorXd& nu_hat = res.ellipsoid.nu_hat;

    json intervals = json::array();
    const bool all = f.variant == "all";
    if (all || f.variant == "randomized")
        for (const auto& iv : res.randomized) intervals.push_back(interval_json(iv));
    if (all || f.variant == "conservative")
        for (const auto& iv : res.conservative) intervals.push_back(interval_json(iv));
    json plugin_diag = nullptr;
    if (all || f.variant == "plugin") {
        const ActiveSetGeometry geom = ActiveSetGeometry::build(pr.ctx, res.fit.active);
        ChainBatchOptions b;
        b.draws = f.K * f.N;
        b.burn_in = c.burn_in;
        b.thin = c.thin;
        b.tau_multiplier = c.tau_multiplier;
        b.seed = derive_seed(o.seed, 101);
        ChainSummary summary;
        const ConditionedDraws d = single_mean_draws(pr.ctx, geom, res.ellipsoid.mu_hat(), c.sigma2,
                                                     pr.lambda, default_init(res.fit, geom), b, &summary);
        for (int j = 0; j < q; ++j)
            intervals.push_back(interval_json(build_interval_pivot(
                d.nu_star, nu_hat, nu_hat, j, f.alpha, IntervalVariant::Plugin, res.fit.active[j])));
        plugin_diag = chain_json(summary);
    }

    json sets = json::array();
    if (f.pairs) {
        const auto selectors = pair_selectors(q);
        for (const auto& H : selectors)
            sets.push_back(set_json(build_set(res.draws.nu_star, nu_hat, H, delta, f.alpha), "pair", q));
    }
    if (f.joint)
        sets.push_back(set_json(build_set(res.draws.nu_star, nu_hat, MatrixXd::Identity(q, q), delta, f.alpha),
                                "joint", q));
    if (!f.H_path.empty()) {
        const MatrixXd H = read_csv_matrix(f.H_path, o.header);
        require(H.cols() == q, ErrorCode::Parse,
                "H must have |A| = " + std::to_string(q) + " columns");
        sets.push_back(set_json(build_set(res.draws.nu_star, nu_hat, H, delta, f.alpha), "custom", q));
    }

    json config = data_echo(o);
    config.update(chain_echo(c));
    config.update(json{{"alpha", f.alpha}, {"K", f.K}, {"N", f.N}, {"variant", f.variant},
                       {"pairs", f.pairs}, {"joint", f.joint},
                       {"H", f.H_path.empty() ? json(nullptr) : json(f.H_path)},
                       {"delta", to_string(delta)}, {"verify_fraction", f.verify_fraction}});
    json chains = json::array();
    for (const auto& s : res.chains) chains.push_back(chain_json(s));
    json j{{"command", "infer"}, {"config", config}, {"fit", fit_json(res.fit)}};
    j["cv"] = pr.cv;
    j["ellipsoid"] = {{"active", res.ellipsoid.active},
                      {"nu_hat", to_json(nu_hat)},
                      {"radius2", res.ellipsoid.radius2},
                      {"level", 1.0 - f.alpha / 2.0}};
    j["intervals"] = intervals;
    j["sets"] = sets;
    j["diagnostics"] = {{"draws", res.draws.size()},
                        {"chains", chains},
                        {"plugin_chain", plugin_diag},
                        {"refit", {{"checked", res.refit.checked}, {"mismatched", res.refit.mismatched}}}};
    emit(out, j);
    return kOk;
}

struct OracleOptions {
    int n_accept = 10000;
    long long max_draws = 10000000;
    bool compare = false;
    int mcmc_draws = 20000;
};

json oracle_report(const DataOptions& o, const ChainOptions& c, const OracleOptions& r,
                   const OracleResult& res) {
    json config = data_echo(o);
    config.update(chain_echo(c));
    config.update(json{{"n_accept", r.n_accept}, {"max_draws", r.max_draws},
                       {"compare_mcmc", r.compare}, {"mcmc_draws", r.mcmc_draws}});
    return {{"command", "oracle"},
            {"config", config},
            {"active", res.active},
            {"attempts", res.attempts},
            {"accepted", res.accepted},
            {"acceptance_rate", res.acceptance_rate()},
            {"exhausted", res.exhausted}};
}

int cmd_oracle(const DataOptions& o, const ChainOptions& c, const OracleOptions& r,
               std::ostream& out, std::ostream& err) {
    Problem pr = load_problem(o);
    const LassoSolution sol = fit_lasso(pr.ctx, pr.y, pr.lambda);
    require(!sol.active.empty(), ErrorCode::EmptyModel,
            "lasso selected no variables at lambda = " + std::to_string(pr.lambda));
    const VectorXd mu = pr.ctx.X() * sol.beta;
    OracleResult res;
    try {
        res = rejection_oracle(pr.ctx, mu, c.sigma2, pr.lambda, sol.active, r.n_accept, r.max_draws,
                               derive_seed(o.seed, 200));
    } catch (const BudgetExhaustedError& e) {
        const OracleResult& partial = e.partial();
        if (partial.acceptance_rate() < 1e-4)
            err << "warning: estimated acceptance rate " << partial.acceptance_rate()
                << " is below 1e-4; rejection sampling is impractical here\n";
        emit(out, oracle_report(o, c, r, partial));
        throw;
    }
    if (res.acceptance_rate() < 1e-4)
        err << "warning: estimated acceptance rate " << res.acceptance_rate() << " is below 1e-4\n";
    json j = oracle_report(o, c, r, res);
    if (r.compare) {
        const ActiveSetGeometry geom = ActiveSetGeometry::build(pr.ctx, sol.active);
        ChainConfig cfg = chain_config_for(r.mcmc_draws, c.burn_in, c.thin,
                                           default_tau(pr.ctx, geom, c.sigma2, c.tau_multiplier),
                                           derive_seed(o.seed, 201));
        const ChainOutput chain = run_chain(pr.ctx, geom, mu, c.sigma2, pr.lambda, default_init(sol, geom), cfg);
        json kb = json::array(), ks = json::array();
        double worst = 0.0;
        for (int i = 0; i < geom.q(); ++i) {
            std::vector<double> a(res.b_active.col(i).data(), res.b_active.col(i).data() + res.b_active.rows());
            std::vector<double> m;
            for (const auto& st : chain.states) m.push_back(st.b_active[i]);
            const double d = ks_statistic(a, m);
            worst = std::max(worst, d);
            kb.push_back({{"feature", sol.active[i]}, {"ks", d}});
        }
        const IndexSet& inactive = geom.inactive();
        std::vector<std::vector<double>> mh_s(inactive.size());
        for (const auto& st : chain.states) {
            const VectorXd s = inactive_subgradient(geom, st);
            for (std::size_t k = 0; k < inactive.size(); ++k) mh_s[k].push_back(s[static_cast<Eigen::Index>(k)]);
        }
        for (std::size_t k = 0; k < inactive.size(); ++k) {
            const auto col = res.s_inactive.col(static_cast<Eigen::Index>(k));
            std::vector<double> a(col.data(), col.data() + col.size());
            const double d = ks_statistic(a, mh_s[k]);
            worst = std::max(worst, d);
            ks.push_back({{"feature", inactive[k]}, {"ks", d}});
        }
        j["comparison"] = {{"mcmc_draws", chain.states.size()},
                           {"b_active", kb},
                           {"s_inactive", ks},
                           {"max_ks", worst},
                           {"acceptance_b", to_json(chain.acceptance_b)}};
    }
    emit(out, j);
    return kOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, int threads, std::ostream& out) {
    ExperimentConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads > 0) cfg.threads = threads;
    const ExperimentOutput res = run_experiment(cfg, out_dir);
    json j{{"command", "simulate"}, {"out", out_dir.empty() ? json(nullptr) : json(out_dir)},
           {"resumed_replicates", res.resumed}, {"report", res.report}};
    emit(out, j);
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Post-selection inference for the lasso by conditional sampling", "lassopsi"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "lassopsi 0.1.0");

    DataOptions data;
    ChainOptions chain;
    SampleOptions sample;
    InferOptions infer;
    OracleOptions oracle;

    auto* fit = app.add_subcommand("fit", "fit the lasso and print the solution");
    add_data_options(fit, data);

    auto* smp = app.add_subcommand("sample", "draw from the conditional law given the active set");
    add_data_options(smp, data);
    add_chain_options(smp, chain);
    smp->add_option("--draws", sample.draws, "kept draws")->check(CLI::PositiveNumber);
    smp->add_option("--mu", sample.mu_path, "CSV with the plug-in mean (n values)");
    smp->add_option("--mean", sample.mean, "plug-in mean when --mu is absent")
        ->check(CLI::IsMember({"fit", "projection"}));
    smp->add_option("--acf-lags", sample.acf_lags, "autocorrelation lags")->check(CLI::NonNegativeNumber);

    auto* inf = app.add_subcommand("infer", "confidence intervals and sets for the selected model");
    add_data_options(inf, data);
    add_chain_options(inf, chain);
    inf->add_option("--alpha", infer.alpha, "significance level")->check(CLI::Range(1e-12, 1.0 - 1e-12));
    inf->add_option("--K", infer.K, "plug-in means drawn from the boundary")->check(CLI::PositiveNumber);
    inf->add_option("--N", infer.N, "kept draws per plug-in mean")->check(CLI::PositiveNumber);
    inf->add_option("--variant", infer.variant, "interval variant")
        ->check(CLI::IsMember({"randomized", "conservative", "plugin", "all"}));
    inf->add_flag("--pairs", infer.pairs, "pairwise confidence sets");
    inf->add_flag("--joint", infer.joint, "joint confidence set for all of A");
    inf->add_option("--H", infer.H_path, "CSV with a custom m x |A| contrast matrix");
    inf->add_option("--delta", infer.delta, "set norm")->check(CLI::IsMember({"2", "inf"}));
    inf->add_option("--verify-fraction", infer.verify_fraction, "fraction of draws refit")
        ->check(CLI::Range(0.0, 1.0));

    auto* orc = app.add_subcommand("oracle", "validate the sampler against rejection sampling");
    add_data_options(orc, data);
    add_chain_options(orc, chain);
    orc->add_option("--n-accept", oracle.n_accept, "accepted draws to collect")->check(CLI::PositiveNumber);
    orc->add_option("--max-draws", oracle.max_draws, "draw budget")->check(CLI::PositiveNumber);
    orc->add_flag("--compare-mcmc", oracle.compare, "compare marginals with the MH sampler");
    orc->add_option("--mcmc-draws", oracle.mcmc_draws, "MH draws for the comparison")
        ->check(CLI::PositiveNumber);

    std::string config_path, out_dir;
    std::optional<std::uint64_t> sim_seed;
    int sim_threads = 0;
    auto* sim = app.add_subcommand("simulate", "run a simulation experiment from a YAML config");
    sim->add_option("--config", config_path, "experiment config (YAML)")->required();
    sim->add_option("--out", out_dir, "output directory (report.json, records.csv, checkpoints)");
    sim->add_option("--seed", sim_seed, "override the config seed");
    sim->add_option("--threads", sim_threads, "worker threads")->check(CLI::NonNegativeNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            std::ostringstream o, er;
            app.exit(e, o, er);
            out << o.str();
            return kOk;
        }
        error_line(err, "Parse", kParseError, e.what());
        return kParseError;
    }

    try {
        if (fit->parsed()) return cmd_fit(data, out);
        if (smp->parsed()) return cmd_sample(data, chain, sample, out);
        if (inf->parsed()) return cmd_infer(data, chain, infer, out);
        if (orc->parsed()) return cmd_oracle(data, chain, oracle, out, err);
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, sim_seed, sim_threads, out);
    } catch (const Error& e) {
        const int code = exit_code_for(e.code());
        error_line(err, std::string(to_string(e.code())), code, e.what());
        return code;
    } catch (const std::exception& e) {
        error_line(err, "Internal", kSolverFailure, e.what());
        return kSolverFailure;
    }
    return kParseError;
}

} // namespace lassopsi::cli
