#include "lassopsi/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

#include "lassopsi/errors.hpp"
#include "lassopsi/random.hpp"

namespace lassopsi {

namespace {

void check_alpha(double alpha) {
    require(alpha > 0 && alpha < 1, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
}

void check_count(Eigen::Index count) {
    require(count >= kMinDraws, ErrorCode::InsufficientDraws,
            "need at least " + std::to_string(kMinDraws) + " draws, got " +
                std::to_string(count));
}

std::vector<double> centered_column(const MatrixXd& draws, int j, double reference) {
    std::vector<double> out(static_cast<std::size_t>(draws.rows()));
    for (Eigen::Index i = 0; i < draws.rows(); ++i)
        out[static_cast<std::size_t>(i)] = draws(i, j) - reference;
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

double ConfidenceEllipsoid::quadratic_form(const VectorXd& b) const {
    const VectorXd d = b - nu_hat;
    return d.dot(shape * d);
}

double chi_square_quantile(int dof, double prob) {
    require(dof >= 1 && prob > 0 && prob < 1, ErrorCode::InvalidArgument,
            "chi-square quantile needs dof >= 1 and prob in (0, 1)");
    boost::math::chi_squared_distribution<double> dist(static_cast<double>(dof));
    return boost::math::quantile(dist, prob);
}

ConfidenceEllipsoid build_C_A(const DesignContext& ctx, const VectorXd& y, const IndexSet& active,
                              double sigma2, double alpha) {
    require(!active.empty(), ErrorCode::EmptyModel, "confidence set needs a non-empty model");
    require(sigma2 > 0, ErrorCode::InvalidArgument, "sigma2 must be positive");
    require(y.size() == ctx.n(), ErrorCode::InvalidArgument, "response has wrong length");
    check_alpha(alpha);
    ConfidenceEllipsoid ell;
    ell.active = active;
    ell.alpha = alpha;
    ell.sigma2 = sigma2;
    ell.X_active = take_cols(ctx.X(), active);
    ell.shape = ell.X_active.transpose() * ell.X_active;
    Eigen::LLT<MatrixXd> llt(ell.shape);
    require(llt.info() == Eigen::Success, ErrorCode::DegenerateGeometry,
            "X_A^T X_A is not positive definite");
    ell.nu_hat = llt.solve(ell.X_active.transpose() * y);
    ell.radius2 = sigma2 * chi_square_quantile(ell.q(), 1.0 - alpha / 2.0);
    return ell;
}

BoundaryDraws sample_boundary(const ConfidenceEllipsoid& ell, int K, std::uint64_t seed) {
    require(K >= 1, ErrorCode::InvalidArgument, "K must be at least 1");
    const int q = ell.q();
    Eigen::LLT<MatrixXd> llt(ell.shape);
    require(llt.info() == Eigen::Success, ErrorCode::DegenerateGeometry,
            "ellipsoid shape is not positive definite");
    const MatrixXd U = llt.matrixU(); // L^T
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double radius = std::sqrt(ell.radius2);
    BoundaryDraws out;
    out.nu.resize(K, q);
    for (int k = 0; k < K; ++k) {
        VectorXd z(q);
        double norm = 0.0;
        while (norm == 0.0) {
            for (int i = 0; i < q; ++i) z[i] = normal(rng);
            norm = z.norm();
        }
        z /= norm;
        // L^{-T} z solves L^T x = z.
        const VectorXd x = U.triangularView<Eigen::Upper>().solve(z);
        out.nu.row(k) = (ell.nu_hat + radius * x).transpose();
    }
    out.mu = ell.X_active * out.nu.transpose();
    return out;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
    require(!sorted.empty(), ErrorCode::InsufficientDraws, "quantile of an empty sample");
    require(prob >= 0 && prob <= 1, ErrorCode::InvalidArgument, "probability outside [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double prob) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, prob);
}

std::string to_string(IntervalVariant v) {
    switch (v) {
    case IntervalVariant::Oracle: return "oracle";
    case IntervalVariant::Plugin: return "plugin";
    case IntervalVariant::Randomized: return "randomized";
    case IntervalVariant::Conservative: return "conservative";
    }
    return "unknown";
}

IntervalVariant parse_variant(const std::string& name) {
    if (name == "oracle") return IntervalVariant::Oracle;
    if (name == "plugin") return IntervalVariant::Plugin;
    if (name == "randomized") return IntervalVariant::Randomized;
    if (name == "conservative") return IntervalVariant::Conservative;
    fail(ErrorCode::InvalidArgument, "unknown interval variant '" + name + "'");
}

IntervalResult build_interval_randomized(const ConditionedDraws& draws, const VectorXd& nu_hat,
                                         int j, double alpha, int feature) {
    check_alpha(alpha);
    check_count(draws.nu_star.rows());
    require(j >= 0 && j < nu_hat.size(), ErrorCode::InvalidArgument, "coordinate out of range");
    const auto centered = centered_column(draws.nu_star, j, nu_hat[j]);
    IntervalResult r;
    r.position = j;
    r.feature = feature < 0 ? j : feature;
    r.variant = IntervalVariant::Randomized;
    r.alpha = alpha;
    r.lower = nu_hat[j] - quantile_sorted(centered, 1.0 - alpha / 4.0);
    r.upper = nu_hat[j] - quantile_sorted(centered, alpha / 4.0);
    return r;
}

IntervalResult build_interval_pivot(const MatrixXd& nu_star, const VectorXd& reference,
                                    const VectorXd& nu_hat, int j, double alpha,
                                    IntervalVariant variant, int feature) {
    check_alpha(alpha);
    check_count(nu_star.rows());
    require(j >= 0 && j < nu_hat.size() && reference.size() == nu_hat.size(),
            ErrorCode::InvalidArgument, "coordinate out of range");
    const auto centered = centered_column(nu_star, j, reference[j]);
    IntervalResult r;
    r.position = j;
    r.feature = feature < 0 ? j : feature;
    r.variant = variant;
    r.alpha = alpha;
    r.lower = nu_hat[j] - quantile_sorted(centered, 1.0 - alpha / 2.0);
    r.upper = nu_hat[j] - quantile_sorted(centered, alpha / 2.0);
    return r;
}

IntervalResult build_interval_conservative(const ConditionedDraws& draws, const VectorXd& nu_hat,
                                           int j, double alpha, int feature) {
    check_alpha(alpha);
    check_count(draws.nu_star.rows());
    require(j >= 0 && j < nu_hat.size(), ErrorCode::InvalidArgument, "coordinate out of range");
    const int K = draws.groups();
    double q_hi = -std::numeric_limits<double>::infinity();
    double q_lo = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        const MatrixXd group = draws.group(k);
        require(group.rows() > 0, ErrorCode::InsufficientDraws,
                "plug-in index " + std::to_string(k) + " has no draws");
        const auto centered = centered_column(group, j, nu_hat[j]);
        q_hi = std::max(q_hi, quantile_sorted(centered, 1.0 - alpha / 4.0));
        q_lo = std::min(q_lo, quantile_sorted(centered, alpha / 4.0));
    }
    // Interpolated sample quantiles are not monotone under pooling, so the
    // pooled quantiles can poke out of the per-k envelope by a fraction of an
    // order-statistic gap. Taking the hull keeps the nesting exact.
    const auto pooled = centered_column(draws.nu_star, j, nu_hat[j]);
    q_hi = std::max(q_hi, quantile_sorted(pooled, 1.0 - alpha / 4.0));
    q_lo = std::min(q_lo, quantile_sorted(pooled, alpha / 4.0));
    IntervalResult r;
    r.position = j;
    r.feature = feature < 0 ? j : feature;
    r.variant = IntervalVariant::Conservative;
    r.alpha = alpha;
    r.lower = nu_hat[j] - q_hi;
    r.upper = nu_hat[j] - q_lo;
    return r;
}

std::string to_string(NormDelta d) { return d == NormDelta::Two ? "2" : "inf"; }

NormDelta parse_norm(const std::string& name) {
    if (name == "2" || name == "l2") return NormDelta::Two;
    if (name == "inf" || name == "linf") return NormDelta::Inf;
    fail(ErrorCode::InvalidArgument, "unknown norm '" + name + "' (expected 2 or inf)");
}

double norm_of(const VectorXd& v, NormDelta delta) {
    if (v.size() == 0) return 0.0;
    return delta == NormDelta::Two ? v.norm() : v.cwiseAbs().maxCoeff();
}

double ball_diameter(double r, int m, NormDelta delta) {
    return delta == NormDelta::Two ? 2.0 * r : 2.0 * r * std::sqrt(static_cast<double>(m));
}

double ball_log_volume(double r, int m, NormDelta delta) {
    const double dm = static_cast<double>(m);
    if (delta == NormDelta::Inf) return dm * std::log(2.0 * r);
    return 0.5 * dm * std::log(std::numbers::pi) - std::lgamma(0.5 * dm + 1.0) + dm * std::log(r);
}

double SetResult::volume() const { return std::exp(log_volume); }

double SetResult::volume_star(int q) const {
    require(q >= 1, ErrorCode::InvalidArgument, "normalizing size must be positive");
    return std::exp(log_volume / static_cast<double>(q));
}

bool SetResult::contains(const VectorXd& eta) const {
    return norm_of(eta - center, delta) <= radius;
}

SetResult build_set(const MatrixXd& nu_star, const VectorXd& nu_hat, const MatrixXd& H,
                    NormDelta delta, double alpha) {
    check_alpha(alpha);
    check_count(nu_star.rows());
    require(H.cols() == nu_hat.size() && nu_star.cols() == nu_hat.size(),
            ErrorCode::InvalidArgument, "H must be m x q");
    require(H.rows() >= 1 && H.rows() <= H.cols(), ErrorCode::InvalidArgument,
            "H needs 1 <= m <= q rows");
    const MatrixXd projected = (nu_star.rowwise() - nu_hat.transpose()) * H.transpose();
    std::vector<double> norms(static_cast<std::size_t>(projected.rows()));
    for (Eigen::Index i = 0; i < projected.rows(); ++i)
        norms[static_cast<std::size_t>(i)] = norm_of(projected.row(i).transpose(), delta);
    SetResult s;
    s.H = H;
    s.center = H * nu_hat;
    s.delta = delta;
    s.alpha = alpha;
    s.radius = quantile(std::move(norms), 1.0 - alpha / 2.0);
    s.diameter = ball_diameter(s.radius, s.m(), delta);
    s.log_volume = ball_log_volume(s.radius, s.m(), delta);
    return s;
}

std::vector<MatrixXd> pair_selectors(int q) {
    std::vector<MatrixXd> out;
    for (int i = 0; i < q; ++i) {
        for (int j = i + 1; j < q; ++j) {
            MatrixXd H = MatrixXd::Zero(2, q);
            H(0, i) = 1.0;
            H(1, j) = 1.0;
            out.push_back(std::move(H));
        }
    }
    return out;
}

ChainBatch run_chains(const DesignContext& ctx, const ActiveSetGeometry& geom, const MatrixXd& mus,
                      double sigma2, double lambda, const AugmentedState& init,
                      const ChainBatchOptions& options) {
    const int K = static_cast<int>(mus.cols());
    require(K >= 1 && mus.rows() == ctx.n(), ErrorCode::InvalidArgument,
            "need one n-vector mean per chain");
    const VectorXd tau = default_tau(ctx, geom, sigma2, options.tau_multiplier);
    ChainBatch batch;
    batch.states.resize(K);
    batch.summaries.resize(K);
    parallel_for(K, options.threads, [&](int k) {
        ChainConfig cfg = chain_config_for(options.draws, options.burn_in, options.thin, tau,
                                           derive_seed(options.seed, static_cast<std::uint64_t>(k)));
        cfg.check_every_step = options.check_every_step;
        cfg.acf_max_lag = 1;
        ChainOutput out = run_chain(ctx, geom, mus.col(k), sigma2, lambda, init, cfg);
        ChainSummary& s = batch.summaries[k];
        s.mean_acceptance_b = out.acceptance_b.mean();
        s.mean_skipped_b = out.skipped_b.mean();
        s.mean_acceptance_sF = out.acceptance_sF.size() ? out.acceptance_sF.mean() : 0.0;
        s.max_abs_acf_lag1 = out.autocorrelation.size() ? out.autocorrelation.cwiseAbs().maxCoeff() : 0.0;
        batch.states[k] = std::move(out.states);
    });
    return batch;
}

ConditionedDraws single_mean_draws(const DesignContext& ctx, const ActiveSetGeometry& geom,
                                   const VectorXd& mu, double sigma2, double lambda,
                                   const AugmentedState& init, const ChainBatchOptions& options,
                                   ChainSummary* summary) {
    ChainBatch batch = run_chains(ctx, geom, mu, sigma2, lambda, init, options);
    if (summary != nullptr) *summary = batch.summaries.front();
    return collect_draws(ctx, geom, batch.states, lambda);
}

Algorithm1Result run_algorithm1(const DesignContext& ctx, const VectorXd& y, double lambda,
                                double sigma2, const Algorithm1Options& options) {
    require(options.K >= 1 && options.N >= 1, ErrorCode::InvalidArgument, "K and N must be >= 1");
    check_alpha(options.alpha);
    Algorithm1Result res;
    res.fit = fit_lasso(ctx, y, lambda, options.lasso);
    require(!res.fit.active.empty(), ErrorCode::EmptyModel,
            "lasso selected no variables at lambda = " + std::to_string(lambda));
    const ActiveSetGeometry geom = ActiveSetGeometry::build(ctx, res.fit.active);
    const AugmentedState init = default_init(res.fit, geom);

    res.ellipsoid = build_C_A(ctx, y, res.fit.active, sigma2, options.alpha);
    res.boundary =
        sample_boundary(res.ellipsoid, options.K, derive_seed(options.seed, kStreamBoundary));

    ChainBatchOptions batch_opts;
    batch_opts.draws = options.N;
    batch_opts.burn_in = options.burn_in;
    batch_opts.thin = options.thin;
    batch_opts.tau_multiplier = options.tau_multiplier;
    batch_opts.seed = derive_seed(options.seed, kStreamChains);
    batch_opts.threads = resolve_threads(options.threads);
    batch_opts.check_every_step = options.check_every_step;
    ChainBatch batch = run_chains(ctx, geom, res.boundary.mu, sigma2, lambda, init, batch_opts);
    res.chains = batch.summaries;

    if (options.verify_fraction > 0) {
        std::vector<AugmentedState> all;
        for (const auto& c : batch.states) all.insert(all.end(), c.begin(), c.end());
        res.refit = verify_conditioning(ctx, geom, all, lambda, options.verify_fraction,
                                        derive_seed(options.seed, kStreamRefit));
    }
    res.draws = collect_draws(ctx, geom, batch.states, lambda, options.keep_y);

    const VectorXd& nu_hat = res.ellipsoid.nu_hat;
    for (int j = 0; j < geom.q(); ++j) {
        const int feature = res.fit.active[j];
        res.randomized.push_back(
            build_interval_randomized(res.draws, nu_hat, j, options.alpha, feature));
        res.conservative.push_back(
            build_interval_conservative(res.draws, nu_hat, j, options.alpha, feature));
    }
    return res;
}

} // namespace lassopsi
