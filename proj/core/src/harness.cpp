#include "lassopsi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "lassopsi/lasso.hpp"
#include "lassopsi/random.hpp"

namespace lassopsi {

std::string to_string(DesignKind kind) {
    switch (kind) {
    case DesignKind::Identity: return "identity";
    case DesignKind::Toeplitz: return "toeplitz";
    case DesignKind::ExpDecay: return "exp_decay";
    case DesignKind::Equicorrelation: return "equicorrelation";
    }
    return "unknown";
}

DesignKind parse_design(const std::string& name) {
    if (name == "identity" || name == "I") return DesignKind::Identity;
    if (name == "toeplitz" || name == "T") return DesignKind::Toeplitz;
    if (name == "exp_decay" || name == "ED") return DesignKind::ExpDecay;
    if (name == "equicorrelation" || name == "EC") return DesignKind::Equicorrelation;
    fail(ErrorCode::InvalidArgument, "unknown design '" + name + "'");
}

std::string to_string(SupportPreset preset) {
    return preset == SupportPreset::Contiguous ? "contiguous" : "spread";
}

SupportPreset parse_support(const std::string& name) {
    if (name == "contiguous") return SupportPreset::Contiguous;
    if (name == "spread") return SupportPreset::Spread;
    fail(ErrorCode::InvalidArgument, "unknown support preset '" + name + "'");
}

IndexSet support_preset(SupportPreset preset, int size, int p) {
    require(size >= 0 && size <= p, ErrorCode::InvalidArgument, "support larger than p");
    IndexSet out(size);
    for (int i = 0; i < size; ++i)
        out[i] = preset == SupportPreset::Contiguous ? i : i * (p / std::max(size, 1));
    return out;
}

namespace {

MatrixXd toeplitz(double rho, int p) {
    MatrixXd m(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) m(i, j) = std::pow(rho, std::abs(i - j));
    return m;
}

MatrixXd equicorrelation(double rho, int p) {
    MatrixXd m = MatrixXd::Constant(p, p, rho);
    m.diagonal().setOnes();
    return m;
}

} // namespace

MatrixXd design_covariance(DesignKind kind, int p) {
    switch (kind) {
    case DesignKind::Identity: return MatrixXd::Identity(p, p);
    case DesignKind::Toeplitz: return toeplitz(0.5, p);
    case DesignKind::ExpDecay: return toeplitz(0.4, p).llt().solve(MatrixXd::Identity(p, p));
    case DesignKind::Equicorrelation: return equicorrelation(0.7, p);
    }
    return {};
}

Dataset generate_dataset(const DesignSpec& spec) {
    require(spec.n >= 1 && spec.p >= 1, ErrorCode::InvalidArgument, "n and p must be positive");
    require(spec.sigma2 >= 0, ErrorCode::InvalidArgument, "sigma2 must be non-negative");
    require(spec.beta_low <= spec.beta_high, ErrorCode::InvalidArgument, "empty coefficient range");
    for (int j : spec.A0)
        require(j >= 0 && j < spec.p, ErrorCode::InvalidArgument, "support index out of range");

    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd Z(spec.n, spec.p);
    for (int i = 0; i < spec.n; ++i)
        for (int j = 0; j < spec.p; ++j) Z(i, j) = normal(rng);

    Dataset d;
    switch (spec.kind) {
    case DesignKind::Identity:
        d.X = std::move(Z);
        break;
    case DesignKind::Toeplitz:
    case DesignKind::Equicorrelation: {
        const MatrixXd sigma = design_covariance(spec.kind, spec.p);
        Eigen::LLT<MatrixXd> llt(sigma);
        d.X = Z * llt.matrixU();
        break;
    }
    case DesignKind::ExpDecay: {
        // Precision Omega = L L^T; x = L^{-T} z has covariance Omega^{-1}.
        Eigen::LLT<MatrixXd> llt(toeplitz(0.4, spec.p));
        d.X = llt.matrixU().solve(Z.transpose()).transpose();
        break;
    }
    }

    std::uniform_real_distribution<double> unif(spec.beta_low, spec.beta_high);
    d.beta0 = VectorXd::Zero(spec.p);
    for (int j : spec.A0) d.beta0[j] = unif(rng);
    d.mu0 = d.X * d.beta0;
    const double sigma = std::sqrt(spec.sigma2);
    d.y = d.mu0;
    for (int i = 0; i < spec.n; ++i) d.y[i] += sigma * normal(rng);
    return d;
}

OracleResult rejection_oracle(const DesignContext& ctx, const VectorXd& mu_tilde, double sigma2,
                              double lambda, const IndexSet& target, int n_accept,
                              long long max_draws, std::uint64_t seed) {
    require(n_accept >= 1, ErrorCode::InvalidArgument, "n_accept must be at least 1");
    require(max_draws >= 1, ErrorCode::InvalidArgument, "max_draws must be at least 1");
    require(mu_tilde.size() == ctx.n(), ErrorCode::InvalidArgument, "mean has wrong length");
    require(sigma2 > 0, ErrorCode::InvalidArgument, "sigma2 must be positive");
    require(!target.empty(), ErrorCode::EmptyModel, "target active set is empty");

    auto result = std::make_shared<OracleResult>();
    result->active = target;
    const IndexSet inactive = complement(target, ctx.p());
    const int q = static_cast<int>(target.size());
    const MatrixXd X_A = take_cols(ctx.X(), target);
    Eigen::LLT<MatrixXd> llt(X_A.transpose() * X_A);
    require(llt.info() == Eigen::Success, ErrorCode::DegenerateGeometry,
            "X_A^T X_A is not positive definite");
    const MatrixXd pinv = llt.solve(X_A.transpose());

    std::vector<VectorXd> b_rows, s_rows, nu_rows;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = std::sqrt(sigma2);
    VectorXd y(ctx.n());
    while (result->accepted < n_accept && result->attempts < max_draws) {
        for (int i = 0; i < ctx.n(); ++i) y[i] = mu_tilde[i] + sigma * normal(rng);
        ++result->attempts;
        const LassoSolution sol = fit_lasso(ctx, y, lambda);
        if (sol.active != target) continue;
        ++result->accepted;
        b_rows.push_back(take(sol.beta, target));
        s_rows.push_back(take(sol.subgradient, inactive));
        nu_rows.push_back(pinv * y);
    }

    const auto rows = static_cast<Eigen::Index>(b_rows.size());
    result->b_active.resize(rows, q);
    result->s_inactive.resize(rows, static_cast<Eigen::Index>(inactive.size()));
    result->draws.nu_star.resize(rows, q);
    result->draws.k_index.assign(b_rows.size(), 0);
    for (Eigen::Index r = 0; r < rows; ++r) {
        result->b_active.row(r) = b_rows[r].transpose();
        result->s_inactive.row(r) = s_rows[r].transpose();
        result->draws.nu_star.row(r) = nu_rows[r].transpose();
    }
    if (result->accepted < n_accept) {
        result->exhausted = true;
        throw BudgetExhaustedError("accepted " + std::to_string(result->accepted) + " of " +
                                       std::to_string(n_accept) + " draws within " +
                                       std::to_string(max_draws) + " attempts",
                                   result);
    }
    return std::move(*result);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), ErrorCode::InvalidArgument, "KS needs non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_statistic_cdf(std::vector<double> a, const std::function<double(double)>& cdf) {
    require(!a.empty(), ErrorCode::InvalidArgument, "KS needs a non-empty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

std::vector<VariantMetrics> compute_metrics(const std::vector<ScoredFit>& fits) {
    struct Acc {
        VariantMetrics m;
        double length_sum = 0.0;
        long long length_count = 0;
        double dataset_mean_sum = 0.0;
    };
    std::map<IntervalVariant, Acc> acc;
    for (const ScoredFit& fit : fits) {
        std::map<IntervalVariant, std::pair<double, int>> per_fit;
        for (const IntervalResult& iv : fit.intervals) {
            Acc& a = acc[iv.variant];
            a.m.variant = iv.variant;
            const double truth = fit.nu_true[iv.position];
            const bool hit = iv.contains(truth);
            const bool in_A0 = std::binary_search(fit.A0.begin(), fit.A0.end(), iv.feature);
            a.m.coverage_A.hits += hit;
            a.m.coverage_A.total += 1;
            CoverageCell& sub = in_A0 ? a.m.coverage_A0 : a.m.coverage_A0c;
            sub.hits += hit;
            sub.total += 1;
            if (in_A0) {
                a.m.power.hits += !iv.contains(0.0);
                a.m.power.total += 1;
            }
            a.length_sum += iv.length();
            a.length_count += 1;
            auto& pf = per_fit[iv.variant];
            pf.first += iv.length();
            pf.second += 1;
        }
        for (const auto& [variant, pf] : per_fit) {
            Acc& a = acc[variant];
            a.dataset_mean_sum += pf.first / pf.second;
            a.m.datasets += 1;
        }
    }
    std::vector<VariantMetrics> out;
    for (auto& [variant, a] : acc) {
        a.m.mean_length_pooled = a.length_count ? a.length_sum / static_cast<double>(a.length_count) : 0.0;
        a.m.mean_length_by_dataset = a.m.datasets ? a.dataset_mean_sum / a.m.datasets : 0.0;
        out.push_back(a.m);
    }
    return out;
}

double fit_coverage(const ScoredFit& fit, IntervalVariant variant) {
    CoverageCell c;
    for (const IntervalResult& iv : fit.intervals) {
        if (iv.variant != variant) continue;
        c.hits += iv.contains(fit.nu_true[iv.position]);
        c.total += 1;
    }
    return c.total ? c.rate() : -1.0;
}

} // namespace lassopsi
