#include "lassopsi/mh_sampler.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lassopsi/errors.hpp"
#include "lassopsi/random.hpp"

namespace lassopsi {

namespace {

void validate(const ChainConfig& cfg, int q) {
    require(cfg.burn_in >= 0 && cfg.n_iter > cfg.burn_in, ErrorCode::InvalidArgument,
            "chain needs n_iter > burn_in >= 0");
    require(cfg.thin >= 1, ErrorCode::InvalidArgument, "thin must be at least 1");
    require(cfg.tau.size() == q, ErrorCode::InvalidArgument,
            "tau has " + std::to_string(cfg.tau.size()) + " entries, expected " +
                std::to_string(q));
    require((cfg.tau.array() > 0).all() && cfg.tau.allFinite(), ErrorCode::InvalidArgument,
            "proposal scales must be positive");
    require(cfg.acf_max_lag >= 0, ErrorCode::InvalidArgument, "negative autocorrelation lag");
}

// Incrementally maintained chain position. r is the spectral KKT vector,
// affine in (b_A, s_F) for fixed signs.
class Chain {
public:
    Chain(const DesignContext& ctx, const ActiveSetGeometry& geom, const VectorXd& mu,
          double sigma2, double lambda, const AugmentedState& init)
        : geom_(geom), lambda_(lambda), data_(ctx.spectral_data_term(mu)),
          inv_eig_(ctx.eigenvalues().cwiseInverse()),
          scale_(static_cast<double>(ctx.n()) / (2.0 * sigma2)), b_(init.b_active),
          s_free_(init.s_free), signs_(init.signs()) {
        refresh();
    }

    void refresh() {
        s_dep_ = geom_.C() * signs_ - geom_.E() * s_free_;
        r_ = geom_.P() * b_ + lambda_ * (geom_.K_active() * signs_ + geom_.K_free() * s_free_) -
             data_;
        log_pi_ = log_target(r_);
    }

    double log_target(const VectorXd& r) const {
        return -scale_ * r.cwiseAbs2().cwiseProduct(inv_eig_).sum();
    }

    // Returns +1 accepted, 0 rejected, -1 skipped (infeasible sign flip).
    int update_active(int i, double proposal, Rng& rng) {
        const double s_new = static_cast<double>((proposal > 0) - (proposal < 0));
        if (s_new == 0.0) return -1;
        const double ds = s_new - signs_[i];
        if (ds != 0.0) {
            scratch_dep_ = s_dep_ + geom_.C().col(i) * ds;
            if (scratch_dep_.size() > 0 && scratch_dep_.cwiseAbs().maxCoeff() > 1.0) return -1;
        }
        scratch_r_ = r_ + geom_.P().col(i) * (proposal - b_[i]);
        if (ds != 0.0) scratch_r_ += lambda_ * ds * geom_.K_active().col(i);
        const double candidate = log_target(scratch_r_);
        if (!accept(candidate - log_pi_, rng)) return 0;
        b_[i] = proposal;
        if (ds != 0.0) {
            signs_[i] = s_new;
            s_dep_.swap(scratch_dep_);
        }
        r_.swap(scratch_r_);
        log_pi_ = candidate;
        return 1;
    }

    bool update_free(int k, Rng& rng) {
        // a = s_D + E_k (s_F)_k does not depend on the current (s_F)_k.
        const auto M = geom_.E().col(k);
        const VectorXd a = s_dep_ + M * s_free_[k];
        const auto [lo, hi] = detail::intersect_bounds(a, M);
        if (!(hi > lo)) {
            fail(ErrorCode::EmptyRange,
                 "empty proposal range for free coordinate " + std::to_string(k));
        }
        std::uniform_real_distribution<double> unif(lo, hi);
        const double v = unif(rng);
        const double dv = v - s_free_[k];
        scratch_r_ = r_ + (lambda_ * dv) * geom_.K_free().col(k);
        const double candidate = log_target(scratch_r_);
        if (!accept(candidate - log_pi_, rng)) return false;
        s_free_[k] = v;
        s_dep_ -= M * dv;
        r_.swap(scratch_r_);
        log_pi_ = candidate;
        return true;
    }

    double coefficient(int i) const { return b_[i]; }

    AugmentedState snapshot() const {
        AugmentedState st;
        st.b_active = b_;
        st.s_free = s_free_;
        st.s_dependent = s_dep_;
        st.u = geom_.offset_map() * signs_;
        return st;
    }

private:
    static bool accept(double log_ratio, Rng& rng) {
        if (log_ratio >= 0) return true;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return std::log(unif(rng)) < log_ratio;
    }

    const ActiveSetGeometry& geom_;
    double lambda_;
    VectorXd data_;
    VectorXd inv_eig_;
    double scale_;
    VectorXd b_, s_free_, signs_, s_dep_, r_;
    VectorXd scratch_r_, scratch_dep_;
    double log_pi_ = 0.0;
};

} // namespace

ChainConfig chain_config_for(int draws, int burn_in, int thin, VectorXd tau, std::uint64_t seed) {
    require(draws >= 1, ErrorCode::InvalidArgument, "need at least one draw");
    ChainConfig cfg;
    cfg.burn_in = burn_in;
    cfg.thin = thin;
    cfg.n_iter = burn_in + draws * thin;
    cfg.tau = std::move(tau);
    cfg.seed = seed;
    return cfg;
}

ChainOutput run_chain(const DesignContext& ctx, const ActiveSetGeometry& geom,
                      const VectorXd& mu_tilde, double sigma2, double lambda,
                      const AugmentedState& init, const ChainConfig& cfg) {
    const int q = geom.q();
    const int nf = geom.num_free();
    validate(cfg, q);
    require(sigma2 > 0 && lambda > 0, ErrorCode::InvalidArgument,
            "sigma2 and lambda must be positive");
    require(init.b_active.size() == q && init.s_free.size() == nf, ErrorCode::InfeasibleInit,
            "initial state does not match the active-set geometry");
    {
        AugmentedState fresh = make_state(geom, init.b_active, init.s_free);
        const FeasibilityReport rep = check_feasibility(geom, fresh);
        require(rep.feasible, ErrorCode::InfeasibleInit,
                "initial state violates the feasibility constraints (max |s_F| = " +
                    std::to_string(rep.max_abs_free) +
                    ", max |s_D| = " + std::to_string(rep.max_abs_dependent) + ")");
    }

    Rng rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Chain chain(ctx, geom, mu_tilde, sigma2, lambda, init);

    Eigen::VectorXd accepted_b = VectorXd::Zero(q);
    Eigen::VectorXd skipped_b = VectorXd::Zero(q);
    Eigen::VectorXd accepted_f = VectorXd::Zero(nf);

    ChainOutput out;
    out.states.reserve(cfg.kept());
    auto verify = [&](const char* where) {
        const FeasibilityReport rep = check_feasibility(geom, chain.snapshot());
        if (!rep.feasible) throw std::logic_error(std::string("infeasible state after ") + where);
    };

    for (int sweep = 0; sweep < cfg.n_iter; ++sweep) {
        for (int i = 0; i < q; ++i) {
            const double proposal = chain.coefficient(i) + cfg.tau[i] * normal(rng);
            const int result = chain.update_active(i, proposal, rng);
            if (result > 0) accepted_b[i] += 1.0;
            if (result < 0) skipped_b[i] += 1.0;
            if (cfg.check_every_step && result > 0) verify("active update");
        }
        for (int k = 0; k < nf; ++k) {
            const bool moved = chain.update_free(k, rng);
            if (moved) accepted_f[k] += 1.0;
            if (cfg.check_every_step && moved) verify("free update");
        }
        chain.refresh();
        if (sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0)
            out.states.push_back(chain.snapshot());
    }

    const double total = static_cast<double>(cfg.n_iter);
    out.acceptance_b = accepted_b / total;
    out.skipped_b = skipped_b / total;
    out.acceptance_sF = accepted_f / total;
    out.autocorrelation = MatrixXd::Zero(q, cfg.acf_max_lag);
    if (cfg.acf_max_lag > 0 && !out.states.empty()) {
        VectorXd trace(out.states.size());
        for (int i = 0; i < q; ++i) {
            for (std::size_t t = 0; t < out.states.size(); ++t)
                trace[static_cast<Eigen::Index>(t)] = out.states[t].b_active[i];
            out.autocorrelation.row(i) = autocorrelation(trace, cfg.acf_max_lag).transpose();
        }
    }
    return out;
}

AugmentedState default_init(const LassoSolution& solution, const ActiveSetGeometry& geom,
                            double tol) {
    require(!solution.active.empty(), ErrorCode::EmptyModel, "lasso fit has an empty active set");
    require(solution.active == geom.active(), ErrorCode::InvalidArgument,
            "lasso active set does not match the geometry");
    VectorXd b = take(solution.beta, geom.active());
    VectorXd s_free = take(solution.subgradient, geom.free());
    AugmentedState st = make_state(geom, std::move(b), std::move(s_free));
    if (geom.num_dependent() > 0) {
        const VectorXd observed = take(solution.subgradient, geom.dependent());
        const double gap = (observed - st.s_dependent).cwiseAbs().maxCoeff();
        require(gap <= tol, ErrorCode::InconsistentSolution,
                "recomputed s_D differs from the observed subgradient by " + std::to_string(gap));
    }
    return st;
}

VectorXd default_tau(const DesignContext& ctx, const ActiveSetGeometry& geom, double sigma2,
                     double multiplier) {
    (void)ctx;
    require(multiplier > 0 && std::isfinite(multiplier), ErrorCode::InvalidArgument,
            "tau multiplier must be positive");
    require(sigma2 > 0, ErrorCode::InvalidArgument, "sigma2 must be positive");
    return multiplier * std::sqrt(sigma2) *
           geom.active_gram_inverse().diagonal().cwiseSqrt();
}

VectorXd autocorrelation(const VectorXd& trace, int max_lag) {
    VectorXd acf = VectorXd::Zero(max_lag);
    const Eigen::Index T = trace.size();
    if (T < 2) return acf;
    const VectorXd centered = trace.array() - trace.mean();
    const double denom = centered.squaredNorm();
    if (denom <= 0) return acf;
    for (int lag = 1; lag <= max_lag && lag < T; ++lag) {
        acf[lag - 1] = centered.head(T - lag).dot(centered.tail(T - lag)) / denom;
    }
    return acf;
}

} // namespace lassopsi
