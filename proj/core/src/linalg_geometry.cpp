#include "lassopsi/linalg_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lassopsi/errors.hpp"

namespace lassopsi {

namespace {

VectorXd resolve_weights(const VectorXd& weights, int p) {
    if (weights.size() == 0) return VectorXd::Ones(p);
    require(weights.size() == p, ErrorCode::InvalidArgument,
            "weight vector has length " + std::to_string(weights.size()) + ", expected " +
                std::to_string(p));
    for (Eigen::Index j = 0; j < weights.size(); ++j) {
        require(weights[j] > 0 && std::isfinite(weights[j]), ErrorCode::NonPositiveWeight,
                "penalty weight " + std::to_string(j) + " is not positive");
    }
    return weights;
}

void validate_index_set(const IndexSet& set, int p) {
    for (std::size_t i = 0; i < set.size(); ++i) {
        require(set[i] >= 0 && set[i] < p, ErrorCode::InvalidArgument,
                "index " + std::to_string(set[i]) + " out of range");
        require(i == 0 || set[i - 1] < set[i], ErrorCode::InvalidArgument,
                "index set must be sorted and duplicate-free");
    }
}

} // namespace

void fix_column_signs(MatrixXd& m, double tol) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > tol) {
                if (m(i, j) < 0) m.col(j) *= -1.0;
                break;
            }
        }
    }
}

DesignContext DesignContext::build(const MatrixXd& X, const VectorXd& weights,
                                   const GeometryOptions& options) {
    require(X.rows() >= 2, ErrorCode::InvalidArgument, "design needs at least two rows");
    require(X.cols() > X.rows(), ErrorCode::InvalidArgument,
            "design must have p > n (got n = " + std::to_string(X.rows()) +
                ", p = " + std::to_string(X.cols()) + ")");
    return factor(X, weights, options);
}

DesignContext DesignContext::build_low_dimensional(const MatrixXd& X, const VectorXd& weights,
                                                   const GeometryOptions& options) {
    require(X.cols() >= 1 && X.cols() <= X.rows(), ErrorCode::InvalidArgument,
            "low-dimensional design must have 1 <= p <= n");
    return factor(X, weights, options);
}

DesignContext DesignContext::factor(const MatrixXd& X, const VectorXd& weights,
                                    const GeometryOptions& options) {
    require(X.allFinite(), ErrorCode::InvalidArgument, "design contains non-finite entries");
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    const int rank = std::min(n, p);

    DesignContext ctx;
    ctx.options_ = options;
    ctx.X_ = X;
    ctx.weights_ = resolve_weights(weights, p);
    ctx.gram_ = X.transpose() * X / static_cast<double>(n);

    const bool wide = p > n;
    Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU |
                                       (wide ? Eigen::ComputeFullV : Eigen::ComputeThinV));
    const VectorXd& sv = svd.singularValues();
    require(sv.size() >= rank && sv[0] > 0, ErrorCode::RankDeficient, "design is zero");
    const double smallest = sv[rank - 1] / sv[0];
    require(smallest > options.rank_tol, ErrorCode::RankDeficient,
            "numerical rank of X is below " + std::to_string(rank) +
                " (relative singular value " + std::to_string(smallest) + ")");

    MatrixXd V = svd.matrixV();
    MatrixXd U = svd.matrixU().leftCols(rank);
    MatrixXd VR = V.leftCols(rank);
    // Flip V_R columns and the matching U columns together so X = U S V_R^T holds.
    for (int j = 0; j < rank; ++j) {
        for (int i = 0; i < p; ++i) {
            if (std::abs(VR(i, j)) > 1e-12) {
                if (VR(i, j) < 0) {
                    VR.col(j) *= -1.0;
                    U.col(j) *= -1.0;
                }
                break;
            }
        }
    }
    MatrixXd VN = wide ? MatrixXd(V.rightCols(p - n)) : MatrixXd(p, 0);
    fix_column_signs(VN);

    ctx.singular_ = sv.head(rank);
    ctx.eigenvalues_ = ctx.singular_.array().square() / static_cast<double>(n);
    ctx.row_basis_ = std::move(VR);
    ctx.null_basis_ = std::move(VN);
    ctx.left_ = std::move(U);
    ctx.transpose_pinv_ =
        ctx.left_ * ctx.singular_.cwiseInverse().asDiagonal() * ctx.row_basis_.transpose();
    return ctx;
}

VectorXd DesignContext::spectral_data_term(const VectorXd& mu) const {
    require(mu.size() == n(), ErrorCode::InvalidArgument, "mean vector has wrong length");
    return singular_.cwiseProduct(left_.transpose() * mu) / static_cast<double>(n());
}

DesignContext::Residuals DesignContext::residuals() const {
    MatrixXd V(p(), p());
    V << row_basis_, null_basis_;
    Residuals r{};
    r.orthogonality =
        (V.transpose() * V - MatrixXd::Identity(p(), p())).cwiseAbs().maxCoeff();
    const double gram_scale = std::max(gram_.cwiseAbs().maxCoeff(), 1e-300);
    r.eigen = (gram_ * row_basis_ - row_basis_ * eigenvalues_.asDiagonal()).cwiseAbs().maxCoeff() /
              gram_scale;
    const double x_scale = std::max(X_.cwiseAbs().maxCoeff(), 1e-300);
    r.null = null_basis_.cols() == 0 ? 0.0 : (X_ * null_basis_).cwiseAbs().maxCoeff() / x_scale;
    return r;
}

ActiveSetGeometry ActiveSetGeometry::build(const DesignContext& ctx, IndexSet active) {
    const int p = ctx.p();
    const int m = ctx.rank();
    const int d = ctx.null_dim();
    validate_index_set(active, p);
    const int q = static_cast<int>(active.size());
    require(q >= 1, ErrorCode::InvalidArgument, "active set is empty");
    require(q <= m, ErrorCode::InvalidArgument,
            "active set larger than the rank of X (" + std::to_string(q) + " > " +
                std::to_string(m) + ")");

    ActiveSetGeometry g;
    g.p_ = p;
    g.rank_ = m;
    g.active_ = std::move(active);
    g.inactive_ = complement(g.active_, p);
    const int ni = static_cast<int>(g.inactive_.size());

    const VectorXd& w = ctx.weights();
    const VectorXd w_active = take(w, g.active_);
    const VectorXd w_inactive = take(w, g.inactive_);

    if (d > 0) {
        const MatrixXd VN_active = take_rows(ctx.null_basis(), g.active_);
        const MatrixXd VN_inactive = take_rows(ctx.null_basis(), g.inactive_);
        g.G_ = VN_inactive.transpose() * w_inactive.asDiagonal();

        // D = first d pivot columns of a column-pivoted QR of G.
        Eigen::ColPivHouseholderQR<MatrixXd> qr(g.G_);
        const auto& perm = qr.colsPermutation().indices();
        IndexSet dep_pos(perm.data(), perm.data() + d);
        std::sort(dep_pos.begin(), dep_pos.end());
        g.dependent_pos_ = dep_pos;
        g.free_pos_ = complement(dep_pos, ni);

        g.G_dependent_ = take_cols(g.G_, g.dependent_pos_);
        g.G_free_ = take_cols(g.G_, g.free_pos_);

        Eigen::JacobiSVD<MatrixXd> svd_d(g.G_dependent_);
        const VectorXd& s = svd_d.singularValues();
        g.condition_ = s[d - 1] > 0 ? s[0] / s[d - 1] : std::numeric_limits<double>::infinity();
        require(std::isfinite(g.condition_) && g.condition_ <= ctx.options().condition_cap,
                ErrorCode::DegenerateGeometry,
                "G_D is not invertible within the condition cap (condition " +
                    std::to_string(g.condition_) + ")");

        Eigen::PartialPivLU<MatrixXd> lu(g.G_dependent_);
        g.offset_map_ = -VN_active.transpose() * w_active.asDiagonal();
        g.E_ = lu.solve(g.G_free_);
        g.C_ = lu.solve(g.offset_map_);

        // Orthonormal basis of null(G) from the trailing columns of a full QR of G^T.
        Eigen::HouseholderQR<MatrixXd> qr_t(g.G_.transpose());
        const MatrixXd Q = qr_t.householderQ() * MatrixXd::Identity(ni, ni);
        g.null_basis_I_ = Q.rightCols(ni - d);
    } else {
        g.G_ = MatrixXd(0, ni);
        g.free_pos_.resize(ni);
        for (int i = 0; i < ni; ++i) g.free_pos_[i] = i;
        g.G_free_ = MatrixXd(0, ni);
        g.G_dependent_ = MatrixXd(0, 0);
        g.offset_map_ = MatrixXd(0, q);
        g.E_ = MatrixXd(0, ni);
        g.C_ = MatrixXd(0, q);
        g.null_basis_I_ = MatrixXd::Identity(ni, ni);
    }
    for (int pos : g.free_pos_) g.free_.push_back(g.inactive_[pos]);
    for (int pos : g.dependent_pos_) g.dependent_.push_back(g.inactive_[pos]);

    const MatrixXd& VR = ctx.row_basis();
    const MatrixXd VR_active = take_rows(VR, g.active_);
    const MatrixXd VR_free = take_rows(VR, g.free_);
    const MatrixXd VR_dep = take_rows(VR, g.dependent_);
    const VectorXd w_free = take(w, g.free_);
    const VectorXd w_dep = take(w, g.dependent_);

    g.P_ = ctx.eigenvalues().asDiagonal() * VR_active.transpose();
    g.K_active_ = VR_active.transpose() * w_active.asDiagonal();
    g.K_free_ = VR_free.transpose() * w_free.asDiagonal();
    if (d > 0) {
        const MatrixXd dep_block = VR_dep.transpose() * w_dep.asDiagonal();
        g.K_active_ += dep_block * g.C_;
        g.K_free_ -= dep_block * g.E_;
    }

    g.X_active_ = take_cols(ctx.X(), g.active_);
    const MatrixXd gram_active = g.X_active_.transpose() * g.X_active_;
    Eigen::LLT<MatrixXd> llt(gram_active);
    require(llt.info() == Eigen::Success, ErrorCode::DegenerateGeometry,
            "X_A^T X_A is not positive definite");
    g.active_gram_inverse_ = llt.solve(MatrixXd::Identity(q, q));
    g.active_pinv_ = llt.solve(g.X_active_.transpose());
    g.debias_map_ = g.active_gram_inverse_ * w_active.asDiagonal();

    const MatrixXd& tp = ctx.transpose_pinv();
    g.recon_active_ = take_cols(tp, g.active_) * w_active.asDiagonal();
    g.recon_inactive_ = take_cols(tp, g.inactive_) * w_inactive.asDiagonal();
    return g;
}

MatrixXd ActiveSetGeometry::T(const DesignContext& ctx, double lambda) const {
    const int m = rank_;
    const int q = this->q();
    MatrixXd t(m, m);
    t.leftCols(q) = P_;
    if (m > q) {
        const MatrixXd VR_inactive = take_rows(ctx.row_basis(), inactive_);
        const VectorXd w_inactive = take(ctx.weights(), inactive_);
        t.rightCols(m - q) =
            lambda * VR_inactive.transpose() * w_inactive.asDiagonal() * null_basis_I_;
    }
    return t;
}

double ActiveSetGeometry::log_abs_det_T(const DesignContext& ctx, double lambda) const {
    Eigen::PartialPivLU<MatrixXd> lu(T(ctx, lambda));
    const MatrixXd& lu_m = lu.matrixLU();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lu_m.rows(); ++i) acc += std::log(std::abs(lu_m(i, i)));
    return acc;
}

} // namespace lassopsi
