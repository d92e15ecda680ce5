#pragma once

#include <memory>

#include "lassopsi/types.hpp"

namespace lassopsi {

struct GeometryOptions {
    double orthogonality_tol = 1e-10;
    double residual_tol = 1e-8;
    // Largest admissible condition number of G_D.
    double condition_cap = 1e10;
    // Relative singular-value threshold below which X is declared rank deficient.
    double rank_tol = 1e-10;
};

/// Fixed design and its spectral factorization.
///
/// With X = U diag(sv) V_R^T (thin SVD), the Gram matrix Psi = X^T X / n has
/// eigenvectors V_R with eigenvalues Lambda = sv^2 / n, and V_N spans null(X).
/// In the usual high-dimensional setting (p > n, rank n) V_R is p x n and V_N is
/// p x (p - n). The low-dimensional factory (p <= n, rank p) is used for the
/// analytic p = 1, 2 reductions; there V_N is empty and V_R is p x p.
class DesignContext {
public:
    /// Requires n >= 2, p > n and rank(X) = n.
    static DesignContext build(const MatrixXd& X, const VectorXd& weights = VectorXd(),
                               const GeometryOptions& options = {});

    /// Requires p <= n and rank(X) = p.
    static DesignContext build_low_dimensional(const MatrixXd& X,
                                               const VectorXd& weights = VectorXd(),
                                               const GeometryOptions& options = {});

    int n() const { return static_cast<int>(X_.rows()); }
    int p() const { return static_cast<int>(X_.cols()); }
    /// Dimension of row(X): n when p > n, p otherwise.
    int rank() const { return static_cast<int>(eigenvalues_.size()); }
    int null_dim() const { return p() - rank(); }
    bool low_dimensional() const { return p() <= n(); }

    const MatrixXd& X() const { return X_; }
    const VectorXd& weights() const { return weights_; }
    const MatrixXd& gram() const { return gram_; }
    const MatrixXd& row_basis() const { return row_basis_; }   // V_R
    const MatrixXd& null_basis() const { return null_basis_; } // V_N
    const VectorXd& eigenvalues() const { return eigenvalues_; } // Lambda
    const MatrixXd& left_vectors() const { return left_; }      // U
    const VectorXd& singular_values() const { return singular_; }
    /// (X^T)^+ = U diag(1/sv) V_R^T, n x p. Equals (X X^T)^{-1} X when p > n.
    const MatrixXd& transpose_pinv() const { return transpose_pinv_; }
    const GeometryOptions& options() const { return options_; }

    /// V_R^T X^T mu / n, the data term of the KKT map in spectral coordinates.
    VectorXd spectral_data_term(const VectorXd& mu) const;

    struct Residuals {
        double orthogonality; // max |[V_R|V_N]^T [V_R|V_N] - I|
        double eigen;         // ||Psi V_R - V_R Lambda||_max / ||Psi||_max
        double null;          // ||X V_N||_max / ||X||_max
    };
    Residuals residuals() const;

private:
    DesignContext() = default;
    static DesignContext factor(const MatrixXd& X, const VectorXd& weights,
                                const GeometryOptions& options);

    MatrixXd X_;
    VectorXd weights_;
    MatrixXd gram_;
    MatrixXd row_basis_;
    MatrixXd null_basis_;
    VectorXd eigenvalues_;
    MatrixXd left_;
    VectorXd singular_;
    MatrixXd transpose_pinv_;
    GeometryOptions options_;
};

/// Flip column signs so the first entry above `tol` in magnitude is positive.
void fix_column_signs(MatrixXd& m, double tol = 1e-12);

/// Constraint machinery for a fixed active set A.
///
/// G = V_{IN}^T W_{II} encodes the null-space constraint G s_I = u(s_A) with
/// u(s_A) = -V_{AN}^T W_{AA} s_A. The columns of G are split into free (F) and
/// dependent (D) coordinates with G_D invertible, so s_D = C s_A - E s_F where
/// E = G_D^{-1} G_F and C = -G_D^{-1} V_{AN}^T W_{AA}.
///
/// The spectral KKT coordinates are affine in (b_A, s_F) for fixed signs:
///   r = P b_A + lambda (K_A s_A + K_F s_F) - V_R^T X^T mu / n.
class ActiveSetGeometry {
public:
    static ActiveSetGeometry build(const DesignContext& ctx, IndexSet active);

    int p() const { return p_; }
    int rank() const { return rank_; }
    int q() const { return static_cast<int>(active_.size()); }
    int num_free() const { return static_cast<int>(free_.size()); }
    int num_dependent() const { return static_cast<int>(dependent_.size()); }

    const IndexSet& active() const { return active_; }
    const IndexSet& inactive() const { return inactive_; }
    /// Feature indices of F and D (each sorted ascending).
    const IndexSet& free() const { return free_; }
    const IndexSet& dependent() const { return dependent_; }
    /// Positions of F and D inside the inactive set I.
    const IndexSet& free_positions() const { return free_pos_; }
    const IndexSet& dependent_positions() const { return dependent_pos_; }

    const MatrixXd& G() const { return G_; }
    const MatrixXd& G_free() const { return G_free_; }
    const MatrixXd& G_dependent() const { return G_dependent_; }
    const MatrixXd& null_basis_I() const { return null_basis_I_; } // B(I)
    double condition_G_dependent() const { return condition_; }

    const MatrixXd& E() const { return E_; }
    const MatrixXd& C() const { return C_; }
    /// u(s_A) = offset_map * s_A.
    const MatrixXd& offset_map() const { return offset_map_; }

    const MatrixXd& P() const { return P_; }
    const MatrixXd& K_active() const { return K_active_; }
    const MatrixXd& K_free() const { return K_free_; }

    const MatrixXd& X_active() const { return X_active_; }
    /// (X_A^T X_A)^{-1} X_A^T.
    const MatrixXd& active_pinv() const { return active_pinv_; }
    const MatrixXd& active_gram_inverse() const { return active_gram_inverse_; }
    /// (X_A^T X_A)^{-1} W_AA.
    const MatrixXd& debias_map() const { return debias_map_; }
    /// (X^T)^+ W restricted to columns A and I.
    const MatrixXd& recon_active() const { return recon_active_; }
    const MatrixXd& recon_inactive() const { return recon_inactive_; }

    /// T(A; lambda) = [V_R^T Psi_A | lambda V_IR^T W_II B(I)].
    MatrixXd T(const DesignContext& ctx, double lambda) const;
    double log_abs_det_T(const DesignContext& ctx, double lambda) const;

private:
    ActiveSetGeometry() = default;

    int p_ = 0;
    int rank_ = 0;
    IndexSet active_, inactive_, free_, dependent_, free_pos_, dependent_pos_;
    MatrixXd G_, G_free_, G_dependent_, null_basis_I_;
    double condition_ = 1.0;
    MatrixXd E_, C_, offset_map_;
    MatrixXd P_, K_active_, K_free_;
    MatrixXd X_active_, active_pinv_, active_gram_inverse_, debias_map_;
    MatrixXd recon_active_, recon_inactive_;
};

} // namespace lassopsi
