#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <string_view>
#include <vector>

namespace pode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Eigen-pairs of a symmetric matrix, ascending eigenvalues.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
};

/// Symmetric eigendecomposition. Large problems go through LAPACK's
/// divide-and-conquer driver, small ones through Eigen.
SymmetricEigen symmetric_eigen(const Matrix& a);

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/// Nearest PSD matrix in Frobenius norm (eigenvalues clipped at zero).
Matrix project_psd(const Matrix& a);

/// project_psd computed separately on each group of indices linked by
/// nonzero entries. Blocks that pass is_psd_fast(block, shift) are kept.
Matrix project_psd_blockwise(const Matrix& a, double shift = -1.0);

/// Cheap PSD test: attempts a Cholesky factorization of a + shift * I.
/// The default shift admits rounding-level negative eigenvalues only.
bool is_psd_fast(const Matrix& a, double shift = -1.0);

double min_eigenvalue(const Matrix& a);

/// Ridge jitter used before factorizing covariance-like matrices:
/// scale * trace(a) / dim, or scale when the trace vanishes.
double ridge_jitter(const Matrix& a, double scale);

/// Cholesky factorization of a symmetric positive (semi)definite matrix with
/// escalating ridge jitter. Throws NumericalError after the last attempt.
Eigen::LLT<Matrix> robust_cholesky(const Matrix& a, std::string_view what,
                                   double relative_jitter = 1e-10);

double log_det(const Eigen::LLT<Matrix>& llt);

/// A factor L with L L^T = a for a PSD matrix (zero matrix allowed).
/// Uses Cholesky with jitter and falls back to the eigen square root.
Matrix psd_factor(const Matrix& a);

/// Moore-Penrose pseudoinverse.
Matrix pseudo_inverse(const Matrix& a);

/// a^{-1/2} for a symmetric positive definite matrix.
Matrix inverse_sqrt_spd(const Matrix& a);

/// Dense copy of the principal submatrix selected by idx.
Matrix principal_submatrix(const Matrix& a, const std::vector<int>& idx);

} // namespace pode
