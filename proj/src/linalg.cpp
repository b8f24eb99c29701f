#include "pode/linalg.hpp"

#include "pode/error.hpp"

#include <Eigen/Eigenvalues>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace pode {

namespace {
constexpr Eigen::Index kLapackThreshold = 300;
}

SymmetricEigen symmetric_eigen(const Matrix& a) {
    const Eigen::Index n = a.rows();
    SymmetricEigen out;
    if (n == 0) {
        out.values.resize(0);
        out.vectors.resize(0, 0);
        return out;
    }
    if (n < kLapackThreshold) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(a);
        if (es.info() != Eigen::Success)
            throw NumericalError("symmetric eigendecomposition failed");
        out.values = es.eigenvalues();
        out.vectors = es.eigenvectors();
        return out;
    }
    out.vectors = a;
    out.values.resize(n);
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n),
                       out.vectors.data(), static_cast<lapack_int>(n), out.values.data());
    if (info != 0)
        throw NumericalError("dsyevd failed with info=" + std::to_string(info));
    return out;
}

Matrix project_psd(const Matrix& a) {
    const Matrix s = symmetrize(a);
    const Eigen::Index n = s.rows();
    if (n == 0) return s;
    if (n < kLapackThreshold) {
        SymmetricEigen es = symmetric_eigen(s);
        if (es.values.minCoeff() >= 0.0) return s;
        const Vector clipped = es.values.cwiseMax(0.0);
        Matrix out = es.vectors * clipped.asDiagonal() * es.vectors.transpose();
        return symmetrize(out);
    }
    // Only the negative eigenpairs are needed: A_+ = A - V_- L_- V_-^T.
    // Tridiagonalize, solve the tridiagonal problem by MRRR, and map back
    // just the eigenvectors with negative eigenvalues.
    const auto ni = static_cast<lapack_int>(n);
    Matrix work = s;
    Vector d(n), e(n), tau(n);
    lapack_int info = LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', ni, work.data(), ni, d.data(), e.data(), tau.data());
    if (info != 0) throw NumericalError("dsytrd failed with info=" + std::to_string(info));
    Vector values(n);
    Matrix z(n, n);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    lapack_int found = 0;
    lapack_logical tryrac = 1;
    info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'A', ni, d.data(), e.data(), 0.0, 0.0, 0, 0, &found, values.data(),
                          z.data(), ni, ni, support.data(), &tryrac);
    if (info != 0) throw NumericalError("dstemr failed with info=" + std::to_string(info));
    lapack_int negative = 0;
    while (negative < found && values[negative] < 0.0) ++negative;
    if (negative == 0) return s;
    // Map back whichever side of the spectrum is smaller.
    const bool keep_positive = found - negative < negative;
    const lapack_int first = keep_positive ? negative : 0;
    const lapack_int count = keep_positive ? found - negative : negative;
    if (count == 0) return Matrix::Zero(n, n);
    Matrix v = z.middleCols(first, count);
    info = LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', ni, count, work.data(), ni, tau.data(), v.data(), ni);
    if (info != 0) throw NumericalError("dormtr failed with info=" + std::to_string(info));
    Matrix scaled = v * values.segment(first, count).asDiagonal();
    Matrix out = keep_positive ? Matrix::Zero(n, n) : s;
    if (keep_positive) out.noalias() += scaled * v.transpose();
    else out.noalias() -= scaled * v.transpose();
    return symmetrize(out);
}

namespace {

// Groups of indices connected through nonzero off-diagonal entries.
std::vector<std::vector<Eigen::Index>> components(const Matrix& y) {
    const Eigen::Index n = y.rows();
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Eigen::Index{0});
    auto find = [&](Eigen::Index i) {
        while (parent[static_cast<std::size_t>(i)] != i) {
            auto& up = parent[static_cast<std::size_t>(i)];
            up = parent[static_cast<std::size_t>(up)];
            i = up;
        }
        return i;
    };
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i)
            if (y(i, j) != 0.0) {
                const Eigen::Index a = find(i), b = find(j);
                if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
            }
    std::vector<std::vector<Eigen::Index>> groups;
    std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& g = slot[static_cast<std::size_t>(find(i))];
        if (g < 0) {
            g = static_cast<Eigen::Index>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(g)].push_back(i);
    }
    return groups;
}

} // namespace

// Eigenvalue clipping, one connected block at a time. The projection of a
// block-diagonal matrix is block diagonal, so this is exact; a thresholded
// iterate usually splits into many small blocks.
Matrix project_psd_blockwise(const Matrix& y, double shift) {
    if (shift < 0.0) shift = 1e-12 * std::max(1.0, y.diagonal().cwiseAbs().maxCoeff());
    const auto groups = components(y);
    if (groups.size() == 1) return is_psd_fast(y, shift) ? y : project_psd(y);
    Matrix out = Matrix::Zero(y.rows(), y.cols());
    for (const auto& g : groups) {
        const auto s = static_cast<Eigen::Index>(g.size());
        if (s == 1) {
            const double d = y(g[0], g[0]);
            out(g[0], g[0]) = d + shift > 0.0 ? d : 0.0;
            continue;
        }
        Matrix b(s, s);
        for (Eigen::Index j = 0; j < s; ++j)
            for (Eigen::Index i = 0; i < s; ++i) b(i, j) = y(g[i], g[j]);
        if (!is_psd_fast(b, shift)) b = project_psd(b);
        for (Eigen::Index j = 0; j < s; ++j)
            for (Eigen::Index i = 0; i < s; ++i) out(g[i], g[j]) = b(i, j);
    }
    return out;
}

bool is_psd_fast(const Matrix& a, double shift) {
    const Eigen::Index n = a.rows();
    if (n == 0) return true;
    if (shift < 0.0) shift = 1e-12 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
    Matrix shifted = a;
    shifted.diagonal().array() += shift;
    Eigen::LLT<Matrix> llt(shifted);
    return llt.info() == Eigen::Success;
}

double min_eigenvalue(const Matrix& a) {
    if (a.rows() == 0) return 0.0;
    return symmetric_eigen(symmetrize(a)).values.minCoeff();
}

double ridge_jitter(const Matrix& a, double scale) {
    if (a.rows() == 0) return scale;
    const double tr = a.trace();
    return tr > 0.0 ? scale * tr / static_cast<double>(a.rows()) : scale;
}

Eigen::LLT<Matrix> robust_cholesky(const Matrix& a, std::string_view what,
                                   double relative_jitter) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) return llt;
    double jitter = ridge_jitter(a, relative_jitter);
    for (int attempt = 0; attempt < 8; ++attempt) {
        Matrix b = a;
        b.diagonal().array() += jitter;
        llt.compute(b);
        if (llt.info() == Eigen::Success) return llt;
        jitter *= 10.0;
    }
    throw NumericalError(std::string(what) + " is not positive definite after jitter");
}

double log_det(const Eigen::LLT<Matrix>& llt) {
    const Matrix& l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

Matrix psd_factor(const Matrix& a) {
    const Eigen::Index n = a.rows();
    if (n == 0 || a.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(n, n);
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    SymmetricEigen es = symmetric_eigen(symmetrize(a));
    const double tol = -1e-8 * std::max(1.0, es.values.cwiseAbs().maxCoeff());
    if (es.values.minCoeff() < tol)
        throw NumericalError("covariance matrix is not positive semidefinite");
    return es.vectors * es.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Matrix pseudo_inverse(const Matrix& a) {
    if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    return cod.pseudoInverse();
}

Matrix inverse_sqrt_spd(const Matrix& a) {
    SymmetricEigen es = symmetric_eigen(symmetrize(a));
    if (es.values.size() > 0 && es.values.minCoeff() <= 0.0)
        throw NumericalError("matrix is not positive definite");
    return es.vectors * es.values.cwiseSqrt().cwiseInverse().asDiagonal() *
           es.vectors.transpose();
}

Matrix principal_submatrix(const Matrix& a, const std::vector<int>& idx) {
    const auto m = static_cast<Eigen::Index>(idx.size());
    Matrix out(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) out(i, j) = a(idx[i], idx[j]);
    return out;
}

} // namespace pode
