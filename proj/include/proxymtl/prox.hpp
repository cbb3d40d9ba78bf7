#pragma once
#include <proxymtl/core.hpp>
#include <cmath>

namespace proxymtl {

/// M = U * diag(sigma) * V^T with sigma nonincreasing.
struct ThinSvd
{
    Matrix U;
    Vector sigma;
    Matrix V;

    Matrix reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }
};

inline ThinSvd thin_svd(const Matrix& M)
{
    detail::require(M.allFinite(), ErrorCode::NonFinite, "thin_svd: non-finite entries");
    // Jacobi with QR preconditioning: O(p Q^2) for tall p x Q input and
    // accurate for tiny singular values (no squaring of the condition number).
    Eigen::JacobiSVD<Matrix, Eigen::ColPivHouseholderQRPreconditioner> svd(M, Eigen::ComputeThinU |
                                                                                   Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
        throw Error(ErrorCode::SVDFailure, "thin_svd: decomposition failed");
    }
    return ThinSvd{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Row-wise shrinkage: row_i <- max(0, 1 - t / ||row_i||) * row_i. Zero rows stay zero.
inline Matrix group_soft_threshold(const Matrix& M, double t)
{
    detail::require(t >= 0.0, ErrorCode::NegativeThreshold, "threshold must be nonnegative");
    Matrix out = M;
    for (Index i = 0; i < out.rows(); ++i) {
        const double nrm = out.row(i).norm();
        if (nrm <= t) {
            out.row(i).setZero();
        } else {
            out.row(i) *= 1.0 - t / nrm;
        }
    }
    return out;
}

namespace detail {

/// svt that also stores the nuclear norm of the result in *norm when given.
inline Matrix svt_with_norm(const Matrix& M, double t, double* norm)
{
    require(t >= 0.0, ErrorCode::NegativeThreshold, "threshold must be nonnegative");
    if (norm) *norm = 0.0;
    if (M.size() == 0) return M;
    ThinSvd d = thin_svd(M);
    Index keep = 0;
    while (keep < d.sigma.size() && d.sigma(keep) > t) ++keep;
    if (keep == 0) return Matrix::Zero(M.rows(), M.cols());
    const Vector shrunk = (d.sigma.head(keep).array() - t).matrix();
    if (norm) *norm = shrunk.sum();
    return d.U.leftCols(keep) * shrunk.asDiagonal() * d.V.leftCols(keep).transpose();
}

} // namespace detail

/// Singular value thresholding: U * diag(max(sigma - t, 0)) * V^T.
inline Matrix svt(const Matrix& M, double t) { return detail::svt_with_norm(M, t, nullptr); }

/// Proximal map of t * penalty_norm(., kind).
inline Matrix prox(const Matrix& M, double t, Penalty kind)
{
    return kind == Penalty::GroupSparse ? group_soft_threshold(M, t) : svt(M, t);
}

} // namespace proxymtl
