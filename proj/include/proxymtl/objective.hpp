#pragma once
#include <proxymtl/core.hpp>
#include <cmath>

namespace proxymtl {

/// Column q of the result is sigma_q * B e_q.
inline Matrix covariance_times(const TaskBundle& bundle, const CoefMatrix& B)
{
    check_shape(bundle, B);
    Matrix SB(B.rows(), B.cols());
    for (Index q = 0; q < B.cols(); ++q) {
        SB.col(q).noalias() = bundle.tasks[static_cast<std::size_t>(q)].sigma * B.col(q);
    }
    return SB;
}

/// Loss from a precomputed covariance_times(bundle, B).
inline double loss_from_product(const TaskBundle& bundle, const CoefMatrix& B, const Matrix& SB)
{
    double total = 0.0;
    for (Index q = 0; q < B.cols(); ++q) {
        const auto& t = bundle.tasks[static_cast<std::size_t>(q)];
        total += 0.5 * B.col(q).dot(SB.col(q)) - t.s.dot(B.col(q));
    }
    return total;
}

inline Matrix gradient_from_product(const TaskBundle& bundle, Matrix SB)
{
    for (Index q = 0; q < SB.cols(); ++q) SB.col(q) -= bundle.tasks[static_cast<std::size_t>(q)].s;
    return SB;
}

/**
 * Summary-statistics loss
 *   sum_q 1/2 (B e_q)^T sigma_q (B e_q) - <s_q, B e_q>.
 * Evaluated as a quadratic form; no matrix square root is taken.
 */
inline double loss(const TaskBundle& bundle, const CoefMatrix& B)
{
    return loss_from_product(bundle, B, covariance_times(bundle, B));
}

/// Column q = sigma_q B e_q - s_q.
inline CoefMatrix gradient(const TaskBundle& bundle, const CoefMatrix& B)
{
    return gradient_from_product(bundle, covariance_times(bundle, B));
}

namespace detail {

inline double max_singular_value_svd(const Matrix& M)
{
    Eigen::JacobiSVD<Matrix> svd(M);
    if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
        throw Error(ErrorCode::ConvergenceFailure, "operator norm: SVD failed");
    }
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

} // namespace detail

/**
 * Largest singular value by power iteration on the smaller Gram matrix.
 * Stops when the Rayleigh quotient changes by at most rel_tol relative;
 * falls back to a dense SVD if the iteration does not settle.
 */
inline double operator_norm(const Matrix& M, double rel_tol = 1e-10, long max_iters = 10000)
{
    detail::require(M.allFinite(), ErrorCode::NonFinite, "operator_norm: non-finite entries");
    if (M.size() == 0) return 0.0;
    const Matrix G = M.cols() <= M.rows() ? Matrix(M.transpose() * M) : Matrix(M * M.transpose());
    const Index k = G.rows();
    if (G.cwiseAbs().maxCoeff() == 0.0) return 0.0;

    // Deterministic start: ones plus a small ramp so that symmetric sign
    // patterns (e.g. (1,-1)) are not orthogonal to the start vector.
    Vector v(k);
    for (Index i = 0; i < k; ++i) v(i) = 1.0 + 0.5 * static_cast<double>(i) / static_cast<double>(k);
    v.normalize();

    double rq = v.dot(G * v);
    for (long it = 0; it < max_iters; ++it) {
        Vector w = G * v;
        const double nrm = w.norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) break;
        v = w / nrm;
        const double next = v.dot(G * v);
        if (std::abs(next - rq) <= rel_tol * std::abs(next)) return std::sqrt(std::max(next, 0.0));
        rq = next;
    }
    return detail::max_singular_value_svd(M);
}

inline double row_norm_sum(const Matrix& M) { return M.rowwise().norm().sum(); }

inline double max_row_norm(const Matrix& M) { return M.rows() ? M.rowwise().norm().maxCoeff() : 0.0; }

inline double nuclear_norm(const Matrix& M)
{
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    detail::require(svd.info() == Eigen::Success, ErrorCode::SVDFailure, "nuclear norm: SVD failed");
    return svd.singularValues().sum();
}

/// l_{2,1} (sum of row norms) or nuclear (sum of singular values).
inline double penalty_norm(const Matrix& M, Penalty kind)
{
    detail::require(M.allFinite(), ErrorCode::NonFinite, "penalty_norm: non-finite entries");
    return kind == Penalty::GroupSparse ? row_norm_sum(M) : nuclear_norm(M);
}

/// l_{2,inf} (max row norm) or operator norm; the duals of penalty_norm.
inline double dual_norm(const Matrix& M, Penalty kind)
{
    detail::require(M.allFinite(), ErrorCode::NonFinite, "dual_norm: non-finite entries");
    return kind == Penalty::GroupSparse ? max_row_norm(M) : operator_norm(M);
}

} // namespace proxymtl
