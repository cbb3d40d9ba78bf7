#pragma once
#include <proxymtl/core.hpp>
#include <proxymtl/objective.hpp>
#include <proxymtl/solver.hpp>
#include <cmath>
#include <utility>
#include <vector>

namespace proxymtl {

/// Smallest lambda whose solution is exactly zero: dual_norm(gradient at 0).
inline double lambda_max(const TaskBundle& bundle, Penalty kind)
{
    return dual_norm(gradient(bundle, CoefMatrix::Zero(bundle.p, bundle.num_tasks())), kind);
}

/// size log-spaced points from min_ratio * lambda_max up to lambda_max, ascending.
inline std::vector<double> default_grid(const TaskBundle& bundle, Penalty kind, int size = 20,
                                        double min_ratio = 0.01)
{
    detail::require(size >= 1, ErrorCode::EmptyGrid, "grid size must be >= 1");
    detail::require(min_ratio > 0.0 && min_ratio < 1.0, ErrorCode::InvalidArgument,
                    "grid min ratio must lie in (0, 1)");
    const double hi = lambda_max(bundle, kind);
    detail::require(hi > 0.0, ErrorCode::InvalidArgument, "all score vectors are zero; lambda_max is 0");
    if (size == 1) return {hi};
    std::vector<double> grid(static_cast<std::size_t>(size));
    const double log_lo = std::log(min_ratio * hi), log_hi = std::log(hi);
    for (int k = 0; k < size; ++k) {
        grid[static_cast<std::size_t>(k)] = std::exp(log_lo + (log_hi - log_lo) * k / (size - 1));
    }
    grid.back() = hi;
    return grid;
}

/// Entry (j, k) = dual_norm(gradient(B_j) - gradient(B_k)).
inline Matrix pairwise_gap_matrix(const TaskBundle& bundle, const std::vector<FitResult>& path, Penalty kind)
{
    const auto M = static_cast<Index>(path.size());
    std::vector<Matrix> grads;
    grads.reserve(path.size());
    for (const auto& r : path) grads.push_back(gradient(bundle, r.B_hat));
    Matrix gaps = Matrix::Zero(M, M);
    for (Index j = 0; j < M; ++j) {
        for (Index k = j + 1; k < M; ++k) {
            const double g = dual_norm(grads[static_cast<std::size_t>(j)] - grads[static_cast<std::size_t>(k)], kind);
            gaps(j, k) = g;
            gaps(k, j) = g;
        }
    }
    return gaps;
}

struct LepskiReport
{
    double chosen_lambda = 0.0;
    std::size_t chosen_index = 0;
    Matrix pairwise_gaps;
    double cbar = 1.0;
    std::vector<bool> feasible_set;
};

/**
 * Adaptive selection: index j is feasible when every pair j', j'' >= j has
 * gap(j', j'') <= cbar * (lambda_j' + lambda_j''). The smallest feasible
 * index is chosen. The last grid point is always feasible.
 *
 * Feasibility is monotone in j, so the scan runs downward and stops at the
 * first violation.
 */
inline LepskiReport lepski_select(const TaskBundle& bundle, const std::vector<FitResult>& path,
                                  const std::vector<double>& grid, Penalty kind, double cbar = 1.0)
{
    detail::require(!grid.empty(), ErrorCode::EmptyGrid, "lambda grid is empty");
    detail::require(path.size() == grid.size(), ErrorCode::DimensionMismatch, "path and grid lengths differ");
    detail::require(cbar > 0.0, ErrorCode::InvalidArgument, "cbar must be positive");

    LepskiReport rep;
    rep.cbar = cbar;
    rep.pairwise_gaps = pairwise_gap_matrix(bundle, path, kind);
    const std::size_t M = grid.size();
    rep.feasible_set.assign(M, false);

    std::size_t chosen = M - 1;
    rep.feasible_set[M - 1] = true;
    for (std::size_t j = M - 1; j-- > 0;) {
        // Pairs among indices > j were already checked; only pairs involving j are new.
        bool ok = true;
        for (std::size_t k = j + 1; k < M && ok; ++k) {
            ok = rep.pairwise_gaps(static_cast<Index>(j), static_cast<Index>(k)) <= cbar * (grid[j] + grid[k]);
        }
        if (!ok) break;
        rep.feasible_set[j] = true;
        chosen = j;
    }
    rep.chosen_index = chosen;
    rep.chosen_lambda = grid[chosen];
    return rep;
}

/// Per-task individual-level validation data.
struct HoldoutData
{
    std::vector<Matrix> X;
    std::vector<Vector> Y;
};

/// sum_q ||Y_q - X_q B e_q||^2.
inline double holdout_error(const CoefMatrix& B, const HoldoutData& holdout)
{
    detail::require(static_cast<Index>(holdout.X.size()) == B.cols() && holdout.Y.size() == holdout.X.size(),
                    ErrorCode::DimensionMismatch, "holdout task count does not match coefficient columns");
    double err = 0.0;
    for (std::size_t q = 0; q < holdout.X.size(); ++q) {
        const auto& X = holdout.X[q];
        detail::require(X.cols() == B.rows() && X.rows() == holdout.Y[q].size(), ErrorCode::DimensionMismatch,
                        "holdout task " + std::to_string(q) + " has inconsistent dimensions");
        err += (holdout.Y[q] - X * B.col(static_cast<Index>(q))).squaredNorm();
    }
    return err;
}

struct HoldoutReport
{
    double chosen_lambda = 0.0;
    std::size_t chosen_index = 0;
    std::vector<double> errors;
};

/// Minimizes total holdout squared error over the path; ties go to the larger lambda.
inline HoldoutReport holdout_select(const std::vector<FitResult>& path, const std::vector<double>& grid,
                                    const HoldoutData& holdout)
{
    detail::require(!grid.empty(), ErrorCode::EmptyGrid, "lambda grid is empty");
    detail::require(path.size() == grid.size(), ErrorCode::DimensionMismatch, "path and grid lengths differ");
    HoldoutReport rep;
    rep.errors.reserve(path.size());
    for (const auto& r : path) rep.errors.push_back(holdout_error(r.B_hat, holdout));
    std::size_t best = 0;
    for (std::size_t k = 1; k < rep.errors.size(); ++k) {
        if (rep.errors[k] <= rep.errors[best]) best = k;
    }
    rep.chosen_index = best;
    rep.chosen_lambda = grid[best];
    return rep;
}

} // namespace proxymtl
