#pragma once
#include <proxymtl/core.hpp>
#include <proxymtl/objective.hpp>
#include <proxymtl/prox.hpp>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace proxymtl {

struct FitResult
{
    CoefMatrix B_hat;
    /// Penalized objective at the initial point, then after every iteration.
    std::vector<double> objective_trace;
    long iterations = 0;
    bool converged = false;
    double lambda = 0.0;
    double step_size = 0.0;

    double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

/// Largest eigenvalue over the task covariances; the loss gradient is L-Lipschitz in Frobenius norm.
inline double lipschitz_bound(const TaskBundle& bundle)
{
    double L = 0.0;
    for (const auto& t : bundle.tasks) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(t.sigma, Eigen::EigenvaluesOnly);
        detail::require(es.info() == Eigen::Success, ErrorCode::ConvergenceFailure,
                        "lipschitz_bound: eigendecomposition failed");
        L = std::max(L, es.eigenvalues().maxCoeff());
    }
    return L;
}

inline double penalized_objective(const TaskBundle& bundle, const CoefMatrix& B, Penalty kind, double lambda)
{
    return loss(bundle, B) + lambda * penalty_norm(B, kind);
}

/// ||B - prox_{eta*lambda}(B - eta * grad L(B))||_F; zero exactly at minimizers.
inline double fixed_point_gap(const TaskBundle& bundle, const CoefMatrix& B, Penalty kind, double lambda,
                              double eta)
{
    return (B - prox(B - eta * gradient(bundle, B), eta * lambda, kind)).norm();
}

inline double resolve_step(const TaskBundle& bundle, const FitConfig& config)
{
    if (config.step_size) return *config.step_size;
    const double L = lipschitz_bound(bundle);
    // sigma == 0 for every task: any step is safe.
    return L > 0.0 ? 1.0 / L : 1.0;
}

namespace detail {

inline FitResult fit_with_step(const TaskBundle& bundle, Penalty kind, double lambda, const FitConfig& config,
                               double eta, const std::optional<CoefMatrix>& init)
{
    FitResult r;
    r.lambda = lambda;
    r.step_size = eta;
    CoefMatrix B = init ? *init : CoefMatrix::Zero(bundle.p, bundle.num_tasks());
    check_shape(bundle, B);
    require(B.allFinite(), ErrorCode::NonFinite, "initial coefficients are not finite");

    Matrix SB = covariance_times(bundle, B);
    double obj = loss_from_product(bundle, B, SB) + lambda * penalty_norm(B, kind);
    r.objective_trace.push_back(obj);

    const double gap_tol = 10.0 * config.tol;
    for (long it = 1; it <= config.max_iters; ++it) {
        const CoefMatrix forward = B - eta * gradient_from_product(bundle, SB);
        double pen = 0.0;
        CoefMatrix next;
        if (kind == Penalty::LowRank) {
            // The shrunk singular values give the nuclear norm without a second SVD.
            next = svt_with_norm(forward, eta * lambda, &pen);
        } else {
            next = group_soft_threshold(forward, eta * lambda);
            pen = row_norm_sum(next);
        }
        const double step = (next - B).norm();
        B = std::move(next);
        SB = covariance_times(bundle, B);
        const double prev = obj;
        obj = loss_from_product(bundle, B, SB) + lambda * pen;
        r.objective_trace.push_back(obj);
        r.iterations = it;
        if (!std::isfinite(obj) || !B.allFinite()) {
            throw Error(ErrorCode::NonFinite, "objective diverged at iteration " + std::to_string(it) +
                                                  "; step size " + std::to_string(eta) + " is likely too large");
        }
        // step is the fixed-point gap at the previous iterate; the gap is
        // nonincreasing along the iterations, so it also bounds the gap at B.
        if (std::abs(obj - prev) <= config.tol * (1.0 + std::abs(prev)) && step <= gap_tol) {
            r.converged = true;
            break;
        }
    }
    r.B_hat = std::move(B);
    return r;
}

} // namespace detail

/**
 * Proximal gradient descent on loss(B) + lambda * penalty_norm(B).
 *
 * Iterates B <- prox_{eta*lambda}(B - eta * gradient(B)) from init (or zero)
 * until the relative objective change is at most tol and the fixed-point
 * gap is at most 10 * tol, or max_iters is reached. Throws NonFinite if the
 * objective diverges.
 */
inline FitResult fit(const TaskBundle& bundle, Penalty kind, double lambda, const FitConfig& config = {},
                     const std::optional<CoefMatrix>& init = std::nullopt)
{
    config.check();
    detail::require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::InvalidArgument,
                    "lambda must be finite and nonnegative");
    return detail::fit_with_step(bundle, kind, lambda, config, resolve_step(bundle, config), init);
}

/**
 * Fits every lambda in an ascending grid, solving from the largest lambda
 * down and warm-starting each fit from its right neighbour. Results are
 * returned in grid order.
 */
inline std::vector<FitResult> fit_path(const TaskBundle& bundle, Penalty kind, const std::vector<double>& grid,
                                       const FitConfig& config = {})
{
    config.check();
    detail::require(!grid.empty(), ErrorCode::EmptyGrid, "lambda grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        detail::require(std::isfinite(grid[k]) && grid[k] >= 0.0, ErrorCode::InvalidArgument,
                        "lambda grid entries must be finite and nonnegative");
        if (k) {
            detail::require(grid[k] > grid[k - 1], ErrorCode::InvalidArgument,
                            "lambda grid must be strictly increasing");
        }
    }
    const double eta = resolve_step(bundle, config);
    std::vector<FitResult> out(grid.size());
    std::optional<CoefMatrix> warm;
    for (std::size_t k = grid.size(); k-- > 0;) {
        out[k] = detail::fit_with_step(bundle, kind, grid[k], config, eta, warm);
        warm = out[k].B_hat;
    }
    return out;
}

/// Grid suffix whose fits all converged, with the matching results.
struct ConvergedPath
{
    std::vector<double> grid;
    std::vector<FitResult> path;
    /// Index of grid.front() in the requested grid; smaller lambdas were not usable.
    std::size_t offset = 0;
};

/**
 * fit_path that stops descending at the first fit that fails to converge.
 *
 * When a proxy covariance is singular the objective is unbounded below for
 * small lambda and the iterates run off along its null space; such fits
 * never converge, and neither would any smaller lambda. The largest lambda
 * is always kept.
 */
inline ConvergedPath fit_path_converged(const TaskBundle& bundle, Penalty kind, const std::vector<double>& grid,
                                        const FitConfig& config = {})
{
    config.check();
    detail::require(!grid.empty(), ErrorCode::EmptyGrid, "lambda grid is empty");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        detail::require(grid[k] > grid[k - 1], ErrorCode::InvalidArgument, "lambda grid must be strictly increasing");
    }
    detail::require(grid.front() >= 0.0, ErrorCode::InvalidArgument, "lambda grid entries must be nonnegative");
    const double eta = resolve_step(bundle, config);
    std::vector<FitResult> rev;
    std::optional<CoefMatrix> warm;
    std::size_t k = grid.size();
    while (k-- > 0) {
        FitResult r = detail::fit_with_step(bundle, kind, grid[k], config, eta, warm);
        if (!r.converged && !rev.empty()) {
            ++k;
            break;
        }
        warm = r.B_hat;
        rev.push_back(std::move(r));
        if (k == 0) break;
    }
    ConvergedPath out;
    out.offset = grid.size() - rev.size();
    out.grid.assign(grid.begin() + static_cast<std::ptrdiff_t>(out.offset), grid.end());
    out.path.assign(std::make_move_iterator(rev.rbegin()), std::make_move_iterator(rev.rend()));
    return out;
}

/// Bundle whose score vectors and covariances both come from the discovery data.
inline TaskBundle individual_bundle(const std::vector<Matrix>& X_list, const std::vector<Vector>& Y_list)
{
    detail::require(X_list.size() == Y_list.size(), ErrorCode::DimensionMismatch,
                    "X and Y lists have different task counts");
    detail::require(!X_list.empty(), ErrorCode::InvalidArgument, "no tasks");
    TaskBundle b;
    b.p = X_list.front().cols();
    for (std::size_t q = 0; q < X_list.size(); ++q) {
        detail::require(X_list[q].cols() == b.p, ErrorCode::DimensionMismatch,
                        "task " + std::to_string(q) + " has a different feature dimension");
        TaskSummary t = summary_from_data(X_list[q], Y_list[q], X_list[q]);
        t.overlap_count = t.n_discovery;
        b.tasks.push_back(std::move(t));
    }
    return validate_bundle(std::move(b));
}

/**
 * Regularized multi-task least squares on individual-level data,
 *   sum_q ||Y_q - X_q B e_q||^2 / (2 n_q) + lambda * penalty(B).
 * Differs from the summary loss on individual_bundle() by a constant, so
 * this delegates to fit().
 */
inline FitResult fit_individual(const std::vector<Matrix>& X_list, const std::vector<Vector>& Y_list, Penalty kind,
                                double lambda, const FitConfig& config = {})
{
    return fit(individual_bundle(X_list, Y_list), kind, lambda, config);
}

} // namespace proxymtl
