#pragma once
#include <proxymtl/error.hpp>
#include <Eigen/Dense>
#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace proxymtl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// p x Q coefficient matrix; column q holds the coefficients of task q.
using CoefMatrix = Eigen::MatrixXd;

/**
 * Summary statistics for one task.
 *
 * s      = X^T Y / n_discovery   (score vector from the discovery data)
 * sigma  = Xt^T Xt / n_proxy     (covariance from the proxy/reference data)
 *
 * overlap_count is the number of proxy rows that are also discovery rows.
 * It is diagnostic only and never read by the estimator.
 */
struct TaskSummary
{
    Vector s;
    Matrix sigma;
    long n_discovery = 1;
    long n_proxy = 1;
    std::optional<long> overlap_count;

    Index dim() const { return s.size(); }
};

/// Q tasks sharing feature dimension p.
struct TaskBundle
{
    Index p = 0;
    std::vector<TaskSummary> tasks;

    Index num_tasks() const { return static_cast<Index>(tasks.size()); }
};

enum class Penalty {
    GroupSparse, // l_{2,1}, dual l_{2,inf}
    LowRank,     // nuclear, dual operator norm
};

constexpr std::string_view to_string(Penalty k)
{
    return k == Penalty::GroupSparse ? "sparse" : "lowrank";
}

inline Penalty parse_penalty(std::string_view s)
{
    if (s == "sparse" || s == "group-sparse" || s == "groupsparse") return Penalty::GroupSparse;
    if (s == "lowrank" || s == "low-rank" || s == "nuclear") return Penalty::LowRank;
    throw Error(ErrorCode::InvalidArgument, "unknown penalty '" + std::string(s) + "'");
}

struct FitConfig
{
    /// Gradient step. std::nullopt means Auto (1 / lipschitz_bound).
    std::optional<double> step_size;
    long max_iters = 50000;
    /// Relative objective-change threshold. The fixed-point gap must also drop below 10 * tol.
    double tol = 1e-8;

    void check() const
    {
        detail::require(max_iters >= 1, ErrorCode::InvalidArgument, "max_iters must be >= 1");
        detail::require(tol > 0.0, ErrorCode::InvalidArgument, "tol must be > 0");
        if (step_size) {
            detail::require(*step_size > 0.0, ErrorCode::InvalidArgument, "step_size must be > 0");
        }
    }
};

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m)
{
    return m.allFinite();
}

/// Summary statistics from raw per-task data.
inline TaskSummary summary_from_data(const Matrix& X, const Vector& Y, const Matrix& X_tilde)
{
    detail::require(X.rows() == Y.size(), ErrorCode::DimensionMismatch,
                    "X has " + std::to_string(X.rows()) + " rows but Y has " + std::to_string(Y.size()));
    detail::require(X.cols() == X_tilde.cols(), ErrorCode::DimensionMismatch,
                    "discovery and proxy designs have different column counts");
    detail::require(X.rows() > 0 && X_tilde.rows() > 0, ErrorCode::InvalidArgument, "empty design matrix");
    TaskSummary t;
    t.n_discovery = static_cast<long>(X.rows());
    t.n_proxy = static_cast<long>(X_tilde.rows());
    t.s = X.transpose() * Y / static_cast<double>(X.rows());
    t.sigma.noalias() = X_tilde.transpose() * X_tilde;
    t.sigma /= static_cast<double>(X_tilde.rows());
    return t;
}

inline void check_shape(const TaskBundle& bundle, const Matrix& B)
{
    detail::require(B.rows() == bundle.p && B.cols() == bundle.num_tasks(), ErrorCode::DimensionMismatch,
                    "coefficient matrix is " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) +
                        ", bundle expects " + std::to_string(bundle.p) + "x" +
                        std::to_string(bundle.num_tasks()));
}

/**
 * Checks dimensions and finiteness, then symmetrizes each covariance and
 * clamps its negative eigenvalues to zero.
 *
 * An eigenvalue below -1e-8 (relative to max(1, largest |eigenvalue|)) is
 * rejected as NotPSD. Eigenvalues in (-1e-8, -1e-12] are clamped; the
 * reconstruction is re-symmetrized so the output is exactly symmetric.
 * Anything above -1e-12 is treated as roundoff and left alone, which keeps
 * the function idempotent.
 */
inline TaskBundle validate_bundle(TaskBundle bundle)
{
    detail::require(!bundle.tasks.empty(), ErrorCode::InvalidArgument, "bundle has no tasks");
    if (bundle.p == 0) bundle.p = bundle.tasks.front().s.size();
    const Index p = bundle.p;
    detail::require(p > 0, ErrorCode::DimensionMismatch, "feature dimension must be positive");

    for (std::size_t q = 0; q < bundle.tasks.size(); ++q) {
        auto& t = bundle.tasks[q];
        const std::string tag = "task " + std::to_string(q) + ": ";
        detail::require(t.s.size() == p, ErrorCode::DimensionMismatch,
                        tag + "score vector has length " + std::to_string(t.s.size()) + ", expected " +
                            std::to_string(p));
        detail::require(t.sigma.rows() == p && t.sigma.cols() == p, ErrorCode::DimensionMismatch,
                        tag + "covariance is " + std::to_string(t.sigma.rows()) + "x" +
                            std::to_string(t.sigma.cols()) + ", expected " + std::to_string(p) + "x" +
                            std::to_string(p));
        detail::require(t.s.allFinite() && t.sigma.allFinite(), ErrorCode::NonFinite,
                        tag + "non-finite entries");
        detail::require(t.n_discovery > 0 && t.n_proxy > 0, ErrorCode::InvalidArgument,
                        tag + "sample sizes must be positive");
        if (t.overlap_count) {
            detail::require(*t.overlap_count >= 0 && *t.overlap_count <= std::min(t.n_discovery, t.n_proxy),
                            ErrorCode::InvalidArgument, tag + "overlap_count exceeds min(n_discovery, n_proxy)");
        }

        Matrix sym = (t.sigma + t.sigma.transpose()) * 0.5;
        Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
        detail::require(es.info() == Eigen::Success, ErrorCode::NotPSD, tag + "eigendecomposition failed");
        const Vector& ev = es.eigenvalues();
        const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
        const double lo = ev.minCoeff();
        detail::require(lo >= -1e-8 * scale, ErrorCode::NotPSD,
                        tag + "covariance has eigenvalue " + std::to_string(lo));
        if (lo < -1e-12 * scale) {
            Matrix clamped = es.eigenvectors() * ev.cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
            sym = (clamped + clamped.transpose()) * 0.5;
        }
        t.sigma = std::move(sym);
    }
    return bundle;
}

} // namespace proxymtl
