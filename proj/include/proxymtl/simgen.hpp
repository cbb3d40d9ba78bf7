#pragma once
#include <proxymtl/core.hpp>
#include <proxymtl/prox.hpp>
#include <json.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace proxymtl {
namespace sim {

using Rng = std::mt19937_64;

/// Named substreams for reproducible, order-independent simulation.
enum class Stream : std::uint64_t {
    Coef = 1,
    Train = 2,
    Test = 3,
    Holdout = 4,
    Shift = 5,
    Oracle = 6,
};

/**
 * Derives independent generators from a single 64-bit seed. A stream is
 * addressed by a key path such as {rep, task, Stream::Train}; the same path
 * always yields the same generator regardless of which other streams were
 * drawn first.
 */
class SeedTree
{
public:
    explicit SeedTree(std::uint64_t seed) : seed_(seed) {}

    Rng stream(std::initializer_list<std::uint64_t> path) const
    {
        std::vector<std::uint32_t> words;
        words.reserve(2 * (path.size() + 1) + 1);
        auto push = [&](std::uint64_t v) {
            words.push_back(static_cast<std::uint32_t>(v));
            words.push_back(static_cast<std::uint32_t>(v >> 32));
        };
        push(seed_);
        words.push_back(static_cast<std::uint32_t>(path.size()));
        for (auto v : path) push(v);
        std::seed_seq seq(words.begin(), words.end());
        return Rng(seq);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

inline std::uint64_t key(Stream s) { return static_cast<std::uint64_t>(s); }

struct CovSpec
{
    enum class Kind { Identity, AR1, ShiftedFrobenius };
    Kind kind = Kind::Identity;
    /// AR1: correlation phi. ShiftedFrobenius: target ||sigma1 - sigma2||_F.
    double param = 0.0;

    bool operator==(const CovSpec&) const = default;
};

struct CoefKind
{
    enum class Kind { SparseRows, LowRank };
    Kind kind = Kind::SparseRows;
    /// SparseRows: number of nonzero rows. LowRank: rank.
    int param = 10;
};

struct ScenarioConfig
{
    Index p = 100;
    Index Q = 8;
    long n = 100;
    long n_tilde = 100;
    double rho = 0.0;
    CoefKind coef;
    CovSpec sigma1;
    CovSpec sigma2;
    double noise_sd = 1.0;
    std::uint64_t seed = 1;

    bool shifted() const { return !(sigma1 == sigma2); }

    void check() const
    {
        using detail::require;
        require(p >= 1 && Q >= 1, ErrorCode::InvalidArgument, "p and Q must be >= 1");
        require(n >= 1 && n_tilde >= 1, ErrorCode::InvalidArgument, "sample sizes must be >= 1");
        require(rho >= 0.0 && rho <= 1.0, ErrorCode::InvalidArgument, "rho must lie in [0, 1]");
        require(noise_sd >= 0.0, ErrorCode::InvalidArgument, "noise_sd must be >= 0");
        require(sigma1.kind != CovSpec::Kind::ShiftedFrobenius, ErrorCode::InvalidArgument,
                "sigma1 cannot be a shifted covariance");
        if (coef.kind == CoefKind::Kind::SparseRows) {
            require(coef.param >= 0 && coef.param <= p, ErrorCode::InvalidArgument, "sparse support exceeds p");
        } else {
            require(coef.param >= 1 && coef.param <= std::min(p, Q), ErrorCode::InvalidArgument,
                    "rank must lie in [1, min(p, Q)]");
        }
        require(!(rho > 0.0 && shifted()), ErrorCode::OverlapWithShift,
                "overlapping rows cannot follow two different covariances");
        require(static_cast<long>(std::floor(rho * static_cast<double>(n_tilde))) <= n, ErrorCode::InvalidArgument,
                "overlap count floor(rho * n_tilde) exceeds n");
    }
};

// ---- JSON ---------------------------------------------------------------

inline nlohmann::json to_json(const CovSpec& c)
{
    switch (c.kind) {
        case CovSpec::Kind::Identity: return {{"kind", "identity"}};
        case CovSpec::Kind::AR1: return {{"kind", "ar1"}, {"phi", c.param}};
        case CovSpec::Kind::ShiftedFrobenius: return {{"kind", "shifted"}, {"frobenius", c.param}};
    }
    return {};
}

inline CovSpec cov_spec_from_json(const nlohmann::json& j)
{
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "identity") return {CovSpec::Kind::Identity, 0.0};
    if (kind == "ar1") return {CovSpec::Kind::AR1, j.at("phi").get<double>()};
    if (kind == "shifted") return {CovSpec::Kind::ShiftedFrobenius, j.at("frobenius").get<double>()};
    throw Error(ErrorCode::ParseError, "unknown covariance kind '" + kind + "'");
}

inline nlohmann::json to_json(const ScenarioConfig& s)
{
    nlohmann::json j;
    j["p"] = s.p;
    j["Q"] = s.Q;
    j["n"] = s.n;
    j["n_tilde"] = s.n_tilde;
    j["rho"] = s.rho;
    j["coef"] = s.coef.kind == CoefKind::Kind::SparseRows
                    ? nlohmann::json{{"kind", "sparse_rows"}, {"s", s.coef.param}}
                    : nlohmann::json{{"kind", "low_rank"}, {"r", s.coef.param}};
    j["sigma1"] = to_json(s.sigma1);
    j["sigma2"] = to_json(s.sigma2);
    j["noise_sd"] = s.noise_sd;
    j["seed"] = s.seed;
    return j;
}

/// Missing keys keep the values already in `base`.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base = {})
{
    try {
        if (j.contains("p")) base.p = j["p"].get<Index>();
        if (j.contains("Q")) base.Q = j["Q"].get<Index>();
        if (j.contains("n")) base.n = j["n"].get<long>();
        if (j.contains("n_tilde")) base.n_tilde = j["n_tilde"].get<long>();
        if (j.contains("tau")) base.n_tilde = std::lround(j["tau"].get<double>() * static_cast<double>(base.n));
        if (j.contains("rho")) base.rho = j["rho"].get<double>();
        if (j.contains("coef")) {
            const auto& c = j["coef"];
            const auto kind = c.at("kind").get<std::string>();
            if (kind == "sparse_rows") {
                base.coef = {CoefKind::Kind::SparseRows, c.at("s").get<int>()};
            } else if (kind == "low_rank") {
                base.coef = {CoefKind::Kind::LowRank, c.at("r").get<int>()};
            } else {
                throw Error(ErrorCode::ParseError, "unknown coefficient kind '" + kind + "'");
            }
        }
        if (j.contains("sigma1")) base.sigma1 = cov_spec_from_json(j["sigma1"]);
        if (j.contains("sigma2")) base.sigma2 = cov_spec_from_json(j["sigma2"]);
        if (j.contains("noise_sd")) base.noise_sd = j["noise_sd"].get<double>();
        if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("scenario config: ") + e.what());
    }
    return base;
}

// ---- Sampling -----------------------------------------------------------

inline Matrix standard_normal(Index rows, Index cols, Rng& rng)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix Z(rows, cols);
    // Row-major fill so a longer draw extends a shorter one row by row.
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) Z(i, j) = nd(rng);
    return Z;
}

/// B* with either s shared nonzero rows or rank r = U V^T / sqrt(r).
inline CoefMatrix gen_coef(Index p, Index Q, const CoefKind& kind, Rng& rng)
{
    if (kind.kind == CoefKind::Kind::SparseRows) {
        detail::require(kind.param >= 0 && kind.param <= p, ErrorCode::InvalidArgument,
                        "sparse support must lie in [0, p]");
        std::vector<Index> rows(static_cast<std::size_t>(p));
        std::iota(rows.begin(), rows.end(), Index{0});
        std::vector<Index> support;
        std::sample(rows.begin(), rows.end(), std::back_inserter(support), kind.param, rng);
        CoefMatrix B = CoefMatrix::Zero(p, Q);
        std::normal_distribution<double> nd(0.0, 1.0);
        for (Index i : support)
            for (Index q = 0; q < Q; ++q) B(i, q) = nd(rng);
        return B;
    }
    detail::require(kind.param >= 1 && kind.param <= std::min(p, Q), ErrorCode::InvalidArgument,
                    "rank must lie in [1, min(p, Q)]");
    const Matrix U = standard_normal(p, kind.param, rng);
    const Matrix V = standard_normal(Q, kind.param, rng);
    return U * V.transpose() / std::sqrt(static_cast<double>(kind.param));
}

inline Matrix population_cov(const CovSpec& spec, Index p)
{
    switch (spec.kind) {
        case CovSpec::Kind::Identity: return Matrix::Identity(p, p);
        case CovSpec::Kind::AR1: {
            detail::require(std::abs(spec.param) < 1.0, ErrorCode::InvalidArgument, "AR1 phi must satisfy |phi| < 1");
            Matrix S(p, p);
            for (Index i = 0; i < p; ++i)
                for (Index j = 0; j < p; ++j) S(i, j) = std::pow(spec.param, static_cast<double>(std::abs(i - j)));
            return S;
        }
        case CovSpec::Kind::ShiftedFrobenius: break;
    }
    throw Error(ErrorCode::InvalidArgument, "a shifted covariance needs a base covariance and an rng");
}

namespace detail {

using proxymtl::detail::require;

/// Projection onto the PSD cone; output is exactly symmetric.
inline Matrix clamp_psd(const Matrix& S)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    require(es.info() == Eigen::Success, ErrorCode::NotPSD, "eigendecomposition failed");
    Matrix out = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
    return (out + out.transpose()) * 0.5;
}

} // namespace detail

/**
 * Symmetric PSD sigma2 with ||sigma1 - sigma2||_F within 1% of target.
 *
 * Draws a random symmetric direction E (unit Frobenius norm), then searches
 * the scale a so that clamp_psd(sigma1 + a E) sits at the target distance.
 * Clamping only shrinks the distance, so a is increased multiplicatively.
 */
inline Matrix make_shifted_cov(const Matrix& sigma1, double target_frob, Rng& rng)
{
    detail::require(target_frob >= 0.0 && std::isfinite(target_frob), ErrorCode::InvalidArgument,
                    "target Frobenius distance must be finite and nonnegative");
    if (target_frob == 0.0) return sigma1;
    const Index p = sigma1.rows();
    const Matrix A = standard_normal(p, p, rng);
    Matrix E = A + A.transpose();
    E /= E.norm();

    double scale = target_frob;
    Matrix best = sigma1;
    double best_err = 1.0;
    for (int it = 0; it < 50; ++it) {
        Matrix cand = detail::clamp_psd(sigma1 + scale * E);
        const double dist = (sigma1 - cand).norm();
        if (!(dist > 1e-12 * target_frob)) break;
        const double rel = std::abs(dist / target_frob - 1.0);
        if (rel < best_err) {
            best_err = rel;
            best = std::move(cand);
        }
        if (rel <= 1e-4) break;
        scale *= target_frob / dist;
        if (!std::isfinite(scale)) break;
    }
    detail::require(best_err <= 0.01, ErrorCode::TargetUnreachable,
                    "could not reach Frobenius distance " + std::to_string(target_frob) +
                        " while staying positive semidefinite");
    return best;
}

/// Samples rows from N(0, sigma) as Z * root^T with root root^T = sigma.
class GaussianDesign
{
public:
    explicit GaussianDesign(const Matrix& sigma) : sigma_(sigma)
    {
        identity_ = sigma.isIdentity(0.0);
        if (!identity_) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
            proxymtl::detail::require(es.info() == Eigen::Success, ErrorCode::NotPSD, "eigendecomposition failed");
            root_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                    es.eigenvectors().transpose();
        }
    }

    Matrix sample(Index rows, Rng& rng) const
    {
        Matrix Z = standard_normal(rows, sigma_.rows(), rng);
        if (identity_) return Z;
        return Z * root_.transpose();
    }

    const Matrix& sigma() const { return sigma_; }

private:
    Matrix sigma_;
    Matrix root_;
    bool identity_ = true;
};

/// Discovery and proxy population covariances for one task.
struct Population
{
    GaussianDesign discovery;
    GaussianDesign proxy;
};

inline Population make_population(const ScenarioConfig& sc, Rng& shift_rng)
{
    Matrix s1 = population_cov(sc.sigma1, sc.p);
    Matrix s2 = sc.sigma2.kind == CovSpec::Kind::ShiftedFrobenius ? make_shifted_cov(s1, sc.sigma2.param, shift_rng)
                                                                   : population_cov(sc.sigma2, sc.p);
    return Population{GaussianDesign(s1), GaussianDesign(s2)};
}

struct TaskData
{
    Matrix X;
    Vector Y;
    Matrix X_tilde;
    long overlap = 0;
};

/**
 * Draws (X, Y, X_tilde) for one task. The first floor(rho * n_tilde) rows of
 * X_tilde are copies of the first rows of X; the rest are fresh draws from
 * the proxy population. Draw order is X, noise, fresh proxy rows, so a
 * larger n_tilde extends a smaller one.
 */
inline TaskData gen_task_data(const ScenarioConfig& sc, const Population& pop, const Vector& beta, Rng& rng)
{
    sc.check();
    detail::require(beta.size() == sc.p, ErrorCode::DimensionMismatch, "beta length differs from p");
    const long k = static_cast<long>(std::floor(sc.rho * static_cast<double>(sc.n_tilde)));
    TaskData d;
    d.X = pop.discovery.sample(sc.n, rng);
    std::normal_distribution<double> nd(0.0, 1.0);
    Vector eps(sc.n);
    for (Index i = 0; i < sc.n; ++i) eps(i) = nd(rng);
    d.Y = d.X * beta + sc.noise_sd * eps;
    d.X_tilde.resize(sc.n_tilde, sc.p);
    if (k > 0) d.X_tilde.topRows(k) = d.X.topRows(k);
    if (sc.n_tilde > k) d.X_tilde.bottomRows(sc.n_tilde - k) = pop.proxy.sample(sc.n_tilde - k, rng);
    d.overlap = k;
    return d;
}

/// Number of proxy rows that also occur as discovery rows (exact match).
inline long count_shared_rows(const Matrix& X, const Matrix& X_tilde)
{
    auto row_hash = [](const Matrix& M, Index i) {
        std::size_t h = 0;
        for (Index j = 0; j < M.cols(); ++j) {
            h ^= std::hash<double>{}(M(i, j)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    };
    std::unordered_multimap<std::size_t, Index> index;
    for (Index i = 0; i < X.rows(); ++i) index.emplace(row_hash(X, i), i);
    long shared = 0;
    for (Index i = 0; i < X_tilde.rows(); ++i) {
        auto [lo, hi] = index.equal_range(row_hash(X_tilde, i));
        for (auto it = lo; it != hi; ++it) {
            if (X.row(it->second) == X_tilde.row(i)) {
                ++shared;
                break;
            }
        }
    }
    return std::min<long>(shared, static_cast<long>(std::min(X.rows(), X_tilde.rows())));
}

/// s = X^T Y / n, sigma = Xt^T Xt / n_tilde, overlap counted by row identity.
inline TaskSummary summarize(const Matrix& X, const Vector& Y, const Matrix& X_tilde)
{
    TaskSummary t = summary_from_data(X, Y, X_tilde);
    t.overlap_count = count_shared_rows(X, X_tilde);
    return t;
}

/// 1 + ||beta||^2 (n / n_tilde + 1 - 2 rho).
inline double gamma_factor(double n, double n_tilde, double rho, const Vector& beta)
{
    detail::require(n > 0 && n_tilde > 0, ErrorCode::InvalidArgument, "sample sizes must be positive");
    detail::require(rho >= 0.0 && rho <= 1.0, ErrorCode::InvalidArgument, "rho must lie in [0, 1]");
    return 1.0 + beta.squaredNorm() * (n / n_tilde + 1.0 - 2.0 * rho);
}

/// Column q = (sigma1_q - sigma2_q) beta_q.
inline Matrix xi_matrix(const std::vector<Matrix>& sigma1, const std::vector<Matrix>& sigma2, const CoefMatrix& B)
{
    detail::require(static_cast<Index>(sigma1.size()) == B.cols() && sigma2.size() == sigma1.size(),
                    ErrorCode::DimensionMismatch, "covariance lists must have one entry per task");
    Matrix xi(B.rows(), B.cols());
    for (Index q = 0; q < B.cols(); ++q) {
        const auto& a = sigma1[static_cast<std::size_t>(q)];
        const auto& b = sigma2[static_cast<std::size_t>(q)];
        detail::require(a.rows() == B.rows() && a.cols() == B.rows() && b.rows() == B.rows() && b.cols() == B.rows(),
                        ErrorCode::DimensionMismatch, "covariance dimension differs from p");
        xi.col(q).noalias() = (a - b) * B.col(q);
    }
    return xi;
}

struct MseReport
{
    std::vector<double> per_task;
    double mean = 0.0;
};

/// Per task ||Y - X B e_q||^2 / n_test, and the average over tasks.
inline MseReport prediction_mse(const CoefMatrix& B, const std::vector<Matrix>& X_test,
                                const std::vector<Vector>& Y_test)
{
    detail::require(static_cast<Index>(X_test.size()) == B.cols() && Y_test.size() == X_test.size(),
                    ErrorCode::DimensionMismatch, "test data must have one entry per task");
    MseReport r;
    for (std::size_t q = 0; q < X_test.size(); ++q) {
        detail::require(X_test[q].cols() == B.rows() && X_test[q].rows() == Y_test[q].size() && X_test[q].rows() > 0,
                        ErrorCode::DimensionMismatch, "test task " + std::to_string(q) + " has bad dimensions");
        const double se = (Y_test[q] - X_test[q] * B.col(static_cast<Index>(q))).squaredNorm();
        r.per_task.push_back(se / static_cast<double>(X_test[q].rows()));
    }
    r.mean = std::accumulate(r.per_task.begin(), r.per_task.end(), 0.0) / static_cast<double>(r.per_task.size());
    return r;
}

} // namespace sim
} // namespace proxymtl
