#pragma once
// Simulation scenarios: tau/rho/misspecification sweeps, hold-out vs
// adaptive tuning, and multi-task vs single-task baselines. Every scenario
// produces long-format rows (rep, sweep value, estimator, task, mse).
#include <proxymtl/core.hpp>
#include <proxymtl/io.hpp>
#include <proxymtl/simgen.hpp>
#include <proxymtl/solver.hpp>
#include <proxymtl/tuning.hpp>
#include <json.hpp>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace proxymtl {
namespace experiment {

enum class Scenario { TauSweep, RhoSweep, MisspecSweep, TuningCompare, SingleVsMulti };

inline std::string to_string(Scenario s)
{
    switch (s) {
        case Scenario::TauSweep: return "tau-sweep";
        case Scenario::RhoSweep: return "rho-sweep";
        case Scenario::MisspecSweep: return "misspec-sweep";
        case Scenario::TuningCompare: return "tuning-compare";
        case Scenario::SingleVsMulti: return "single-vs-multi";
    }
    return "unknown";
}

inline Scenario parse_scenario(const std::string& s)
{
    for (auto sc : {Scenario::TauSweep, Scenario::RhoSweep, Scenario::MisspecSweep, Scenario::TuningCompare,
                    Scenario::SingleVsMulti}) {
        if (to_string(sc) == s) return sc;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + s + "'");
}

enum class Tuning { Lepski, Oracle };

/// Fully resolved settings for one scenario run.
struct Settings
{
    Scenario scenario = Scenario::TauSweep;
    Penalty penalty = Penalty::GroupSparse;
    int reps = 20;
    std::uint64_t seed = 1;
    sim::ScenarioConfig base;
    std::vector<double> sweep;
    int grid_size = 20;
    double grid_min_ratio = 0.01;
    double cbar = 1.0;
    long n_test = 500;
    /// Lambda selection for the comparison sweeps; tuning-compare always pits Lepski against hold-out.
    Tuning tuning = Tuning::Oracle;
    FitConfig fit;
    int threads = 0;
};

/**
 * Scenario defaults, then overrides from `config` (keys: any ScenarioConfig
 * field, "sweep", "grid_size", "grid_min_ratio", "cbar", "n_test",
 * "tuning" = "lepski" | "oracle", "tol", "max_iters", "threads").
 */
inline Settings make_settings(Scenario scenario, Penalty penalty, int reps, std::uint64_t seed,
                              const nlohmann::json& config = nlohmann::json::object())
{
    Settings s;
    s.scenario = scenario;
    s.penalty = penalty;
    s.reps = reps;
    s.seed = seed;
    s.fit.tol = 1e-7;
    s.fit.max_iters = 10000;

    auto& b = s.base;
    b.p = 100;
    b.Q = 8;
    b.n = 100;
    b.n_tilde = 100;
    b.rho = 0.0;
    b.noise_sd = 1.0;
    b.coef = penalty == Penalty::GroupSparse ? sim::CoefKind{sim::CoefKind::Kind::SparseRows, 10}
                                             : sim::CoefKind{sim::CoefKind::Kind::LowRank, 2};
    switch (scenario) {
        case Scenario::TauSweep: s.sweep = {0.5, 1, 2, 5, 10}; break;
        case Scenario::RhoSweep: s.sweep = {0, 0.25, 0.5, 0.75, 1}; break;
        case Scenario::MisspecSweep:
            b.n_tilde = 150;
            b.sigma2 = {sim::CovSpec::Kind::ShiftedFrobenius, 10.0};
            s.sweep = {10, 20, 50, 100};
            break;
        case Scenario::TuningCompare:
            b.n_tilde = 150;
            s.sweep = {10, 25, 50, 75, 100};
            s.tuning = Tuning::Lepski;
            break;
        case Scenario::SingleVsMulti:
            b.n_tilde = 150;
            s.sweep = {2, 4, 6, 8, 10};
            break;
    }

    b = sim::scenario_from_json(config, b);
    b.seed = seed;
    try {
        if (config.contains("sweep")) s.sweep = config["sweep"].get<std::vector<double>>();
        if (config.contains("grid_size")) s.grid_size = config["grid_size"].get<int>();
        if (config.contains("grid_min_ratio")) s.grid_min_ratio = config["grid_min_ratio"].get<double>();
        if (config.contains("cbar")) s.cbar = config["cbar"].get<double>();
        if (config.contains("n_test")) s.n_test = config["n_test"].get<long>();
        if (config.contains("tol")) s.fit.tol = config["tol"].get<double>();
        if (config.contains("max_iters")) s.fit.max_iters = config["max_iters"].get<long>();
        if (config.contains("threads")) s.threads = config["threads"].get<int>();
        if (config.contains("tuning")) {
            const auto t = config["tuning"].get<std::string>();
            if (t == "lepski") {
                s.tuning = Tuning::Lepski;
            } else if (t == "oracle") {
                s.tuning = Tuning::Oracle;
            } else {
                throw Error(ErrorCode::InvalidArgument, "unknown tuning '" + t + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("experiment config: ") + e.what());
    }
    detail::require(reps >= 1, ErrorCode::InvalidArgument, "reps must be >= 1");
    detail::require(!s.sweep.empty(), ErrorCode::InvalidArgument, "sweep is empty");
    detail::require(s.n_test >= 1, ErrorCode::InvalidArgument, "n_test must be >= 1");
    s.fit.check();
    return s;
}

struct ResultRow
{
    int rep = 0;
    double sweep = 0.0;
    std::string estimator;
    int task = 0;
    double mse = 0.0;
};

namespace detail {

using proxymtl::detail::require;
using sim::key;
using sim::Stream;

/// Everything an estimator may look at for one (rep, sweep value).
struct Instance
{
    sim::ScenarioConfig sc;
    CoefMatrix B_star;
    Matrix sigma1; // discovery population covariance
    std::vector<sim::TaskData> train;
    std::vector<Matrix> X_test;
    std::vector<Vector> Y_test;
};

inline TaskBundle proxy_bundle(const std::vector<sim::TaskData>& train)
{
    TaskBundle b;
    b.p = train.front().X.cols();
    for (const auto& d : train) b.tasks.push_back(sim::summarize(d.X, d.Y, d.X_tilde));
    return validate_bundle(std::move(b));
}

inline TaskBundle individual_bundle_of(const std::vector<sim::TaskData>& train)
{
    std::vector<Matrix> X;
    std::vector<Vector> Y;
    for (const auto& d : train) {
        X.push_back(d.X);
        Y.push_back(d.Y);
    }
    return individual_bundle(X, Y);
}

/// Score vectors from the discovery data, covariance replaced by the population one.
inline TaskBundle true_cov_bundle(const std::vector<sim::TaskData>& train, const Matrix& sigma)
{
    TaskBundle b;
    b.p = sigma.rows();
    for (const auto& d : train) {
        TaskSummary t = summary_from_data(d.X, d.Y, d.X);
        t.sigma = sigma;
        t.n_proxy = t.n_discovery;
        t.overlap_count.reset();
        b.tasks.push_back(std::move(t));
    }
    return validate_bundle(std::move(b));
}

/// Expected excess prediction error sum_q (b_q - b*_q)^T sigma (b_q - b*_q).
inline double population_error(const CoefMatrix& B, const CoefMatrix& B_star, const Matrix& sigma)
{
    const Matrix D = B - B_star;
    return (D.transpose() * sigma * D).trace();
}

inline CoefMatrix select_and_fit(const TaskBundle& bundle, const Settings& s, const Instance& inst,
                                 const CoefMatrix& B_target)
{
    const auto full_grid = default_grid(bundle, s.penalty, s.grid_size, s.grid_min_ratio);
    const auto [grid, path, offset] = fit_path_converged(bundle, s.penalty, full_grid, s.fit);
    std::size_t idx = 0;
    if (s.tuning == Tuning::Lepski) {
        idx = lepski_select(bundle, path, grid, s.penalty, s.cbar).chosen_index;
    } else {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < path.size(); ++k) {
            const double e = population_error(path[k].B_hat, B_target, inst.sigma1);
            if (e <= best) {
                best = e;
                idx = k;
            }
        }
    }
    return path[idx].B_hat;
}

/// Single-task ridge (sigma + lambda I)^{-1} s, lambda picked by population error.
inline Vector ridge_oracle(const TaskSummary& t, const Vector& beta_star, const Matrix& sigma_pop, int grid_size)
{
    const Index p = t.s.size();
    const double scale = std::max(t.sigma.trace() / static_cast<double>(p), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(t.sigma);
    const Vector proj = es.eigenvectors().transpose() * t.s;
    Vector best_beta = Vector::Zero(p);
    double best = std::numeric_limits<double>::infinity();
    const int m = std::max(grid_size, 2);
    for (int k = 0; k < m; ++k) {
        const double lam = scale * std::pow(10.0, -3.0 + 6.0 * k / (m - 1));
        const Vector beta =
            es.eigenvectors() * (proj.array() / (es.eigenvalues().array().cwiseMax(0.0) + lam)).matrix();
        const Vector d = beta - beta_star;
        const double e = d.dot(sigma_pop * d);
        if (e <= best) {
            best = e;
            best_beta = beta;
        }
    }
    return best_beta;
}

inline TaskBundle single_task_bundle(const TaskBundle& b, std::size_t q)
{
    TaskBundle out;
    out.p = b.p;
    out.tasks.push_back(b.tasks[q]);
    return out;
}

/// One task whose statistics are sample-size weighted averages over all tasks.
inline TaskBundle pooled_bundle(const TaskBundle& b)
{
    TaskSummary pooled;
    pooled.s = Vector::Zero(b.p);
    pooled.sigma = Matrix::Zero(b.p, b.p);
    long n = 0, nt = 0;
    for (const auto& t : b.tasks) {
        pooled.s += static_cast<double>(t.n_discovery) * t.s;
        pooled.sigma += static_cast<double>(t.n_proxy) * t.sigma;
        n += t.n_discovery;
        nt += t.n_proxy;
    }
    pooled.s /= static_cast<double>(n);
    pooled.sigma /= static_cast<double>(nt);
    pooled.n_discovery = n;
    pooled.n_proxy = nt;
    TaskBundle out;
    out.p = b.p;
    out.tasks.push_back(std::move(pooled));
    return validate_bundle(std::move(out));
}

inline void emit(std::vector<ResultRow>& rows, int rep, double sweep, const std::string& est,
                 const sim::MseReport& m)
{
    for (std::size_t q = 0; q < m.per_task.size(); ++q) {
        rows.push_back({rep, sweep, est, static_cast<int>(q), m.per_task[q]});
    }
}

inline Instance make_instance(const Settings& s, const sim::ScenarioConfig& sc, int rep, Index coef_cols)
{
    const sim::SeedTree seeds(s.seed);
    const auto r = static_cast<std::uint64_t>(rep);
    Instance inst;
    inst.sc = sc;
    auto coef_rng = seeds.stream({r, key(Stream::Coef)});
    inst.B_star = sim::gen_coef(sc.p, coef_cols, sc.coef, coef_rng).leftCols(sc.Q);
    auto shift_rng = seeds.stream({r, key(Stream::Shift)});
    const sim::Population pop = sim::make_population(sc, shift_rng);
    inst.sigma1 = pop.discovery.sigma();
    for (Index q = 0; q < sc.Q; ++q) {
        const auto uq = static_cast<std::uint64_t>(q);
        auto train_rng = seeds.stream({r, uq, key(Stream::Train)});
        inst.train.push_back(sim::gen_task_data(sc, pop, inst.B_star.col(q), train_rng));
        auto test_rng = seeds.stream({r, uq, key(Stream::Test)});
        Matrix Xt = pop.discovery.sample(s.n_test, test_rng);
        Vector noise = sim::standard_normal(s.n_test, 1, test_rng).col(0);
        inst.Y_test.push_back(Xt * inst.B_star.col(q) + sc.noise_sd * noise);
        inst.X_test.push_back(std::move(Xt));
    }
    return inst;
}

inline std::vector<ResultRow> run_rep(const Settings& s, int rep)
{
    std::vector<ResultRow> rows;
    const sim::SeedTree seeds(s.seed);
    const auto r = static_cast<std::uint64_t>(rep);

    for (double v : s.sweep) {
        sim::ScenarioConfig sc = s.base;
        Index coef_cols = sc.Q;
        switch (s.scenario) {
            case Scenario::TauSweep: sc.n_tilde = std::lround(v * static_cast<double>(sc.n)); break;
            case Scenario::RhoSweep: sc.rho = v; break;
            case Scenario::MisspecSweep: sc.sigma2 = {sim::CovSpec::Kind::ShiftedFrobenius, v}; break;
            case Scenario::TuningCompare: break;
            case Scenario::SingleVsMulti: {
                sc.Q = static_cast<Index>(std::lround(v));
                coef_cols = static_cast<Index>(std::lround(*std::max_element(s.sweep.begin(), s.sweep.end())));
                break;
            }
        }
        if (s.penalty == Penalty::LowRank && sc.coef.kind == sim::CoefKind::Kind::LowRank)
            sc.coef.param = static_cast<int>(std::min<Index>(sc.coef.param, sc.Q));
        sc.check();
        const Instance inst = make_instance(s, sc, rep, coef_cols);
        auto mse = [&](const CoefMatrix& B) { return sim::prediction_mse(B, inst.X_test, inst.Y_test); };

        switch (s.scenario) {
            case Scenario::TauSweep:
            case Scenario::RhoSweep:
            case Scenario::MisspecSweep: {
                const TaskBundle proxy = proxy_bundle(inst.train);
                const TaskBundle indiv = individual_bundle_of(inst.train);
                const TaskBundle truth = true_cov_bundle(inst.train, inst.sigma1);
                emit(rows, rep, v, "proxy", mse(select_and_fit(proxy, s, inst, inst.B_star)));
                emit(rows, rep, v, "individual", mse(select_and_fit(indiv, s, inst, inst.B_star)));
                emit(rows, rep, v, "true_cov", mse(select_and_fit(truth, s, inst, inst.B_star)));
                break;
            }
            case Scenario::TuningCompare: {
                const auto m = static_cast<Index>(std::lround(v));
                const auto m_max =
                    static_cast<Index>(std::lround(*std::max_element(s.sweep.begin(), s.sweep.end())));
                HoldoutData hold;
                std::vector<sim::TaskData> pooled = inst.train;
                const sim::GaussianDesign design(inst.sigma1);
                for (Index q = 0; q < sc.Q; ++q) {
                    auto hrng = seeds.stream({r, static_cast<std::uint64_t>(q), key(Stream::Holdout)});
                    // Draw the largest hold-out set and keep a prefix so sizes are nested.
                    const Matrix Xh_all = design.sample(m_max, hrng);
                    const Vector eh_all = sim::standard_normal(m_max, 1, hrng).col(0);
                    const Matrix Xh = Xh_all.topRows(m);
                    const Vector Yh = Xh * inst.B_star.col(q) + sc.noise_sd * eh_all.head(m);
                    auto& d = pooled[static_cast<std::size_t>(q)];
                    Matrix X(d.X.rows() + m, sc.p), Xt(d.X_tilde.rows() + m, sc.p);
                    Vector Y(d.Y.size() + m);
                    X << d.X, Xh;
                    Y << d.Y, Yh;
                    Xt << d.X_tilde, Xh;
                    d.X = std::move(X);
                    d.Y = std::move(Y);
                    d.X_tilde = std::move(Xt);
                    hold.X.push_back(Xh);
                    hold.Y.push_back(Yh);
                }
                const TaskBundle proxy = proxy_bundle(inst.train);
                const auto full_grid = default_grid(proxy, s.penalty, s.grid_size, s.grid_min_ratio);
                const auto [grid, path, offset] = fit_path_converged(proxy, s.penalty, full_grid, s.fit);
                const auto h = holdout_select(path, grid, hold);
                emit(rows, rep, v, "holdout", mse(path[h.chosen_index].B_hat));

                const TaskBundle adaptive = proxy_bundle(pooled);
                Settings lep = s;
                lep.tuning = Tuning::Lepski;
                emit(rows, rep, v, "adaptive", mse(select_and_fit(adaptive, lep, inst, inst.B_star)));
                break;
            }
            case Scenario::SingleVsMulti: {
                const TaskBundle proxy = proxy_bundle(inst.train);
                emit(rows, rep, v, "proxy", mse(select_and_fit(proxy, s, inst, inst.B_star)));

                CoefMatrix split(sc.p, sc.Q);
                const TaskBundle pooled = pooled_bundle(proxy);
                CoefMatrix pooled_B(sc.p, sc.Q);
                // Pooled target: the average coefficient vector is what a single fit can reach.
                const Vector mean_beta = inst.B_star.rowwise().mean();
                if (s.penalty == Penalty::GroupSparse) {
                    for (Index q = 0; q < sc.Q; ++q) {
                        const TaskBundle one = single_task_bundle(proxy, static_cast<std::size_t>(q));
                        split.col(q) = select_and_fit(one, s, inst, inst.B_star.col(q)).col(0);
                    }
                    const Vector pb = select_and_fit(pooled, s, inst, mean_beta).col(0);
                    pooled_B = pb.replicate(1, sc.Q);
                } else {
                    for (Index q = 0; q < sc.Q; ++q) {
                        split.col(q) = ridge_oracle(proxy.tasks[static_cast<std::size_t>(q)], inst.B_star.col(q),
                                                    inst.sigma1, s.grid_size);
                    }
                    pooled_B = ridge_oracle(pooled.tasks.front(), mean_beta, inst.sigma1, s.grid_size)
                                   .replicate(1, sc.Q);
                }
                emit(rows, rep, v, "split_single", mse(split));
                emit(rows, rep, v, "pooled_single", mse(pooled_B));
                break;
            }
        }
    }
    return rows;
}

} // namespace detail

/**
 * Runs all replications. Replications are independent (each draws from its
 * own substreams) and may run on several threads; the returned rows are in
 * (rep, sweep, estimator, task) order regardless of scheduling.
 */
inline std::vector<ResultRow> run(const Settings& s)
{
    std::vector<std::vector<ResultRow>> per_rep(static_cast<std::size_t>(s.reps));
    unsigned nthreads = s.threads > 0 ? static_cast<unsigned>(s.threads) : std::thread::hardware_concurrency();
    nthreads = std::clamp(nthreads, 1u, static_cast<unsigned>(s.reps));

    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (int rep = next++; rep < s.reps; rep = next++) {
            try {
                per_rep[static_cast<std::size_t>(rep)] = detail::run_rep(s, rep);
            } catch (...) {
                std::lock_guard lk(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<ResultRow> rows;
    for (auto& r : per_rep) rows.insert(rows.end(), r.begin(), r.end());
    return rows;
}

inline std::string to_csv(const Settings& s, const std::vector<ResultRow>& rows)
{
    std::string out = "scenario,penalty,rep,sweep_param,estimator,task,mse\n";
    const std::string prefix = to_string(s.scenario) + "," + std::string(proxymtl::to_string(s.penalty)) + ",";
    for (const auto& r : rows) {
        out += prefix;
        out += std::to_string(r.rep) + "," + io::format_double(r.sweep) + "," + r.estimator + "," +
               std::to_string(r.task) + "," + io::format_double(r.mse) + "\n";
    }
    return out;
}

/// Per-rep task-averaged MSE, keyed by (sweep value, estimator); reps in order.
using RepMeans = std::map<std::pair<double, std::string>, std::vector<double>>;

inline RepMeans rep_means(const std::vector<ResultRow>& rows)
{
    std::map<std::pair<double, std::string>, std::map<int, std::pair<double, int>>> acc;
    for (const auto& r : rows) {
        auto& cell = acc[{r.sweep, r.estimator}][r.rep];
        cell.first += r.mse;
        cell.second += 1;
    }
    RepMeans out;
    for (const auto& [k, reps] : acc) {
        auto& v = out[k];
        for (const auto& [rep, sum] : reps) v.push_back(sum.first / sum.second);
    }
    return out;
}

} // namespace experiment
} // namespace proxymtl
