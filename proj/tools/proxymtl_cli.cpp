// proxymtl command-line front end.
//
//   proxymtl fit        --bundle DIR --penalty sparse|lowrank --lambda X --out FILE
//   proxymtl tune       --bundle DIR --penalty K --method lepski|holdout --out FILE
//   proxymtl experiment --scenario NAME --penalty K --reps R --seed S --out FILE
//   proxymtl simulate   --out DIR [--config JSON]
//
// Exit codes: 0 ok, 1 input error, 2 fit did not converge.
#include <proxymtl/experiment.hpp>
#include <proxymtl/io.hpp>
#include <proxymtl/simgen.hpp>
#include <proxymtl/solver.hpp>
#include <proxymtl/tuning.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace proxymtl;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

fs::path sidecar(const fs::path& out, const std::string& suffix)
{
    fs::path p = out;
    return p.replace_filename(out.stem().string() + suffix);
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

FitConfig make_fit_config(const std::string& step, double tol, long max_iters)
{
    FitConfig cfg;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    if (step != "auto") {
        try {
            cfg.step_size = std::stod(step);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "--step must be 'auto' or a positive number");
        }
    }
    cfg.check();
    return cfg;
}

json load_config_arg(const std::string& arg)
{
    if (arg.empty()) return json::object();
    try {
        if (fs::exists(arg)) return json::parse(io::read_text(arg));
        return json::parse(arg);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("--config: ") + e.what());
    }
}

HoldoutData load_holdout(const fs::path& dir_or_manifest)
{
    fs::path manifest = dir_or_manifest;
    if (fs::is_directory(manifest)) manifest /= "holdout.json";
    if (!fs::exists(manifest)) throw Error(ErrorCode::MissingFile, "holdout manifest not found: " + manifest.string());
    json j;
    try {
        j = json::parse(io::read_text(manifest));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, "holdout manifest: " + std::string(e.what()));
    }
    HoldoutData h;
    for (const auto& t : j.at("tasks")) {
        h.X.push_back(io::read_csv_matrix(manifest.parent_path() / t.at("X").get<std::string>()));
        h.Y.push_back(io::read_csv_vector(manifest.parent_path() / t.at("Y").get<std::string>()));
    }
    return h;
}

struct FitArgs
{
    std::string bundle, penalty, step = "auto", out;
    double lambda = 0.0, tol = 1e-8;
    long max_iters = 50000;
};

int cmd_fit(const FitArgs& a)
{
    const TaskBundle bundle = io::load_bundle(a.bundle);
    const Penalty kind = parse_penalty(a.penalty);
    const FitResult r = fit(bundle, kind, a.lambda, make_fit_config(a.step, a.tol, a.max_iters));
    io::write_csv_matrix(a.out, r.B_hat);
    write_json(sidecar(a.out, ".json"), json{{"objective", r.objective()},
                                             {"iterations", r.iterations},
                                             {"converged", r.converged},
                                             {"lambda", r.lambda},
                                             {"step_size", r.step_size}});
    if (!r.converged) {
        std::cerr << "fit: reached max-iters (" << a.max_iters << ") without converging\n";
        return kNotConverged;
    }
    return kOk;
}

struct TuneArgs
{
    std::string bundle, penalty, method, holdout, step = "auto", out;
    double cbar = 1.0, grid_min_ratio = 0.01, tol = 1e-8;
    int grid_size = 20;
    long max_iters = 50000;
};

int cmd_tune(const TuneArgs& a)
{
    if (a.method == "holdout" && a.holdout.empty()) {
        throw Error(ErrorCode::InvalidArgument, "method holdout requires --holdout DIR");
    }
    if (a.method != "lepski" && a.method != "holdout") {
        throw Error(ErrorCode::InvalidArgument, "unknown method '" + a.method + "'");
    }
    const TaskBundle bundle = io::load_bundle(a.bundle);
    const Penalty kind = parse_penalty(a.penalty);
    const FitConfig cfg = make_fit_config(a.step, a.tol, a.max_iters);
    const auto grid = default_grid(bundle, kind, a.grid_size, a.grid_min_ratio);
    const auto path = fit_path(bundle, kind, grid, cfg);

    json j;
    j["method"] = a.method;
    j["penalty"] = std::string(to_string(kind));
    j["grid"] = grid;
    std::string csv;
    std::size_t chosen = 0;
    if (a.method == "lepski") {
        const LepskiReport rep = lepski_select(bundle, path, grid, kind, a.cbar);
        chosen = rep.chosen_index;
        j["cbar"] = rep.cbar;
        j["feasible"] = rep.feasible_set;
        std::vector<std::vector<double>> gaps;
        for (Index r = 0; r < rep.pairwise_gaps.rows(); ++r) {
            gaps.emplace_back(rep.pairwise_gaps.row(r).begin(), rep.pairwise_gaps.row(r).end());
        }
        j["pairwise_gaps"] = gaps;
        io::write_csv_matrix(sidecar(a.out, "_gaps.csv"), rep.pairwise_gaps);
        csv = "index,lambda,feasible,chosen\n";
        for (std::size_t k = 0; k < grid.size(); ++k) {
            csv += std::to_string(k) + "," + io::format_double(grid[k]) + "," + (rep.feasible_set[k] ? "1" : "0") +
                   "," + (k == chosen ? "1" : "0") + "\n";
        }
    } else {
        const HoldoutReport rep = holdout_select(path, grid, load_holdout(a.holdout));
        chosen = rep.chosen_index;
        j["holdout_errors"] = rep.errors;
        csv = "index,lambda,holdout_error,chosen\n";
        for (std::size_t k = 0; k < grid.size(); ++k) {
            csv += std::to_string(k) + "," + io::format_double(grid[k]) + "," + io::format_double(rep.errors[k]) +
                   "," + (k == chosen ? "1" : "0") + "\n";
        }
    }
    j["chosen_index"] = chosen;
    j["chosen_lambda"] = grid[chosen];
    j["converged"] = path[chosen].converged;
    io::write_text(a.out, csv);
    io::write_csv_matrix(sidecar(a.out, "_coef.csv"), path[chosen].B_hat);
    write_json(sidecar(a.out, ".json"), j);
    return path[chosen].converged ? kOk : kNotConverged;
}

struct ExperimentArgs
{
    std::string scenario, penalty, out, config;
    int reps = 20, threads = 0;
    std::uint64_t seed = 1;
};

int cmd_experiment(const ExperimentArgs& a)
{
    json cfg = load_config_arg(a.config);
    if (a.threads > 0) cfg["threads"] = a.threads;
    const auto settings =
        experiment::make_settings(experiment::parse_scenario(a.scenario), parse_penalty(a.penalty), a.reps, a.seed, cfg);
    const auto rows = experiment::run(settings);
    io::write_text(a.out, experiment::to_csv(settings, rows));
    return kOk;
}

struct SimulateArgs
{
    std::string out, config, penalty = "sparse";
    std::uint64_t seed = 1;
    long holdout = 50;
};

/// Writes bundle/, holdout/ and B_star.csv for one simulated instance.
int cmd_simulate(const SimulateArgs& a)
{
    const Penalty kind = parse_penalty(a.penalty);
    sim::ScenarioConfig sc;
    sc.p = 20;
    sc.Q = 4;
    sc.coef = kind == Penalty::GroupSparse ? sim::CoefKind{sim::CoefKind::Kind::SparseRows, 5}
                                           : sim::CoefKind{sim::CoefKind::Kind::LowRank, 2};
    sc = sim::scenario_from_json(load_config_arg(a.config), sc);
    sc.seed = a.seed;
    sc.check();

    const sim::SeedTree seeds(sc.seed);
    auto coef_rng = seeds.stream({0, sim::key(sim::Stream::Coef)});
    const CoefMatrix B = sim::gen_coef(sc.p, sc.Q, sc.coef, coef_rng);
    auto shift_rng = seeds.stream({0, sim::key(sim::Stream::Shift)});
    const sim::Population pop = sim::make_population(sc, shift_rng);

    TaskBundle bundle;
    bundle.p = sc.p;
    const fs::path root(a.out);
    fs::create_directories(root / "holdout");
    json hold{{"p", sc.p}, {"tasks", json::array()}};
    for (Index q = 0; q < sc.Q; ++q) {
        const auto uq = static_cast<std::uint64_t>(q);
        auto rng = seeds.stream({0, uq, sim::key(sim::Stream::Train)});
        const auto d = sim::gen_task_data(sc, pop, B.col(q), rng);
        bundle.tasks.push_back(sim::summarize(d.X, d.Y, d.X_tilde));

        auto hrng = seeds.stream({0, uq, sim::key(sim::Stream::Holdout)});
        const Matrix Xh = pop.discovery.sample(a.holdout, hrng);
        const Vector Yh = Xh * B.col(q) + sc.noise_sd * sim::standard_normal(a.holdout, 1, hrng).col(0);
        const std::string xn = "X_" + std::to_string(q + 1) + ".csv", yn = "Y_" + std::to_string(q + 1) + ".csv";
        io::write_csv_matrix(root / "holdout" / xn, Xh);
        io::write_csv_matrix(root / "holdout" / yn, Yh);
        hold["tasks"].push_back({{"X", xn}, {"Y", yn}});
    }
    io::save_bundle(validate_bundle(std::move(bundle)), root / "bundle");
    write_json(root / "holdout" / "holdout.json", hold);
    io::write_csv_matrix(root / "B_star.csv", B);
    write_json(root / "scenario.json", sim::to_json(sc));
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-task regression from summary statistics"};
    app.require_subcommand(1);

    FitArgs fa;
    auto* fit_cmd = app.add_subcommand("fit", "Fit one penalized estimator");
    fit_cmd->add_option("--bundle", fa.bundle, "Bundle directory or manifest.json")->required();
    fit_cmd->add_option("--penalty", fa.penalty, "sparse | lowrank")->required();
    fit_cmd->add_option("--lambda", fa.lambda, "Penalty level")->required();
    fit_cmd->add_option("--step", fa.step, "Step size or 'auto' (1/L)");
    fit_cmd->add_option("--tol", fa.tol, "Relative objective tolerance");
    fit_cmd->add_option("--max-iters", fa.max_iters, "Iteration cap");
    fit_cmd->add_option("--out", fa.out, "Output CSV for the coefficient matrix")->required();

    TuneArgs ta;
    auto* tune_cmd = app.add_subcommand("tune", "Select lambda on a grid");
    tune_cmd->add_option("--bundle", ta.bundle, "Bundle directory or manifest.json")->required();
    tune_cmd->add_option("--penalty", ta.penalty, "sparse | lowrank")->required();
    tune_cmd->add_option("--method", ta.method, "lepski | holdout")->required();
    tune_cmd->add_option("--cbar", ta.cbar, "Lepski constant");
    tune_cmd->add_option("--grid-size", ta.grid_size, "Number of grid points");
    tune_cmd->add_option("--grid-min-ratio", ta.grid_min_ratio, "Smallest lambda as a fraction of lambda_max");
    tune_cmd->add_option("--holdout", ta.holdout, "Hold-out directory (holdout.json + CSVs)");
    tune_cmd->add_option("--step", ta.step, "Step size or 'auto'");
    tune_cmd->add_option("--tol", ta.tol, "Relative objective tolerance");
    tune_cmd->add_option("--max-iters", ta.max_iters, "Iteration cap");
    tune_cmd->add_option("--out", ta.out, "Output CSV")->required();

    ExperimentArgs ea;
    auto* exp_cmd = app.add_subcommand("experiment", "Run a simulation scenario");
    exp_cmd->add_option("--scenario", ea.scenario, "tau-sweep | rho-sweep | misspec-sweep | tuning-compare | single-vs-multi")
        ->required();
    exp_cmd->add_option("--penalty", ea.penalty, "sparse | lowrank")->required();
    exp_cmd->add_option("--reps", ea.reps, "Replications");
    exp_cmd->add_option("--seed", ea.seed, "Master seed");
    exp_cmd->add_option("--config", ea.config, "JSON overrides (file path or inline)");
    exp_cmd->add_option("--threads", ea.threads, "Worker threads (0 = hardware)");
    exp_cmd->add_option("--out", ea.out, "Output CSV")->required();

    SimulateArgs sa;
    auto* sim_cmd = app.add_subcommand("simulate", "Write a simulated bundle, hold-out set and truth");
    sim_cmd->add_option("--penalty", sa.penalty, "Structure of B*: sparse | lowrank");
    sim_cmd->add_option("--seed", sa.seed, "Seed");
    sim_cmd->add_option("--holdout-size", sa.holdout, "Hold-out rows per task");
    sim_cmd->add_option("--config", sa.config, "Scenario JSON (file path or inline)");
    sim_cmd->add_option("--out", sa.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }

    try {
        if (*fit_cmd) return cmd_fit(fa);
        if (*tune_cmd) return cmd_tune(ta);
        if (*exp_cmd) return cmd_experiment(ea);
        if (*sim_cmd) return cmd_simulate(sa);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
