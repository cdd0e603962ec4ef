// Command-line front end: synthetic data generation, observation synthesis,
// restoration, hyperparameter grid search and benchmark campaigns, all
// reproducible from a single seed and file-based inputs.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tacos/experiments.hpp"
#include "tacos/io.hpp"
#include "tacos/signal.hpp"
#include "tacos/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_manifest(const std::string& dir, const json& manifest) {
    std::ofstream out((fs::path(dir) / "manifest.json").string());
    if (!out) throw std::runtime_error("cannot write manifest in " + dir);
    out << manifest.dump(2) << '\n';
}

struct GenerateArgs {
    int n = 1024;
    std::uint64_t seed = 0;
    double band_lo = 0.0;  // 0 = use 25/n
    double band_hi = 0.0;  // 0 = use 35/n
    double smoothness = 0.0;  // 0 = use n/20
    std::string out = ".";
};

int run_generate(const GenerateArgs& args) {
    const double f_lo = args.band_lo > 0.0 ? args.band_lo : 25.0 / args.n;
    const double f_hi = args.band_hi > 0.0 ? args.band_hi : 35.0 / args.n;
    const double smoothness = args.smoothness > 0.0 ? args.smoothness : args.n / 20.0;
    auto [signal, track] =
        tacos::generate_signal(args.n, f_lo, f_hi, smoothness, args.seed);
    fs::create_directories(args.out);
    tacos::io::write_signal_csv((fs::path(args.out) / "signal.csv").string(), signal);
    tacos::io::write_track_csv((fs::path(args.out) / "track.csv").string(), track);
    write_manifest(args.out, json{{"command", "generate"},
                                  {"n", args.n},
                                  {"seed", args.seed},
                                  {"band_lo", f_lo},
                                  {"band_hi", f_hi},
                                  {"smoothness", smoothness},
                                  {"outputs", {"signal.csv", "track.csv"}}});
    return 0;
}

struct ObserveArgs {
    std::string signal_path;
    double sigma = 1.0;
    int channels = 3;
    std::uint64_t seed = 0;
    std::string out = ".";
};

int run_observe(const ObserveArgs& args) {
    const tacos::BivariateSignal truth = tacos::io::read_signal_csv(args.signal_path);
    const int n = truth.n();
    const auto mixing =
        tacos::random_mixing_vectors(args.channels, tacos::derive_seed(args.seed, "channels"));
    const auto spec = tacos::sample_noise_spec(n, args.channels, args.sigma,
                                               tacos::derive_seed(args.seed, "noise"));
    const auto noise = tacos::noise_realization(spec);
    const auto channels = tacos::whitening_channels(spec, mixing);
    const auto observations = tacos::whitened_observations(channels, truth, noise);

    fs::create_directories(args.out);
    tacos::io::write_signal_csv((fs::path(args.out) / "truth.csv").string(), truth);

    tacos::io::ObservationBundle bundle;
    bundle.n = n;
    bundle.sigma = args.sigma;
    bundle.seed = args.seed;
    bundle.mixing = mixing;
    bundle.asd = spec.asd;
    bundle.observations = observations;
    bundle.truth_file = "truth.csv";
    tacos::io::write_observation_bundle(args.out, bundle);

    write_manifest(args.out, json{{"command", "observe"},
                                  {"signal", args.signal_path},
                                  {"n", n},
                                  {"sigma", args.sigma},
                                  {"channels", args.channels},
                                  {"seed", args.seed},
                                  {"outputs", {"observations.json", "truth.csv"}}});
    return 0;
}

struct SolveArgs {
    std::string obs_path;
    std::string config_path;
    std::string truth_path;
    std::string out = ".";
    // override flags; only applied when the option was actually passed
    double lambda1 = 0.0, lambda2 = 0.0, rho = 1.0;
    int max_iters = 100, cg_max_iters = 500;
    double primal_tol = 1e-3, dual_tol = 1e-3, cg_tol = 1e-8;
    std::uint64_t seed = 0;
};

int run_solve(const SolveArgs& args, const CLI::App& cmd) {
    const auto bundle = tacos::io::read_observation_bundle(args.obs_path);
    tacos::SolverConfig config;
    if (!args.config_path.empty()) config = tacos::io::read_solver_config(args.config_path);

    // explicit flags take precedence over the config file
    if (cmd.count("--lambda1") > 0) config.lambda1 = args.lambda1;
    if (cmd.count("--lambda2") > 0) config.lambda2 = args.lambda2;
    if (cmd.count("--rho") > 0) config.rho = args.rho;
    if (cmd.count("--max-iters") > 0) config.max_outer_iters = args.max_iters;
    if (cmd.count("--primal-tol") > 0) config.primal_tol = args.primal_tol;
    if (cmd.count("--dual-tol") > 0) config.dual_tol = args.dual_tol;
    if (cmd.count("--cg-tol") > 0) config.cg_tol = args.cg_tol;
    if (cmd.count("--cg-max-iters") > 0) config.cg_max_iters = args.cg_max_iters;
    if (cmd.count("--seed") > 0) config.rng_seed = args.seed;
    config.validate();

    const tacos::RestorationProblem problem = bundle.problem();
    const tacos::SolveResult result = tacos::solve(problem, config);

    fs::create_directories(args.out);
    tacos::io::write_signal_csv((fs::path(args.out) / "restored.csv").string(), result.restored);
    tacos::io::write_trace_csv((fs::path(args.out) / "trace.csv").string(), result.state.trace);

    json manifest{{"command", "solve"},
                  {"observations", args.obs_path},
                  {"config", tacos::io::to_json(config)},
                  {"config_label", tacos::config_label(config.lambda1, config.lambda2)},
                  {"converged", result.state.converged},
                  {"outer_iters", result.state.iteration},
                  {"total_cg_iters", result.state.total_cg_iterations},
                  {"primal_error", result.state.primal_error},
                  {"dual_error", result.state.dual_error},
                  {"outputs", {"restored.csv", "trace.csv"}}};

    std::string truth_path = args.truth_path;
    if (truth_path.empty() && !bundle.truth_file.empty())
        truth_path = (fs::path(args.obs_path).parent_path() / bundle.truth_file).string();
    if (!truth_path.empty()) {
        const tacos::BivariateSignal truth = tacos::io::read_signal_csv(truth_path);
        manifest["r_snr_db"] = tacos::r_snr_db(truth, result.restored);
    }

    if (!result.state.converged)
        std::cerr << "warning: solver stopped after " << result.state.iteration
                  << " iterations without meeting the primal/dual tolerances\n";

    write_manifest(args.out, manifest);
    return 0;
}

struct GridArgs {
    std::string plan_path;
    int n = 0;
    double sigma = 1.0;
    std::string config = "TACOS";
    std::string out = ".";
};

int run_grid(const GridArgs& args) {
    tacos::ExperimentPlan plan;
    if (!args.plan_path.empty()) plan = tacos::io::read_plan(args.plan_path);
    const int n = args.n > 0 ? args.n : plan.n_values.front();
    const auto result = tacos::grid_search(plan, n, args.sigma, args.config);

    fs::create_directories(args.out);
    {
        std::ofstream out((fs::path(args.out) / "grid.csv").string());
        out << "lambda1,lambda2,mean_r_snr_db,std_r_snr_db\n";
        for (const auto& row : result.table)
            out << tacos::io::format_double(row.lambda1) << ','
                << tacos::io::format_double(row.lambda2) << ','
                << tacos::io::format_double(row.mean_r_snr_db) << ','
                << tacos::io::format_double(row.std_r_snr_db) << '\n';
    }
    tacos::io::write_results_csv((fs::path(args.out) / "results.csv").string(), result.records);
    write_manifest(args.out, json{{"command", "grid"},
                                  {"plan", tacos::io::to_json(plan)},
                                  {"n", n},
                                  {"sigma", args.sigma},
                                  {"config", args.config},
                                  {"best_lambda1", result.lambda1},
                                  {"best_lambda2", result.lambda2},
                                  {"best_mean_r_snr_db", result.mean_r_snr_db},
                                  {"outputs", {"grid.csv", "results.csv"}}});
    return 0;
}

struct BenchArgs {
    std::string plan_path;
    std::string out = ".";
    int parallel = 1;
};

int run_bench(const BenchArgs& args) {
    tacos::ExperimentPlan plan;
    if (!args.plan_path.empty()) plan = tacos::io::read_plan(args.plan_path);
    const auto records = tacos::run_campaign(plan, args.parallel);
    const auto summary = tacos::aggregate(records);

    fs::create_directories(args.out);
    tacos::io::write_results_csv((fs::path(args.out) / "results.csv").string(), records);
    tacos::io::write_summary_csv((fs::path(args.out) / "summary.csv").string(), summary);
    write_manifest(args.out, json{{"command", "bench"},
                                  {"plan", tacos::io::to_json(plan)},
                                  {"parallel", args.parallel},
                                  {"records", records.size()},
                                  {"outputs", {"results.csv", "summary.csv"}}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Restoration of polarized bivariate signals by time and covariance smoothing"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "Synthesize a random polarized signal");
    generate->add_option("--n", gen.n, "number of samples")
        ->required()
        ->check(CLI::Range(64, 1 << 24));
    generate->add_option("--seed", gen.seed, "random seed")->envname("TACOS_SEED");
    generate->add_option("--band-lo", gen.band_lo, "lower frequency bound (cycles/sample)");
    generate->add_option("--band-hi", gen.band_hi, "upper frequency bound (cycles/sample)");
    generate->add_option("--smoothness", gen.smoothness, "track smoothing kernel std (samples)");
    generate->add_option("--out", gen.out, "output directory");

    ObserveArgs obs;
    CLI::App* observe = app.add_subcommand("observe", "Synthesize whitened noisy observations");
    observe->add_option("--signal", obs.signal_path, "input signal CSV")
        ->required()
        ->check(CLI::ExistingFile);
    observe->add_option("--sigma", obs.sigma, "noise scaling factor")
        ->check(CLI::PositiveNumber);
    observe->add_option("--channels", obs.channels, "number of channels")->check(CLI::Range(1, 64));
    observe->add_option("--seed", obs.seed, "random seed")->envname("TACOS_SEED");
    observe->add_option("--out", obs.out, "output directory");

    SolveArgs sol;
    CLI::App* solve = app.add_subcommand("solve", "Restore a signal from an observation bundle");
    solve->add_option("--obs", sol.obs_path, "observation bundle manifest (observations.json)")
        ->required()
        ->check(CLI::ExistingFile);
    solve->add_option("--config", sol.config_path, "solver config JSON")->check(CLI::ExistingFile);
    solve->add_option("--truth", sol.truth_path, "ground-truth signal CSV for r-SNR")
        ->check(CLI::ExistingFile);
    solve->add_option("--lambda1", sol.lambda1, "time-smoothing weight");
    solve->add_option("--lambda2", sol.lambda2, "covariance-smoothing weight");
    solve->add_option("--rho", sol.rho, "augmentation parameter");
    solve->add_option("--max-iters", sol.max_iters, "outer iteration limit");
    solve->add_option("--primal-tol", sol.primal_tol, "relative primal tolerance");
    solve->add_option("--dual-tol", sol.dual_tol, "relative dual tolerance");
    solve->add_option("--cg-tol", sol.cg_tol, "inner CG relative tolerance");
    solve->add_option("--cg-max-iters", sol.cg_max_iters, "inner CG iteration limit");
    solve->add_option("--seed", sol.seed, "initialization seed")->envname("TACOS_SEED");
    solve->add_option("--out", sol.out, "output directory");

    GridArgs grid;
    CLI::App* grid_cmd = app.add_subcommand("grid", "Hyperparameter grid search at one (n, sigma)");
    grid_cmd->add_option("--plan", grid.plan_path, "experiment plan JSON")
        ->check(CLI::ExistingFile);
    grid_cmd->add_option("--n", grid.n, "number of samples")->check(CLI::Range(64, 1 << 24));
    grid_cmd->add_option("--sigma", grid.sigma, "noise scaling factor")
        ->check(CLI::PositiveNumber);
    grid_cmd->add_option("--config", grid.config, "configuration (MLE, TS, COS, TACOS)");
    grid_cmd->add_option("--out", grid.out, "output directory");

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Run a full experiment campaign");
    bench_cmd->add_option("--plan", bench.plan_path, "experiment plan JSON")
        ->check(CLI::ExistingFile);
    bench_cmd->add_option("--parallel", bench.parallel, "worker thread count")
        ->check(CLI::Range(1, 256));
    bench_cmd->add_option("--out", bench.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return run_generate(gen);
        if (observe->parsed()) return run_observe(obs);
        if (solve->parsed()) return run_solve(sol, *solve);
        if (grid_cmd->parsed()) return run_grid(grid);
        if (bench_cmd->parsed()) return run_bench(bench);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
