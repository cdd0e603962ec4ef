#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "tacos/rng.hpp"
#include "tacos/signal.hpp"
#include "tacos/solver.hpp"

namespace tacos {

/// A reproducible campaign over (N, sigma, config, hyperparameter grid).
struct ExperimentPlan {
    std::vector<int> n_values{512, 1024, 4096};
    std::vector<double> sigma_values = default_sigma_values();
    std::vector<double> lambda1_grid{1e-1, 1e0, 1e1, 1e2, 1e3};
    std::vector<double> lambda2_grid{1e2, 1e3, 1e4, 1e5, 1e6};
    int repetitions = 10;
    std::uint64_t base_seed = 0;
    std::vector<std::string> configs{"MLE", "TS", "COS", "TACOS"};
    int channel_count = 3;
    SolverConfig solver;  // lambda fields are overwritten per run

    static std::vector<double> default_sigma_values() {
        // 7 log-spaced points covering sigma in [1e-1, 1e1]
        std::vector<double> s(7);
        for (int i = 0; i < 7; ++i) s[i] = std::pow(10.0, -1.0 + 2.0 * i / 6.0);
        return s;
    }

    void validate() const {
        if (n_values.empty() || sigma_values.empty() || configs.empty())
            throw std::invalid_argument("ExperimentPlan: empty sweep axis");
        if (lambda1_grid.empty() || lambda2_grid.empty())
            throw std::invalid_argument("ExperimentPlan: empty hyperparameter grid");
        if (repetitions < 1) throw std::invalid_argument("ExperimentPlan: repetitions must be >= 1");
        if (channel_count < 1) throw std::invalid_argument("ExperimentPlan: need at least one channel");
        for (int n : n_values)
            if (n < 64) throw std::invalid_argument("ExperimentPlan: n must be >= 64");
        for (double s : sigma_values)
            if (!(s > 0.0)) throw std::invalid_argument("ExperimentPlan: sigma must be positive");
        for (const auto& c : configs)
            if (c != "MLE" && c != "TS" && c != "COS" && c != "TACOS")
                throw std::invalid_argument("ExperimentPlan: unknown config " + c);
    }
};

struct ExperimentRecord {
    std::string config;
    int n = 0;
    double sigma = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::uint64_t seed = 0;
    double r_snr_db = 0.0;
    int outer_iters = 0;
    long total_cg_iters = 0;
    double runtime_s = 0.0;
    bool converged = false;
};

/// Per-run seed: a pure function of (base seed, n, sigma, config, repetition).
inline std::uint64_t run_seed(std::uint64_t base_seed, int n, double sigma,
                              std::string_view config, int repetition) {
    std::uint64_t h = mix64(base_seed ^ fnv1a("run"));
    h = mix64(h ^ static_cast<std::uint64_t>(n));
    h = mix64(h ^ std::bit_cast<std::uint64_t>(sigma));
    h = mix64(h ^ fnv1a(config));
    h = mix64(h ^ static_cast<std::uint64_t>(repetition));
    return h;
}

/// Restricts (lambda1, lambda2) to the penalties a configuration activates.
inline std::pair<double, double> effective_lambdas(std::string_view config, double lambda1,
                                                   double lambda2) {
    if (config == "MLE") return {0.0, 0.0};
    if (config == "TS") return {lambda1, 0.0};
    if (config == "COS") return {0.0, lambda2};
    if (config == "TACOS") return {lambda1, lambda2};
    throw std::invalid_argument("effective_lambdas: unknown config " + std::string(config));
}

/// The problem instance behind one record, kept reproducible for oracles.
struct ProblemInstance {
    BivariateSignal truth;
    RestorationProblem problem;
    NoiseSpec noise_spec;
    std::vector<Eigen::Vector2d> mixing;
};

/// Generates signal -> channels -> colored noise -> whitening -> observations
/// for one run seed, using the named substreams of the seed.
inline ProblemInstance make_problem_instance(int n, double sigma, std::uint64_t seed,
                                             int channel_count = 3) {
    ProblemInstance inst;
    // the nominal band [25/n, 35/n]; rescaled below Nyquist for very short
    // records where 35/n is no longer a valid discrete frequency
    double f_hi = 35.0 / n;
    double f_lo = 25.0 / n;
    if (f_hi >= 0.5) {
        const double shrink = 0.45 / f_hi;
        f_hi *= shrink;
        f_lo *= shrink;
    }
    auto [signal, track] = generate_signal(n, f_lo, f_hi, n / 20.0,
                                           derive_seed(seed, "signal"));
    (void)track;
    inst.truth = std::move(signal);
    inst.mixing = random_mixing_vectors(channel_count, derive_seed(seed, "channels"));
    inst.noise_spec = sample_noise_spec(n, channel_count, sigma, derive_seed(seed, "noise"));
    const std::vector<Eigen::VectorXd> noise = noise_realization(inst.noise_spec);
    inst.problem.channels = whitening_channels(inst.noise_spec, inst.mixing);
    inst.problem.observations = whitened_observations(inst.problem.channels, inst.truth, noise);
    return inst;
}

/// Runs one (n, sigma, config, lambda) cell. Solver non-convergence lands in
/// the record flag rather than failing the campaign. Runtime covers solve()
/// only, not data generation.
inline ExperimentRecord run_single(int n, double sigma, std::string_view config, double lambda1,
                                   double lambda2, std::uint64_t seed,
                                   const SolverConfig& base_config = SolverConfig{},
                                   int channel_count = 3) {
    const auto [l1, l2] = effective_lambdas(config, lambda1, lambda2);
    ExperimentRecord record;
    record.config = std::string(config);
    record.n = n;
    record.sigma = sigma;
    record.lambda1 = l1;
    record.lambda2 = l2;
    record.seed = seed;

    const ProblemInstance inst = make_problem_instance(n, sigma, seed, channel_count);

    SolverConfig config_run = base_config;
    config_run.lambda1 = l1;
    config_run.lambda2 = l2;
    config_run.rng_seed = derive_seed(seed, "init");

    const auto t0 = std::chrono::steady_clock::now();
    const SolveResult result = tacos::solve(inst.problem, config_run);
    record.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    record.r_snr_db = r_snr_db(inst.truth, result.restored);
    record.outer_iters = result.state.iteration;
    record.total_cg_iters = result.state.total_cg_iterations;
    record.converged = result.state.converged;
    return record;
}

struct GridSearchRow {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double mean_r_snr_db = 0.0;
    double std_r_snr_db = 0.0;
};

struct GridSearchResult {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double mean_r_snr_db = 0.0;
    std::vector<GridSearchRow> table;
    std::vector<ExperimentRecord> records;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& values) {
    const double count = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= count;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (count - 1.0))};
}

/// The (lambda1, lambda2) grid a configuration actually explores.
inline std::vector<std::pair<double, double>> config_grid(const ExperimentPlan& plan,
                                                          std::string_view config) {
    std::vector<double> l1 = plan.lambda1_grid;
    std::vector<double> l2 = plan.lambda2_grid;
    std::sort(l1.begin(), l1.end());
    std::sort(l2.begin(), l2.end());
    if (config == "MLE") return {{0.0, 0.0}};
    if (config == "TS") {
        std::vector<std::pair<double, double>> grid;
        for (double a : l1) grid.emplace_back(a, 0.0);
        return grid;
    }
    if (config == "COS") {
        std::vector<std::pair<double, double>> grid;
        for (double b : l2) grid.emplace_back(0.0, b);
        return grid;
    }
    std::vector<std::pair<double, double>> grid;
    for (double a : l1)
        for (double b : l2) grid.emplace_back(a, b);
    return grid;
}

}  // namespace detail

/// Evaluates mean r-SNR per grid point over the plan's repetitions (seeds are
/// shared across grid points) and returns the argmax; ties break toward the
/// lexicographically smaller (lambda1, lambda2).
inline GridSearchResult grid_search(const ExperimentPlan& plan, int n, double sigma,
                                    std::string_view config) {
    plan.validate();
    GridSearchResult result;
    bool have_best = false;
    for (const auto& [l1, l2] : detail::config_grid(plan, config)) {
        std::vector<double> snr;
        for (int rep = 0; rep < plan.repetitions; ++rep) {
            const std::uint64_t seed = run_seed(plan.base_seed, n, sigma, config, rep);
            ExperimentRecord rec =
                run_single(n, sigma, config, l1, l2, seed, plan.solver, plan.channel_count);
            snr.push_back(rec.r_snr_db);
            result.records.push_back(std::move(rec));
        }
        const auto [mean, sd] = detail::mean_std(snr);
        result.table.push_back(GridSearchRow{l1, l2, mean, sd});
        if (!have_best || mean > result.mean_r_snr_db) {
            have_best = true;
            result.lambda1 = l1;
            result.lambda2 = l2;
            result.mean_r_snr_db = mean;
        }
    }
    return result;
}

struct SummaryRow {
    std::string config;
    int n = 0;
    double sigma = 0.0;
    double mean_r_snr_db = 0.0;
    double std_r_snr_db = 0.0;
    double mean_runtime_s = 0.0;
    int count = 0;
};

/// Groups records by (config, n, sigma) and reports r-SNR mean/std plus mean
/// runtime. When a group spans several hyperparameter settings (a full-grid
/// campaign), the statistics are taken at the best grid point by mean r-SNR
/// (ties toward the smaller lambdas), matching the tuned-by-grid-search
/// protocol of the sweeps.
inline std::vector<SummaryRow> aggregate(const std::vector<ExperimentRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");

    using CellKey = std::tuple<std::string, int, double>;
    using LambdaKey = std::pair<double, double>;
    std::map<CellKey, std::map<LambdaKey, std::vector<const ExperimentRecord*>>> cells;
    for (const auto& rec : records)
        cells[{rec.config, rec.n, rec.sigma}][{rec.lambda1, rec.lambda2}].push_back(&rec);

    std::vector<SummaryRow> summary;
    for (const auto& [key, by_lambda] : cells) {
        const std::vector<const ExperimentRecord*>* best_group = nullptr;
        double best_mean = 0.0;
        for (const auto& [lambda, group] : by_lambda) {
            std::vector<double> snr;
            for (const auto* rec : group) snr.push_back(rec->r_snr_db);
            const double mean = detail::mean_std(snr).first;
            if (best_group == nullptr || mean > best_mean) {
                best_group = &group;
                best_mean = mean;
            }
        }
        std::vector<double> snr;
        double runtime = 0.0;
        for (const auto* rec : *best_group) {
            snr.push_back(rec->r_snr_db);
            runtime += rec->runtime_s;
        }
        const auto [mean, sd] = detail::mean_std(snr);
        SummaryRow row;
        row.config = std::get<0>(key);
        row.n = std::get<1>(key);
        row.sigma = std::get<2>(key);
        row.mean_r_snr_db = mean;
        row.std_r_snr_db = sd;
        row.mean_runtime_s = runtime / static_cast<double>(best_group->size());
        row.count = static_cast<int>(best_group->size());
        summary.push_back(std::move(row));
    }
    return summary;
}

/// Runs the full plan: every (config, n, sigma, grid point, repetition)
/// produces one record, in deterministic plan order regardless of the worker
/// count. Individual solver failures are recorded, not propagated.
inline std::vector<ExperimentRecord> run_campaign(const ExperimentPlan& plan, int parallel = 1) {
    plan.validate();
    if (parallel < 1) throw std::invalid_argument("run_campaign: parallel must be >= 1");

    struct Task {
        std::string config;
        int n;
        double sigma;
        double lambda1;
        double lambda2;
        int rep;
    };
    std::vector<Task> tasks;
    for (const auto& config : plan.configs)
        for (int n : plan.n_values)
            for (double sigma : plan.sigma_values)
                for (const auto& [l1, l2] : detail::config_grid(plan, config))
                    for (int rep = 0; rep < plan.repetitions; ++rep)
                        tasks.push_back(Task{config, n, sigma, l1, l2, rep});

    std::vector<ExperimentRecord> records(tasks.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& t = tasks[i];
            const std::uint64_t seed = run_seed(plan.base_seed, t.n, t.sigma, t.config, t.rep);
            try {
                records[i] = run_single(t.n, t.sigma, t.config, t.lambda1, t.lambda2, seed,
                                        plan.solver, plan.channel_count);
            } catch (const std::exception&) {
                ExperimentRecord failed;
                failed.config = t.config;
                failed.n = t.n;
                failed.sigma = t.sigma;
                std::tie(failed.lambda1, failed.lambda2) =
                    effective_lambdas(t.config, t.lambda1, t.lambda2);
                failed.seed = seed;
                failed.r_snr_db = std::numeric_limits<double>::quiet_NaN();
                failed.converged = false;
                records[i] = std::move(failed);
            }
        }
    };

    if (parallel == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < parallel; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return records;
}

}  // namespace tacos
