#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tacos/experiments.hpp"
#include "tacos/forward_model.hpp"
#include "tacos/signal.hpp"
#include "tacos/solver.hpp"

namespace tacos::io {

using nlohmann::json;

/// Doubles are printed with 17 significant digits so every CSV round-trips
/// losslessly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

inline void expect_header(std::ifstream& in, const std::string& expected,
                          const std::string& path) {
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty file: " + path);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != expected)
        throw std::runtime_error("unexpected header in " + path + ": got '" + header +
                                 "', expected '" + expected + "'");
}

inline double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::runtime_error("malformed number: '" + s + "'");
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// signal and track CSV
// ---------------------------------------------------------------------------

inline void write_signal_csv(const std::string& path, const BivariateSignal& signal) {
    auto out = detail::open_out(path);
    out << "n,u,v\n";
    for (int i = 0; i < signal.n(); ++i)
        out << i << ',' << format_double(signal.samples(i, 0)) << ','
            << format_double(signal.samples(i, 1)) << '\n';
}

inline BivariateSignal read_signal_csv(const std::string& path) {
    auto in = detail::open_in(path);
    detail::expect_header(in, "n,u,v", path);
    std::vector<std::array<double, 2>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 3) throw std::runtime_error("malformed row in " + path);
        rows.push_back({detail::parse_double(fields[1]), detail::parse_double(fields[2])});
    }
    Eigen::MatrixX2d samples(rows.size(), 2);
    for (size_t i = 0; i < rows.size(); ++i) {
        samples(static_cast<Eigen::Index>(i), 0) = rows[i][0];
        samples(static_cast<Eigen::Index>(i), 1) = rows[i][1];
    }
    return BivariateSignal(std::move(samples));
}

inline void write_track_csv(const std::string& path, const EllipseTrack& track) {
    auto out = detail::open_out(path);
    out << "n,a,theta,chi,f\n";
    for (int i = 0; i < track.n(); ++i)
        out << i << ',' << format_double(track.amplitude[i]) << ','
            << format_double(track.orientation[i]) << ',' << format_double(track.ellipticity[i])
            << ',' << format_double(track.frequency[i]) << '\n';
}

// ---------------------------------------------------------------------------
// observation bundle: one CSV per channel plus a JSON manifest that is
// sufficient to re-instantiate the measurement operator exactly
// ---------------------------------------------------------------------------

inline void write_observation_csv(const std::string& path, const Eigen::VectorXd& y) {
    auto out = detail::open_out(path);
    out << "n,y\n";
    for (Eigen::Index i = 0; i < y.size(); ++i)
        out << i << ',' << format_double(y[i]) << '\n';
}

inline Eigen::VectorXd read_observation_csv(const std::string& path) {
    auto in = detail::open_in(path);
    detail::expect_header(in, "n,y", path);
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 2) throw std::runtime_error("malformed row in " + path);
        values.push_back(detail::parse_double(fields[1]));
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

struct ObservationBundle {
    int n = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::vector<Eigen::Vector2d> mixing;
    std::vector<Eigen::VectorXd> asd;
    std::vector<Eigen::VectorXd> observations;
    std::string truth_file;  // optional, relative to the bundle directory

    RestorationProblem problem(double clamp_floor_rel = 1e-6) const {
        NoiseSpec spec;
        spec.sigma = sigma;
        spec.asd = asd;
        spec.phase.assign(asd.size(), Eigen::VectorXd::Zero(n));
        RestorationProblem p;
        p.channels = whitening_channels(spec, mixing, clamp_floor_rel);
        p.observations = observations;
        return p;
    }
};

inline void write_observation_bundle(const std::string& dir, const ObservationBundle& bundle) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    json manifest;
    manifest["n"] = bundle.n;
    manifest["channels"] = bundle.observations.size();
    manifest["sigma"] = bundle.sigma;
    manifest["seed"] = bundle.seed;
    if (!bundle.truth_file.empty()) manifest["truth_file"] = bundle.truth_file;
    json files = json::array();
    json mixing = json::array();
    json asd = json::array();
    for (size_t d = 0; d < bundle.observations.size(); ++d) {
        const std::string name = "channel_" + std::to_string(d) + ".csv";
        write_observation_csv((fs::path(dir) / name).string(), bundle.observations[d]);
        files.push_back(name);
        mixing.push_back({bundle.mixing[d][0], bundle.mixing[d][1]});
        std::vector<double> a(bundle.asd[d].data(), bundle.asd[d].data() + bundle.asd[d].size());
        asd.push_back(a);
    }
    manifest["channel_files"] = files;
    manifest["mixing"] = mixing;
    manifest["asd"] = asd;
    auto out = detail::open_out((fs::path(dir) / "observations.json").string());
    out << manifest.dump(2) << '\n';
}

inline ObservationBundle read_observation_bundle(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    auto in = detail::open_in(manifest_path);
    json manifest = json::parse(in);
    const fs::path dir = fs::path(manifest_path).parent_path();

    ObservationBundle bundle;
    bundle.n = manifest.at("n").get<int>();
    bundle.sigma = manifest.at("sigma").get<double>();
    bundle.seed = manifest.at("seed").get<std::uint64_t>();
    bundle.truth_file = manifest.value("truth_file", std::string{});
    for (const auto& pair : manifest.at("mixing")) {
        if (pair.size() != 2) throw std::runtime_error("mixing entries must have 2 components");
        bundle.mixing.push_back(Eigen::Vector2d(pair[0].get<double>(), pair[1].get<double>()));
    }
    for (const auto& a : manifest.at("asd")) {
        Eigen::VectorXd v(a.size());
        for (size_t k = 0; k < a.size(); ++k) v[static_cast<Eigen::Index>(k)] = a[k].get<double>();
        if (v.size() != bundle.n) throw std::runtime_error("asd length mismatch in manifest");
        bundle.asd.push_back(std::move(v));
    }
    for (const auto& name : manifest.at("channel_files")) {
        Eigen::VectorXd y = read_observation_csv((dir / name.get<std::string>()).string());
        if (y.size() != bundle.n) throw std::runtime_error("observation length mismatch");
        bundle.observations.push_back(std::move(y));
    }
    if (bundle.mixing.size() != bundle.observations.size() ||
        bundle.asd.size() != bundle.observations.size())
        throw std::runtime_error("inconsistent channel counts in manifest");
    return bundle;
}

// ---------------------------------------------------------------------------
// solver trace, results, summaries
// ---------------------------------------------------------------------------

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    auto out = detail::open_out(path);
    out << "iter,objective,f,g1,g2,primal_err,dual_err,cg_iters,elapsed_s\n";
    for (const auto& row : trace)
        out << row.iter << ',' << format_double(row.objective) << ','
            << format_double(row.data_fidelity) << ',' << format_double(row.time_penalty) << ','
            << format_double(row.covariance_penalty) << ',' << format_double(row.primal_error)
            << ',' << format_double(row.dual_error) << ',' << row.cg_iters << ','
            << format_double(row.elapsed_s) << '\n';
}

inline void write_results_csv(const std::string& path,
                              const std::vector<ExperimentRecord>& records) {
    auto out = detail::open_out(path);
    out << "config,n,sigma,lambda1,lambda2,seed,r_snr_db,outer_iters,total_cg_iters,"
           "runtime_s,converged\n";
    for (const auto& r : records)
        out << r.config << ',' << r.n << ',' << format_double(r.sigma) << ','
            << format_double(r.lambda1) << ',' << format_double(r.lambda2) << ',' << r.seed << ','
            << format_double(r.r_snr_db) << ',' << r.outer_iters << ',' << r.total_cg_iters << ','
            << format_double(r.runtime_s) << ',' << (r.converged ? 1 : 0) << '\n';
}

inline std::vector<ExperimentRecord> read_results_csv(const std::string& path) {
    auto in = detail::open_in(path);
    detail::expect_header(in,
                          "config,n,sigma,lambda1,lambda2,seed,r_snr_db,outer_iters,"
                          "total_cg_iters,runtime_s,converged",
                          path);
    std::vector<ExperimentRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 11) throw std::runtime_error("malformed row in " + path);
        ExperimentRecord r;
        r.config = f[0];
        r.n = std::stoi(f[1]);
        r.sigma = detail::parse_double(f[2]);
        r.lambda1 = detail::parse_double(f[3]);
        r.lambda2 = detail::parse_double(f[4]);
        r.seed = std::stoull(f[5]);
        r.r_snr_db = detail::parse_double(f[6]);
        r.outer_iters = std::stoi(f[7]);
        r.total_cg_iters = std::stol(f[8]);
        r.runtime_s = detail::parse_double(f[9]);
        r.converged = f[10] == "1";
        records.push_back(std::move(r));
    }
    return records;
}

inline void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
    auto out = detail::open_out(path);
    out << "config,n,sigma,mean_r_snr_db,std_r_snr_db,mean_runtime_s,count\n";
    for (const auto& r : rows)
        out << r.config << ',' << r.n << ',' << format_double(r.sigma) << ','
            << format_double(r.mean_r_snr_db) << ',' << format_double(r.std_r_snr_db) << ','
            << format_double(r.mean_runtime_s) << ',' << r.count << '\n';
}

// ---------------------------------------------------------------------------
// solver config and plan JSON
// ---------------------------------------------------------------------------

inline json to_json(const SolverConfig& config) {
    return json{{"lambda1", config.lambda1},
                {"lambda2", config.lambda2},
                {"rho", config.rho},
                {"max_outer_iters", config.max_outer_iters},
                {"primal_tol", config.primal_tol},
                {"dual_tol", config.dual_tol},
                {"cg_tol", config.cg_tol},
                {"cg_max_iters", config.cg_max_iters},
                {"seed", config.rng_seed}};
}

inline SolverConfig solver_config_from_json(const json& j) {
    SolverConfig config;
    config.lambda1 = j.value("lambda1", config.lambda1);
    config.lambda2 = j.value("lambda2", config.lambda2);
    config.rho = j.value("rho", config.rho);
    config.max_outer_iters = j.value("max_outer_iters", config.max_outer_iters);
    config.primal_tol = j.value("primal_tol", config.primal_tol);
    config.dual_tol = j.value("dual_tol", config.dual_tol);
    config.cg_tol = j.value("cg_tol", config.cg_tol);
    config.cg_max_iters = j.value("cg_max_iters", config.cg_max_iters);
    config.rng_seed = j.value("seed", config.rng_seed);
    config.validate();
    return config;
}

inline SolverConfig read_solver_config(const std::string& path) {
    auto in = detail::open_in(path);
    return solver_config_from_json(json::parse(in));
}

inline void write_solver_config(const std::string& path, const SolverConfig& config) {
    auto out = detail::open_out(path);
    out << to_json(config).dump(2) << '\n';
}

inline json to_json(const ExperimentPlan& plan) {
    return json{{"n_values", plan.n_values},
                {"sigma_values", plan.sigma_values},
                {"lambda1_grid", plan.lambda1_grid},
                {"lambda2_grid", plan.lambda2_grid},
                {"repetitions", plan.repetitions},
                {"base_seed", plan.base_seed},
                {"configs", plan.configs},
                {"channels", plan.channel_count},
                {"solver", to_json(plan.solver)}};
}

inline ExperimentPlan plan_from_json(const json& j) {
    ExperimentPlan plan;
    if (j.contains("n_values")) plan.n_values = j.at("n_values").get<std::vector<int>>();
    if (j.contains("sigma_values"))
        plan.sigma_values = j.at("sigma_values").get<std::vector<double>>();
    if (j.contains("lambda1_grid"))
        plan.lambda1_grid = j.at("lambda1_grid").get<std::vector<double>>();
    if (j.contains("lambda2_grid"))
        plan.lambda2_grid = j.at("lambda2_grid").get<std::vector<double>>();
    plan.repetitions = j.value("repetitions", plan.repetitions);
    plan.base_seed = j.value("base_seed", plan.base_seed);
    if (j.contains("configs")) plan.configs = j.at("configs").get<std::vector<std::string>>();
    plan.channel_count = j.value("channels", plan.channel_count);
    if (j.contains("solver")) plan.solver = solver_config_from_json(j.at("solver"));
    plan.validate();
    return plan;
}

inline ExperimentPlan read_plan(const std::string& path) {
    auto in = detail::open_in(path);
    return plan_from_json(json::parse(in));
}

inline void write_plan(const std::string& path, const ExperimentPlan& plan) {
    auto out = detail::open_out(path);
    out << to_json(plan).dump(2) << '\n';
}

}  // namespace tacos::io
