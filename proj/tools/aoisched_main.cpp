// Command-line front end. Everything substantive happens behind the C API in
// libaoisched; this file parses flags, dispatches, and writes run manifests.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aoisched.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
};

int fail(int code, const std::string& context) {
    std::cerr << "aoisched: " << context << ": " << aoisched_last_error() << "\n";
    // codes 2..4 are contractual; everything else collapses to 1
    return (code >= 2 && code <= 4) ? code : 1;
}

std::string fnv1a64_hex_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

class ManifestWriter {
public:
    ManifestWriter(std::string command, std::string out_dir)
        : command_(std::move(command)),
          out_dir_(std::move(out_dir)),
          started_(std::chrono::steady_clock::now()) {
        manifest_["tool_version"] = aoisched_version();
        manifest_["command"] = command_;
    }

    ordered_json& fields() { return manifest_; }

    std::string path(const std::string& name) {
        fs::create_directories(out_dir_);
        const std::string full = (fs::path(out_dir_) / name).string();
        outputs_.push_back(full);
        return full;
    }

    int finish() {
        const auto elapsed = std::chrono::steady_clock::now() - started_;
        manifest_["outputs"] = outputs_;
        manifest_["duration_seconds"] = std::chrono::duration<double>(elapsed).count();
        const std::string manifest_path =
            (fs::path(out_dir_) / (command_ + "_manifest.json")).string();
        std::ofstream out(manifest_path, std::ios::binary);
        if (!out) {
            std::cerr << "aoisched: cannot write " << manifest_path << "\n";
            return 1;
        }
        out << manifest_.dump(2) << "\n";
        return 0;
    }

private:
    std::string command_;
    std::string out_dir_;
    std::chrono::steady_clock::time_point started_;
    ordered_json manifest_;
    std::vector<std::string> outputs_;
};

struct ConfigHandle {
    aoisched_config* ptr = nullptr;
    ~ConfigHandle() { aoisched_config_free(ptr); }
};
struct ModelHandle {
    aoisched_model* ptr = nullptr;
    ~ModelHandle() { aoisched_model_free(ptr); }
};
struct SolutionHandle {
    aoisched_solution* ptr = nullptr;
    ~SolutionHandle() { aoisched_solution_free(ptr); }
};
struct RegionHandle {
    aoisched_region* ptr = nullptr;
    ~RegionHandle() { aoisched_region_free(ptr); }
};
struct TraceHandle {
    aoisched_trace* ptr = nullptr;
    ~TraceHandle() { aoisched_trace_free(ptr); }
};

int load_config(const CommonArgs& common, ConfigHandle& config, ManifestWriter& manifest) {
    if (int rc = aoisched_config_load_file(common.config_path.c_str(), &config.ptr))
        return fail(rc, "loading " + common.config_path);
    char hash[17] = {0};
    aoisched_config_hash_hex(config.ptr, hash, sizeof(hash));
    manifest.fields()["config_path"] = common.config_path;
    manifest.fields()["config_hash"] = hash;
    return 0;
}

int parse_objective(const std::string& name, int* out) {
    if (name == "aoi") {
        *out = AOISCHED_OBJECTIVE_AOI;
        return 0;
    }
    if (name == "throughput") {
        *out = AOISCHED_OBJECTIVE_THROUGHPUT;
        return 0;
    }
    std::cerr << "aoisched: unknown objective '" << name << "'\n";
    return 1;
}

int solve_from_config(const ConfigHandle& config, int objective,
                      const std::string& algorithm, const std::vector<double>& weights,
                      double tol, long max_iter, ModelHandle& model,
                      SolutionHandle& solution) {
    if (int rc = aoisched_model_build(config.ptr, &model.ptr))
        return fail(rc, "building the model");
    const int algo = (algorithm == "pia") ? AOISCHED_ALGORITHM_PIA : AOISCHED_ALGORITHM_RVI;
    const double* w = weights.empty() ? nullptr : weights.data();
    if (int rc = aoisched_solve(model.ptr, objective, algo, w, weights.size(), tol,
                                max_iter, &solution.ptr))
        return fail(rc, "solving");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Freshness-aware transmit/charge scheduling for RF-powered devices"};
    app.set_version_flag("--version", aoisched_version());
    app.require_subcommand(1);

    CommonArgs common;
    std::string objective_name = "aoi";
    std::string algorithm = "rvi";
    std::string weights_csv;
    double tol = 0.0;
    long max_iter = 0;
    long horizon = 100000;
    std::uint64_t seed = 1;
    bool want_trajectory = false;
    std::size_t device_1based = 1;
    std::string aoi_slice_csv;
    int fix_battery = 0, fix_channel = 1, fix_aoi = -1;
    int grid = 21, refine = 3, threads = 0;
    std::string trace_path;
    double a0 = 0.0, from = 0.0, to = 0.0;
    std::string penalty = "linear";

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", common.config_path, "configuration JSON")->required();
        cmd->add_option("--out", common.out_dir, "output directory");
    };
    auto add_solver = [&](CLI::App* cmd) {
        cmd->add_option("--objective", objective_name, "aoi | throughput");
        cmd->add_option("--algorithm", algorithm, "rvi | pia");
        cmd->add_option("--weights", weights_csv, "comma list overriding device weights");
        cmd->add_option("--tol", tol, "span tolerance (0 = default)");
        cmd->add_option("--max-iter", max_iter, "sweep limit (0 = default)");
    };

    CLI::App* solve = app.add_subcommand("solve", "optimal policy and its averages");
    add_config(solve);
    add_solver(solve);

    CLI::App* simulate = app.add_subcommand("simulate", "replay the optimal policy");
    add_config(simulate);
    add_solver(simulate);
    simulate->add_option("--horizon", horizon, "slots to simulate");
    simulate->add_option("--seed", seed, "channel RNG seed");
    simulate->add_flag("--trajectory-csv", want_trajectory,
                       "also write the full per-slot trajectory (large)");

    CLI::App* slice = app.add_subcommand("slice", "policy action grid per age value");
    add_config(slice);
    add_solver(slice);
    slice->add_option("--device", device_1based, "device to slice (1-based)");
    slice->add_option("--aoi-slice", aoi_slice_csv, "comma list of age values");
    slice->add_option("--fix-battery", fix_battery, "battery pinned on other devices");
    slice->add_option("--fix-channel", fix_channel, "channel level pinned on other devices");
    slice->add_option("--fix-aoi", fix_aoi, "age pinned on other devices (-1 = cap)");

    CLI::App* region = app.add_subcommand("region", "achievable-age region sweep");
    add_config(region);
    region->add_option("--grid", grid, "weight points per simplex axis");
    region->add_option("--refine", refine, "min-max refinement rounds");
    region->add_option("--threads", threads, "worker cap (0 = hardware)");
    region->add_option("--tol", tol, "span tolerance (0 = default)");
    region->add_option("--max-iter", max_iter, "sweep limit (0 = default)");

    CLI::App* metrics = app.add_subcommand("metrics", "freshness metrics of a trace");
    metrics->add_option("--trace", trace_path, "update trace CSV (n,t_gen,t_recv)")
        ->required();
    metrics->add_option("--out", common.out_dir, "output directory");
    metrics->add_option("--a0", a0, "age at the observation start");
    auto* from_opt = metrics->add_option("--from", from, "window start (default: whole trace)");
    metrics->add_option("--to", to, "window end")->needs(from_opt);
    metrics->add_option("--penalty", penalty, "linear | quadratic staleness cost");

    CLI::App* validate = app.add_subcommand("validate", "echo derived values and warnings");
    add_config(validate);

    CLI11_PARSE(app, argc, argv);

    std::vector<double> weights;
    if (!weights_csv.empty()) {
        std::istringstream ss(weights_csv);
        std::string field;
        while (std::getline(ss, field, ',')) weights.push_back(std::stod(field));
    }

    if (solve->parsed()) {
        ManifestWriter manifest("solve", common.out_dir);
        ConfigHandle config;
        if (int rc = load_config(common, config, manifest)) return rc;
        int objective = 0;
        if (parse_objective(objective_name, &objective)) return 1;
        manifest.fields()["parameters"] = {{"objective", objective_name},
                                           {"algorithm", algorithm},
                                           {"weights", weights},
                                           {"tol", tol},
                                           {"max_iter", max_iter}};
        ModelHandle model;
        SolutionHandle solution;
        if (int rc = solve_from_config(config, objective, algorithm, weights, tol,
                                       max_iter, model, solution))
            return rc;
        const std::string json_path = manifest.path("solve.json");
        if (int rc = aoisched_solution_write_json(solution.ptr, json_path.c_str()))
            return fail(rc, "writing " + json_path);
        const std::string csv_path = manifest.path("policy.csv");
        if (int rc = aoisched_solution_write_policy_csv(solution.ptr, csv_path.c_str()))
            return fail(rc, "writing " + csv_path);
        double gain = 0.0;
        aoisched_solution_gain(solution.ptr, &gain);
        std::cerr << "gain " << gain << " (" << objective_name << "), outputs in "
                  << common.out_dir << "\n";
        return manifest.finish();
    }

    if (simulate->parsed()) {
        ManifestWriter manifest("simulate", common.out_dir);
        ConfigHandle config;
        if (int rc = load_config(common, config, manifest)) return rc;
        int objective = 0;
        if (parse_objective(objective_name, &objective)) return 1;
        manifest.fields()["parameters"] = {{"objective", objective_name},
                                           {"algorithm", algorithm},
                                           {"horizon", horizon},
                                           {"trajectory_csv", want_trajectory}};
        manifest.fields()["seed"] = seed;
        ModelHandle model;
        SolutionHandle solution;
        if (int rc = solve_from_config(config, objective, algorithm, weights, tol,
                                       max_iter, model, solution))
            return rc;
        std::string trajectory_path;
        if (want_trajectory) trajectory_path = manifest.path("trajectory.csv");
        const std::string summary_path = manifest.path("simulate_summary.json");
        if (int rc = aoisched_simulate(solution.ptr, horizon, seed,
                                       want_trajectory ? trajectory_path.c_str() : nullptr,
                                       summary_path.c_str()))
            return fail(rc, "simulating");
        return manifest.finish();
    }

    if (slice->parsed()) {
        ManifestWriter manifest("slice", common.out_dir);
        ConfigHandle config;
        if (int rc = load_config(common, config, manifest)) return rc;
        int objective = 0;
        if (parse_objective(objective_name, &objective)) return 1;
        std::size_t devices = 0;
        aoisched_config_device_count(config.ptr, &devices);
        if (device_1based < 1 || device_1based > devices) {
            std::cerr << "aoisched: --device out of range\n";
            return 1;
        }
        std::vector<int> ages;
        if (!aoi_slice_csv.empty()) {
            std::istringstream ss(aoi_slice_csv);
            std::string field;
            while (std::getline(ss, field, ',')) ages.push_back(std::stoi(field));
        } else {
            int cap = 0;
            aoisched_config_aoi_cap(config.ptr, device_1based - 1, &cap);
            ages = {1, cap};  // the endpoints of the age range
        }
        manifest.fields()["parameters"] = {{"objective", objective_name},
                                           {"device", device_1based},
                                           {"aoi_slice", ages}};
        ModelHandle model;
        SolutionHandle solution;
        if (int rc = solve_from_config(config, objective, algorithm, weights, tol,
                                       max_iter, model, solution))
            return rc;
        const std::string csv_path = manifest.path("slice.csv");
        int rc;
        if (devices == 1) {
            rc = aoisched_policy_slice(solution.ptr, 0, ages.data(), ages.size(), nullptr,
                                       nullptr, nullptr, csv_path.c_str());
        } else {
            std::vector<int> fb(devices, fix_battery), fh(devices, fix_channel),
                fa(devices);
            for (std::size_t d = 0; d < devices; ++d) {
                int cap = 0;
                aoisched_config_aoi_cap(config.ptr, d, &cap);
                fa[d] = (fix_aoi > 0) ? fix_aoi : cap;
            }
            manifest.fields()["parameters"]["fix_battery"] = fix_battery;
            manifest.fields()["parameters"]["fix_channel"] = fix_channel;
            manifest.fields()["parameters"]["fix_aoi"] = fix_aoi;
            rc = aoisched_policy_slice(solution.ptr, device_1based - 1, ages.data(),
                                       ages.size(), fb.data(), fh.data(), fa.data(),
                                       csv_path.c_str());
        }
        if (rc) return fail(rc, "slicing");
        return manifest.finish();
    }

    if (region->parsed()) {
        ManifestWriter manifest("region", common.out_dir);
        ConfigHandle config;
        if (int rc = load_config(common, config, manifest)) return rc;
        manifest.fields()["parameters"] = {{"grid", grid},
                                           {"refine", refine},
                                           {"threads", threads},
                                           {"tol", tol},
                                           {"max_iter", max_iter}};
        RegionHandle sweep;
        if (int rc = aoisched_region_sweep(config.ptr, grid, refine, threads, tol,
                                           max_iter, &sweep.ptr))
            return fail(rc, "sweeping the region");
        const std::string sweep_path = manifest.path("region_sweep.csv");
        if (int rc = aoisched_region_write_sweep_csv(sweep.ptr, sweep_path.c_str()))
            return fail(rc, "writing " + sweep_path);
        const std::string frontier_path = manifest.path("region_frontier.csv");
        if (int rc = aoisched_region_write_frontier_csv(sweep.ptr, frontier_path.c_str()))
            return fail(rc, "writing " + frontier_path);
        const std::string points_path = manifest.path("region_points.csv");
        if (int rc = aoisched_region_write_points_csv(sweep.ptr, points_path.c_str()))
            return fail(rc, "writing " + points_path);
        return manifest.finish();
    }

    if (metrics->parsed()) {
        ManifestWriter manifest("metrics", common.out_dir);
        manifest.fields()["trace_path"] = trace_path;
        manifest.fields()["trace_hash"] = fnv1a64_hex_file(trace_path);
        const bool have_window = from_opt->count() > 0;
        manifest.fields()["parameters"] = {{"a0", a0},
                                           {"penalty", penalty},
                                           {"windowed", have_window}};
        TraceHandle trace;
        if (int rc = aoisched_trace_load_csv(trace_path.c_str(), &trace.ptr))
            return fail(rc, "loading " + trace_path);
        const int degree = (penalty == "quadratic") ? 2 : 1;
        const std::string summary_path = manifest.path("metrics_summary.csv");
        const std::string packets_path = manifest.path("metrics_packets.csv");
        if (int rc = aoisched_trace_metrics_csv(trace.ptr, a0, from, to,
                                                have_window ? 1 : 0, degree,
                                                summary_path.c_str(), packets_path.c_str()))
            return fail(rc, "computing metrics");
        return manifest.finish();
    }

    if (validate->parsed()) {
        ManifestWriter manifest("validate", common.out_dir);
        ConfigHandle config;
        if (int rc = load_config(common, config, manifest)) return rc;
        manifest.fields()["parameters"] = ordered_json::object();
        const std::string report_path = manifest.path("validate.json");
        if (int rc = aoisched_config_validation_report(config.ptr, report_path.c_str()))
            return fail(rc, "validating");
        // echo the derived values so unit mistakes are visible at a glance
        std::ifstream report(report_path);
        std::cout << report.rdbuf();
        ordered_json parsed;
        {
            std::ifstream again(report_path);
            again >> parsed;
        }
        for (const auto& warning : parsed["warnings"])
            std::cerr << "warning: " << warning.get<std::string>() << "\n";
        return manifest.finish();
    }

    return 1;
}
