#include "aoisched.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "aoisched/config_io.hpp"
#include "aoisched/errors.hpp"
#include "aoisched/mdp.hpp"
#include "aoisched/metrics.hpp"
#include "aoisched/policy_analysis.hpp"
#include "aoisched/region.hpp"
#include "aoisched/solver.hpp"

using namespace aoisched;

struct aoisched_config {
    SystemConfig config;
    std::string hash_hex;
};

struct aoisched_model {
    std::shared_ptr<const MdpModel> model;
};

struct aoisched_solution {
    std::shared_ptr<const MdpModel> model;
    SolveResult result;
    PolicyEvaluation eval;
    std::vector<double> weights;
};

struct aoisched_region {
    RegionResult result;
    std::size_t devices = 0;
};

struct aoisched_trace {
    UpdateTrace trace;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return AOISCHED_OK;
    } catch (const InvalidConfigError& e) {
        return set_error(AOISCHED_ERR_INVALID_CONFIG, e.what());
    } catch (const CapacityError& e) {
        return set_error(AOISCHED_ERR_CAPACITY, e.what());
    } catch (const ConvergenceError& e) {
        return set_error(AOISCHED_ERR_NO_CONVERGENCE, e.what());
    } catch (const InvalidRequestError& e) {
        return set_error(AOISCHED_ERR_INVALID_ARGUMENT, e.what());
    } catch (const IoError& e) {
        return set_error(AOISCHED_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return set_error(AOISCHED_ERR_INTERNAL, e.what());
    }
}

int require(bool ok, const char* what) {
    if (ok) return AOISCHED_OK;
    return set_error(AOISCHED_ERR_INVALID_ARGUMENT, what);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

}  // namespace

extern "C" {

const char* aoisched_version(void) { return "0.1.0"; }

const char* aoisched_last_error(void) { return g_last_error.c_str(); }

/* ---- configuration ---------------------------------------------------- */

int aoisched_config_load_file(const char* path, aoisched_config** out) {
    if (int rc = require(path && out, "null argument")) return rc;
    return guarded([&] {
        std::string bytes;
        auto handle = std::make_unique<aoisched_config>();
        handle->config = load_config(path, &bytes);
        handle->hash_hex = fnv1a64_hex(bytes);
        *out = handle.release();
    });
}

int aoisched_config_load_json(const char* json_text, aoisched_config** out) {
    if (int rc = require(json_text && out, "null argument")) return rc;
    return guarded([&] {
        auto handle = std::make_unique<aoisched_config>();
        handle->config = parse_config_json(json_text);
        handle->hash_hex = fnv1a64_hex(json_text);
        *out = handle.release();
    });
}

void aoisched_config_free(aoisched_config* config) { delete config; }

int aoisched_config_device_count(const aoisched_config* config, size_t* out) {
    if (int rc = require(config && out, "null argument")) return rc;
    *out = config->config.device_count();
    return AOISCHED_OK;
}

int aoisched_config_aoi_cap(const aoisched_config* config, size_t device, int* out) {
    if (int rc = require(config && out, "null argument")) return rc;
    if (int rc = require(device < config->config.device_count(), "device out of range"))
        return rc;
    *out = config->config.devices[device].aoi_cap;
    return AOISCHED_OK;
}

int aoisched_config_hash_hex(const aoisched_config* config, char* buf, size_t buflen) {
    if (int rc = require(config && buf, "null argument")) return rc;
    if (int rc = require(buflen > config->hash_hex.size(), "buffer too small")) return rc;
    std::memcpy(buf, config->hash_hex.c_str(), config->hash_hex.size() + 1);
    return AOISCHED_OK;
}

int aoisched_config_validation_report(const aoisched_config* config,
                                      const char* json_path_or_null) {
    if (int rc = require(config != nullptr, "null argument")) return rc;
    return guarded([&] {
        const ValidationReport report = validation_report(config->config);
        if (json_path_or_null) open_out(json_path_or_null) << report.json;
    });
}

int aoisched_config_state_count(const aoisched_config* config, uint64_t* out) {
    if (int rc = require(config && out, "null argument")) return rc;
    return guarded([&] { *out = validation_report(config->config).state_count; });
}

/* ---- model ------------------------------------------------------------ */

int aoisched_model_build(const aoisched_config* config, aoisched_model** out) {
    if (int rc = require(config && out, "null argument")) return rc;
    return guarded([&] {
        auto handle = std::make_unique<aoisched_model>();
        handle->model = std::make_shared<const MdpModel>(MdpModel::build(config->config));
        *out = handle.release();
    });
}

void aoisched_model_free(aoisched_model* model) { delete model; }

int aoisched_model_state_count(const aoisched_model* model, size_t* out) {
    if (int rc = require(model && out, "null argument")) return rc;
    *out = model->model->state_count();
    return AOISCHED_OK;
}

int aoisched_model_dump_transitions(const aoisched_model* model, const char* path) {
    if (int rc = require(model && path, "null argument")) return rc;
    return guarded([&] {
        auto out = open_out(path);
        model->model->dump_transitions(out);
    });
}

/* ---- solving ---------------------------------------------------------- */

int aoisched_solve(const aoisched_model* model, int objective, int algorithm,
                   const double* weights_or_null, size_t weights_len, double tol,
                   long max_iter, aoisched_solution** out) {
    if (int rc = require(model && out, "null argument")) return rc;
    if (int rc = require(objective == AOISCHED_OBJECTIVE_AOI ||
                             objective == AOISCHED_OBJECTIVE_THROUGHPUT,
                         "unknown objective"))
        return rc;
    if (int rc = require(algorithm == AOISCHED_ALGORITHM_RVI ||
                             algorithm == AOISCHED_ALGORITHM_PIA,
                         "unknown algorithm"))
        return rc;
    return guarded([&] {
        const MdpModel& m = *model->model;
        std::vector<double> weights;
        if (weights_or_null) {
            if (weights_len != m.device_count())
                throw InvalidConfigError("weights arity mismatch");
            weights.assign(weights_or_null, weights_or_null + weights_len);
        } else {
            for (const auto& d : m.config().devices) weights.push_back(d.weight);
        }
        SolverOptions options;
        if (tol > 0.0) options.tol = tol;
        if (max_iter > 0) options.max_iter = max_iter;

        auto handle = std::make_unique<aoisched_solution>();
        handle->model = model->model;
        handle->weights = weights;
        const Objective obj = (objective == AOISCHED_OBJECTIVE_AOI)
                                  ? Objective::AoI
                                  : Objective::Throughput;
        handle->result = (algorithm == AOISCHED_ALGORITHM_RVI)
                             ? relative_value_iteration(m, obj, weights, options)
                             : policy_iteration(m, obj, weights, options);
        handle->eval = evaluate_policy(m, handle->result.policy, weights);
        *out = handle.release();
    });
}

void aoisched_solution_free(aoisched_solution* solution) { delete solution; }

int aoisched_solution_gain(const aoisched_solution* solution, double* out) {
    if (int rc = require(solution && out, "null argument")) return rc;
    *out = solution->result.gain;
    return AOISCHED_OK;
}

int aoisched_solution_iterations(const aoisched_solution* solution, long* out) {
    if (int rc = require(solution && out, "null argument")) return rc;
    *out = static_cast<long>(solution->result.iterations);
    return AOISCHED_OK;
}

int aoisched_solution_residual(const aoisched_solution* solution, double* out) {
    if (int rc = require(solution && out, "null argument")) return rc;
    *out = solution->result.residual;
    return AOISCHED_OK;
}

int aoisched_solution_throughput(const aoisched_solution* solution, double* out) {
    if (int rc = require(solution && out, "null argument")) return rc;
    *out = solution->eval.throughput_bits_per_slot;
    return AOISCHED_OK;
}

int aoisched_solution_avg_aoi(const aoisched_solution* solution, double* buf,
                              size_t buflen) {
    if (int rc = require(solution && buf, "null argument")) return rc;
    const auto& aoi = solution->eval.avg_aoi;
    if (int rc = require(buflen >= aoi.size(), "buffer too small")) return rc;
    std::memcpy(buf, aoi.data(), aoi.size() * sizeof(double));
    return AOISCHED_OK;
}

int aoisched_solution_action(const aoisched_solution* solution, size_t state_index,
                             int* out) {
    if (int rc = require(solution && out, "null argument")) return rc;
    if (int rc = require(state_index < solution->result.policy.actions.size(),
                         "state index out of range"))
        return rc;
    *out = solution->result.policy.actions[state_index];
    return AOISCHED_OK;
}

int aoisched_solution_write_json(const aoisched_solution* solution, const char* path) {
    if (int rc = require(solution && path, "null argument")) return rc;
    return guarded([&] {
        auto out = open_out(path);
        write_solve_json(*solution->model, solution->result, solution->eval, out);
    });
}

int aoisched_solution_write_policy_csv(const aoisched_solution* solution,
                                       const char* path) {
    if (int rc = require(solution && path, "null argument")) return rc;
    return guarded([&] {
        auto out = open_out(path);
        write_policy_csv(*solution->model, solution->result.policy, out);
    });
}

/* ---- simulation, slices, diffs ----------------------------------------- */

int aoisched_simulate(const aoisched_solution* solution, long horizon, uint64_t seed,
                      const char* trajectory_csv_or_null, const char* summary_json_path) {
    if (int rc = require(solution && summary_json_path, "null argument")) return rc;
    return guarded([&] {
        const SimulationResult sim =
            simulate_policy(*solution->model, solution->result.policy, horizon, seed,
                            std::nullopt, trajectory_csv_or_null != nullptr);
        if (trajectory_csv_or_null) {
            auto out = open_out(trajectory_csv_or_null);
            write_trajectory_csv(*solution->model, sim.trajectory, out);
        }
        auto out = open_out(summary_json_path);
        write_simulation_summary_json(*solution->model, sim.summary, out);
    });
}

int aoisched_policy_slice(const aoisched_solution* solution, size_t device,
                          const int* aoi_values, size_t aoi_values_len,
                          const int* fix_battery_or_null, const int* fix_channel_or_null,
                          const int* fix_aoi_or_null, const char* csv_path) {
    if (int rc = require(solution && aoi_values && csv_path, "null argument")) return rc;
    return guarded([&] {
        const std::size_t devices = solution->model->device_count();
        std::optional<FixRule> fix;
        if (fix_battery_or_null || fix_channel_or_null || fix_aoi_or_null) {
            if (!(fix_battery_or_null && fix_channel_or_null && fix_aoi_or_null))
                throw InvalidRequestError(
                    "fixing rule needs battery, channel and age arrays together");
            FixRule rule;
            rule.battery.assign(fix_battery_or_null, fix_battery_or_null + devices);
            rule.channel.assign(fix_channel_or_null, fix_channel_or_null + devices);
            rule.aoi.assign(fix_aoi_or_null, fix_aoi_or_null + devices);
            fix = std::move(rule);
        }
        const PolicySlice slice = policy_slice(
            *solution->model, solution->result.policy, device,
            std::span<const int>(aoi_values, aoi_values_len), fix);
        auto out = open_out(csv_path);
        write_slice_csv(slice, out);
    });
}

int aoisched_policy_diff(const aoisched_solution* a, const aoisched_solution* b,
                         const char* diff_csv_or_null, size_t* differences_out) {
    if (int rc = require(a && b, "null argument")) return rc;
    return guarded([&] {
        if (a->model->state_count() != b->model->state_count())
            throw InvalidRequestError("solutions cover different state spaces");
        const PolicyDiff diff =
            compare_policies(*a->model, a->result.policy, b->result.policy);
        if (diff_csv_or_null) {
            auto out = open_out(diff_csv_or_null);
            write_diff_csv(*a->model, diff, out);
        }
        if (differences_out) *differences_out = diff.size();
    });
}

/* ---- achievable-age region --------------------------------------------- */

int aoisched_region_sweep(const aoisched_config* config, int grid, int refine,
                          int threads, double tol, long max_iter,
                          aoisched_region** out) {
    if (int rc = require(config && out, "null argument")) return rc;
    return guarded([&] {
        RegionOptions options;
        options.grid = grid;
        options.refine = refine;
        options.threads = threads;
        if (tol > 0.0) options.solver.tol = tol;
        if (max_iter > 0) options.solver.max_iter = max_iter;
        auto handle = std::make_unique<aoisched_region>();
        handle->result = compute_region(config->config, options);
        handle->devices = config->config.device_count();
        *out = handle.release();
    });
}

void aoisched_region_free(aoisched_region* region) { delete region; }

int aoisched_region_point_count(const aoisched_region* region, size_t* out) {
    if (int rc = require(region && out, "null argument")) return rc;
    *out = region->result.sweep.size();
    return AOISCHED_OK;
}

int aoisched_region_write_sweep_csv(const aoisched_region* region, const char* path) {
    if (int rc = require(region && path, "null argument")) return rc;
    return guarded([&] {
        auto out = open_out(path);
        write_region_csv(region->result.sweep, region->devices, out);
    });
}

int aoisched_region_write_frontier_csv(const aoisched_region* region, const char* path) {
    if (int rc = require(region && path, "null argument")) return rc;
    return guarded([&] {
        auto out = open_out(path);
        write_region_csv(region->result.frontier, region->devices, out);
    });
}

int aoisched_region_write_points_csv(const aoisched_region* region, const char* path) {
    if (int rc = require(region && path, "null argument")) return rc;
    return guarded([&] {
        auto out = open_out(path);
        write_region_csv({region->result.sum, region->result.minmax}, region->devices,
                         out);
    });
}

/* ---- update-trace metrics ---------------------------------------------- */

int aoisched_trace_load_csv(const char* path, aoisched_trace** out) {
    if (int rc = require(path && out, "null argument")) return rc;
    return guarded([&] {
        auto handle = std::make_unique<aoisched_trace>();
        handle->trace = load_trace_csv(path);
        *out = handle.release();
    });
}

void aoisched_trace_free(aoisched_trace* trace) { delete trace; }

int aoisched_trace_packet_count(const aoisched_trace* trace, size_t* out) {
    if (int rc = require(trace && out, "null argument")) return rc;
    *out = trace->trace.size();
    return AOISCHED_OK;
}

int aoisched_trace_metrics_csv(const aoisched_trace* trace, double initial_age,
                               double t_from, double t_to, int use_window,
                               int penalty_degree, const char* summary_csv_path,
                               const char* per_packet_csv_path) {
    if (int rc = require(trace && summary_csv_path && per_packet_csv_path,
                         "null argument"))
        return rc;
    if (int rc = require(penalty_degree == 1 || penalty_degree == 2,
                         "penalty_degree must be 1 (linear) or 2 (quadratic)"))
        return rc;
    return guarded([&] {
        const UpdateTrace& t = trace->trace;
        if (t.empty()) throw InvalidRequestError("empty trace");
        double a = t_from, b = t_to;
        if (!use_window) {
            a = t.packets().front().generated;
            b = t.packets().back().received;
            if (!(b > a)) b = a + 1.0;  // a single instantaneous packet
        }
        const PenaltyFunction penalty = (penalty_degree == 1)
                                            ? PenaltyFunction::linear()
                                            : PenaltyFunction::polynomial(0.0, 0.0, 1.0);
        {
            auto out = open_out(summary_csv_path);
            write_metrics_summary_csv(t, penalty, a, b, initial_age, out);
        }
        auto out = open_out(per_packet_csv_path);
        write_per_packet_csv(t, out);
    });
}

} /* extern "C" */
