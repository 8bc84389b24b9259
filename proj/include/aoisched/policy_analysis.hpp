#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "aoisched/mdp.hpp"
#include "aoisched/metrics.hpp"
#include "aoisched/solver.hpp"

namespace aoisched {

/// One slot of a simulated run: the slot-start state, the action taken, and
/// the bits delivered within the slot.
struct Trajectory {
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> states;
    std::vector<int> actions;
    std::vector<double> bits;
};

/// Batch-means summary of a simulated run (20 batches, 95% confidence).
struct SimulationSummary {
    long horizon = 0;
    std::uint64_t seed = 0;
    std::vector<double> avg_aoi;             ///< per device, slot-start average
    std::vector<double> avg_aoi_halfwidth;   ///< 95% CI half-width per device
    std::vector<std::vector<double>> batch_means;  ///< [device][batch]
    double throughput_bits_per_slot = 0.0;
    std::vector<std::size_t> transmissions;  ///< per device
    std::vector<double> mean_peak_aoi;       ///< per device; NaN below 2 packets
    std::vector<double> max_peak_aoi;
};

struct SimulationResult {
    Trajectory trajectory;
    SimulationSummary summary;
    std::vector<UpdateTrace> device_traces;  ///< generation/reception per device
};

/// Replays the policy for `horizon` slots. Channels redraw from the quantizer
/// distribution each slot; deterministic for a given seed. The default start
/// is cold: batteries empty, ages at their caps, channels drawn from the seed.
SimulationResult simulate_policy(const MdpModel& model, const Policy& policy,
                                 long horizon, std::uint64_t seed,
                                 const std::optional<SystemState>& initial = std::nullopt,
                                 bool keep_trajectory = true);

/// Fixed coordinates for the non-sliced devices (entries of the sliced device
/// are ignored). Channel levels are 1-based, ages 1-based.
struct FixRule {
    std::vector<int> battery;
    std::vector<int> channel;
    std::vector<int> aoi;
};

/// Action grid over (battery x channel) for a device at the given age values.
struct PolicySlice {
    std::size_t device = 0;
    std::vector<int> aoi_values;
    int battery_levels = 0;
    int channel_levels = 0;
    std::vector<int> actions;  ///< [aoi][battery][channel], flattened

    int action_at(std::size_t aoi_idx, int battery, int channel) const {
        return actions[(aoi_idx * battery_levels + battery) * channel_levels +
                       (channel - 1)];
    }
};

/// Extracts the action grid; requires a FixRule when the model has more than
/// one device. Independent-mode models are sliced on the diagonal
/// (uplink = downlink level).
PolicySlice policy_slice(const MdpModel& model, const Policy& policy, std::size_t device,
                         std::span<const int> aoi_values,
                         const std::optional<FixRule>& others = std::nullopt);

/// Exact action diff of two policies over the same model.
struct PolicyDiff {
    std::vector<std::size_t> states;
    std::vector<std::pair<int, int>> actions;        ///< (a-action, b-action)
    std::vector<std::vector<std::size_t>> by_battery;  ///< [device][level]
    std::vector<std::vector<std::size_t>> by_channel;  ///< [device][level-1]
    std::vector<std::vector<std::size_t>> by_aoi;      ///< [device][age-1]

    bool empty() const { return states.empty(); }
    std::size_t size() const { return states.size(); }
};

PolicyDiff compare_policies(const MdpModel& model, const Policy& a, const Policy& b);

/// CSV emitters. Slice rows: "aoi,battery,channel,action"; trajectory rows:
/// "slot,action,b_1..b_K,a_1..a_K,bits"; diff rows add both action columns.
void write_slice_csv(const PolicySlice& slice, std::ostream& out);
void write_trajectory_csv(const MdpModel& model, const Trajectory& trajectory,
                          std::ostream& out);
void write_diff_csv(const MdpModel& model, const PolicyDiff& diff, std::ostream& out);
void write_simulation_summary_json(const MdpModel& model, const SimulationSummary& summary,
                                   std::ostream& out);

}  // namespace aoisched
