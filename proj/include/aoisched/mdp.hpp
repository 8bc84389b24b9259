#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aoisched/model.hpp"

namespace aoisched {

/// Decoded MDP state: per device, battery quanta (0..L_b-1), channel level(s)
/// (1..L_h) and age (1..aoi_cap). In reciprocal mode `channel` serves both
/// link directions and `channel_down` stays empty.
struct SystemState {
    std::vector<int> battery;
    std::vector<int> channel;       ///< uplink (and downlink when reciprocal)
    std::vector<int> channel_down;  ///< independent mode only
    std::vector<int> aoi;
};

/// Harvest, or transmit from one device.
class Action {
public:
    static Action harvest() { return Action{0}; }
    static Action transmit(std::size_t device) {
        return Action{static_cast<int>(device) + 1};
    }
    static Action from_index(int index) { return Action{index}; }

    bool is_harvest() const { return index_ == 0; }
    std::size_t device() const { return static_cast<std::size_t>(index_ - 1); }
    int index() const { return index_; }
    /// "H" or "T<i>" with 1-based device numbering.
    std::string symbol() const;
    static Action parse(const std::string& symbol);

    friend bool operator==(Action a, Action b) { return a.index_ == b.index_; }

private:
    explicit Action(int index) : index_(index) {}
    int index_ = 0;
};

/// The finite average-cost scheduling MDP.
///
/// States are indexed skeleton-major: index = skeleton * channel_combos + combo,
/// where the skeleton packs each device's (battery, age) digits and the combo
/// packs the channel digits, device 1 most significant throughout. Index 0 is
/// the state with every battery empty, every channel at level 1 and every age 1.
///
/// Transitions factor: the action moves batteries and ages deterministically,
/// then every channel redraws i.i.d. uniform over levels.
class MdpModel {
public:
    static MdpModel build(const SystemConfig& config);

    const SystemConfig& config() const { return config_; }
    const ChannelQuantizer& quantizer() const { return quantizer_; }
    std::size_t device_count() const { return config_.devices.size(); }

    std::size_t state_count() const { return state_count_; }
    std::size_t skeleton_count() const { return skeleton_count_; }
    std::size_t channel_combo_count() const { return combo_count_; }
    int action_count() const { return static_cast<int>(device_count()) + 1; }

    std::size_t encode(const SystemState& state) const;
    SystemState decode(std::size_t index) const;
    std::size_t skeleton_of(std::size_t state) const { return state / combo_count_; }

    int tx_quanta(std::size_t device, int level) const { return txq_[device][level - 1]; }
    int harvest_quanta(std::size_t device, int level) const {
        return hq_[device][level - 1];
    }

    bool is_feasible(std::size_t state, Action a) const {
        return feasible_[state] & (1u << a.index());
    }
    std::uint32_t feasible_mask(std::size_t state) const { return feasible_[state]; }
    std::vector<Action> feasible_actions(std::size_t state) const;

    /// Deterministic (battery, age) part of the successor under `action_index`.
    std::uint32_t successor_skeleton(std::size_t state, int action_index) const {
        return succ_skel_[state * (device_count() + 1) + action_index];
    }
    /// Flat [state * (K+1) + action] view of the successor-skeleton table.
    const std::uint32_t* successor_skeleton_table() const { return succ_skel_.data(); }

    /// Expanded successor distribution (one entry per channel redraw),
    /// ascending state index, probabilities exactly 1/combo_count each.
    std::vector<std::pair<std::size_t, double>> transition(std::size_t state,
                                                           Action action) const;

    double stage_cost_aoi(std::size_t state, std::span<const double> weights) const;
    double stage_reward_throughput(std::size_t state, Action action) const;

    /// Age of `device` in the given skeleton (slots).
    int skeleton_age(std::size_t skeleton, std::size_t device) const;
    int skeleton_battery(std::size_t skeleton, std::size_t device) const;
    /// Per-skeleton weighted age, the AoI stage cost table for these weights.
    std::vector<double> skeleton_costs(std::span<const double> weights) const;

    /// One line per (state, feasible action):
    /// "<state_idx> <action> -> <succ>:<prob> ...". Meant for oracle diffing.
    void dump_transitions(std::ostream& out) const;

private:
    MdpModel() = default;

    SystemConfig config_;
    ChannelQuantizer quantizer_;
    std::vector<std::vector<int>> txq_;  // [device][level-1]
    std::vector<std::vector<int>> hq_;

    std::size_t state_count_ = 0;
    std::size_t skeleton_count_ = 0;
    std::size_t combo_count_ = 0;
    int channel_digits_per_device_ = 1;  // 2 in independent mode

    std::vector<std::uint32_t> feasible_;
    std::vector<std::uint32_t> succ_skel_;   // [state * (K+1) + action]
    std::vector<std::uint16_t> skel_age_;    // [skeleton * K + device], 1-based
    std::vector<std::uint16_t> skel_batt_;   // [skeleton * K + device]

    void decode_combo(std::size_t combo, std::vector<int>& up, std::vector<int>& down) const;
};

}  // namespace aoisched
