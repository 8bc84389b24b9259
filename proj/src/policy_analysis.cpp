#include "aoisched/policy_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "aoisched/errors.hpp"
#include "json.hpp"

namespace aoisched {

namespace {

constexpr int kBatches = 20;
constexpr double kT975Df19 = 2.093024054408263;  // two-sided 95%, 19 dof

}  // namespace

SimulationResult simulate_policy(const MdpModel& model, const Policy& policy,
                                 long horizon, std::uint64_t seed,
                                 const std::optional<SystemState>& initial,
                                 bool keep_trajectory) {
    if (horizon < 1) throw InvalidRequestError("horizon must be >= 1");
    if (policy.actions.size() != model.state_count())
        throw InvalidRequestError("policy arity does not match the model");

    const std::size_t K = model.device_count();
    const int Lh = model.config().channel_levels;
    const bool independent = model.config().channel_mode == ChannelMode::Independent;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> level(1, Lh);

    SystemState state;
    if (initial) {
        state = *initial;
        model.encode(state);  // validates ranges
    } else {
        state.battery.assign(K, 0);
        state.aoi.resize(K);
        for (std::size_t d = 0; d < K; ++d) state.aoi[d] = model.config().devices[d].aoi_cap;
        state.channel.resize(K);
        if (independent) state.channel_down.resize(K);
        for (std::size_t d = 0; d < K; ++d) {
            state.channel[d] = level(rng);
            if (independent) state.channel_down[d] = level(rng);
        }
    }

    SimulationResult result;
    result.trajectory.seed = seed;
    if (keep_trajectory) {
        result.trajectory.states.reserve(horizon);
        result.trajectory.actions.reserve(horizon);
        result.trajectory.bits.reserve(horizon);
    }

    std::vector<std::vector<UpdatePacket>> packets(K);
    std::vector<double> age_sum(K, 0.0);
    std::vector<std::vector<double>> batch_sums(K, std::vector<double>(kBatches, 0.0));
    std::vector<std::size_t> transmissions(K, 0);
    const long batch_size = std::max<long>(1, horizon / kBatches);
    double total_bits = 0.0;
    const double T = model.config().slot_duration;

    for (long slot = 0; slot < horizon; ++slot) {
        const std::size_t index = model.encode(state);
        const int a = policy.actions[index];
        if (!model.is_feasible(index, Action::from_index(a)))
            throw InvalidRequestError("policy assigns an infeasible action at state " +
                                      std::to_string(index));
        const int batch = std::min<long>(slot / batch_size, kBatches - 1);
        for (std::size_t d = 0; d < K; ++d) {
            age_sum[d] += state.aoi[d];
            batch_sums[d][batch] += state.aoi[d];
        }
        double bits = 0.0;
        if (a > 0) {
            const std::size_t j = static_cast<std::size_t>(a - 1);
            bits = model.config().devices[j].packet_size;
            ++transmissions[j];
            // generated at slot start, delivered by slot end
            packets[j].push_back({slot * T, (slot + 1) * T});
        }
        total_bits += bits;
        if (keep_trajectory) {
            result.trajectory.states.push_back(static_cast<std::uint32_t>(index));
            result.trajectory.actions.push_back(a);
            result.trajectory.bits.push_back(bits);
        }

        // advance: deterministic battery/age move, then channel redraw
        if (a == 0) {
            for (std::size_t d = 0; d < K; ++d) {
                const int down = independent ? state.channel_down[d] : state.channel[d];
                state.battery[d] = std::min(model.config().battery_levels - 1,
                                            state.battery[d] + model.harvest_quanta(d, down));
                state.aoi[d] = std::min(state.aoi[d] + 1, model.config().devices[d].aoi_cap);
            }
        } else {
            const std::size_t j = static_cast<std::size_t>(a - 1);
            for (std::size_t d = 0; d < K; ++d) {
                if (d == j) continue;
                state.aoi[d] = std::min(state.aoi[d] + 1, model.config().devices[d].aoi_cap);
            }
            state.battery[j] -= model.tx_quanta(j, state.channel[j]);
            state.aoi[j] = 1;
        }
        for (std::size_t d = 0; d < K; ++d) {
            state.channel[d] = level(rng);
            if (independent) state.channel_down[d] = level(rng);
        }
    }

    SimulationSummary& s = result.summary;
    s.horizon = horizon;
    s.seed = seed;
    s.avg_aoi.resize(K);
    s.avg_aoi_halfwidth.resize(K);
    s.batch_means.assign(K, std::vector<double>(kBatches, 0.0));
    s.transmissions = transmissions;
    s.throughput_bits_per_slot = total_bits / static_cast<double>(horizon);
    for (std::size_t d = 0; d < K; ++d) {
        s.avg_aoi[d] = age_sum[d] / static_cast<double>(horizon);
        double mean = 0.0;
        for (int b = 0; b < kBatches; ++b) {
            const long lo = b * batch_size;
            const long hi = (b == kBatches - 1) ? horizon : (b + 1) * batch_size;
            s.batch_means[d][b] = batch_sums[d][b] / static_cast<double>(std::max<long>(1, hi - lo));
            mean += s.batch_means[d][b];
        }
        mean /= kBatches;
        double var = 0.0;
        for (int b = 0; b < kBatches; ++b) {
            const double dev = s.batch_means[d][b] - mean;
            var += dev * dev;
        }
        var /= (kBatches - 1);
        s.avg_aoi_halfwidth[d] = kT975Df19 * std::sqrt(var / kBatches);
    }

    s.mean_peak_aoi.assign(K, std::numeric_limits<double>::quiet_NaN());
    s.max_peak_aoi.assign(K, std::numeric_limits<double>::quiet_NaN());
    result.device_traces.reserve(K);
    for (std::size_t d = 0; d < K; ++d) {
        result.device_traces.emplace_back(std::move(packets[d]));
        const UpdateTrace& trace = result.device_traces.back();
        if (trace.size() >= 2) {
            const auto peaks = peak_aoi(trace);
            s.mean_peak_aoi[d] =
                std::accumulate(peaks.begin(), peaks.end(), 0.0) / peaks.size();
            s.max_peak_aoi[d] = *std::max_element(peaks.begin(), peaks.end());
        }
    }
    return result;
}

PolicySlice policy_slice(const MdpModel& model, const Policy& policy, std::size_t device,
                         std::span<const int> aoi_values,
                         const std::optional<FixRule>& others) {
    const std::size_t K = model.device_count();
    if (device >= K) throw InvalidRequestError("device index out of range");
    if (policy.actions.size() != model.state_count())
        throw InvalidRequestError("policy arity does not match the model");
    if (aoi_values.empty()) throw InvalidRequestError("no age values requested");
    if (K > 1 && !others)
        throw InvalidRequestError(
            "slicing a multi-device model needs a fixing rule for the other devices");

    SystemState state;
    state.battery.assign(K, 0);
    state.channel.assign(K, 1);
    state.aoi.assign(K, 1);
    if (model.config().channel_mode == ChannelMode::Independent)
        state.channel_down.assign(K, 1);
    if (others) {
        if (others->battery.size() != K || others->channel.size() != K ||
            others->aoi.size() != K)
            throw InvalidRequestError("fixing rule must cover every device");
        for (std::size_t d = 0; d < K; ++d) {
            if (d == device) continue;
            state.battery[d] = others->battery[d];
            state.channel[d] = others->channel[d];
            state.aoi[d] = others->aoi[d];
            if (!state.channel_down.empty()) state.channel_down[d] = others->channel[d];
        }
    }

    PolicySlice slice;
    slice.device = device;
    slice.aoi_values.assign(aoi_values.begin(), aoi_values.end());
    slice.battery_levels = model.config().battery_levels;
    slice.channel_levels = model.config().channel_levels;
    slice.actions.resize(aoi_values.size() * slice.battery_levels * slice.channel_levels);

    std::size_t at = 0;
    for (int age : aoi_values) {
        if (age < 1 || age > model.config().devices[device].aoi_cap)
            throw InvalidRequestError("requested age outside this device's range");
        state.aoi[device] = age;
        for (int b = 0; b < slice.battery_levels; ++b) {
            state.battery[device] = b;
            for (int h = 1; h <= slice.channel_levels; ++h) {
                state.channel[device] = h;
                if (!state.channel_down.empty()) state.channel_down[device] = h;
                slice.actions[at++] = policy.actions[model.encode(state)];
            }
        }
    }
    return slice;
}

PolicyDiff compare_policies(const MdpModel& model, const Policy& a, const Policy& b) {
    if (a.actions.size() != model.state_count() || b.actions.size() != model.state_count())
        throw InvalidRequestError("policies must cover the same state space");
    const std::size_t K = model.device_count();
    PolicyDiff diff;
    diff.by_battery.assign(K, std::vector<std::size_t>(model.config().battery_levels, 0));
    diff.by_channel.assign(K, std::vector<std::size_t>(model.config().channel_levels, 0));
    diff.by_aoi.resize(K);
    for (std::size_t d = 0; d < K; ++d)
        diff.by_aoi[d].assign(model.config().devices[d].aoi_cap, 0);

    for (std::size_t s = 0; s < model.state_count(); ++s) {
        if (a.actions[s] == b.actions[s]) continue;
        diff.states.push_back(s);
        diff.actions.emplace_back(a.actions[s], b.actions[s]);
        const SystemState st = model.decode(s);
        for (std::size_t d = 0; d < K; ++d) {
            ++diff.by_battery[d][st.battery[d]];
            ++diff.by_channel[d][st.channel[d] - 1];
            ++diff.by_aoi[d][st.aoi[d] - 1];
        }
    }
    return diff;
}

void write_slice_csv(const PolicySlice& slice, std::ostream& out) {
    out << "aoi,battery,channel,action\n";
    std::size_t at = 0;
    for (int age : slice.aoi_values)
        for (int b = 0; b < slice.battery_levels; ++b)
            for (int h = 1; h <= slice.channel_levels; ++h)
                out << age << ',' << b << ',' << h << ','
                    << Action::from_index(slice.actions[at++]).symbol() << '\n';
}

void write_trajectory_csv(const MdpModel& model, const Trajectory& trajectory,
                          std::ostream& out) {
    const std::size_t K = model.device_count();
    out << "slot,action";
    for (std::size_t d = 1; d <= K; ++d) out << ",b_" << d;
    for (std::size_t d = 1; d <= K; ++d) out << ",a_" << d;
    out << ",bits\n";
    for (std::size_t slot = 0; slot < trajectory.states.size(); ++slot) {
        const SystemState st = model.decode(trajectory.states[slot]);
        out << slot << ',' << Action::from_index(trajectory.actions[slot]).symbol();
        for (std::size_t d = 0; d < K; ++d) out << ',' << st.battery[d];
        for (std::size_t d = 0; d < K; ++d) out << ',' << st.aoi[d];
        out << ',' << trajectory.bits[slot] << '\n';
    }
}

void write_diff_csv(const MdpModel& model, const PolicyDiff& diff, std::ostream& out) {
    const std::size_t K = model.device_count();
    const bool independent = model.config().channel_mode == ChannelMode::Independent;
    out << "state_idx";
    for (std::size_t d = 1; d <= K; ++d) {
        out << ",b_" << d;
        if (independent)
            out << ",hup_" << d << ",hdn_" << d;
        else
            out << ",h_" << d;
        out << ",a_" << d;
    }
    out << ",action_a,action_b\n";
    for (std::size_t i = 0; i < diff.states.size(); ++i) {
        const SystemState st = model.decode(diff.states[i]);
        out << diff.states[i];
        for (std::size_t d = 0; d < K; ++d) {
            out << ',' << st.battery[d] << ',' << st.channel[d];
            if (independent) out << ',' << st.channel_down[d];
            out << ',' << st.aoi[d];
        }
        out << ',' << Action::from_index(diff.actions[i].first).symbol() << ','
            << Action::from_index(diff.actions[i].second).symbol() << '\n';
    }
}

void write_simulation_summary_json(const MdpModel& model, const SimulationSummary& summary,
                                   std::ostream& out) {
    nlohmann::ordered_json j;
    j["horizon"] = summary.horizon;
    j["seed"] = summary.seed;
    j["avg_aoi"] = summary.avg_aoi;
    j["avg_aoi_ci95_halfwidth"] = summary.avg_aoi_halfwidth;
    j["throughput_bits_per_slot"] = summary.throughput_bits_per_slot;
    j["transmissions"] = summary.transmissions;
    auto nan_to_null = [](const std::vector<double>& v) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (double x : v) {
            if (std::isnan(x))
                arr.push_back(nullptr);
            else
                arr.push_back(x);
        }
        return arr;
    };
    j["mean_peak_aoi"] = nan_to_null(summary.mean_peak_aoi);
    j["max_peak_aoi"] = nan_to_null(summary.max_peak_aoi);
    j["devices"] = model.device_count();
    out << j.dump(2) << '\n';
}

}  // namespace aoisched
