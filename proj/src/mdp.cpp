#include "aoisched/mdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "aoisched/errors.hpp"

namespace aoisched {

std::string Action::symbol() const {
    if (is_harvest()) return "H";
    return "T" + std::to_string(index_);
}

Action Action::parse(const std::string& symbol) {
    if (symbol == "H") return harvest();
    if (symbol.size() >= 2 && symbol[0] == 'T') {
        int dev = 0;
        auto [p, ec] = std::from_chars(symbol.data() + 1, symbol.data() + symbol.size(), dev);
        if (ec == std::errc() && p == symbol.data() + symbol.size() && dev >= 1)
            return transmit(static_cast<std::size_t>(dev - 1));
    }
    throw InvalidRequestError("unknown action symbol: " + symbol);
}

MdpModel MdpModel::build(const SystemConfig& config) {
    config.validate();

    MdpModel m;
    m.config_ = config;
    m.quantizer_ = quantize_fading(config.channel_levels);
    const std::size_t K = config.devices.size();
    const int Lb = config.battery_levels;
    const int Lh = config.channel_levels;
    m.channel_digits_per_device_ = (config.channel_mode == ChannelMode::Independent) ? 2 : 1;

    m.txq_.resize(K);
    m.hq_.resize(K);
    for (std::size_t d = 0; d < K; ++d) {
        m.txq_[d].resize(Lh);
        m.hq_[d].resize(Lh);
        for (int level = 1; level <= Lh; ++level) {
            m.txq_[d][level - 1] = aoisched::tx_energy_quanta(config, m.quantizer_, d, level);
            m.hq_[d][level - 1] = aoisched::harvest_quanta(config, m.quantizer_, d, level);
        }
    }

    // size check before any allocation
    unsigned __int128 skeletons = 1, combos = 1;
    std::ostringstream dims;
    for (std::size_t d = 0; d < K; ++d) {
        skeletons *= static_cast<unsigned>(Lb) *
                     static_cast<unsigned>(config.devices[d].aoi_cap);
        combos *= static_cast<unsigned>(Lh);
        if (m.channel_digits_per_device_ == 2) combos *= static_cast<unsigned>(Lh);
        if (d) dims << " x ";
        dims << "(b:" << Lb << " h:" << Lh
             << (m.channel_digits_per_device_ == 2 ? "^2" : "")
             << " a:" << config.devices[d].aoi_cap << ")";
    }
    const unsigned __int128 total = skeletons * combos;
    if (total > config.state_cap) {
        std::ostringstream msg;
        msg << "state space " << dims.str() << " = " << static_cast<double>(total)
            << " states exceeds cap " << config.state_cap;
        throw CapacityError(msg.str());
    }
    m.skeleton_count_ = static_cast<std::size_t>(skeletons);
    m.combo_count_ = static_cast<std::size_t>(combos);
    m.state_count_ = static_cast<std::size_t>(total);

    // skeleton decode tables
    m.skel_age_.resize(m.skeleton_count_ * K);
    m.skel_batt_.resize(m.skeleton_count_ * K);
    for (std::size_t skel = 0; skel < m.skeleton_count_; ++skel) {
        std::size_t rest = skel;
        for (std::size_t d = K; d-- > 0;) {
            const int cap = config.devices[d].aoi_cap;
            m.skel_age_[skel * K + d] = static_cast<std::uint16_t>(rest % cap + 1);
            rest /= cap;
            m.skel_batt_[skel * K + d] = static_cast<std::uint16_t>(rest % Lb);
            rest /= Lb;
        }
    }

    const std::size_t actions = K + 1;
    m.feasible_.assign(m.state_count_, 1u);  // harvest always feasible
    m.succ_skel_.assign(m.state_count_ * actions, 0u);

    std::vector<int> up(K), down(K), b(K), a(K), b2(K), a2(K);
    std::vector<std::size_t> age_weight(K), batt_weight(K);
    // place values for re-encoding a skeleton
    {
        std::size_t w = 1;
        for (std::size_t d = K; d-- > 0;) {
            age_weight[d] = w;
            w *= config.devices[d].aoi_cap;
            batt_weight[d] = w;
            w *= Lb;
        }
    }
    auto encode_skeleton = [&](const std::vector<int>& batt, const std::vector<int>& age) {
        std::size_t s = 0;
        for (std::size_t d = 0; d < K; ++d)
            s += batt_weight[d] * static_cast<std::size_t>(batt[d]) +
                 age_weight[d] * static_cast<std::size_t>(age[d] - 1);
        return s;
    };

    for (std::size_t skel = 0; skel < m.skeleton_count_; ++skel) {
        for (std::size_t d = 0; d < K; ++d) {
            b[d] = m.skel_batt_[skel * K + d];
            a[d] = m.skel_age_[skel * K + d];
        }
        for (std::size_t combo = 0; combo < m.combo_count_; ++combo) {
            m.decode_combo(combo, up, down);
            const std::size_t state = skel * m.combo_count_ + combo;

            // harvest successor: charge from the downlink level, all ages grow
            for (std::size_t d = 0; d < K; ++d) {
                b2[d] = std::min(Lb - 1, b[d] + m.hq_[d][down[d] - 1]);
                a2[d] = std::min(a[d] + 1, config.devices[d].aoi_cap);
            }
            m.succ_skel_[state * actions] = static_cast<std::uint32_t>(encode_skeleton(b2, a2));

            for (std::size_t j = 0; j < K; ++j) {
                const int cost = m.txq_[j][up[j] - 1];
                if (b[j] < cost) continue;
                m.feasible_[state] |= (1u << (j + 1));
                for (std::size_t d = 0; d < K; ++d) {
                    b2[d] = b[d];
                    a2[d] = std::min(a[d] + 1, config.devices[d].aoi_cap);
                }
                b2[j] = b[j] - cost;
                a2[j] = 1;
                m.succ_skel_[state * actions + j + 1] =
                    static_cast<std::uint32_t>(encode_skeleton(b2, a2));
            }
        }
    }
    return m;
}

void MdpModel::decode_combo(std::size_t combo, std::vector<int>& up,
                            std::vector<int>& down) const {
    const std::size_t K = device_count();
    const int Lh = config_.channel_levels;
    std::size_t rest = combo;
    for (std::size_t d = K; d-- > 0;) {
        if (channel_digits_per_device_ == 2) {
            down[d] = static_cast<int>(rest % Lh) + 1;
            rest /= Lh;
            up[d] = static_cast<int>(rest % Lh) + 1;
            rest /= Lh;
        } else {
            up[d] = static_cast<int>(rest % Lh) + 1;
            down[d] = up[d];
            rest /= Lh;
        }
    }
}

std::size_t MdpModel::encode(const SystemState& state) const {
    const std::size_t K = device_count();
    const int Lb = config_.battery_levels;
    const int Lh = config_.channel_levels;
    if (state.battery.size() != K || state.channel.size() != K || state.aoi.size() != K)
        throw InvalidRequestError("state has wrong arity");
    if (channel_digits_per_device_ == 2 && state.channel_down.size() != K)
        throw InvalidRequestError("independent mode state needs downlink levels");
    std::size_t skel = 0, combo = 0;
    for (std::size_t d = 0; d < K; ++d) {
        const int cap = config_.devices[d].aoi_cap;
        if (state.battery[d] < 0 || state.battery[d] >= Lb)
            throw InvalidRequestError("battery level out of range");
        if (state.channel[d] < 1 || state.channel[d] > Lh)
            throw InvalidRequestError("channel level out of range");
        if (state.aoi[d] < 1 || state.aoi[d] > cap)
            throw InvalidRequestError("age out of range");
        skel = (skel * Lb + state.battery[d]) * cap + (state.aoi[d] - 1);
        combo = combo * Lh + (state.channel[d] - 1);
        if (channel_digits_per_device_ == 2) {
            if (state.channel_down[d] < 1 || state.channel_down[d] > Lh)
                throw InvalidRequestError("downlink channel level out of range");
            combo = combo * Lh + (state.channel_down[d] - 1);
        }
    }
    return skel * combo_count_ + combo;
}

SystemState MdpModel::decode(std::size_t index) const {
    if (index >= state_count_) throw InvalidRequestError("state index out of range");
    const std::size_t K = device_count();
    SystemState s;
    s.battery.resize(K);
    s.channel.resize(K);
    s.aoi.resize(K);
    if (channel_digits_per_device_ == 2) s.channel_down.resize(K);
    const std::size_t skel = index / combo_count_;
    std::vector<int> up(K), down(K);
    decode_combo(index % combo_count_, up, down);
    for (std::size_t d = 0; d < K; ++d) {
        s.battery[d] = skel_batt_[skel * K + d];
        s.aoi[d] = skel_age_[skel * K + d];
        s.channel[d] = up[d];
        if (channel_digits_per_device_ == 2) s.channel_down[d] = down[d];
    }
    return s;
}

std::vector<Action> MdpModel::feasible_actions(std::size_t state) const {
    if (state >= state_count_) throw InvalidRequestError("state index out of range");
    std::vector<Action> out;
    const std::uint32_t mask = feasible_[state];
    for (int a = 0; a <= static_cast<int>(device_count()); ++a)
        if (mask & (1u << a)) out.push_back(Action::from_index(a));
    return out;
}

std::vector<std::pair<std::size_t, double>> MdpModel::transition(std::size_t state,
                                                                 Action action) const {
    if (state >= state_count_) throw InvalidRequestError("state index out of range");
    if (!is_feasible(state, action))
        throw InvalidRequestError("action " + action.symbol() +
                                  " is infeasible in state " + std::to_string(state));
    const std::size_t base =
        static_cast<std::size_t>(successor_skeleton(state, action.index())) * combo_count_;
    std::vector<std::pair<std::size_t, double>> out(combo_count_);
    const double p = 1.0 / static_cast<double>(combo_count_);
    for (std::size_t c = 0; c < combo_count_; ++c) out[c] = {base + c, p};
    return out;
}

double MdpModel::stage_cost_aoi(std::size_t state, std::span<const double> weights) const {
    if (state >= state_count_) throw InvalidRequestError("state index out of range");
    if (weights.size() != device_count())
        throw InvalidConfigError("weights arity mismatch");
    const std::size_t skel = state / combo_count_;
    double cost = 0.0;
    for (std::size_t d = 0; d < device_count(); ++d) {
        if (weights[d] < 0.0) throw InvalidConfigError("weights must be nonnegative");
        cost += weights[d] * skel_age_[skel * device_count() + d];
    }
    return cost;
}

double MdpModel::stage_reward_throughput(std::size_t state, Action action) const {
    if (state >= state_count_) throw InvalidRequestError("state index out of range");
    if (!is_feasible(state, action))
        throw InvalidRequestError("action infeasible in state");
    if (action.is_harvest()) return 0.0;
    return config_.devices[action.device()].packet_size;
}

int MdpModel::skeleton_age(std::size_t skeleton, std::size_t device) const {
    return skel_age_[skeleton * device_count() + device];
}

int MdpModel::skeleton_battery(std::size_t skeleton, std::size_t device) const {
    return skel_batt_[skeleton * device_count() + device];
}

std::vector<double> MdpModel::skeleton_costs(std::span<const double> weights) const {
    if (weights.size() != device_count())
        throw InvalidConfigError("weights arity mismatch");
    for (double w : weights)
        if (w < 0.0) throw InvalidConfigError("weights must be nonnegative");
    const std::size_t K = device_count();
    std::vector<double> costs(skeleton_count_);
    for (std::size_t skel = 0; skel < skeleton_count_; ++skel) {
        double c = 0.0;
        for (std::size_t d = 0; d < K; ++d) c += weights[d] * skel_age_[skel * K + d];
        costs[skel] = c;
    }
    return costs;
}

void MdpModel::dump_transitions(std::ostream& out) const {
    char buf[32];
    auto fmt = [&](double v) {
        auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, p);
    };
    for (std::size_t s = 0; s < state_count_; ++s) {
        for (int a = 0; a <= static_cast<int>(device_count()); ++a) {
            const Action action = Action::from_index(a);
            if (!is_feasible(s, action)) continue;
            out << s << ' ' << action.symbol() << " ->";
            for (const auto& [succ, p] : transition(s, action))
                out << ' ' << succ << ':' << fmt(p);
            out << '\n';
        }
    }
}

}  // namespace aoisched
