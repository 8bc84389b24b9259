#include "aoisched/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "aoisched/errors.hpp"

namespace aoisched {

void SystemConfig::validate() const {
    std::ostringstream bad;
    auto require = [&](bool ok, const char* what) {
        if (!ok) bad << (bad.tellp() > 0 ? "; " : "") << what;
    };
    require(!devices.empty(), "at least one device required");
    require(slot_duration > 0.0, "slot_duration must be > 0");
    require(bandwidth > 0.0, "bandwidth must be > 0");
    require(dest_tx_power > 0.0, "dest_tx_power must be > 0");
    require(noise_power > 0.0, "noise_power must be > 0");
    require(path_loss_exponent > 0.0, "path_loss_exponent must be > 0");
    require(intercept > 0.0, "intercept must be > 0");
    require(antenna_gain > 0.0, "antenna_gain must be > 0");
    require(harvest_efficiency >= 0.0 && harvest_efficiency <= 1.0,
            "harvest_efficiency must lie in [0,1]");
    require(channel_levels >= 2, "channel_levels must be >= 2");
    require(battery_levels >= 1, "battery_levels must be >= 1");
    require(state_cap >= 1, "state_cap must be >= 1");

    double weight_sum = 0.0;
    for (std::size_t i = 0; i < devices.size(); ++i) {
        const DeviceConfig& d = devices[i];
        std::ostringstream name;
        name << "device " << (i + 1) << ": ";
        auto dev_require = [&](bool ok, const char* what) {
            if (!ok) bad << (bad.tellp() > 0 ? "; " : "") << name.str() << what;
        };
        dev_require(d.distance > 0.0, "distance must be > 0");
        dev_require(d.battery_capacity > 0.0, "battery_capacity must be > 0");
        dev_require(d.packet_size > 0.0, "packet_size must be > 0");
        dev_require(d.aoi_cap >= 1, "aoi_cap must be >= 1");
        dev_require(d.weight >= 0.0, "weight must be >= 0");
        weight_sum += d.weight;
    }
    require(weight_sum > 0.0, "device weights must not all be zero");

    if (bad.tellp() > 0) throw InvalidConfigError("invalid configuration: " + bad.str());
}

double SystemConfig::energy_quantum(std::size_t device) const {
    if (device >= devices.size())
        throw InvalidRequestError("device index out of range");
    if (battery_levels <= 1) return std::numeric_limits<double>::infinity();
    return devices[device].battery_capacity / static_cast<double>(battery_levels - 1);
}

ChannelQuantizer quantize_fading(int level_count) {
    if (level_count < 2)
        throw InvalidConfigError("channel quantizer needs at least 2 levels");
    const int L = level_count;
    ChannelQuantizer q;
    q.level_count = L;
    q.boundaries.resize(L - 1);
    for (int k = 1; k < L; ++k)
        q.boundaries[k - 1] = -std::log1p(-static_cast<double>(k) / L);
    q.representatives.resize(L);
    q.representatives[0] = q.boundaries[0] / 2.0;
    for (int k = 1; k < L - 1; ++k)
        q.representatives[k] = (q.boundaries[k - 1] + q.boundaries[k]) / 2.0;
    // memoryless tail: conditional mean of exp(1) above b is b + 1
    q.representatives[L - 1] = q.boundaries[L - 2] + 1.0;
    q.probabilities.assign(L, 1.0 / L);
    return q;
}

namespace {

double link_gain(const SystemConfig& c, std::size_t device, double fading) {
    return c.antenna_gain * c.intercept *
           std::pow(c.devices[device].distance, -c.path_loss_exponent) * fading;
}

void check_indices(const SystemConfig& c, const ChannelQuantizer& q,
                   std::size_t device, int level) {
    if (device >= c.devices.size())
        throw InvalidRequestError("device index out of range");
    if (level < 1 || level > q.level_count)
        throw InvalidRequestError("channel level out of range");
}

}  // namespace

int tx_energy_quanta(const SystemConfig& config, const ChannelQuantizer& q,
                     std::size_t device, int level) {
    check_indices(config, q, device, level);
    const DeviceConfig& dev = config.devices[device];
    const double rate_exp = dev.packet_size / (config.slot_duration * config.bandwidth);
    // Shannon inversion: snr needed for the packet to fit in one slot
    const double snr = (rate_exp < 1020.0)
                           ? std::exp2(rate_exp) - 1.0
                           : std::numeric_limits<double>::infinity();
    const double gain = link_gain(config, device, q.representatives[level - 1]);
    const double energy = snr * config.noise_power * config.slot_duration / gain;
    const double quanta = std::ceil(energy / config.energy_quantum(device));
    if (!(quanta < 1e9)) return std::numeric_limits<int>::max();
    return std::max(1, static_cast<int>(quanta));
}

int harvest_quanta(const SystemConfig& config, const ChannelQuantizer& q,
                   std::size_t device, int level) {
    check_indices(config, q, device, level);
    const double gain = link_gain(config, device, q.representatives[level - 1]);
    const double energy = config.harvest_efficiency * config.dest_tx_power * gain *
                          config.slot_duration;
    const double quanta = std::floor(energy / config.energy_quantum(device));
    if (!(quanta < 1e9)) return std::numeric_limits<int>::max();
    return static_cast<int>(quanta);
}

int tx_energy_quanta(const SystemConfig& config, std::size_t device, int level) {
    return tx_energy_quanta(config, quantize_fading(config.channel_levels), device, level);
}

int harvest_quanta(const SystemConfig& config, std::size_t device, int level) {
    return harvest_quanta(config, quantize_fading(config.channel_levels), device, level);
}

}  // namespace aoisched
