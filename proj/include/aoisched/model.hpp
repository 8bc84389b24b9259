#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace aoisched {

enum class ChannelMode { Reciprocal, Independent };

/// Per-device physical parameters.
struct DeviceConfig {
    double distance = 0.0;          ///< meters to the destination node
    double battery_capacity = 0.0;  ///< joules
    double packet_size = 0.0;       ///< bits per update packet
    int aoi_cap = 0;                ///< age ceiling, slots
    double weight = 1.0;            ///< importance weight (nonnegative)
};

/// All physical and discretization parameters of the network.
///
/// Physical quantities are SI (seconds, Hz, watts, meters, joules, bits);
/// gains are linear, not dB.
struct SystemConfig {
    double slot_duration = 1.0;       ///< T, seconds
    double bandwidth = 1e6;           ///< W, Hz
    double dest_tx_power = 0.0;       ///< P_D, watts
    double noise_power = 0.0;         ///< N0, watts
    double path_loss_exponent = 2.0;  ///< beta
    double intercept = 2e-2;          ///< channel gain at 1 m
    double antenna_gain = 1.0;        ///< G, linear, applied on both links
    double harvest_efficiency = 0.5;  ///< eta in [0,1]
    int channel_levels = 10;          ///< L_h >= 2
    int battery_levels = 10;          ///< L_b >= 1 (1 = degenerate no-storage)
    ChannelMode channel_mode = ChannelMode::Reciprocal;
    std::vector<DeviceConfig> devices;
    std::uint64_t state_cap = 5'000'000;

    std::size_t device_count() const { return devices.size(); }

    /// Throws InvalidConfigError on any violated invariant.
    void validate() const;

    /// Battery quantum E_max/(L_b - 1); +inf when L_b == 1 (no storage).
    double energy_quantum(std::size_t device) const;
};

/// Equal-probability discretization of the unit-mean exponential fading power.
struct ChannelQuantizer {
    int level_count = 0;
    std::vector<double> boundaries;       ///< L-1 increasing bin edges
    std::vector<double> representatives;  ///< one fading power per level
    std::vector<double> probabilities;    ///< each exactly 1/L
};

/// Quantile bins of exp(1): boundary k = -ln(1 - k/L); representatives are bin
/// midpoints, except the unbounded last bin which takes its conditional mean.
ChannelQuantizer quantize_fading(int level_count);

/// Energy quanta needed to deliver one update packet of device `device` at
/// channel `level` (1-based). Inverts Shannon capacity at the packet rate and
/// rounds up; never below 1 quantum. A result above battery_levels-1 means the
/// transmission is infeasible at every battery state for that level.
int tx_energy_quanta(const SystemConfig& config, const ChannelQuantizer& q,
                     std::size_t device, int level);

/// Quanta harvested in one downlink slot at channel `level` (rounded down;
/// battery addition is clipped at capacity by the transition law, not here).
int harvest_quanta(const SystemConfig& config, const ChannelQuantizer& q,
                   std::size_t device, int level);

/// Convenience overloads building the quantizer from config.channel_levels.
int tx_energy_quanta(const SystemConfig& config, std::size_t device, int level);
int harvest_quanta(const SystemConfig& config, std::size_t device, int level);

}  // namespace aoisched
