#include "aoisched/config_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "aoisched/errors.hpp"
#include "json.hpp"

namespace aoisched {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) {
    throw InvalidConfigError("config: " + what);
}

double number_field(const json& j, const char* key) {
    if (!j.contains(key)) bad(std::string("missing field '") + key + "'");
    if (!j[key].is_number()) bad(std::string("field '") + key + "' must be a number");
    return j[key].get<double>();
}

int int_field(const json& j, const char* key) {
    if (!j.contains(key)) bad(std::string("missing field '") + key + "'");
    if (!j[key].is_number_integer())
        bad(std::string("field '") + key + "' must be an integer");
    return j[key].get<int>();
}

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            bad("unknown field '" + it.key() + "' in " + where);
}

}  // namespace

SystemConfig parse_config_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        bad(std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) bad("top level must be an object");
    reject_unknown(j,
                   {"slot_duration", "bandwidth", "dest_tx_power", "noise_power",
                    "path_loss_exponent", "intercept", "antenna_gain",
                    "harvest_efficiency", "channel_levels", "battery_levels",
                    "channel_mode", "devices", "state_cap", "K"},
                   "the top-level object");

    SystemConfig c;
    c.slot_duration = number_field(j, "slot_duration");
    c.bandwidth = number_field(j, "bandwidth");
    c.dest_tx_power = number_field(j, "dest_tx_power");
    c.noise_power = number_field(j, "noise_power");
    c.path_loss_exponent = number_field(j, "path_loss_exponent");
    c.intercept = number_field(j, "intercept");
    c.antenna_gain = number_field(j, "antenna_gain");
    c.harvest_efficiency = number_field(j, "harvest_efficiency");
    c.channel_levels = int_field(j, "channel_levels");
    c.battery_levels = int_field(j, "battery_levels");
    if (j.contains("state_cap")) {
        if (!j["state_cap"].is_number_unsigned()) bad("state_cap must be a nonnegative integer");
        c.state_cap = j["state_cap"].get<std::uint64_t>();
    }
    if (j.contains("channel_mode")) {
        const std::string mode = j["channel_mode"].get<std::string>();
        if (mode == "reciprocal")
            c.channel_mode = ChannelMode::Reciprocal;
        else if (mode == "independent")
            c.channel_mode = ChannelMode::Independent;
        else
            bad("channel_mode must be 'reciprocal' or 'independent'");
    }
    if (!j.contains("devices") || !j["devices"].is_array() || j["devices"].empty())
        bad("'devices' must be a non-empty array");
    for (const json& dj : j["devices"]) {
        if (!dj.is_object()) bad("each device must be an object");
        reject_unknown(dj, {"distance", "battery_capacity", "packet_size", "aoi_cap", "weight"},
                       "a device object");
        DeviceConfig d;
        d.distance = number_field(dj, "distance");
        d.battery_capacity = number_field(dj, "battery_capacity");
        d.packet_size = number_field(dj, "packet_size");
        d.aoi_cap = int_field(dj, "aoi_cap");
        d.weight = dj.contains("weight") ? number_field(dj, "weight") : 1.0;
        c.devices.push_back(d);
    }
    if (j.contains("K") && j["K"].get<std::size_t>() != c.devices.size())
        bad("field 'K' disagrees with the number of device entries");
    c.validate();
    return c;
}

SystemConfig load_config(const std::string& path, std::string* raw_bytes_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (raw_bytes_out) *raw_bytes_out = buf.str();
    return parse_config_json(buf.str());
}

std::string config_to_json(const SystemConfig& c) {
    nlohmann::ordered_json j;
    j["slot_duration"] = c.slot_duration;
    j["bandwidth"] = c.bandwidth;
    j["dest_tx_power"] = c.dest_tx_power;
    j["noise_power"] = c.noise_power;
    j["path_loss_exponent"] = c.path_loss_exponent;
    j["intercept"] = c.intercept;
    j["antenna_gain"] = c.antenna_gain;
    j["harvest_efficiency"] = c.harvest_efficiency;
    j["channel_levels"] = c.channel_levels;
    j["battery_levels"] = c.battery_levels;
    j["channel_mode"] =
        (c.channel_mode == ChannelMode::Reciprocal) ? "reciprocal" : "independent";
    j["state_cap"] = c.state_cap;
    j["devices"] = nlohmann::ordered_json::array();
    for (const DeviceConfig& d : c.devices) {
        nlohmann::ordered_json dj;
        dj["distance"] = d.distance;
        dj["battery_capacity"] = d.battery_capacity;
        dj["packet_size"] = d.packet_size;
        dj["aoi_cap"] = d.aoi_cap;
        dj["weight"] = d.weight;
        j["devices"].push_back(dj);
    }
    return j.dump(2) + "\n";
}

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

ValidationReport validation_report(const SystemConfig& config) {
    config.validate();
    const ChannelQuantizer q = quantize_fading(config.channel_levels);
    const std::size_t K = config.devices.size();

    ValidationReport report;
    nlohmann::ordered_json j;

    unsigned __int128 skeletons = 1, combos = 1;
    for (std::size_t d = 0; d < K; ++d) {
        skeletons *= static_cast<unsigned>(config.battery_levels) *
                     static_cast<unsigned>(config.devices[d].aoi_cap);
        combos *= static_cast<unsigned>(config.channel_levels);
        if (config.channel_mode == ChannelMode::Independent)
            combos *= static_cast<unsigned>(config.channel_levels);
    }
    const unsigned __int128 total = skeletons * combos;
    const bool overflow = total > std::numeric_limits<std::uint64_t>::max();
    report.state_count =
        overflow ? std::numeric_limits<std::uint64_t>::max() : static_cast<std::uint64_t>(total);
    report.exceeds_cap = overflow || report.state_count > config.state_cap;

    j["devices"] = K;
    j["state_count"] = report.state_count;
    j["state_cap"] = config.state_cap;
    j["exceeds_cap"] = report.exceeds_cap;
    j["channel_quantizer"] = {{"levels", config.channel_levels},
                              {"boundaries", q.boundaries},
                              {"representatives", q.representatives}};
    if (report.exceeds_cap)
        report.warnings.push_back("state space exceeds the configured cap; model build will fail");
    if (config.battery_levels == 1)
        report.warnings.push_back("battery_levels = 1: devices cannot store energy");
    if (config.harvest_efficiency == 0.0)
        report.warnings.push_back("harvest_efficiency = 0: devices can never harvest energy");

    j["per_device"] = nlohmann::ordered_json::array();
    for (std::size_t d = 0; d < K; ++d) {
        nlohmann::ordered_json dj;
        const double e_unit = config.energy_quantum(d);
        dj["energy_quantum_joules"] =
            std::isfinite(e_unit) ? nlohmann::ordered_json(e_unit) : nlohmann::ordered_json(nullptr);
        std::vector<int> txq(config.channel_levels), hq(config.channel_levels);
        for (int level = 1; level <= config.channel_levels; ++level) {
            txq[level - 1] = tx_energy_quanta(config, q, d, level);
            hq[level - 1] = harvest_quanta(config, q, d, level);
        }
        dj["tx_quanta"] = txq;
        dj["harvest_quanta"] = hq;
        int feasible_levels = 0;
        for (int v : txq)
            if (v <= config.battery_levels - 1) ++feasible_levels;
        dj["transmit_feasible_levels"] = feasible_levels;
        if (feasible_levels == 0)
            report.warnings.push_back("device " + std::to_string(d + 1) +
                                      " can never transmit: the cheapest transmission needs " +
                                      std::to_string(*std::min_element(txq.begin(), txq.end())) +
                                      " quanta but the battery holds at most " +
                                      std::to_string(config.battery_levels - 1));
        if (*std::max_element(hq.begin(), hq.end()) == 0 && config.battery_levels > 1)
            report.warnings.push_back("device " + std::to_string(d + 1) +
                                      " harvests zero quanta at every channel level");
        j["per_device"].push_back(dj);
    }
    j["warnings"] = report.warnings;
    report.json = j.dump(2) + "\n";
    return report;
}

}  // namespace aoisched
