#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aoisched/model.hpp"

namespace aoisched {

/// Parses a SystemConfig from its canonical JSON form. Field names mirror the
/// struct; physical quantities are SI, gains linear. Unknown keys are
/// rejected so unit mistakes fail loudly.
SystemConfig parse_config_json(const std::string& json_text);

/// Loads and parses; `raw_bytes_out`, when given, receives the file content
/// (used for config hashing).
SystemConfig load_config(const std::string& path, std::string* raw_bytes_out = nullptr);

std::string config_to_json(const SystemConfig& config);

/// FNV-1a 64-bit hex digest, the stable config hash used by run manifests.
std::string fnv1a64_hex(const std::string& bytes);

/// Derived-value echo for the validate command: energy quanta, transmit and
/// harvest tables, state-space size, and structural warnings.
struct ValidationReport {
    std::string json;                   ///< full machine-readable report
    std::vector<std::string> warnings;  ///< human-readable diagnostics
    std::uint64_t state_count = 0;
    bool exceeds_cap = false;
};

ValidationReport validation_report(const SystemConfig& config);

}  // namespace aoisched
