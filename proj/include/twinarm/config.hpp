#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "twinarm/env.hpp"
#include "twinarm/kinematics.hpp"
#include "twinarm/reward.hpp"
#include "twinarm/sac.hpp"

namespace twinarm {

struct TwinConfig {
    double rate_hz = 50.0;
    double budget_ms = 20.0;
    std::string bind = "127.0.0.1:7707";
    std::string connect = "127.0.0.1:7707";
};

// One experiment = one config file + one seed. Every field has a default;
// parsing is strict and rejects unknown keys.
struct Config {
    ArmModel arm;
    EnvParams env;
    SacConfig sac;
    TwinConfig twin;
    std::optional<RewardSpec> reward_case1, reward_case2, reward_case3;
    int metrics_interval = 1000;
    uint64_t seed = 1;

    void validate() const;
};

Config config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const Config& c);  // canonical, all fields

Config load_config_file(const std::string& path);

// Reward table in effect for a case: file override or the built-in one.
RewardSpec reward_spec_for(const Config& c, CaseId case_id);

// SHA-256 of the canonical config JSON.
std::array<uint8_t, 32> config_digest(const Config& c);

}  // namespace twinarm
