#include "twinarm/config.hpp"

#include <fstream>

#include <openssl/evp.h>

#include "twinarm/errors.hpp"

namespace twinarm {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(path) + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(std::string("unknown config key '") + path + "." + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_arm(const json& j, ArmModel& a) {
    check_keys(j, "arm",
               {"link_lengths", "base_height", "joint_limits", "max_aperture", "table_height",
                "base_keepout_y"});
    read(j, "link_lengths", a.link_lengths);
    read(j, "base_height", a.base_height);
    if (j.contains("joint_limits")) {
        const auto lims = j.at("joint_limits").get<std::array<std::array<double, 2>, 6>>();
        for (int i = 0; i < 6; ++i) {
            a.joint_min[i] = lims[i][0];
            a.joint_max[i] = lims[i][1];
        }
    }
    read(j, "max_aperture", a.max_aperture);
    read(j, "table_height", a.table_height);
    read(j, "base_keepout_y", a.base_keepout_y);
}

json arm_to_json(const ArmModel& a) {
    std::array<std::array<double, 2>, 6> lims;
    for (int i = 0; i < 6; ++i) lims[i] = {a.joint_min[i], a.joint_max[i]};
    return {{"link_lengths", a.link_lengths}, {"base_height", a.base_height},
            {"joint_limits", lims},           {"max_aperture", a.max_aperture},
            {"table_height", a.table_height}, {"base_keepout_y", a.base_keepout_y}};
}

void parse_env(const json& j, EnvParams& e) {
    check_keys(j, "env",
               {"delta_theta", "delta_gripper", "goal_radius", "contact_epsilon",
                "contact_cooldown", "home_angles", "home_aperture", "workspace_box", "track"});
    read(j, "delta_theta", e.delta_theta);
    read(j, "delta_gripper", e.delta_gripper);
    read(j, "goal_radius", e.goal_radius);
    read(j, "contact_epsilon", e.contact_epsilon);
    read(j, "contact_cooldown", e.contact_cooldown);
    read(j, "home_angles", e.home.angles);
    read(j, "home_aperture", e.home.gripper_aperture);
    if (j.contains("workspace_box")) {
        const json& b = j.at("workspace_box");
        check_keys(b, "env.workspace_box", {"lo", "hi"});
        const auto lo = b.at("lo").get<std::array<double, 3>>();
        const auto hi = b.at("hi").get<std::array<double, 3>>();
        e.workspace.lo = {lo[0], lo[1], lo[2]};
        e.workspace.hi = {hi[0], hi[1], hi[2]};
    }
    if (j.contains("track")) {
        const json& t = j.at("track");
        check_keys(t, "env.track", {"x_min", "x_max", "y", "z_offset", "speed"});
        read(t, "x_min", e.track.x_min);
        read(t, "x_max", e.track.x_max);
        read(t, "y", e.track.y);
        read(t, "z_offset", e.track.z_offset);
        read(t, "speed", e.track.speed);
    }
}

json env_to_json(const EnvParams& e) {
    return {{"delta_theta", e.delta_theta},
            {"delta_gripper", e.delta_gripper},
            {"goal_radius", e.goal_radius},
            {"contact_epsilon", e.contact_epsilon},
            {"contact_cooldown", e.contact_cooldown},
            {"home_angles", e.home.angles},
            {"home_aperture", e.home.gripper_aperture},
            {"workspace_box",
             {{"lo", std::array<double, 3>{e.workspace.lo.x, e.workspace.lo.y, e.workspace.lo.z}},
              {"hi", std::array<double, 3>{e.workspace.hi.x, e.workspace.hi.y, e.workspace.hi.z}}}},
            {"track",
             {{"x_min", e.track.x_min},
              {"x_max", e.track.x_max},
              {"y", e.track.y},
              {"z_offset", e.track.z_offset},
              {"speed", e.track.speed}}}};
}

void parse_sac(const json& j, SacConfig& s) {
    check_keys(j, "sac",
               {"hidden", "batch_size", "lr", "adam_beta1", "adam_beta2", "adam_eps", "gamma",
                "tau", "target_entropy_scale", "init_alpha", "buffer_capacity", "warmup_steps",
                "total_steps", "update_every", "checkpoint_every"});
    read(j, "hidden", s.hidden);
    read(j, "batch_size", s.batch_size);
    read(j, "lr", s.lr);
    read(j, "adam_beta1", s.adam_beta1);
    read(j, "adam_beta2", s.adam_beta2);
    read(j, "adam_eps", s.adam_eps);
    read(j, "gamma", s.gamma);
    read(j, "tau", s.tau);
    read(j, "target_entropy_scale", s.target_entropy_scale);
    read(j, "init_alpha", s.init_alpha);
    read(j, "buffer_capacity", s.buffer_capacity);
    read(j, "warmup_steps", s.warmup_steps);
    read(j, "total_steps", s.total_steps);
    read(j, "update_every", s.update_every);
    read(j, "checkpoint_every", s.checkpoint_every);
}

json sac_to_json(const SacConfig& s) {
    return {{"hidden", s.hidden},
            {"batch_size", s.batch_size},
            {"lr", s.lr},
            {"adam_beta1", s.adam_beta1},
            {"adam_beta2", s.adam_beta2},
            {"adam_eps", s.adam_eps},
            {"gamma", s.gamma},
            {"tau", s.tau},
            {"target_entropy_scale", s.target_entropy_scale},
            {"init_alpha", s.init_alpha},
            {"buffer_capacity", s.buffer_capacity},
            {"warmup_steps", s.warmup_steps},
            {"total_steps", s.total_steps},
            {"update_every", s.update_every},
            {"checkpoint_every", s.checkpoint_every}};
}

void parse_twin(const json& j, TwinConfig& t) {
    check_keys(j, "twin", {"rate_hz", "budget_ms", "bind", "connect"});
    read(j, "rate_hz", t.rate_hz);
    read(j, "budget_ms", t.budget_ms);
    read(j, "bind", t.bind);
    read(j, "connect", t.connect);
}

json twin_to_json(const TwinConfig& t) {
    return {{"rate_hz", t.rate_hz},
            {"budget_ms", t.budget_ms},
            {"bind", t.bind},
            {"connect", t.connect}};
}

}  // namespace

void Config::validate() const {
    arm.validate();
    if (env.delta_theta <= 0 || env.delta_gripper <= 0)
        throw ConfigError("env: step increments must be positive");
    if (env.goal_radius <= 0) throw ConfigError("env: goal_radius must be positive");
    if (env.contact_cooldown < 1) throw ConfigError("env: contact_cooldown must be >= 1");
    if (!(env.workspace.lo.x < env.workspace.hi.x && env.workspace.lo.y < env.workspace.hi.y &&
          env.workspace.lo.z < env.workspace.hi.z))
        throw ConfigError("env: workspace_box is empty");
    if (!(env.track.x_min < env.track.x_max)) throw ConfigError("env: track is empty");
    if (env.track.speed < 0) throw ConfigError("env: track speed must be >= 0");
    if (!arm.within_limits(env.home))
        throw ConfigError("env: home configuration violates joint limits");
    if (sac.hidden.empty()) throw ConfigError("sac: at least one hidden layer");
    for (int h : sac.hidden)
        if (h < 1) throw ConfigError("sac: hidden sizes must be positive");
    if (sac.batch_size < 1) throw ConfigError("sac: batch_size must be >= 1");
    if (!(sac.gamma > 0 && sac.gamma < 1)) throw ConfigError("sac: gamma must be in (0,1)");
    if (!(sac.tau > 0 && sac.tau <= 1)) throw ConfigError("sac: tau must be in (0,1]");
    if (sac.lr <= 0) throw ConfigError("sac: lr must be positive");
    if (sac.init_alpha <= 0) throw ConfigError("sac: init_alpha must be positive");
    if (sac.buffer_capacity < sac.batch_size)
        throw ConfigError("sac: buffer_capacity must be >= batch_size");
    if (sac.total_steps < 0) throw ConfigError("sac: total_steps must be >= 0");
    if (sac.update_every < 1) throw ConfigError("sac: update_every must be >= 1");
    if (twin.rate_hz <= 0) throw ConfigError("twin: rate_hz must be positive");
    if (twin.budget_ms <= 0) throw ConfigError("twin: budget_ms must be positive");
    if (metrics_interval < 1) throw ConfigError("metrics_interval must be >= 1");
}

Config config_from_json(const nlohmann::json& j) {
    check_keys(j, "config",
               {"arm", "env", "sac", "twin", "reward", "metrics_interval", "seed"});
    Config c;
    if (j.contains("arm")) parse_arm(j.at("arm"), c.arm);
    if (j.contains("env")) parse_env(j.at("env"), c.env);
    if (j.contains("sac")) parse_sac(j.at("sac"), c.sac);
    if (j.contains("twin")) parse_twin(j.at("twin"), c.twin);
    if (j.contains("reward")) {
        const json& r = j.at("reward");
        check_keys(r, "reward", {"case1", "case2", "case3"});
        if (r.contains("case1")) c.reward_case1 = r.at("case1").get<RewardSpec>();
        if (r.contains("case2")) c.reward_case2 = r.at("case2").get<RewardSpec>();
        if (r.contains("case3")) c.reward_case3 = r.at("case3").get<RewardSpec>();
    }
    read(j, "metrics_interval", c.metrics_interval);
    read(j, "seed", c.seed);
    c.validate();
    return c;
}

nlohmann::json config_to_json(const Config& c) {
    json j;
    j["arm"] = arm_to_json(c.arm);
    j["env"] = env_to_json(c.env);
    j["sac"] = sac_to_json(c.sac);
    j["twin"] = twin_to_json(c.twin);
    json r = json::object();
    if (c.reward_case1) r["case1"] = *c.reward_case1;
    if (c.reward_case2) r["case2"] = *c.reward_case2;
    if (c.reward_case3) r["case3"] = *c.reward_case3;
    if (!r.empty()) j["reward"] = r;
    j["metrics_interval"] = c.metrics_interval;
    j["seed"] = c.seed;
    return j;
}

Config load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

RewardSpec reward_spec_for(const Config& c, CaseId case_id) {
    const std::optional<RewardSpec>* ov = nullptr;
    switch (case_id) {
        case CaseId::Case1: ov = &c.reward_case1; break;
        case CaseId::Case2: ov = &c.reward_case2; break;
        case CaseId::Case3: ov = &c.reward_case3; break;
    }
    if (ov && *ov) {
        RewardSpec s = **ov;
        s.case_id = case_id;
        s.validate();
        return s;
    }
    return builtin_spec(case_id);
}

std::array<uint8_t, 32> config_digest(const Config& c) {
    const std::string text = config_to_json(c).dump();
    std::array<uint8_t, 32> out{};
    unsigned int len = 0;
    EVP_Digest(text.data(), text.size(), out.data(), &len, EVP_sha256(), nullptr);
    return out;
}

}  // namespace twinarm
