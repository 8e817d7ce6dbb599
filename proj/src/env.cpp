#include "twinarm/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "twinarm/errors.hpp"

namespace twinarm {

Environment::Environment(CaseId case_id, const ArmModel& model, const EnvParams& params,
                         const RewardSpec& spec, uint64_t seed)
    : case_(case_id), model_(model), p_(params), spec_(spec), s_() {
    model_.validate();
    spec_.validate();
    s_.rng = Rng(seed);
    s_.episode_index = -1;
    reset();
}

void Environment::reset() {
    s_.q = p_.home;
    if (case_ == CaseId::Case1) {
        // Sampling order x, y, z is part of the determinism contract.
        s_.goal.x = s_.rng.uniform(p_.workspace.lo.x, p_.workspace.hi.x);
        s_.goal.y = s_.rng.uniform(p_.workspace.lo.y, p_.workspace.hi.y);
        s_.goal.z = s_.rng.uniform(p_.workspace.lo.z, p_.workspace.hi.z);
        s_.goal_velocity_x = 0;
    } else {
        s_.goal = {p_.track.x_min, p_.track.y, model_.table_height + p_.track.z_offset};
        s_.goal_velocity_x = p_.track.speed;
    }
    s_.step_index = 0;
    s_.episode_index += 1;
    s_.last_goal_fire_step = -1;
    s_.terminal = false;
}

Observation Environment::observe() const {
    const FkResult fk = forward_kinematics(model_, s_.q);
    Observation o;
    o.v[0] = fk.gripper_mid.x;
    o.v[1] = fk.gripper_mid.y;
    o.v[2] = fk.gripper_mid.z;
    o.v[3] = fk.end_effector.x;
    o.v[4] = fk.end_effector.y;
    o.v[5] = fk.end_effector.z;
    o.v[6] = s_.goal.x;
    o.v[7] = s_.goal.y;
    o.v[8] = s_.goal.z;
    o.v[9] = distance(fk.gripper_mid, s_.goal);
    for (int i = 0; i < 6; ++i) o.v[10 + i] = s_.q.angles[i];
    return o;
}

Transition Environment::step(const BranchedAction& action) {
    if (s_.terminal) throw UsageError("step() called on a terminal episode; reset() first");

    Transition tr;
    tr.obs = observe();
    tr.action = action;

    for (int i = 0; i < 6; ++i) {
        const double d = (static_cast<int>(action.branches[i]) - 1) * p_.delta_theta;
        s_.q.angles[i] = model_.clamp_angle(i, s_.q.angles[i] + d);
    }
    // Gripper: 0 = open (+), 1 = stop, 2 = close (-).
    const double dg = (1 - static_cast<int>(action.branches[6])) * p_.delta_gripper;
    s_.q.gripper_aperture = std::clamp(s_.q.gripper_aperture + dg, 0.0, model_.max_aperture);

    if (case_ != CaseId::Case1) {
        // Ping-pong along x between the track bounds.
        double x = s_.goal.x + s_.goal_velocity_x;
        if (x > p_.track.x_max) {
            x = p_.track.x_max - (x - p_.track.x_max);
            s_.goal_velocity_x = -s_.goal_velocity_x;
        } else if (x < p_.track.x_min) {
            x = p_.track.x_min + (p_.track.x_min - x);
            s_.goal_velocity_x = -s_.goal_velocity_x;
        }
        s_.goal.x = x;
    }

    PredicateSet pred =
        geometric_predicates(model_, s_.q, s_.goal, p_.goal_radius, p_.contact_epsilon);
    if (pred.touched_goal) {
        const bool gated = s_.last_goal_fire_step >= 0 &&
                           s_.step_index - s_.last_goal_fire_step < p_.contact_cooldown;
        if (gated) {
            pred.touched_goal = false;
        } else {
            s_.last_goal_fire_step = s_.step_index;
        }
    }

    const FkResult fk = forward_kinematics(model_, s_.q);
    StepEvents ev;
    ev.predicates = pred;
    ev.upright_alignment = upright_alignment(fk.wrist_axis);
    ev.step_index = s_.step_index;

    const RewardResult rr = evaluate(spec_, ev);
    last_events_ = ev;
    last_result_ = rr;
    s_.step_index += 1;
    s_.terminal = rr.terminal;

    tr.reward = rr.reward;
    tr.next_obs = observe();
    tr.done = rr.terminal;
    return tr;
}

namespace {

nlohmann::json obs_to_json(const Observation& o) {
    return nlohmann::json(o.v);
}

Observation obs_from_json(const nlohmann::json& j) {
    Observation o;
    o.v = j.get<std::array<double, kObsDim>>();
    return o;
}

}  // namespace

void write_trace_line(std::ostream& os, const TraceRecord& rec) {
    nlohmann::json j;
    j["obs"] = obs_to_json(rec.t.obs);
    j["action"] = rec.t.action.branches;
    j["reward"] = rec.t.reward;
    j["next_obs"] = obs_to_json(rec.t.next_obs);
    j["done"] = rec.t.done;
    std::array<double, 7> q;
    for (int i = 0; i < 6; ++i) q[i] = rec.q_after.angles[i];
    q[6] = rec.q_after.gripper_aperture;
    j["q"] = q;
    os << j.dump() << '\n';
}

std::vector<TraceRecord> read_trace(std::istream& is) {
    std::vector<TraceRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
        }
        TraceRecord rec;
        rec.t.obs = obs_from_json(j.at("obs"));
        rec.t.action.branches = j.at("action").get<std::array<uint8_t, 7>>();
        rec.t.reward = j.at("reward").get<double>();
        rec.t.next_obs = obs_from_json(j.at("next_obs"));
        rec.t.done = j.at("done").get<bool>();
        const auto q = j.at("q").get<std::array<double, 7>>();
        for (int i = 0; i < 6; ++i) rec.q_after.angles[i] = q[i];
        rec.q_after.gripper_aperture = q[6];
        out.push_back(rec);
    }
    return out;
}

}  // namespace twinarm
