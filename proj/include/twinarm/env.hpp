#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "twinarm/kinematics.hpp"
#include "twinarm/reward.hpp"
#include "twinarm/rng.hpp"

namespace twinarm {

// Seven ternary selections: joints 1-6 (0 = turn one way, 1 = stop,
// 2 = turn the other) and the gripper (0 = open, 1 = stop, 2 = close).
struct BranchedAction {
    std::array<uint8_t, 7> branches{1, 1, 1, 1, 1, 1, 1};

    bool operator==(const BranchedAction&) const = default;
};

inline constexpr int kNumBranches = 7;
inline constexpr int kBranchOptions = 3;
inline constexpr int kObsDim = 16;

// 16 unnormalized reals: gripper_mid (3), end_effector (3), goal (3),
// gripper-to-goal distance (1), joint angles (6).
struct Observation {
    std::array<double, kObsDim> v{};

    double distance() const { return v[9]; }

    bool operator==(const Observation&) const = default;
};

struct TrackParams {
    double x_min = -0.20;
    double x_max = 0.20;
    double y = 0.22;
    double z_offset = 0.05;        // above the table surface
    double speed = 5e-4;           // m per step along x
};

struct Box3 {
    Pose3 lo{-0.18, 0.16, 0.06};
    Pose3 hi{0.18, 0.30, 0.26};
};

struct EnvParams {
    double delta_theta = 0.02;     // rad per step per joint
    double delta_gripper = 0.001;  // m per step
    double goal_radius = 0.03;
    double contact_epsilon = 1e-3;
    int contact_cooldown = 25;     // min steps between repeated goal rewards
    JointVector home{{0.0, 0.35, -0.35, 0.0, 0.0, 0.0}, 0.02};
    Box3 workspace;                // Case 1 goal sampling box
    TrackParams track;             // Cases 2/3 goal track
};

struct EnvState {
    JointVector q;
    Pose3 goal;
    double goal_velocity_x = 0;
    int step_index = 0;
    int episode_index = 0;
    int last_goal_fire_step = -1;  // contact-cooldown bookkeeping
    bool terminal = false;
    Rng rng;

    bool operator==(const EnvState& o) const {
        return q == o.q && goal.x == o.goal.x && goal.y == o.goal.y && goal.z == o.goal.z &&
               goal_velocity_x == o.goal_velocity_x && step_index == o.step_index &&
               episode_index == o.episode_index && last_goal_fire_step == o.last_goal_fire_step &&
               terminal == o.terminal && rng == o.rng;
    }
};

// The stored unit of experience.
struct Transition {
    Observation obs;
    BranchedAction action;
    double reward = 0;
    Observation next_obs;
    bool done = false;
};

// Episodic kinematic simulation binding the arm model and a reward table.
// One instance owns one rollout; independent instances are thread-safe.
class Environment {
  public:
    Environment(CaseId case_id, const ArmModel& model, const EnvParams& params,
                const RewardSpec& spec, uint64_t seed);

    // Starts a new episode: home configuration, fresh goal. The generator
    // state carries across episodes so rollouts are seed-deterministic.
    void reset();

    Observation observe() const;

    // Advances one step. Throws UsageError when called on a terminal state.
    Transition step(const BranchedAction& action);

    const EnvState& state() const { return s_; }
    const RewardSpec& spec() const { return spec_; }
    const ArmModel& model() const { return model_; }
    CaseId case_id() const { return case_; }

    // Events and reward breakdown of the most recent step.
    const StepEvents& last_events() const { return last_events_; }
    const RewardResult& last_result() const { return last_result_; }

  private:
    CaseId case_;
    ArmModel model_;
    EnvParams p_;
    RewardSpec spec_;
    EnvState s_;
    StepEvents last_events_{};
    RewardResult last_result_{};
};

// Trace line: one Transition plus the post-step joint state, which the
// twin-link publisher replays.
struct TraceRecord {
    Transition t;
    JointVector q_after;
};

void write_trace_line(std::ostream& os, const TraceRecord& rec);
std::vector<TraceRecord> read_trace(std::istream& is);

}  // namespace twinarm
