#pragma once

#include <array>
#include <cmath>

namespace twinarm {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

// Point in the world frame: z up, robot base at the origin, table surface at
// z = ArmModel::table_height.
struct Pose3 {
    double x = 0, y = 0, z = 0;
};

inline double distance(const Pose3& a, const Pose3& b) {
    return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                     (a.z - b.z) * (a.z - b.z));
}

// Six joint angles (radians) plus gripper aperture (meters, half-width
// between the gripper pads).
struct JointVector {
    std::array<double, 6> angles{};
    double gripper_aperture = 0;

    bool operator==(const JointVector&) const = default;
};

// Geometry of the serial chain: yaw, pitch, pitch, roll, pitch, roll, with a
// fixed hand segment after the last roll. link_lengths[4] is that hand
// segment; gripper_mid sits at its tip.
struct ArmModel {
    std::array<double, 5> link_lengths{0.20, 0.18, 0.12, 0.09, 0.059};
    double base_height = 0.10;
    std::array<double, 6> joint_min{-M_PI, -1.8, -1.8, -M_PI, -M_PI, -M_PI};
    std::array<double, 6> joint_max{M_PI, 1.8, 1.8, M_PI, M_PI, M_PI};
    double max_aperture = 0.04;
    double table_height = 0.0;
    double base_keepout_y = -0.05;

    // Upper bound on end-effector distance from the base (arm span / 2).
    double reach() const {
        double r = base_height;
        for (double l : link_lengths) r += l;
        return r;
    }

    // Throws ConfigError if lengths are not positive, limits are inverted,
    // or the reach exceeds 0.75 m.
    void validate() const;

    bool within_limits(const JointVector& q, int* bad_joint = nullptr) const;
    double clamp_angle(int joint, double angle) const;
};

struct FkResult {
    Pose3 end_effector;   // wrist flange (before the hand segment)
    Pose3 gripper_mid;    // tip of the hand segment, between the pads
    Vec3 wrist_axis;      // unit vector along the hand segment
};

// Pure forward kinematics. Throws std::invalid_argument naming the first
// out-of-limit joint (or the gripper) when the precondition fails.
FkResult forward_kinematics(const ArmModel& model, const JointVector& q);

// Same chain without the limit precondition; used for divergence reporting
// where received joint states may be out of the replica's limits.
FkResult forward_kinematics_unchecked(const ArmModel& model, const JointVector& q);

struct PredicateSet {
    bool touched_goal = false;
    bool touched_table = false;
    bool below_table = false;
    bool behind_base = false;

    bool operator==(const PredicateSet&) const = default;
};

// Contact predicates of the reward tables, evaluated at gripper_mid.
// touched_table holds within +-contact_epsilon of the table plane;
// below_table strictly below that band, so the two are mutually exclusive.
PredicateSet geometric_predicates(const ArmModel& model, const JointVector& q,
                                  const Pose3& goal, double goal_radius,
                                  double contact_epsilon = 1e-3);

// Clamped cosine to vertical, in [0, 1]. Precondition: |axis| = 1 +- 1e-9.
double upright_alignment(const Vec3& axis);

}  // namespace twinarm
