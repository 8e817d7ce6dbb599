#include "twinarm/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "twinarm/errors.hpp"

namespace twinarm {

namespace {

// Running frame of the chain: rotation (row-major 3x3) and origin.
struct Frame {
    double r[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    double px = 0, py = 0, pz = 0;

    // Post-multiply by a rotation about the local z axis.
    void rot_z(double a) {
        const double c = std::cos(a), s = std::sin(a);
        for (int i = 0; i < 3; ++i) {
            const double c0 = r[3 * i + 0], c1 = r[3 * i + 1];
            r[3 * i + 0] = c0 * c + c1 * s;
            r[3 * i + 1] = -c0 * s + c1 * c;
        }
    }

    // Post-multiply by a rotation about the local x axis.
    void rot_x(double a) {
        const double c = std::cos(a), s = std::sin(a);
        for (int i = 0; i < 3; ++i) {
            const double c1 = r[3 * i + 1], c2 = r[3 * i + 2];
            r[3 * i + 1] = c1 * c + c2 * s;
            r[3 * i + 2] = -c1 * s + c2 * c;
        }
    }

    // Translate along the local z axis.
    void trans_z(double d) {
        px += r[2] * d;
        py += r[5] * d;
        pz += r[8] * d;
    }

    Pose3 origin() const { return {px, py, pz}; }
    Vec3 local_z() const { return {r[2], r[5], r[8]}; }
};

FkResult compose_chain(const ArmModel& m, const JointVector& q) {
    Frame f;
    f.pz = m.base_height;
    f.rot_z(q.angles[0]);                           // base yaw
    f.rot_x(-q.angles[1]);                          // shoulder pitch (+ leans toward +y)
    f.trans_z(m.link_lengths[0]);
    f.rot_x(-q.angles[2]);                          // elbow pitch
    f.trans_z(m.link_lengths[1]);
    f.rot_z(q.angles[3]);                           // forearm roll
    f.trans_z(m.link_lengths[2]);
    f.rot_x(-q.angles[4]);                          // wrist pitch
    f.trans_z(m.link_lengths[3]);
    FkResult out;
    out.end_effector = f.origin();
    f.rot_z(q.angles[5]);                           // wrist roll
    f.trans_z(m.link_lengths[4]);
    out.gripper_mid = f.origin();
    out.wrist_axis = f.local_z();
    return out;
}

}  // namespace

void ArmModel::validate() const {
    for (double l : link_lengths)
        if (!(l > 0)) throw ConfigError("arm: link lengths must be strictly positive");
    if (!(base_height > 0)) throw ConfigError("arm: base_height must be strictly positive");
    if (!(max_aperture > 0)) throw ConfigError("arm: max_aperture must be strictly positive");
    for (int i = 0; i < 6; ++i)
        if (!(joint_min[i] < joint_max[i]))
            throw ConfigError("arm: joint limit interval " + std::to_string(i + 1) +
                              " is empty");
    if (reach() > 0.75)
        throw ConfigError("arm: reach " + std::to_string(reach()) +
                          " m exceeds the 0.75 m span bound");
}

bool ArmModel::within_limits(const JointVector& q, int* bad_joint) const {
    for (int i = 0; i < 6; ++i) {
        if (q.angles[i] < joint_min[i] || q.angles[i] > joint_max[i]) {
            if (bad_joint) *bad_joint = i;
            return false;
        }
    }
    if (q.gripper_aperture < 0 || q.gripper_aperture > max_aperture) {
        if (bad_joint) *bad_joint = 6;
        return false;
    }
    return true;
}

double ArmModel::clamp_angle(int joint, double angle) const {
    return std::clamp(angle, joint_min[joint], joint_max[joint]);
}

FkResult forward_kinematics(const ArmModel& model, const JointVector& q) {
    int bad = -1;
    if (!model.within_limits(q, &bad)) {
        if (bad == 6)
            throw std::invalid_argument("gripper aperture out of [0, max_aperture]");
        throw std::invalid_argument("joint " + std::to_string(bad + 1) +
                                    " outside its limit interval");
    }
    return compose_chain(model, q);
}

FkResult forward_kinematics_unchecked(const ArmModel& model, const JointVector& q) {
    return compose_chain(model, q);
}

PredicateSet geometric_predicates(const ArmModel& model, const JointVector& q,
                                  const Pose3& goal, double goal_radius,
                                  double contact_epsilon) {
    const FkResult fk = forward_kinematics(model, q);
    const Pose3& g = fk.gripper_mid;
    PredicateSet p;
    p.touched_goal = distance(g, goal) <= goal_radius;
    p.touched_table = std::abs(g.z - model.table_height) <= contact_epsilon;
    p.below_table = g.z < model.table_height - contact_epsilon;
    p.behind_base = g.y < model.base_keepout_y;
    return p;
}

double upright_alignment(const Vec3& axis) {
    const double n = std::sqrt(axis.x * axis.x + axis.y * axis.y + axis.z * axis.z);
    if (std::abs(n - 1.0) > 1e-9)
        throw std::invalid_argument("wrist axis must be a unit vector");
    return std::max(0.0, axis.z);
}

}  // namespace twinarm
