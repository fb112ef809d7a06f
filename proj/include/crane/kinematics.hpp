#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>

#include "crane/errors.hpp"

namespace crane {

inline constexpr int kNumJoints = 8;
inline constexpr int kNumActuated = 6;
// Actuated joints (0-based indices into q): q1 q2 q3 q4 q7 q8.
inline constexpr std::array<int, kNumActuated> kActuatedIndex = {0, 1, 2, 3, 6, 7};
// Unactuated free-swinging joints: q5 (tip), q6 (tilt).
inline constexpr std::array<int, 2> kUnactuatedIndex = {4, 5};

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;
using ActuatedVector = Eigen::Matrix<double, kNumActuated, 1>;

// Homogeneous transform split into rotation + translation.
struct PoseTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Mat4 matrix() const {
        Mat4 h = Mat4::Identity();
        h.topLeftCorner<3, 3>() = rotation;
        h.topRightCorner<3, 1>() = translation;
        return h;
    }

    PoseTransform operator*(const PoseTransform& o) const {
        return {rotation * o.rotation, rotation * o.translation + translation};
    }

    PoseTransform inverse() const {
        Mat3 rt = rotation.transpose();
        return {rt, -(rt * translation)};
    }

    // Orthonormality + right-handedness, both within 1e-9.
    bool is_valid(double tol = 1e-9) const {
        const Mat3 err = rotation.transpose() * rotation - Mat3::Identity();
        return err.cwiseAbs().maxCoeff() <= tol &&
               std::abs(rotation.determinant() - 1.0) <= tol &&
               translation.allFinite();
    }
};

// The grapple-center frame C: origin p_C plus the three axis columns.
struct GrappleFrame {
    Vec3 p_C = Vec3::Zero();
    Vec3 e_Cx = Vec3::UnitX();
    Vec3 e_Cy = Vec3::UnitY();
    Vec3 e_Cz = Vec3::UnitZ();

    PoseTransform pose() const {
        PoseTransform t;
        t.rotation.col(0) = e_Cx;
        t.rotation.col(1) = e_Cy;
        t.rotation.col(2) = e_Cz;
        t.translation = p_C;
        return t;
    }
};

// One Denavit-Hartenberg row: constant (theta, d, a, alpha) plus an optional
// joint binding that adds q to either theta or d.
struct DhRow {
    double theta = 0.0;  // rad, constant part
    double d = 0.0;      // m, constant part
    double a = 0.0;      // m
    double alpha = 0.0;  // rad
    enum class Binding : std::uint8_t { None, Theta, D };
    Binding binding = Binding::None;
    int joint = -1;  // 0-based index into q when binding != None
};

struct JointLimits {
    std::array<double, kNumJoints> min{};
    std::array<double, kNumJoints> max{};
    // Max speed per actuated joint, in q_A order (q1 q2 q3 q4 q7 q8).
    ActuatedVector max_speed = ActuatedVector::Ones();

    bool bounded(int joint) const { return std::isfinite(min[joint]) && std::isfinite(max[joint]); }
};

JointLimits default_joint_limits();

// Elementary DH step: Rot_z(theta) * Trans_z(d) * Trans_x(a) * Rot_x(alpha),
// with the bound joint value added to theta or d.
PoseTransform dh_transform(const DhRow& row, double q_value);

// Clamp every entry of q into range; returns per-joint flags for entries that
// were actually clamped (unbounded joints never flag).
struct ClampResult {
    JointVector q;
    std::array<bool, kNumJoints> clamped{};
    bool any() const {
        for (bool c : clamped)
            if (c) return true;
        return false;
    }
};
ClampResult clamp_to_limits(const JointVector& q, const JointLimits& limits);

// Full crane model: the 8-row DH chain, limits and the jaw geometry.
class CraneModel {
  public:
    CraneModel();  // compiled-in defaults

    const std::array<DhRow, kNumJoints>& dh_rows() const { return rows_; }
    const JointLimits& limits() const { return limits_; }
    JointLimits& limits() { return limits_; }
    void set_dh_rows(const std::array<DhRow, kNumJoints>& rows) { rows_ = rows; }

    double grapple_offset() const { return grapple_offset_; }
    void set_grapple_offset(double v) { grapple_offset_ = v; }
    double jaw_width_max() const { return jaw_width_max_; }
    void set_jaw_width_max(double v) { jaw_width_max_ = v; }
    double q8_closed() const { return limits_.max[7]; }

    // Frame of DH row `upto` (1..8) in world coordinates; upto=8 is the wrist.
    PoseTransform frame(const JointVector& q, int upto) const;

    // Grapple-center frame: wrist frame translated grapple_offset along its
    // z-axis (the suspension axis, pointing toward the jaw tips when hanging).
    GrappleFrame forward_kinematics(const JointVector& q) const;

    // Same, but skips the joint-range precondition; used on internally
    // produced (already clamped) states and by inspection tooling.
    GrappleFrame forward_kinematics_unchecked(const JointVector& q) const;

    // Jaw opening width: w_max at q8=0 (open), 0 at q8=q8_closed (closed).
    double jaw_opening_width(double q8) const;

    void check_in_limits(const JointVector& q) const;

  private:
    std::array<DhRow, kNumJoints> rows_;
    JointLimits limits_;
    double grapple_offset_ = 0.3;  // m along wrist z toward the jaw tips
    double jaw_width_max_ = 1.6;   // m, fully open
};

}  // namespace crane
