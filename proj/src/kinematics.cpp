#include "crane/kinematics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace crane {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = kPi / 2.0;
}  // namespace

JointLimits default_joint_limits() {
    JointLimits lim;
    constexpr double inf = std::numeric_limits<double>::infinity();
    // q1 slew, q2 inner boom, q3 outer boom (rad); q4 telescope (m);
    // q5 tip, q6 tilt (free-swinging, rad); q7 rotator (unbounded);
    // q8 jaw drive (rad, 0 = open, 3 = closed).
    lim.min = {-3.71, -1.2, -0.91, 0.0, -1.57, -0.79, -inf, 0.0};
    lim.max = {3.71, 1.56, 4.6, 4.47, 1.57, 2.36, inf, 3.0};
    // Max commanded speed per actuated joint, q_A order (q1 q2 q3 q4 q7 q8).
    lim.max_speed << 1.0, 0.8, 0.8, 1.5, 2.0, 3.0;
    return lim;
}

PoseTransform dh_transform(const DhRow& row, double q_value) {
    if (!std::isfinite(q_value)) throw InvalidArgument("dh_transform: non-finite joint value");
    double theta = row.theta;
    double d = row.d;
    switch (row.binding) {
        case DhRow::Binding::Theta: theta += q_value; break;
        case DhRow::Binding::D: d += q_value; break;
        case DhRow::Binding::None: break;
    }
    if (!std::isfinite(theta) || !std::isfinite(d) || !std::isfinite(row.a) ||
        !std::isfinite(row.alpha)) {
        throw InvalidArgument("dh_transform: non-finite DH parameters");
    }
    const double ct = std::cos(theta), st = std::sin(theta);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    PoseTransform t;
    t.rotation << ct, -st * ca, st * sa,
                  st, ct * ca, -ct * sa,
                  0.0, sa, ca;
    t.translation << row.a * ct, row.a * st, d;
    return t;
}

ClampResult clamp_to_limits(const JointVector& q, const JointLimits& limits) {
    ClampResult out;
    out.q = q;
    for (int i = 0; i < kNumJoints; ++i) {
        if (!limits.bounded(i)) continue;
        if (q[i] < limits.min[i]) {
            out.q[i] = limits.min[i];
            out.clamped[i] = true;
        } else if (q[i] > limits.max[i]) {
            out.q[i] = limits.max[i];
            out.clamped[i] = true;
        }
    }
    return out;
}

CraneModel::CraneModel() : limits_(default_joint_limits()) {
    using B = DhRow::Binding;
    // Rows 4 and 5 both translate by q4: the two synchronized telescopic
    // stages extend together, so +0.1 m on q4 moves the tip +0.2 m.
    rows_ = {{
        {0.0, 2.4, 0.18, kHalfPi, B::Theta, 0},    // q1 slew column
        {0.0, 0.0, 3.5, 0.0, B::Theta, 1},         // q2 inner boom
        {0.0, 0.0, -0.4, kHalfPi, B::Theta, 2},    // q3 outer boom
        {0.0, 3.1, 0.0, 0.0, B::D, 3},             // telescope stage 1
        {0.0, 0.0, 0.0, -kHalfPi, B::D, 3},        // telescope stage 2
        {0.0, 0.0, -0.21, -kHalfPi, B::Theta, 4},  // q5 free tip
        {0.0, 0.0, 0.0, -kHalfPi, B::Theta, 5},    // q6 free tilt
        {0.0, 0.58, 0.0, 0.0, B::Theta, 6},        // q7 rotator + suspension link
    }};
}

PoseTransform CraneModel::frame(const JointVector& q, int upto) const {
    PoseTransform h;
    for (int i = 0; i < upto; ++i) {
        const DhRow& row = rows_[static_cast<std::size_t>(i)];
        const double qv = row.binding == DhRow::Binding::None ? 0.0 : q[row.joint];
        h = h * dh_transform(row, qv);
    }
    return h;
}

void CraneModel::check_in_limits(const JointVector& q) const {
    constexpr double tol = 1e-9;
    for (int i = 0; i < kNumJoints; ++i) {
        if (!q.allFinite()) throw InvalidArgument("joint vector has non-finite entries");
        if (!limits_.bounded(i)) continue;
        if (q[i] < limits_.min[i] - tol || q[i] > limits_.max[i] + tol) {
            throw LimitViolation(i, "joint q" + std::to_string(i + 1) + " out of range: " +
                                        std::to_string(q[i]));
        }
    }
}

GrappleFrame CraneModel::forward_kinematics(const JointVector& q) const {
    check_in_limits(q);
    return forward_kinematics_unchecked(q);
}

GrappleFrame CraneModel::forward_kinematics_unchecked(const JointVector& q) const {
    const PoseTransform wrist = frame(q, kNumJoints);
    GrappleFrame g;
    g.e_Cx = wrist.rotation.col(0);
    g.e_Cy = wrist.rotation.col(1);
    g.e_Cz = wrist.rotation.col(2);
    g.p_C = wrist.translation + grapple_offset_ * g.e_Cz;
    return g;
}

double CraneModel::jaw_opening_width(double q8) const {
    const double q8_max = q8_closed();
    if (!(q8 >= 0.0 && q8 <= q8_max)) throw InvalidArgument("jaw_opening_width: q8 out of [0, closed]");
    return jaw_width_max_ * (1.0 - q8 / q8_max);
}

}  // namespace crane
