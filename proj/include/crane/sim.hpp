#pragma once

#include <iosfwd>
#include <optional>

#include "crane/kinematics.hpp"
#include "crane/rng.hpp"

namespace crane {

// A single wood log: a horizontal cylinder resting on the ground plane (or
// carried by the grapple once attached). Pose is center position + yaw.
struct LogSpec {
    double diameter = 0.5;  // m, in [0.3, 0.8]
    double length = 2.75;   // m
    Vec3 position = Vec3::Zero();
    double yaw = 0.0;  // rad; the axis direction is (-sin yaw, cos yaw, 0)
    double mass = 0.0;  // kg, derived from volume x density; bookkeeping only

    Vec3 axis() const { return {-std::sin(yaw), std::cos(yaw), 0.0}; }
};

// Complete world state. A value type: copyable, serializable, hashable.
struct SimState {
    JointVector q = JointVector::Zero();
    ActuatedVector qd_A = ActuatedVector::Zero();  // realized actuated velocities
    double qd5 = 0.0;  // pendulum tip rate
    double qd6 = 0.0;  // pendulum tilt rate
    LogSpec log;
    bool attached = false;
    PoseTransform log_in_grapple;  // captured at attachment; valid iff attached
    double sim_time = 0.0;

    // Pivot kinematics memory for the pendulum driving term (finite
    // differences of the suspension-point position).
    Vec3 pivot_prev_pos = Vec3::Zero();
    Vec3 pivot_prev_vel = Vec3::Zero();
    bool pivot_history = false;

    void serialize(std::ostream& os) const;
    static SimState deserialize(std::istream& is);
    bool operator==(const SimState& o) const;
};

// Log/scene randomization; ranges validated at use.
struct ScenarioConfig {
    double slew_min = -2.0943951023931953;  // -2*pi/3
    double slew_max = -1.0471975511965976;  // -pi/3
    double bearing_min = -2.0943951023931953;
    double bearing_max = -1.0471975511965976;
    double radius_min = 5.2;  // m from the crane base
    double radius_max = 7.2;
    double diameter_min = 0.3;  // set min == max for a fixed-diameter batch
    double diameter_max = 0.8;
    double yaw_min = -3.14159265358979323846;
    double yaw_max = 3.14159265358979323846;
    double log_length = 2.75;
    double wood_density = 800.0;  // kg/m^3
    // Rest pose for the non-slew joints (working pose, grapple hanging).
    double rest_q2 = 1.17;
    double rest_q3 = -0.16;
    double rest_q4 = 1.20;
    double q7_jitter = 1.0;  // rotator spawns uniform in +/- this

    void validate() const;
};

// Physics knobs of the simplified model.
struct SimConfig {
    double dt = 0.005;          // s
    double velocity_tau = 0.1;  // s; first-order lag constant, 0 = ideal tracking
    double pendulum_length = 0.8;    // m
    double pendulum_damping = 1.0;   // 1/s
    double pendulum_coupling = 1.25; // 1/m (defaults to 1/length)
    double gravity = 9.81;           // m/s^2
    double align_tol = 0.05;         // attachment alignment bound on the angle distance
};

// Angle distance between the jaw axis and the log axis: 1 - |dot|, in [0, 1].
double angle_distance(const Vec3& e_Cx, const Vec3& e_ly);

// Time-steps the simplified world. Stateless w.r.t. episodes: all mutable
// state lives in SimState, so instances are freely shareable/copyable.
class CraneSimulator {
  public:
    CraneSimulator() = default;
    CraneSimulator(const CraneModel& model, const SimConfig& cfg)
        : model_(model), cfg_(cfg) {}

    const CraneModel& model() const { return model_; }
    const SimConfig& config() const { return cfg_; }

    // Fresh episode: log sampled in the annulus sector, crane at rest pose
    // with the commanded slew, grapple hanging at its equilibrium, jaws open.
    SimState spawn_scenario(const ScenarioConfig& scenario, RngStream& rng) const;

    // One dt of: velocity-lag tracking -> actuated integration + clamping ->
    // pendulum substep -> attached-log transport -> grasp check.
    SimState step(const SimState& state, const ActuatedVector& desired_velocity,
                  double dt) const;
    SimState step(const SimState& state, const ActuatedVector& desired_velocity) const {
        return step(state, desired_velocity, cfg_.dt);
    }

    // Damped driven pendulum for the free joints; exposed for direct testing.
    // Returns (q5, q6, qd5, qd6) after one dt given the pivot linear
    // acceleration expressed in world coordinates.
    struct PendulumState {
        double q5, q6, qd5, qd6;
    };
    PendulumState pendulum_step(const SimState& state, const Vec3& base_acceleration,
                                double dt) const;

    // Attachment predicate + transitions; exposed for direct testing.
    // Updates attached / log_in_grapple / log pose in place.
    void grasp_check(SimState& state) const;

    // In-plane hang equilibrium of the tip joint for the current boom angles.
    double tip_equilibrium(const SimState& state) const;
    static constexpr double tilt_equilibrium() { return 1.5707963267948966; }

    GrappleFrame grapple_frame(const SimState& state) const {
        return model_.forward_kinematics_unchecked(state.q);
    }

  private:
    CraneModel model_;
    SimConfig cfg_;
};

// One CSV row per step: time, q(8), qd_A(6), p_C(3), log pose(4), attached.
void write_trajectory_header(std::ostream& os);
void write_trajectory_row(std::ostream& os, const SimState& state, const GrappleFrame& g);

}  // namespace crane
