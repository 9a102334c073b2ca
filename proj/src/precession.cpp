#include "hlab/precession.hpp"

#include <cmath>
#include <numbers>

namespace hlab {

std::vector<std::string> GyroConfig::violations() const
{
    std::vector<std::string> out;
    if (!(wheel_mass > 0.0)) {
        out.emplace_back("wheel_mass must be > 0");
    }
    if (!(wheel_radius > 0.0)) {
        out.emplace_back("wheel_radius must be > 0");
    }
    if (!(handle_half_length > 0.0)) {
        out.emplace_back("handle_half_len must be > 0");
    }
    if (!(spin_rate >= 0.0 && spin_rate <= kMaxSpinRate)) {
        out.emplace_back("spin_rate must be within [0, 200] rad/s");
    }
    return out;
}

void GyroConfig::validate() const
{
    const auto v = violations();
    if (!v.empty()) {
        throw ConfigurationError("gyroscope: " + v.front());
    }
}

double moment_of_inertia(double wheel_mass, double wheel_radius) { return 0.5 * wheel_mass * wheel_radius * wheel_radius; }

GyroState make_gyro_state(const GyroConfig& config, const Vec3& axis)
{
    GyroState s;
    s.axis = normalized(axis);
    s.spin_rate = config.spin_rate;
    s.angular_momentum = s.axis * (moment_of_inertia(config.wheel_mass, config.wheel_radius) * config.spin_rate);
    s.free_rod = config.spin_rate == 0.0;
    return s;
}

Vec3 handles_to_torque(const Vec3& left_force, const Vec3& right_force, double handle_half_length, const Vec3& axis)
{
    const Vec3 arm = axis * handle_half_length;
    return cross(arm, right_force) + cross(-arm, left_force);
}

double precession_rate(double torque_perp, double angular_momentum)
{
    if (angular_momentum == 0.0) {
        throw UndefinedPrecessionError();
    }
    return torque_perp / angular_momentum;
}

GyroState gyro_step(const GyroConfig& config, const GyroState& state, const HandleForcePair& handle_forces, double dt)
{
    if (!handle_forces.left.is_finite() || !handle_forces.right.is_finite() || !state.axis.is_finite()) {
        throw StateCorruptionError("non-finite gyroscope state or handle force");
    }
    const Vec3& a = state.axis;
    const Vec3 torque = handles_to_torque(handle_forces.left, handle_forces.right, config.handle_half_length, a);
    const Vec3 torque_perp = perpendicular_part(torque, a);

    const double l_mag = moment_of_inertia(config.wheel_mass, config.wheel_radius) * state.spin_rate;
    const bool free_rod = !(l_mag > 0.0);
    // Spinning: precession about a x tau. Stopped: the rod turns about the
    // torque itself, against a viscous pivot.
    const Vec3 omega = free_rod ? torque_perp / kFreeRodDamping : cross(a, torque_perp) / l_mag;

    Vec3 axis = a;
    const double rate = omega.norm();
    if (rate > 0.0) {
        axis = normalized(rotate_about(a, omega / rate, rate * dt));
    }

    GyroState next;
    next.axis = axis;
    next.spin_rate = state.spin_rate;
    next.angular_momentum = axis * l_mag;
    next.free_rod = free_rod;
    return next;
}

HandleForcePair handle_reaction(const GyroConfig& config, const GyroState& state, const Vec3& axis_rate)
{
    const Vec3 torque = cross(axis_rate, state.angular_momentum);
    const Vec3 right = cross(torque, state.axis) / (2.0 * config.handle_half_length);
    return {-right, right};
}

// ---------------------------------------------------------------------------

PrecessionLab::PrecessionLab(GyroConfig config, CouplingParams coupling)
    : config_(config)
    , coupling_(coupling)
{
    config_.validate();
    reset();
}

void PrecessionLab::reset()
{
    state_ = make_gyro_state(config_, {1.0, 0.0, 0.0});
    axis_angular_velocity_ = {};
    axis_rate_ = {};
    previous_midline_ = {};
    have_midline_ = false;
    coupling_forces_ = {};
    reaction_ = {};
    torque_ = {};
    hand_left_ = {-config_.handle_half_length, 0.0, 0.0};
    hand_right_ = {config_.handle_half_length, 0.0, 0.0};
    clear_fault();
}

void PrecessionLab::set_config(const GyroConfig& config)
{
    config.validate();
    config_ = config;
    state_ = make_gyro_state(config_, state_.axis);
}

std::vector<DeviceFeedback> PrecessionLab::step(std::span<const DeviceSample> samples, double dt)
{
    const DeviceSample& left = samples[0];
    const DeviceSample& right = samples[1];
    const double d = config_.handle_half_length;
    const Vec3 a = state_.axis;

    const Vec3 right_handle = a * d;
    const Vec3 right_handle_vel = cross(axis_angular_velocity_, right_handle);
    coupling_forces_.right = coupling_force(right.pos, right.vel, right_handle, right_handle_vel, coupling_);
    coupling_forces_.left = coupling_force(left.pos, left.vel, -right_handle, -right_handle_vel, coupling_);

    // Swing rate of the hands' midline, 20 Hz low-pass.
    const Vec3 midline = normalized(right.pos - left.pos);
    if (midline.squared_norm() > 0.0) {
        if (have_midline_) {
            const Vec3 raw = cross(previous_midline_, midline) / dt;
            const double tau = 1.0 / (2.0 * std::numbers::pi * kAxisRateCutoffHz);
            axis_rate_ += (raw - axis_rate_) * (dt / (dt + tau));
        }
        previous_midline_ = midline;
        have_midline_ = true;
    }

    torque_ = handles_to_torque(coupling_forces_.left, coupling_forces_.right, d, a);
    state_ = gyro_step(config_, state_, coupling_forces_, dt);
    axis_angular_velocity_ = cross(a, state_.axis) / dt;

    // handle_reaction is what the hands must push to swing the axis; the
    // devices render the gyroscope's push back.
    reaction_ = handle_reaction(config_, state_, axis_rate_);
    hand_left_ = left.pos;
    hand_right_ = right.pos;

    return {
        DeviceFeedback{coupling_forces_.left, -reaction_.left},
        DeviceFeedback{coupling_forces_.right, -reaction_.right},
    };
}

Snapshot PrecessionLab::snapshot(double t) const
{
    const double d = config_.handle_half_length;
    const Vec3 a = state_.axis;
    const Vec3 torque_perp = perpendicular_part(torque_, a);
    const double l_mag = state_.angular_momentum.norm();

    Snapshot snap;
    snap.t = t;
    snap.scenario = ScenarioId::Precession;
    snap.bodies = {
        {"wheel", {}, a},
        {"handle_left", a * -d, a},
        {"handle_right", a * d, a},
        {"hand_left", hand_left_, a},
        {"hand_right", hand_right_, a},
    };
    snap.arrows = {
        make_arrow(a * -d, coupling_forces_.left, "coupling_left"),
        make_arrow(a * d, coupling_forces_.right, "coupling_right"),
        make_arrow(a * -d, -reaction_.left, "reaction_left"),
        make_arrow(a * d, -reaction_.right, "reaction_right"),
    };
    snap.hud = {
        {"spin_rate", state_.spin_rate},
        {"angular_momentum", l_mag},
        {"torque", torque_perp.norm()},
        {"precession_rate", l_mag > 0.0 ? torque_perp.norm() / l_mag : 0.0},
        {"handle_force", reaction_.right.norm()},
        {"free_rod", state_.free_rod ? 1.0 : 0.0},
    };
    return snap;
}

void PrecessionLab::hash_state(StateHasher& h) const
{
    h.vec(state_.axis).f64(state_.spin_rate).vec(state_.angular_momentum).flag(state_.free_rod);
    h.vec(axis_angular_velocity_).vec(axis_rate_).vec(previous_midline_).flag(have_midline_);
}

} // namespace hlab
