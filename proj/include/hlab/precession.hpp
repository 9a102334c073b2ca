#pragma once

#include <string>
#include <vector>

#include "hlab/servo.hpp"

namespace hlab {

inline constexpr double kMaxSpinRate = 200.0;   ///< rad/s
inline constexpr double kAxisRateCutoffHz = 20.0;

struct GyroConfig {
    double wheel_mass = 1.0;          ///< kg
    double wheel_radius = 0.2;        ///< m
    double handle_half_length = 0.15; ///< m, pivot to each handle
    double spin_rate = 100.0;         ///< rad/s, user-controlled

    [[nodiscard]] std::vector<std::string> violations() const;
    void validate() const;
};

struct GyroState {
    Vec3 axis{1.0, 0.0, 0.0}; ///< unit
    double spin_rate = 0.0;   ///< rad/s
    Vec3 angular_momentum;    ///< I * spin_rate * axis
    bool free_rod = false;    ///< no spin: the axis follows torque directly

    friend bool operator==(const GyroState&, const GyroState&) = default;
};

/// Forces at the handle ends: left at -d*axis, right at +d*axis.
struct HandleForcePair {
    Vec3 left;
    Vec3 right;
};

class UndefinedPrecessionError : public std::domain_error {
public:
    UndefinedPrecessionError()
        : std::domain_error("no gyroscopic stiffness: wheel is not spinning")
    {
    }
};

/// Uniform disc about its symmetry axis: m R^2 / 2.
double moment_of_inertia(double wheel_mass, double wheel_radius);

GyroState make_gyro_state(const GyroConfig& config, const Vec3& axis);

/// Total torque of the handle forces about the pivot.
Vec3 handles_to_torque(const Vec3& left_force, const Vec3& right_force, double handle_half_length, const Vec3& axis);

/// torque_perp / |L|. Throws UndefinedPrecessionError when |L| == 0.
double precession_rate(double torque_perp, double angular_momentum);

/// Angular velocity of a spinning rod that is turned at a rate of
/// 1 rad/s by a perpendicular torque of this many N*m. Used only when the
/// wheel is stopped.
inline constexpr double kFreeRodDamping = 0.05; ///< N*m*s

/// Advances the axis under the handle torque. With spin, the axis turns at
/// the precession angular velocity (axis x tau_perp)/|L|, so dL/dt =
/// tau_perp; the spin magnitude is untouched. Without spin, the axis turns
/// about the torque like a damped free rod and the state is flagged.
GyroState gyro_step(const GyroConfig& config, const GyroState& state, const HandleForcePair& handle_forces, double dt);

/// Couple whose torque equals axis_rate x L, the torque needed to swing the
/// spinning axis at `axis_rate`: right = tau x axis / (2d), left = -right.
HandleForcePair handle_reaction(const GyroConfig& config, const GyroState& state, const Vec3& axis_rate);

/// The lab as a servo scenario on a DualRig. Each hand is coupled to its
/// handle; the coupling torque drives gyro_step, and the gyroscopic
/// reaction to the hands' own swing of the axis is added as a direct cue.
class PrecessionLab final : public Scenario {
public:
    PrecessionLab(GyroConfig config, CouplingParams coupling);

    [[nodiscard]] ScenarioId id() const override { return ScenarioId::Precession; }
    [[nodiscard]] std::size_t device_count() const override { return 2; }
    std::vector<DeviceFeedback> step(std::span<const DeviceSample> samples, double dt) override;
    [[nodiscard]] Snapshot snapshot(double t) const override;
    void hash_state(StateHasher& h) const override;
    void reset() override;

    /// Live retune (spin rate, wheel, handle length); the axis is kept.
    void set_config(const GyroConfig& config);

    [[nodiscard]] const GyroConfig& config() const { return config_; }
    [[nodiscard]] const GyroState& state() const { return state_; }
    [[nodiscard]] const Vec3& axis_rate() const { return axis_rate_; }

private:
    GyroConfig config_;
    CouplingParams coupling_;
    GyroState state_;
    Vec3 axis_angular_velocity_; ///< of the proxy axis, from the last step
    Vec3 axis_rate_;             ///< filtered swing rate of the hands' midline
    Vec3 previous_midline_;
    bool have_midline_ = false;
    HandleForcePair coupling_forces_;
    HandleForcePair reaction_;
    Vec3 torque_;
    Vec3 hand_left_;
    Vec3 hand_right_;
};

} // namespace hlab
