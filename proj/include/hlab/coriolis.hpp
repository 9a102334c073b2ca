#pragma once

#include <string>
#include <vector>

#include "hlab/servo.hpp"

namespace hlab {

struct Goal {
    Vec3 center; ///< rotating frame
    double radius = 0.15;
};

/// Puck on a platform spinning about +z at `omega` rad/s. All positions and
/// velocities are rotating-frame, planar (z = 0).
struct CoriolisScene {
    double omega = 1.0;
    double platform_radius = 1.0;
    Goal goal{{1.0, 0.0, 0.0}, 0.15};
    double puck_mass = 0.5;
    double ground_drag = 0.5;   ///< N*s/m, ball only
    bool centrifugal_enabled = false;
    double haptic_gain = 1.0;   ///< scale of the Coriolis cue sent to the device

    [[nodiscard]] std::vector<std::string> violations() const;
    void validate() const;
    [[nodiscard]] Vec3 omega_vec() const { return {0.0, 0.0, omega}; }
};

/// Goal on the platform rim at `angle_rad` from +x.
Goal goal_on_rim(double platform_radius, double angle_rad, double goal_radius);

enum class PuckKind { Ball, Glider };

std::string to_string(PuckKind kind);
/// Throws std::invalid_argument for anything but "ball" / "glider".
PuckKind puck_kind_from_string(const std::string& name);

struct PuckState {
    PuckKind kind = PuckKind::Ball;
    Vec3 pos;
    Vec3 vel;

    friend bool operator==(const PuckState&, const PuckState&) = default;
};

enum class Outcome { InPlay, Scored, Missed };

struct RoundScore {
    int attempts = 0;
    int goals = 0;
    Outcome last_outcome = Outcome::InPlay;
};

/// -2 m (omega x vel): the fictitious deflection in a rotating frame.
Vec3 coriolis_force(double mass, const Vec3& omega, const Vec3& vel);

struct StepForces {
    Vec3 coriolis;
    Vec3 centrifugal;
    Vec3 drag;
};

/// Ball: applied + Coriolis (+ optional centrifugal) - drag*(vel - ground
/// velocity). The ground co-rotates, so its rotating-frame velocity is zero.
/// The velocity-rotating Coriolis part is applied as an exact rotation
/// (half-kick / rotate / half-kick), which keeps |v| constant when it is the
/// only force. Position then advances with the new velocity.
PuckState step_ball(const CoriolisScene& scene, const PuckState& state, const Vec3& applied, double dt,
                    StepForces* forces = nullptr);

/// Glider: applied force only, semi-implicit Euler.
PuckState step_glider(const CoriolisScene& scene, const PuckState& state, const Vec3& applied, double dt);

/// Scored inside the goal circle; Missed once the puck reaches the rim
/// elsewhere; InPlay otherwise.
Outcome goal_check(const PuckState& state, const Goal& goal, double platform_radius);

struct InertialCircle {
    double radius = 0.0; ///< m
    double period = 0.0; ///< s
};

/// Free-particle path under Coriolis alone: radius v/(2|omega|), period
/// pi/|omega|. Throws std::domain_error for omega == 0.
InertialCircle inertial_circle(double speed, double omega);

/// Speed above which a resting puck counts as launched.
inline constexpr double kLaunchSpeed = 0.05;

/// The lab as a servo scenario. The device pushes the puck through a
/// contact-range coupling; the ball variant also feeds the Coriolis force
/// back to the device.
class CoriolisLab final : public Scenario {
public:
    CoriolisLab(CoriolisScene scene, PuckKind kind, CouplingParams coupling, double workspace_half_extent,
                CouplingReach reach = {});

    [[nodiscard]] ScenarioId id() const override { return ScenarioId::Coriolis; }
    [[nodiscard]] std::string variant() const override { return to_string(state_.kind); }
    [[nodiscard]] std::size_t device_count() const override { return 1; }
    std::vector<DeviceFeedback> step(std::span<const DeviceSample> samples, double dt) override;
    [[nodiscard]] Snapshot snapshot(double t) const override;
    void hash_state(StateHasher& h) const override;
    void reset() override;

    void set_scene(const CoriolisScene& scene);

    [[nodiscard]] const CoriolisScene& scene() const { return scene_; }
    [[nodiscard]] const PuckState& state() const { return state_; }
    [[nodiscard]] const RoundScore& score() const { return score_; }

private:
    void rearm();

    CoriolisScene scene_;
    CouplingParams coupling_;
    CouplingReach reach_;
    double workspace_half_extent_;
    PuckState state_;
    RoundScore score_;
    bool launched_ = false;
    double elapsed_ = 0.0;
    Vec3 pointer_scene_;
    Vec3 last_applied_;
    Vec3 last_coriolis_;
};

} // namespace hlab
