#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hlab/servo.hpp"

namespace hlab {

inline constexpr double kStandardGravity = 9.81;

/// Block on an incline. theta in radians; track measured along the slope,
/// centred on the origin, up-slope positive.
struct FrictionScene {
    double theta = 0.5235987755982988; // 30 deg
    double mu_s = 0.5;
    double mu_k = 0.3;
    double mass = 1.0;
    double g = kStandardGravity;
    double track_half_length = 0.5;

    /// Collects every violated invariant; empty when valid.
    [[nodiscard]] std::vector<std::string> violations() const;
    void validate() const;
};

enum class SlipMode { Stick, Slip };

struct BlockState {
    double s = 0.0; ///< m along the track
    double v = 0.0; ///< m/s
    SlipMode mode = SlipMode::Stick;

    friend bool operator==(const BlockState&, const BlockState&) = default;
};

/// Signed tangential components act along the track (up-slope positive);
/// applied_normal is positive away from the surface.
struct ForceBreakdown {
    double gravity_tangential = 0.0;
    double normal = 0.0;
    double friction = 0.0;
    double applied_tangential = 0.0;
    double applied_normal = 0.0;
    double stop_reaction = 0.0; ///< nonzero only while pressed against a track end

    friend bool operator==(const ForceBreakdown&, const ForceBreakdown&) = default;
};

struct AppliedForce {
    double tangential = 0.0;
    double normal = 0.0;
};

struct FrictionStep {
    BlockState state;
    ForceBreakdown breakdown;
};

/// max(0, m*g*cos(theta) - applied_normal). A pull-off larger than the
/// weight component leaves the block resting with zero contact force.
double normal_force(const FrictionScene& scene, double applied_normal);

/// From rest: Slip iff |applied_tangential - m*g*sin(theta)| > mu_s*N.
/// Equality stays Stick.
SlipMode breakaway_check(const FrictionScene& scene, double applied_tangential, double normal);

/// One servo step of the stick/slip block.
FrictionStep friction_step(const FrictionScene& scene, const BlockState& state, AppliedForce applied, double dt,
                           double v_eps = kDefaultRestVelocity);

/// Two-decimal, round-half-up rendering of |value|, computed on the
/// shortest decimal representation so 2.675 renders as "2.68".
std::string format_magnitude(double value);

/// HUD lines for a breakdown: gravity_tangential, normal, friction, applied.
std::vector<std::pair<std::string, std::string>> hud_fields(const ForceBreakdown& breakdown);

/// The lab as a servo scenario: one device pushes the block through the
/// coupling; the block's resistance is felt through the coupling alone.
class FrictionLab final : public Scenario {
public:
    FrictionLab(FrictionScene scene, CouplingParams coupling, double workspace_half_extent,
                double v_eps = kDefaultRestVelocity, CouplingReach reach = {});

    [[nodiscard]] ScenarioId id() const override { return ScenarioId::Friction; }
    [[nodiscard]] std::size_t device_count() const override { return 1; }
    std::vector<DeviceFeedback> step(std::span<const DeviceSample> samples, double dt) override;
    [[nodiscard]] Snapshot snapshot(double t) const override;
    void hash_state(StateHasher& h) const override;
    void reset() override;

    /// Live retune; the block keeps its state, clamped to the new track.
    void set_scene(const FrictionScene& scene);
    void set_state(const BlockState& state) { state_ = state; }

    [[nodiscard]] const FrictionScene& scene() const { return scene_; }
    [[nodiscard]] const BlockState& state() const { return state_; }
    [[nodiscard]] const ForceBreakdown& breakdown() const { return breakdown_; }

    /// Unit vectors of the track and the surface normal in scene coordinates.
    [[nodiscard]] Vec3 track_direction() const;
    [[nodiscard]] Vec3 surface_normal() const;

private:
    FrictionScene scene_;
    CouplingParams coupling_;
    CouplingReach reach_;
    double workspace_half_extent_;
    double v_eps_;
    BlockState state_;
    ForceBreakdown breakdown_;
    Vec3 pointer_scene_;
};

} // namespace hlab
