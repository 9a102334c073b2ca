#pragma once

#include <stdexcept>
#include <string>

#include "hlab/vec3.hpp"

namespace hlab {

/// Raised when a non-finite value reaches the integrator. Physics state is
/// considered unrecoverable after this.
class StateCorruptionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultDt = 1e-3;
inline constexpr double kMaxDt = 5e-3;
inline constexpr double kDefaultRestVelocity = 1e-4;
inline constexpr double kDefaultMaxForce = 8.0;

/// Servo period and rest-detection threshold shared by all labs.
struct StepConfig {
    double dt = kDefaultDt;       ///< s
    double v_eps = kDefaultRestVelocity; ///< m/s

    /// Throws ConfigurationError unless 0 < dt <= 5 ms and v_eps > 0.
    void validate() const;
};

struct PosVel {
    Vec3 pos;
    Vec3 vel;
};

/// Symplectic Euler: velocity first, then position with the new velocity.
/// Bitwise deterministic for identical inputs.
PosVel integrate_semi_implicit(const Vec3& pos, const Vec3& vel, const Vec3& acc, double dt);

/// Scales `f` down to at most `max_n` newtons, keeping its direction.
/// The returned norm never exceeds `max_n`, even after rounding.
Vec3 clamp_force(const Vec3& f, double max_n);

enum class FrameDirection { RotatingToInertial, InertialToRotating };

/// Rigid rotation of `v` by +-|omega|*t about the constant frame spin axis.
Vec3 frame_transform(const Vec3& v, const Vec3& omega, double t, FrameDirection direction);

} // namespace hlab
