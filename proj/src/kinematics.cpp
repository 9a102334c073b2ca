#include "hlab/kinematics.hpp"

#include <cmath>

namespace hlab {

void StepConfig::validate() const
{
    if (!(dt > 0.0) || !(dt <= kMaxDt)) {
        throw ConfigurationError("dt must be in (0, 5e-3] s, got " + std::to_string(dt));
    }
    if (!(v_eps > 0.0)) {
        throw ConfigurationError("v_eps must be positive");
    }
}

PosVel integrate_semi_implicit(const Vec3& pos, const Vec3& vel, const Vec3& acc, double dt)
{
    if (!pos.is_finite() || !vel.is_finite() || !acc.is_finite() || !std::isfinite(dt)) {
        throw StateCorruptionError("non-finite value passed to integrator");
    }
    if (!(dt > 0.0)) {
        throw StateCorruptionError("integrator called with non-positive dt");
    }
    const Vec3 v_next = vel + acc * dt;
    return {pos + v_next * dt, v_next};
}

Vec3 clamp_force(const Vec3& f, double max_n)
{
    const double n = f.norm();
    if (n <= max_n) {
        return f;
    }
    Vec3 out = f * (max_n / n);
    // The scale can round up by an ulp; shave until the bound holds.
    while (out.norm() > max_n) {
        out *= 1.0 - 0x1p-52;
    }
    return out;
}

Vec3 frame_transform(const Vec3& v, const Vec3& omega, double t, FrameDirection direction)
{
    const double rate = omega.norm();
    if (rate == 0.0 || t == 0.0) {
        return v;
    }
    const double angle = direction == FrameDirection::RotatingToInertial ? rate * t : -rate * t;
    return rotate_about(v, omega / rate, angle);
}

} // namespace hlab
