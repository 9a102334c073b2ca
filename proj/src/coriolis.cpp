#include "hlab/coriolis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hlab {

namespace {

constexpr Vec3 kUp{0.0, 0.0, 1.0};

Vec3 planar(const Vec3& v) { return {v.x, v.y, 0.0}; }

// Inelastic rim: project back onto the platform and drop any outward speed.
void confine(PuckState& s, double radius)
{
    const double r = s.pos.norm();
    if (r <= radius) {
        return;
    }
    const Vec3 radial = s.pos / r;
    s.pos = radial * radius;
    const double outward = dot(s.vel, radial);
    if (outward > 0.0) {
        s.vel -= radial * outward;
    }
}

void check_finite(const PuckState& s, const Vec3& applied)
{
    if (!s.pos.is_finite() || !s.vel.is_finite() || !applied.is_finite()) {
        throw StateCorruptionError("non-finite puck state or input");
    }
}

} // namespace

std::vector<std::string> CoriolisScene::violations() const
{
    std::vector<std::string> out;
    if (!std::isfinite(omega)) {
        out.emplace_back("omega must be finite");
    }
    if (!(platform_radius > 0.0)) {
        out.emplace_back("platform_radius must be > 0");
    }
    if (!(goal.radius > 0.0)) {
        out.emplace_back("goal radius must be > 0");
    }
    if (!(puck_mass > 0.0)) {
        out.emplace_back("puck_mass must be > 0");
    }
    if (!(ground_drag >= 0.0)) {
        out.emplace_back("drag must be >= 0");
    }
    if (!std::isfinite(haptic_gain) || haptic_gain < 0.0) {
        out.emplace_back("haptic_gain must be finite and >= 0");
    }
    return out;
}

void CoriolisScene::validate() const
{
    const auto v = violations();
    if (!v.empty()) {
        throw ConfigurationError("coriolis scene: " + v.front());
    }
}

Goal goal_on_rim(double platform_radius, double angle_rad, double goal_radius)
{
    return {{platform_radius * std::cos(angle_rad), platform_radius * std::sin(angle_rad), 0.0}, goal_radius};
}

std::string to_string(PuckKind kind) { return kind == PuckKind::Ball ? "ball" : "glider"; }

PuckKind puck_kind_from_string(const std::string& name)
{
    if (name == "ball") {
        return PuckKind::Ball;
    }
    if (name == "glider") {
        return PuckKind::Glider;
    }
    throw std::invalid_argument("unknown coriolis variant: " + name);
}

Vec3 coriolis_force(double mass, const Vec3& omega, const Vec3& vel) { return cross(omega, vel) * (-2.0 * mass); }

PuckState step_ball(const CoriolisScene& scene, const PuckState& state, const Vec3& applied, double dt,
                    StepForces* forces)
{
    check_finite(state, applied);
    const double m = scene.puck_mass;
    const Vec3 omega = scene.omega_vec();

    StepForces f;
    f.coriolis = coriolis_force(m, omega, state.vel);
    if (scene.centrifugal_enabled) {
        f.centrifugal = planar(state.pos) * (m * scene.omega * scene.omega);
    }
    f.drag = state.vel * -scene.ground_drag;

    const Vec3 kick = planar(applied + f.centrifugal + f.drag) * (dt / (2.0 * m));
    Vec3 v = state.vel + kick;
    v = rotate_about(v, kUp, -2.0 * scene.omega * dt);
    v += kick;

    PuckState next = state;
    next.vel = v;
    next.pos = state.pos + v * dt;
    confine(next, scene.platform_radius);
    if (forces) {
        *forces = f;
    }
    return next;
}

PuckState step_glider(const CoriolisScene& scene, const PuckState& state, const Vec3& applied, double dt)
{
    check_finite(state, applied);
    const auto pv = integrate_semi_implicit(state.pos, state.vel, planar(applied) / scene.puck_mass, dt);
    PuckState next = state;
    next.pos = pv.pos;
    next.vel = pv.vel;
    confine(next, scene.platform_radius);
    return next;
}

Outcome goal_check(const PuckState& state, const Goal& goal, double platform_radius)
{
    if ((state.pos - goal.center).norm() <= goal.radius) {
        return Outcome::Scored;
    }
    // Confinement places a puck that reached the wall exactly on the rim, up
    // to rounding.
    if (state.pos.norm() >= platform_radius * (1.0 - 1e-12)) {
        return Outcome::Missed;
    }
    return Outcome::InPlay;
}

InertialCircle inertial_circle(double speed, double omega)
{
    if (omega == 0.0 || !std::isfinite(omega)) {
        throw std::domain_error("inertial circle undefined for a non-rotating frame");
    }
    const double w = std::abs(omega);
    return {speed / (2.0 * w), std::numbers::pi / w};
}

// ---------------------------------------------------------------------------

CoriolisLab::CoriolisLab(CoriolisScene scene, PuckKind kind, CouplingParams coupling, double workspace_half_extent,
                         CouplingReach reach)
    : scene_(scene)
    , coupling_(coupling)
    , reach_(reach)
    , workspace_half_extent_(workspace_half_extent)
{
    scene_.validate();
    state_.kind = kind;
    reset();
}

void CoriolisLab::rearm()
{
    state_.pos = {};
    state_.vel = {};
    launched_ = false;
}

void CoriolisLab::reset()
{
    rearm();
    score_ = {};
    elapsed_ = 0.0;
    pointer_scene_ = {};
    last_applied_ = {};
    last_coriolis_ = {};
    clear_fault();
}

void CoriolisLab::set_scene(const CoriolisScene& scene)
{
    scene.validate();
    scene_ = scene;
    confine(state_, scene_.platform_radius);
}

std::vector<DeviceFeedback> CoriolisLab::step(std::span<const DeviceSample> samples, double dt)
{
    const DeviceSample& dev = samples[0];
    const double scale = scene_.platform_radius / workspace_half_extent_;

    const Vec3 proxy_pos = state_.pos / scale;
    const Vec3 proxy_vel = state_.vel / scale;
    Vec3 f = coupling_force(dev.pos, dev.vel, proxy_pos, proxy_vel, coupling_);
    f *= engagement_weight((dev.pos - proxy_pos).norm(), reach_);
    const Vec3 applied = planar(f);

    Vec3 direct;
    if (state_.kind == PuckKind::Ball) {
        StepForces forces;
        state_ = step_ball(scene_, state_, applied, dt, &forces);
        last_coriolis_ = forces.coriolis;
        direct = forces.coriolis * scene_.haptic_gain;
    } else {
        state_ = step_glider(scene_, state_, applied, dt);
        last_coriolis_ = {};
    }
    last_applied_ = applied;
    pointer_scene_ = planar(dev.pos) * scale;
    elapsed_ += dt;

    if (!launched_ && state_.vel.norm() > kLaunchSpeed) {
        launched_ = true;
        ++score_.attempts;
    }
    const Outcome outcome = goal_check(state_, scene_.goal, scene_.platform_radius);
    if (outcome != Outcome::InPlay) {
        if (!launched_) {
            ++score_.attempts;
        }
        if (outcome == Outcome::Scored) {
            ++score_.goals;
        }
        score_.last_outcome = outcome;
        rearm();
    }
    return {DeviceFeedback{f, direct}};
}

Snapshot CoriolisLab::snapshot(double t) const
{
    const double platform_angle = scene_.omega * elapsed_;
    Snapshot snap;
    snap.t = t;
    snap.scenario = ScenarioId::Coriolis;
    snap.variant = to_string(state_.kind);
    snap.bodies = {
        {"platform", {}, {std::cos(platform_angle), std::sin(platform_angle), 0.0}},
        {"goal", scene_.goal.center, normalized(scene_.goal.center)},
        {"puck", state_.pos, normalized(state_.vel)},
        {"pointer", pointer_scene_, {1.0, 0.0, 0.0}},
    };
    snap.arrows = {
        make_arrow(state_.pos, last_coriolis_, "coriolis"),
        make_arrow(state_.pos, last_applied_, "applied"),
    };
    snap.hud = {
        {"coriolis", last_coriolis_.norm()},
        {"applied", last_applied_.norm()},
        {"speed", state_.vel.norm()},
        {"omega", scene_.omega},
        {"attempts", static_cast<double>(score_.attempts)},
        {"goals", static_cast<double>(score_.goals)},
    };
    snap.score = score_.goals;
    return snap;
}

void CoriolisLab::hash_state(StateHasher& h) const
{
    h.u8(state_.kind == PuckKind::Ball ? 0 : 1).vec(state_.pos).vec(state_.vel);
    h.u64(static_cast<std::uint64_t>(score_.attempts)).u64(static_cast<std::uint64_t>(score_.goals));
    h.u8(static_cast<std::uint8_t>(score_.last_outcome)).flag(launched_).f64(elapsed_);
}

} // namespace hlab
