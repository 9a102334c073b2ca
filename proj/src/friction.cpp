#include "hlab/friction.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace hlab {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Block held at rest. Against an end stop the static bound may be exceeded;
// the stop carries the remainder.
void hold_at_rest(ForceBreakdown& bd, double net, double mu_s, bool pressed_into_stop)
{
    const double bound = mu_s * bd.normal;
    if (pressed_into_stop) {
        bd.friction = std::clamp(-net, -bound, bound);
        bd.stop_reaction = -net - bd.friction;
    } else if (std::abs(net) <= bound) {
        bd.friction = -net;
        bd.stop_reaction = 0.0;
    } else {
        // Arrived at a stop this tick while the net force points away from
        // it; the block breaks away on the next tick.
        bd.friction = std::clamp(-net, -bound, bound);
        bd.stop_reaction = 0.0;
    }
}

} // namespace

std::vector<std::string> FrictionScene::violations() const
{
    std::vector<std::string> out;
    if (!(theta >= 0.0 && theta < std::numbers::pi / 2.0)) {
        out.emplace_back("theta must satisfy 0 <= theta < 90 deg");
    }
    if (!(mu_k >= 0.0)) {
        out.emplace_back("mu_k must be >= 0");
    }
    if (!(mu_s >= mu_k)) {
        out.emplace_back("mu_s ≥ mu_k required");
    }
    if (!(mass > 0.0)) {
        out.emplace_back("mass must be > 0");
    }
    if (!(g > 0.0)) {
        out.emplace_back("g must be > 0");
    }
    if (!(track_half_length > 0.0)) {
        out.emplace_back("track length must be > 0");
    }
    return out;
}

void FrictionScene::validate() const
{
    const auto v = violations();
    if (!v.empty()) {
        throw ConfigurationError("friction scene: " + v.front());
    }
}

double normal_force(const FrictionScene& scene, double applied_normal)
{
    return std::max(0.0, scene.mass * scene.g * std::cos(scene.theta) - applied_normal);
}

SlipMode breakaway_check(const FrictionScene& scene, double applied_tangential, double normal)
{
    const double net = applied_tangential - scene.mass * scene.g * std::sin(scene.theta);
    return std::abs(net) > scene.mu_s * normal ? SlipMode::Slip : SlipMode::Stick;
}

FrictionStep friction_step(const FrictionScene& scene, const BlockState& state, AppliedForce applied, double dt,
                           double v_eps)
{
    if (!std::isfinite(applied.tangential) || !std::isfinite(applied.normal) || !std::isfinite(state.s)
        || !std::isfinite(state.v)) {
        throw StateCorruptionError("non-finite friction state or input");
    }

    ForceBreakdown bd;
    bd.gravity_tangential = -scene.mass * scene.g * std::sin(scene.theta);
    bd.normal = normal_force(scene, applied.normal);
    bd.applied_tangential = applied.tangential;
    bd.applied_normal = applied.normal;

    const double net = bd.gravity_tangential + applied.tangential;
    const double limit = scene.track_half_length;
    const bool pressed_top = state.s >= limit && net > 0.0;
    const bool pressed_bottom = state.s <= -limit && net < 0.0;

    BlockState next = state;

    // A block at rest obeys the static rule whatever its mode says; Slip with
    // v == 0 only records that the bound was exceeded when it last stopped.
    if (state.mode == SlipMode::Stick || state.v == 0.0) {
        if (pressed_top || pressed_bottom || breakaway_check(scene, applied.tangential, bd.normal) == SlipMode::Stick) {
            next.v = 0.0;
            next.mode = SlipMode::Stick;
            hold_at_rest(bd, net, scene.mu_s, pressed_top || pressed_bottom);
            return {next, bd};
        }
        // Break away: this step already slides in the direction of the net force.
        bd.friction = -sign(net) * scene.mu_k * bd.normal;
        next.mode = SlipMode::Slip;
        next.v = 0.0;
    } else {
        bd.friction = -sign(state.v) * scene.mu_k * bd.normal;
    }

    const double acc = (net + bd.friction) / scene.mass;
    double v_next = next.v + acc * dt;

    const bool was_moving = state.mode == SlipMode::Slip && state.v != 0.0;
    const bool crossed = was_moving
        && (sign(v_next) != sign(state.v) || (std::abs(v_next) < v_eps && std::abs(v_next) < std::abs(state.v)));
    if (crossed) {
        // Came to rest inside the step: drop the residual velocity and
        // re-stick unless the static bound is already exceeded.
        next.v = 0.0;
        if (breakaway_check(scene, applied.tangential, bd.normal) == SlipMode::Stick) {
            next.mode = SlipMode::Stick;
            hold_at_rest(bd, net, scene.mu_s, false);
        } else {
            next.mode = SlipMode::Slip;
        }
        return {next, bd};
    }

    next.v = v_next;
    next.s = state.s + v_next * dt;
    if (next.s > limit || next.s < -limit) {
        next.s = std::clamp(next.s, -limit, limit);
        next.v = 0.0;
        next.mode = SlipMode::Stick;
        const bool pressed = (next.s >= limit && net > 0.0) || (next.s <= -limit && net < 0.0);
        hold_at_rest(bd, net, scene.mu_s, pressed);
    }
    return {next, bd};
}

std::string format_magnitude(double value)
{
    value = std::abs(value);
    if (!std::isfinite(value)) {
        return std::isnan(value) ? "nan" : "inf";
    }
    char buf[512];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
    std::string digits(buf, res.ptr);

    std::string int_part = digits;
    std::string frac;
    if (const auto dot_pos = digits.find('.'); dot_pos != std::string::npos) {
        int_part = digits.substr(0, dot_pos);
        frac = digits.substr(dot_pos + 1);
    }
    const bool round_up = frac.size() > 2 && frac[2] >= '5';
    frac.resize(2, '0');

    std::string all = int_part + frac;
    if (round_up) {
        int i = static_cast<int>(all.size()) - 1;
        for (; i >= 0; --i) {
            if (all[static_cast<std::size_t>(i)] == '9') {
                all[static_cast<std::size_t>(i)] = '0';
            } else {
                ++all[static_cast<std::size_t>(i)];
                break;
            }
        }
        if (i < 0) {
            all.insert(all.begin(), '1');
        }
    }
    return all.substr(0, all.size() - 2) + "." + all.substr(all.size() - 2);
}

std::vector<std::pair<std::string, std::string>> hud_fields(const ForceBreakdown& breakdown)
{
    return {
        {"gravity_tangential", format_magnitude(breakdown.gravity_tangential)},
        {"normal", format_magnitude(breakdown.normal)},
        {"friction", format_magnitude(breakdown.friction)},
        {"applied", format_magnitude(breakdown.applied_tangential)},
    };
}

// ---------------------------------------------------------------------------

FrictionLab::FrictionLab(FrictionScene scene, CouplingParams coupling, double workspace_half_extent, double v_eps,
                         CouplingReach reach)
    : scene_(scene)
    , coupling_(coupling)
    , reach_(reach)
    , workspace_half_extent_(workspace_half_extent)
    , v_eps_(v_eps)
{
    scene_.validate();
    reset();
}

Vec3 FrictionLab::track_direction() const { return {std::cos(scene_.theta), std::sin(scene_.theta), 0.0}; }

Vec3 FrictionLab::surface_normal() const { return {-std::sin(scene_.theta), std::cos(scene_.theta), 0.0}; }

void FrictionLab::reset()
{
    state_ = {};
    breakdown_ = {};
    breakdown_.gravity_tangential = -scene_.mass * scene_.g * std::sin(scene_.theta);
    breakdown_.normal = normal_force(scene_, 0.0);
    pointer_scene_ = {};
    clear_fault();
}

void FrictionLab::set_scene(const FrictionScene& scene)
{
    scene.validate();
    scene_ = scene;
    if (std::abs(state_.s) > scene_.track_half_length) {
        state_.s = std::clamp(state_.s, -scene_.track_half_length, scene_.track_half_length);
        state_.v = 0.0;
        state_.mode = SlipMode::Stick;
    }
}

std::vector<DeviceFeedback> FrictionLab::step(std::span<const DeviceSample> samples, double dt)
{
    const DeviceSample& dev = samples[0];
    // The full device travel spans the whole track.
    const double scale = scene_.track_half_length / workspace_half_extent_;
    const Vec3 u = track_direction();
    const Vec3 n = surface_normal();

    const Vec3 proxy_pos = u * (state_.s / scale);
    const Vec3 proxy_vel = u * (state_.v / scale);
    Vec3 f = coupling_force(dev.pos, dev.vel, proxy_pos, proxy_vel, coupling_);
    f *= engagement_weight((dev.pos - proxy_pos).norm(), reach_);

    const auto result = friction_step(scene_, state_, {dot(f, u), dot(f, n)}, dt, v_eps_);
    state_ = result.state;
    breakdown_ = result.breakdown;
    pointer_scene_ = dev.pos * scale;
    return {DeviceFeedback{f, {}}};
}

Snapshot FrictionLab::snapshot(double t) const
{
    const Vec3 u = track_direction();
    const Vec3 n = surface_normal();
    const Vec3 block = u * state_.s;

    Snapshot snap;
    snap.t = t;
    snap.scenario = ScenarioId::Friction;
    snap.bodies = {
        {"incline", {}, u},
        {"block", block, u},
        {"pointer", pointer_scene_, u},
    };
    snap.arrows = {
        make_arrow(block, u * breakdown_.gravity_tangential, "gravity_tangential"),
        make_arrow(block, n * breakdown_.normal, "normal"),
        make_arrow(block, u * breakdown_.friction, "friction"),
        make_arrow(block, u * breakdown_.applied_tangential, "applied"),
    };
    if (breakdown_.stop_reaction != 0.0) {
        snap.arrows.push_back(make_arrow(block, u * breakdown_.stop_reaction, "stop"));
    }
    snap.hud = {
        {"gravity_tangential", std::abs(breakdown_.gravity_tangential)},
        {"normal", std::abs(breakdown_.normal)},
        {"friction", std::abs(breakdown_.friction)},
        {"applied", std::abs(breakdown_.applied_tangential)},
        {"speed", std::abs(state_.v)},
    };
    return snap;
}

void FrictionLab::hash_state(StateHasher& h) const
{
    h.f64(state_.s).f64(state_.v).u8(state_.mode == SlipMode::Slip ? 1 : 0);
}

} // namespace hlab
