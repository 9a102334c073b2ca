#include "hlab/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace hlab {

void DeviceDescriptor::validate() const
{
    if (!(workspace_half_extent > 0.0)) {
        throw ConfigurationError("device workspace_half_extent must be positive");
    }
    if (!(max_force_n > 0.0)) {
        throw ConfigurationError("device max_force_n must be positive");
    }
}

VelocityEstimator::VelocityEstimator(double dt, double cutoff_hz)
    : dt_(dt)
{
    const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
    alpha_ = dt / (dt + tau);
}

Vec3 VelocityEstimator::update(const Vec3& pos)
{
    if (previous_) {
        const Vec3 raw = (pos - *previous_) / dt_;
        filtered_ += (raw - filtered_) * alpha_;
    }
    previous_ = pos;
    return filtered_;
}

void VelocityEstimator::reset()
{
    previous_.reset();
    filtered_ = {};
}

Device::Device(DeviceDescriptor descriptor, bool keep_history)
    : descriptor_(descriptor)
    , keep_history_(keep_history)
{
    descriptor_.validate();
}

std::optional<DeviceSample> Device::sample()
{
    if (ended_) {
        return std::nullopt;
    }
    auto s = next_sample();
    if (!s) {
        ended_ = true;
    }
    return s;
}

DispatchStatus Device::command_force(const ForceCommand& cmd)
{
    if (ended_) {
        // Whatever was asked, an ended device is left at zero force.
        last_command_ = ForceCommand{};
        if (keep_history_) {
            history_.push_back(ForceCommand{});
        }
        dispatch(ForceCommand{});
        return DispatchStatus::Disconnected;
    }
    const ForceCommand clamped{clamp_force(cmd.force, descriptor_.max_force_n)};
    last_command_ = clamped;
    if (keep_history_) {
        history_.push_back(clamped);
    }
    dispatch(clamped);
    return DispatchStatus::Dispatched;
}

// ---------------------------------------------------------------------------

void validate_script(const Script& script)
{
    if (script.empty()) {
        throw ConfigurationError("script has no waypoints");
    }
    for (std::size_t i = 0; i < script.size(); ++i) {
        if (!std::isfinite(script[i].t) || !script[i].pos.is_finite()) {
            throw ConfigurationError("script waypoint " + std::to_string(i) + " is not finite");
        }
        if (i > 0 && !(script[i].t > script[i - 1].t)) {
            throw ConfigurationError("script waypoint times must be strictly increasing (waypoint "
                                     + std::to_string(i) + ")");
        }
    }
}

Script parse_script(const std::string& json_text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigurationError(std::string("script is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw ConfigurationError("script must be a JSON array of waypoints");
    }
    Script script;
    script.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& w = doc[i];
        const auto where = "script waypoint " + std::to_string(i);
        if (!w.is_object() || !w.contains("t") || !w.contains("pos")) {
            throw ConfigurationError(where + ": expected {\"t\": number, \"pos\": [x, y, z]}");
        }
        const auto& pos = w["pos"];
        if (!w["t"].is_number() || !pos.is_array() || pos.size() != 3
            || !std::all_of(pos.begin(), pos.end(), [](const auto& c) { return c.is_number(); })) {
            throw ConfigurationError(where + ": malformed t or pos");
        }
        Waypoint wp{w["t"].get<double>(), {pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()}};
        if (w.contains("button")) {
            if (!w["button"].is_boolean()) {
                throw ConfigurationError(where + ": button must be boolean");
            }
            wp.button = w["button"].get<bool>();
        }
        script.push_back(wp);
    }
    validate_script(script);
    return script;
}

Script load_script(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigurationError("cannot open script file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_script(buf.str());
}

DeviceSample scripted_device_step(const Script& script, double t, const DeviceDescriptor& descriptor)
{
    validate_script(script);

    Vec3 pos;
    bool button = false;
    if (t <= script.front().t) {
        pos = script.front().pos;
        button = script.front().button;
    } else if (t >= script.back().t) {
        pos = script.back().pos;
        button = script.back().button;
    } else {
        const auto next = std::upper_bound(script.begin(), script.end(), t,
                                           [](double value, const Waypoint& w) { return value < w.t; });
        const auto prev = std::prev(next);
        const double u = (t - prev->t) / (next->t - prev->t);
        pos = prev->pos + (next->pos - prev->pos) * u;
        button = prev->button;
    }

    const double h = descriptor.workspace_half_extent;
    pos = {std::clamp(pos.x, -h, h), std::clamp(pos.y, -h, h), std::clamp(pos.z, -h, h)};
    return {t, pos, {}, button};
}

ScriptedDevice::ScriptedDevice(Script script, DeviceDescriptor descriptor, double dt, ScriptEnd end)
    : Device(descriptor)
    , script_(std::move(script))
    , dt_(dt)
    , end_(end)
    , velocity_(dt)
{
    validate_script(script_);
    if (!(dt > 0.0)) {
        throw ConfigurationError("scripted device dt must be positive");
    }
}

std::optional<DeviceSample> ScriptedDevice::next_sample()
{
    const double t = static_cast<double>(tick_) * dt_;
    if (end_ == ScriptEnd::Exhaust && t > script_.back().t) {
        return std::nullopt;
    }
    ++tick_;
    DeviceSample s = scripted_device_step(script_, t, descriptor());
    s.vel = velocity_.update(s.pos);
    return s;
}

// ---------------------------------------------------------------------------

ReplayDevice::ReplayDevice(std::vector<DeviceSample> samples, DeviceDescriptor descriptor)
    : Device(descriptor)
    , samples_(std::move(samples))
{
}

std::optional<DeviceSample> ReplayDevice::next_sample()
{
    if (next_ >= samples_.size()) {
        return std::nullopt;
    }
    return samples_[next_++];
}

// ---------------------------------------------------------------------------

void PointerMailbox::post(const Vec3& normalized)
{
    std::lock_guard lock(mutex_);
    slot_ = normalized;
}

std::optional<Vec3> PointerMailbox::take()
{
    std::lock_guard lock(mutex_);
    auto out = slot_;
    slot_.reset();
    return out;
}

Vec3 pointer_to_workspace(const Vec3& normalized, double half_extent)
{
    auto c = [](double v) { return std::isfinite(v) ? std::clamp(v, -1.0, 1.0) : 0.0; };
    return Vec3{c(normalized.x), c(normalized.y), c(normalized.z)} * half_extent;
}

NetworkPointerDevice::NetworkPointerDevice(DeviceDescriptor descriptor, double dt,
                                           std::shared_ptr<PointerMailbox> mailbox)
    : Device(descriptor, false)
    , dt_(dt)
    , mailbox_(mailbox ? std::move(mailbox) : std::make_shared<PointerMailbox>())
    , velocity_(dt)
{
}

std::optional<DeviceSample> NetworkPointerDevice::next_sample()
{
    if (disconnected_) {
        return std::nullopt;
    }
    if (auto latest = mailbox_->take()) {
        held_ = pointer_to_workspace(*latest, descriptor().workspace_half_extent);
    }
    const double t = static_cast<double>(tick_++) * dt_;
    return DeviceSample{t, held_, velocity_.update(held_), false};
}

// ---------------------------------------------------------------------------

SingleRig::SingleRig(std::unique_ptr<Device> device)
    : device_(std::move(device))
{
}

std::optional<RigSample> SingleRig::sample()
{
    auto s = device_->sample();
    if (!s) {
        return std::nullopt;
    }
    return RigSample{{*s}, {*s}};
}

std::optional<std::vector<ForceCommand>> SingleRig::command(std::span<const ForceCommand> world)
{
    if (world.size() != 1 || device_->command_force(world[0]) == DispatchStatus::Disconnected) {
        return std::nullopt;
    }
    return std::vector<ForceCommand>{*device_->last_command()};
}

DualSample dual_rig_sample(const DeviceSample& left, const DeviceSample& right, double handle_half_length)
{
    const Vec3 left_rest{-handle_half_length, 0.0, 0.0};
    const Vec3 right_rest{handle_half_length, 0.0, 0.0};
    DualSample out{left, right};
    out.left.pos = left_rest + left.pos;
    out.right.pos = right_rest + mirror_x(right.pos);
    out.right.vel = mirror_x(right.vel);
    // Both devices are read on the same servo tick.
    out.right.t = out.left.t;
    return out;
}

DualRig::DualRig(std::unique_ptr<Device> left, std::unique_ptr<Device> right, double handle_half_length)
    : left_(std::move(left))
    , right_(std::move(right))
    , half_length_(handle_half_length)
{
}

std::optional<RigSample> DualRig::sample()
{
    auto l = left_->sample();
    auto r = right_->sample();
    if (!l || !r) {
        return std::nullopt;
    }
    const DualSample w = dual_rig_sample(*l, *r, half_length_);
    return RigSample{{*l, *r}, {w.left, w.right}};
}

std::optional<std::vector<ForceCommand>> DualRig::command(std::span<const ForceCommand> world)
{
    if (world.size() != 2) {
        return std::nullopt;
    }
    const auto ls = left_->command_force(world[0]);
    const auto rs = right_->command_force(ForceCommand{mirror_x(world[1].force)});
    if (ls == DispatchStatus::Disconnected || rs == DispatchStatus::Disconnected) {
        return std::nullopt;
    }
    return std::vector<ForceCommand>{*left_->last_command(), *right_->last_command()};
}

} // namespace hlab
