#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlab/kinematics.hpp"
#include "hlab/vec3.hpp"

namespace hlab {

inline constexpr double kDefaultWorkspaceHalfExtent = 0.06;
inline constexpr double kVelocityCutoffHz = 50.0;

struct DeviceDescriptor {
    double workspace_half_extent = kDefaultWorkspaceHalfExtent; ///< m, per axis
    double max_force_n = kDefaultMaxForce;
    int id = 0;

    void validate() const;
};

struct DeviceSample {
    double t = 0.0;  ///< simulated time, s
    Vec3 pos;        ///< workspace coordinates, m
    Vec3 vel;        ///< m/s
    bool button = false;

    friend bool operator==(const DeviceSample&, const DeviceSample&) = default;
};

struct ForceCommand {
    Vec3 force;

    friend bool operator==(const ForceCommand&, const ForceCommand&) = default;
};

enum class DispatchStatus { Dispatched, Disconnected };

/// Backward difference followed by a first-order low-pass.
class VelocityEstimator {
public:
    VelocityEstimator(double dt, double cutoff_hz = kVelocityCutoffHz);

    Vec3 update(const Vec3& pos);
    void reset();

private:
    double dt_;
    double alpha_;
    std::optional<Vec3> previous_;
    Vec3 filtered_;
};

/// Position-in / force-out boundary. Concrete devices supply samples and
/// receive clamped forces; a hardware driver would slot in behind the same
/// contract.
class Device {
public:
    explicit Device(DeviceDescriptor descriptor, bool keep_history = true);
    virtual ~Device() = default;

    Device(const Device&) = delete;
    Device& operator=(const Device&) = delete;

    [[nodiscard]] const DeviceDescriptor& descriptor() const { return descriptor_; }

    /// Newest sample, or nullopt once the input is exhausted. After the first
    /// nullopt every later call also returns nullopt.
    std::optional<DeviceSample> sample();

    /// Clamps to descriptor().max_force_n and dispatches. Returns
    /// Disconnected once the device has signalled end of input.
    DispatchStatus command_force(const ForceCommand& cmd);

    [[nodiscard]] bool ended() const { return ended_; }
    [[nodiscard]] const std::vector<ForceCommand>& command_history() const { return history_; }
    [[nodiscard]] std::optional<ForceCommand> last_command() const { return last_command_; }

protected:
    virtual std::optional<DeviceSample> next_sample() = 0;
    virtual void dispatch(const ForceCommand&) {}

private:
    DeviceDescriptor descriptor_;
    bool keep_history_;
    bool ended_ = false;
    std::vector<ForceCommand> history_;
    std::optional<ForceCommand> last_command_;
};

// ---------------------------------------------------------------------------
// Scripted device

struct Waypoint {
    double t = 0.0;
    Vec3 pos;
    bool button = false;
};

using Script = std::vector<Waypoint>;

/// Throws ConfigurationError for an empty script or non-increasing times.
void validate_script(const Script& script);

/// Parses the JSON waypoint array `[{"t": s, "pos": [x, y, z]}, ...]`. An
/// optional boolean "button" per waypoint is accepted.
Script parse_script(const std::string& json_text);
Script load_script(const std::string& path);

/// Piecewise-linear position at time t, held at the ends and clamped to the
/// workspace. The returned velocity is zero; ScriptedDevice estimates it.
DeviceSample scripted_device_step(const Script& script, double t, const DeviceDescriptor& descriptor);

enum class ScriptEnd {
    Hold,    ///< keep reporting the last waypoint forever
    Exhaust  ///< end of input once t passes the last waypoint
};

class ScriptedDevice final : public Device {
public:
    ScriptedDevice(Script script, DeviceDescriptor descriptor, double dt, ScriptEnd end = ScriptEnd::Hold);

protected:
    std::optional<DeviceSample> next_sample() override;

private:
    Script script_;
    double dt_;
    ScriptEnd end_;
    std::uint64_t tick_ = 0;
    VelocityEstimator velocity_;
};

// ---------------------------------------------------------------------------
// Replay device

class ReplayDevice final : public Device {
public:
    ReplayDevice(std::vector<DeviceSample> samples, DeviceDescriptor descriptor);

protected:
    std::optional<DeviceSample> next_sample() override;

private:
    std::vector<DeviceSample> samples_;
    std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Network-fed pointer

/// Single-slot latest-wins mailbox. Writers never wait on the reader beyond
/// the copy of one Vec3.
class PointerMailbox {
public:
    void post(const Vec3& normalized);
    std::optional<Vec3> take();

private:
    std::mutex mutex_;
    std::optional<Vec3> slot_;
};

/// Maps a pointer in [-1, 1]^3 to workspace coordinates (components clamped).
Vec3 pointer_to_workspace(const Vec3& normalized, double half_extent);

class NetworkPointerDevice final : public Device {
public:
    /// `mailbox` is shared with the network layer; a fresh one is made when
    /// none is given.
    NetworkPointerDevice(DeviceDescriptor descriptor, double dt, std::shared_ptr<PointerMailbox> mailbox = nullptr);

    /// Thread-safe; may be called from the network thread.
    void post_pointer(const Vec3& normalized) { mailbox_->post(normalized); }
    [[nodiscard]] const std::shared_ptr<PointerMailbox>& mailbox() const { return mailbox_; }
    void disconnect() { disconnected_ = true; }

protected:
    std::optional<DeviceSample> next_sample() override;

private:
    double dt_;
    std::uint64_t tick_ = 0;
    Vec3 held_;
    std::shared_ptr<PointerMailbox> mailbox_;
    VelocityEstimator velocity_;
    std::atomic<bool> disconnected_{false};
};

// ---------------------------------------------------------------------------
// Rigs: the set of devices one scenario is driven by.

struct RigSample {
    std::vector<DeviceSample> local; ///< as reported by each device
    std::vector<DeviceSample> world; ///< in the scenario's shared frame
};

class DeviceRig {
public:
    virtual ~DeviceRig() = default;

    [[nodiscard]] virtual std::size_t size() const = 0;
    [[nodiscard]] virtual Device& device(std::size_t i) = 0;

    /// nullopt when any device has ended.
    virtual std::optional<RigSample> sample() = 0;

    /// Takes world-frame forces, returns the local forces handed to each
    /// device (after its clamp) or nullopt if any device is disconnected.
    virtual std::optional<std::vector<ForceCommand>> command(std::span<const ForceCommand> world) = 0;
};

class SingleRig final : public DeviceRig {
public:
    explicit SingleRig(std::unique_ptr<Device> device);

    [[nodiscard]] std::size_t size() const override { return 1; }
    [[nodiscard]] Device& device(std::size_t) override { return *device_; }
    std::optional<RigSample> sample() override;
    std::optional<std::vector<ForceCommand>> command(std::span<const ForceCommand> world) override;

private:
    std::unique_ptr<Device> device_;
};

/// Two devices facing each other across the gyroscope. The right device's
/// x-axis is mirrored; each device's workspace origin sits at its handle's
/// rest position, +-half_length along world x.
class DualRig final : public DeviceRig {
public:
    DualRig(std::unique_ptr<Device> left, std::unique_ptr<Device> right, double handle_half_length);

    [[nodiscard]] std::size_t size() const override { return 2; }
    [[nodiscard]] Device& device(std::size_t i) override { return i == 0 ? *left_ : *right_; }
    std::optional<RigSample> sample() override;
    std::optional<std::vector<ForceCommand>> command(std::span<const ForceCommand> world) override;

    void set_handle_half_length(double d) { half_length_ = d; }
    [[nodiscard]] double handle_half_length() const { return half_length_; }

private:
    std::unique_ptr<Device> left_;
    std::unique_ptr<Device> right_;
    double half_length_;
};

struct DualSample {
    DeviceSample left;
    DeviceSample right;
};

/// Expresses a pair of local samples in the rig's world frame.
DualSample dual_rig_sample(const DeviceSample& left, const DeviceSample& right, double handle_half_length);

/// Mirror used for the right-hand device (x negated). Self-inverse.
constexpr Vec3 mirror_x(const Vec3& v) { return {-v.x, v.y, v.z}; }

} // namespace hlab
