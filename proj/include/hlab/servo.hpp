#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlab/device.hpp"
#include "hlab/kinematics.hpp"
#include "hlab/snapshot.hpp"
#include "hlab/state_hash.hpp"
#include "hlab/vec3.hpp"

namespace hlab {

// ---------------------------------------------------------------------------
// Virtual coupling

struct CouplingParams {
    double k_c = 400.0; ///< N/m
    double b_c = 2.0;   ///< N*s/m

    /// Checks k_c > 0, b_c >= 0 and the explicit-step stability guard
    /// k_c*dt <= 2*b_c + 2*m_min/dt. Throws ConfigurationError.
    void validate(double dt, double min_proxy_mass) const;
};

/// Spring-damper force acting on the proxy. The device receives the exact
/// negation.
Vec3 coupling_force(const Vec3& device_pos, const Vec3& device_vel, const Vec3& proxy_pos,
                    const Vec3& proxy_vel, const CouplingParams& params);

/// Contact envelope for labs where the pointer pushes a free body: full
/// coupling up to `inner`, fading linearly to nothing at `outer` (device
/// metres). Keeps the pointer from dragging a body it is not touching.
struct CouplingReach {
    double inner = 0.02;
    double outer = 0.03;
};

double engagement_weight(double separation, const CouplingReach& reach);

// ---------------------------------------------------------------------------
// Scenario contract

struct DeviceFeedback {
    Vec3 coupling_on_proxy; ///< what the coupling applied to the proxy
    Vec3 direct;            ///< scenario-specific cue added to the device force
};

class Scenario {
public:
    virtual ~Scenario() = default;

    [[nodiscard]] virtual ScenarioId id() const = 0;
    [[nodiscard]] virtual std::string variant() const { return {}; }
    [[nodiscard]] virtual std::size_t device_count() const = 0;

    /// Couples the world-frame samples to the proxies and advances one step.
    /// Returns one feedback entry per device.
    virtual std::vector<DeviceFeedback> step(std::span<const DeviceSample> samples, double dt) = 0;

    [[nodiscard]] virtual Snapshot snapshot(double t) const = 0;

    /// Feeds every piece of evolving state, in fixed order, to the hasher.
    virtual void hash_state(StateHasher& h) const = 0;

    /// Restores the initial state for the current parameters.
    virtual void reset() = 0;

    [[nodiscard]] std::uint64_t state_hash() const;

    [[nodiscard]] bool faulted() const { return fault_.has_value(); }
    [[nodiscard]] const std::optional<std::string>& fault_reason() const { return fault_; }
    void set_fault(std::string reason) { fault_ = std::move(reason); }
    void clear_fault() { fault_.reset(); }

private:
    std::optional<std::string> fault_;
};

// ---------------------------------------------------------------------------
// One servo tick

struct TickResult {
    std::vector<ForceCommand> commands; ///< clamped, world frame
    std::vector<Vec3> rendered;         ///< -coupling + direct, before clamp
    Snapshot snapshot;
};

/// Advances the scenario one step and derives device forces. `t_after` is
/// the simulation time at the end of the step.
TickResult tick(Scenario& scenario, std::span<const DeviceSample> samples,
                std::span<const DeviceDescriptor> descriptors, double t_after, double dt);

// ---------------------------------------------------------------------------
// Snapshot decimation and hand-off queues

/// Picks the ticks on which a snapshot is published so that
/// `snapshot_hz` snapshots come out per simulated second.
class SnapshotDecimator {
public:
    SnapshotDecimator(unsigned servo_hz, unsigned snapshot_hz);

    /// True for the tick with 0-based index `tick`.
    [[nodiscard]] bool publish(std::uint64_t tick) const;

private:
    std::uint64_t servo_hz_;
    std::uint64_t snapshot_hz_;
};

/// Bounded FIFO that discards the oldest entry when full.
template <typename T>
class DropOldestQueue {
public:
    explicit DropOldestQueue(std::size_t capacity)
        : capacity_(capacity == 0 ? 1 : capacity)
    {
    }

    /// Returns true if an old entry had to be dropped.
    bool push(T value)
    {
        std::lock_guard lock(mutex_);
        bool dropped = false;
        if (items_.size() >= capacity_) {
            items_.pop_front();
            ++dropped_;
            dropped = true;
        }
        items_.push_back(std::move(value));
        return dropped;
    }

    std::vector<T> drain()
    {
        std::lock_guard lock(mutex_);
        std::vector<T> out(std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
        items_.clear();
        return out;
    }

    [[nodiscard]] std::uint64_t dropped() const
    {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::deque<T> items_;
    std::uint64_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// The loop

enum class SchedulePolicy { Simulated, Realtime };

struct TickReport {
    std::uint64_t tick = 0;
    double compute_time_s = 0.0;
    bool overrun = false;
};

/// Everything the session log needs about one completed tick.
struct TickTrace {
    std::uint64_t tick = 0;
    double t = 0.0; ///< time at the end of the tick
    const std::vector<DeviceSample>* samples = nullptr; ///< device-local
    const std::vector<ForceCommand>* forces = nullptr;  ///< device-local, as dispatched
    std::uint64_t state_hash = 0;
    const Snapshot* snapshot = nullptr;                 ///< set on published ticks only
    const std::vector<std::string>* events = nullptr;   ///< control events applied before the step
};

struct LoopSummary {
    std::uint64_t ticks_run = 0;
    double final_t = 0.0;
    bool input_ended = false;
    bool stopped = false;
    bool paused = false; ///< a device refused a force command
    std::uint64_t overruns = 0;
};

class ServoLoop {
public:
    /// Called at each tick boundary before sampling; returns serialized
    /// descriptions of whatever it applied (logged with the tick). Setting
    /// `stop` to true ends the loop before this tick runs.
    using ControlHook = std::function<std::vector<std::string>(std::uint64_t tick, bool& stop)>;

    ServoLoop(Scenario& scenario, DeviceRig& rig, StepConfig step, unsigned servo_hz, unsigned snapshot_hz);

    void on_tick(std::function<void(const TickTrace&)> sink) { tick_sink_ = std::move(sink); }
    void on_snapshot(std::function<void(const Snapshot&)> sink) { snapshot_sink_ = std::move(sink); }
    void on_report(std::function<void(const TickReport&)> sink) { report_sink_ = std::move(sink); }
    void set_control_hook(ControlHook hook) { control_ = std::move(hook); }

    /// Runs up to `max_ticks` ticks (0 = unbounded, realtime only) or until
    /// input ends, a device disconnects, `stop` becomes true, or the control
    /// hook asks to stop.
    LoopSummary run(SchedulePolicy policy, std::uint64_t max_ticks, const std::atomic<bool>* stop = nullptr);

    [[nodiscard]] std::uint64_t ticks_done() const { return tick_; }
    [[nodiscard]] double time() const { return static_cast<double>(tick_) * step_.dt; }

private:
    bool run_one(LoopSummary& summary);

    Scenario& scenario_;
    DeviceRig& rig_;
    StepConfig step_;
    SnapshotDecimator decimator_;
    std::vector<DeviceDescriptor> descriptors_;
    std::uint64_t tick_ = 0;

    std::function<void(const TickTrace&)> tick_sink_;
    std::function<void(const Snapshot&)> snapshot_sink_;
    std::function<void(const TickReport&)> report_sink_;
    ControlHook control_;
};

} // namespace hlab
