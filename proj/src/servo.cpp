#include "hlab/servo.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

namespace hlab {

void CouplingParams::validate(double dt, double min_proxy_mass) const
{
    if (!(k_c > 0.0)) {
        throw ConfigurationError("coupling k_c must be positive");
    }
    if (!(b_c >= 0.0)) {
        throw ConfigurationError("coupling b_c must be non-negative");
    }
    if (!(k_c * dt <= 2.0 * b_c + 2.0 * min_proxy_mass / dt)) {
        throw ConfigurationError("coupling stiffness violates k_c*dt <= 2*b_c + 2*m_min/dt");
    }
}

Vec3 coupling_force(const Vec3& device_pos, const Vec3& device_vel, const Vec3& proxy_pos,
                    const Vec3& proxy_vel, const CouplingParams& params)
{
    return (device_pos - proxy_pos) * params.k_c + (device_vel - proxy_vel) * params.b_c;
}

double engagement_weight(double separation, const CouplingReach& reach)
{
    if (separation <= reach.inner) {
        return 1.0;
    }
    if (separation >= reach.outer) {
        return 0.0;
    }
    return (reach.outer - separation) / (reach.outer - reach.inner);
}

std::uint64_t Scenario::state_hash() const
{
    StateHasher h;
    h.u8(static_cast<std::uint8_t>(id()));
    hash_state(h);
    return h.value();
}

TickResult tick(Scenario& scenario, std::span<const DeviceSample> samples,
                std::span<const DeviceDescriptor> descriptors, double t_after, double dt)
{
    const std::size_t n = descriptors.size();
    TickResult out;
    out.commands.resize(n);
    out.rendered.resize(n);

    if (!scenario.faulted()) {
        try {
            if (samples.size() != scenario.device_count()) {
                throw StateCorruptionError("sample count does not match the scenario's device count");
            }
            const auto feedback = scenario.step(samples, dt);
            for (std::size_t i = 0; i < n && i < feedback.size(); ++i) {
                out.rendered[i] = -feedback[i].coupling_on_proxy + feedback[i].direct;
                out.commands[i].force = clamp_force(out.rendered[i], descriptors[i].max_force_n);
            }
        } catch (const StateCorruptionError& e) {
            scenario.set_fault(e.what());
            out.commands.assign(n, ForceCommand{});
            out.rendered.assign(n, Vec3{});
        }
    }

    if (scenario.faulted()) {
        out.snapshot.t = t_after;
        out.snapshot.scenario = scenario.id();
        out.snapshot.variant = scenario.variant();
        out.snapshot.error = scenario.fault_reason();
    } else {
        out.snapshot = scenario.snapshot(t_after);
    }
    return out;
}

SnapshotDecimator::SnapshotDecimator(unsigned servo_hz, unsigned snapshot_hz)
    : servo_hz_(std::max(1u, servo_hz))
    , snapshot_hz_(std::min(snapshot_hz, servo_hz))
{
}

bool SnapshotDecimator::publish(std::uint64_t tick) const
{
    return (tick + 1) * snapshot_hz_ / servo_hz_ > tick * snapshot_hz_ / servo_hz_;
}

ServoLoop::ServoLoop(Scenario& scenario, DeviceRig& rig, StepConfig step, unsigned servo_hz, unsigned snapshot_hz)
    : scenario_(scenario)
    , rig_(rig)
    , step_(step)
    , decimator_(servo_hz, snapshot_hz)
{
    step_.validate();
    for (std::size_t i = 0; i < rig_.size(); ++i) {
        descriptors_.push_back(rig_.device(i).descriptor());
    }
}

bool ServoLoop::run_one(LoopSummary& summary)
{
    std::vector<std::string> events;
    if (control_) {
        bool stop = false;
        events = control_(tick_, stop);
        if (stop) {
            summary.stopped = true;
            return false;
        }
    }

    auto samples = rig_.sample();
    if (!samples) {
        std::vector<ForceCommand> zeros(rig_.size());
        rig_.command(zeros);
        summary.input_ended = true;
        return false;
    }

    const std::uint64_t k = tick_;
    const double t_after = static_cast<double>(k + 1) * step_.dt;
    TickResult result = tick(scenario_, samples->world, descriptors_, t_after, step_.dt);

    auto dispatched = rig_.command(result.commands);
    if (!dispatched) {
        // A device went away mid-tick: zero whatever is still connected.
        std::vector<ForceCommand> zeros(rig_.size());
        rig_.command(zeros);
        summary.paused = true;
        summary.input_ended = true;
        return false;
    }

    ++tick_;
    const bool publish = decimator_.publish(k);
    if (tick_sink_) {
        TickTrace trace;
        trace.tick = k;
        trace.t = t_after;
        trace.samples = &samples->local;
        trace.forces = &*dispatched;
        trace.state_hash = scenario_.state_hash();
        trace.snapshot = publish ? &result.snapshot : nullptr;
        trace.events = &events;
        tick_sink_(trace);
    }
    if (publish && snapshot_sink_) {
        snapshot_sink_(result.snapshot);
    }
    return true;
}

LoopSummary ServoLoop::run(SchedulePolicy policy, std::uint64_t max_ticks, const std::atomic<bool>* stop)
{
    using clock = std::chrono::steady_clock;
    LoopSummary summary;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(step_.dt));
    auto deadline = clock::now();
    const std::uint64_t start_tick = tick_;

    while (max_ticks == 0 || tick_ - start_tick < max_ticks) {
        if (stop && stop->load(std::memory_order_relaxed)) {
            summary.stopped = true;
            break;
        }
        if (policy == SchedulePolicy::Simulated) {
            if (max_ticks == 0) {
                throw ConfigurationError("simulated run needs a tick count");
            }
            if (!run_one(summary)) {
                break;
            }
            continue;
        }

        std::this_thread::sleep_until(deadline);
        const auto begin = clock::now();
        const bool late = begin - deadline > period;
        const std::uint64_t k = tick_;
        const bool ok = run_one(summary);
        const auto end = clock::now();
        if (!ok) {
            break;
        }
        TickReport report{k, std::chrono::duration<double>(end - begin).count(), false};
        report.overrun = late || end - begin > period;
        summary.overruns += report.overrun ? 1 : 0;
        if (report_sink_) {
            report_sink_(report);
        }
        // Fixed dt regardless of lateness; the schedule slips instead of
        // bunching catch-up ticks.
        deadline += period;
        if (end > deadline) {
            deadline = end;
        }
    }

    summary.ticks_run = tick_ - start_tick;
    summary.final_t = time();
    return summary;
}

} // namespace hlab
