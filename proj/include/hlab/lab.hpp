#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hlab/config.hpp"
#include "hlab/device.hpp"
#include "hlab/servo.hpp"
#include "hlab/session.hpp"

namespace hlab {

enum class DeviceKind { Network, Script, Replay };

/// `ws`, `script:FILE[,FILE]` or `replay:FILE`.
struct DeviceSpec {
    DeviceKind kind = DeviceKind::Network;
    std::vector<std::string> files;
};

/// Throws ConfigurationError for anything else.
DeviceSpec parse_device_spec(const std::string& text);

/// A well-formed request that cannot be applied to the running lab.
class RejectedRequest : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RigInputs {
    std::unique_ptr<DeviceRig> rig;
    std::vector<std::shared_ptr<PointerMailbox>> mailboxes; ///< one per device, network rigs only
};

/// Builds the devices for `config`'s scenario. Network rigs reuse the given
/// mailboxes when there are enough of them. A single script file drives
/// both hands of the precession rig.
RigInputs make_rig(const LabConfig& config, const DeviceSpec& spec, ScriptEnd script_end = ScriptEnd::Hold,
                   const std::vector<std::shared_ptr<PointerMailbox>>& mailboxes = {});

/// Replays the recorded device samples of `log`.
std::unique_ptr<DeviceRig> replay_rig(const LabConfig& config, const SessionLog& log);

/// One active scenario, its configuration and its devices.
class Lab {
public:
    Lab(LabConfig config, std::unique_ptr<DeviceRig> rig);

    [[nodiscard]] const LabConfig& config() const { return config_; }
    [[nodiscard]] Scenario& scenario() { return *scenario_; }
    [[nodiscard]] DeviceRig& rig() { return *rig_; }

    /// Live parameter change at a tick boundary. Returns the event to log.
    /// Throws RejectedRequest.
    nlohmann::json set_param(const std::string& key, const nlohmann::json& value);
    nlohmann::json reset();

    /// Re-applies an event produced by set_param or reset.
    void apply_event(const nlohmann::json& event);

    [[nodiscard]] SessionHeader header() const;

private:
    LabConfig config_;
    std::unique_ptr<Scenario> scenario_;
    std::unique_ptr<DeviceRig> rig_;
};

struct HeadlessOptions {
    DeviceSpec device{DeviceKind::Script, {}};
    std::uint64_t ticks = 0;
    std::optional<std::string> record_path;
    ScriptEnd script_end = ScriptEnd::Exhaust;
    std::function<void(const TickTrace&)> observer;
};

struct HeadlessReport {
    LoopSummary summary;
    std::uint64_t final_hash = 0;
    bool early_stop = false; ///< input ran out before `ticks`
};

/// Simulated-time run for exactly `ticks` ticks unless the input ends first.
HeadlessReport run_headless(const LabConfig& config, const HeadlessOptions& options);

/// The configuration a log was recorded with.
LabConfig config_from_header(const SessionHeader& header);

/// Re-runs the log's scenario against its recorded samples and events and
/// compares state hashes tick by tick.
VerifyReport verify_replay(const SessionLog& log);

} // namespace hlab
