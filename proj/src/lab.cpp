#include "hlab/lab.hpp"

#include <sstream>

namespace hlab {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& text, char sep)
{
    // Keeps empty pieces, including a trailing one.
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == sep) {
            out.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool belongs_to(const std::string& key, ScenarioId scenario)
{
    const std::string prefix = to_string(scenario) + ".";
    return key.rfind(prefix, 0) == 0;
}

std::unique_ptr<DeviceRig> assemble(const LabConfig& config, std::vector<std::unique_ptr<Device>> devices)
{
    if (devices.size() == 1) {
        return std::make_unique<SingleRig>(std::move(devices[0]));
    }
    return std::make_unique<DualRig>(std::move(devices[0]), std::move(devices[1]),
                                     config.precession.handle_half_length);
}

} // namespace

DeviceSpec parse_device_spec(const std::string& text)
{
    if (text == "ws") {
        return {DeviceKind::Network, {}};
    }
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        const std::string kind = text.substr(0, colon);
        auto files = split(text.substr(colon + 1), ',');
        const bool any_empty = std::any_of(files.begin(), files.end(), [](const auto& f) { return f.empty(); });
        if (kind == "script" && !files.empty() && files.size() <= 2 && !any_empty) {
            return {DeviceKind::Script, std::move(files)};
        }
        if (kind == "replay" && files.size() == 1 && !any_empty) {
            return {DeviceKind::Replay, std::move(files)};
        }
    }
    throw ConfigurationError("bad device '" + text + "' (expected ws, script:FILE[,FILE] or replay:FILE)");
}

RigInputs make_rig(const LabConfig& config, const DeviceSpec& spec, ScriptEnd script_end,
                   const std::vector<std::shared_ptr<PointerMailbox>>& mailboxes)
{
    const std::size_t n = config.device_count();
    const double dt = config.step().dt;
    RigInputs out;
    std::vector<std::unique_ptr<Device>> devices;

    switch (spec.kind) {
    case DeviceKind::Network:
        for (std::size_t i = 0; i < n; ++i) {
            auto box = i < mailboxes.size() ? mailboxes[i] : std::make_shared<PointerMailbox>();
            out.mailboxes.push_back(box);
            devices.push_back(
                std::make_unique<NetworkPointerDevice>(config.descriptor(static_cast<int>(i)), dt, box));
        }
        break;
    case DeviceKind::Script: {
        if (spec.files.size() > n) {
            throw ConfigurationError(std::to_string(spec.files.size()) + " scripts given for " + std::to_string(n) +
                                     " device(s)");
        }
        std::vector<Script> scripts;
        for (const auto& f : spec.files) {
            scripts.push_back(load_script(f));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const Script& s = scripts[std::min(i, scripts.size() - 1)];
            devices.push_back(
                std::make_unique<ScriptedDevice>(s, config.descriptor(static_cast<int>(i)), dt, script_end));
        }
        break;
    }
    case DeviceKind::Replay:
        out.rig = replay_rig(config, read_session_file(spec.files.at(0)));
        return out;
    }
    out.rig = assemble(config, std::move(devices));
    return out;
}

std::unique_ptr<DeviceRig> replay_rig(const LabConfig& config, const SessionLog& log)
{
    const std::size_t n = config.device_count();
    if (log.header.devices != n) {
        throw ConfigurationError("log has " + std::to_string(log.header.devices) + " device stream(s), scenario needs " +
                                 std::to_string(n));
    }
    std::vector<std::unique_ptr<Device>> devices;
    for (std::size_t i = 0; i < n; ++i) {
        devices.push_back(std::make_unique<ReplayDevice>(log.device_samples(i), config.descriptor(static_cast<int>(i))));
    }
    return assemble(config, std::move(devices));
}

// ---------------------------------------------------------------------------

Lab::Lab(LabConfig config, std::unique_ptr<DeviceRig> rig)
    : config_(std::move(config))
    , scenario_(make_scenario(config_))
    , rig_(std::move(rig))
{
    if (!rig_ || rig_->size() != scenario_->device_count()) {
        throw ConfigurationError("device rig does not match the scenario");
    }
}

json Lab::set_param(const std::string& key, const json& value)
{
    if (!is_live_tunable(key) || !belongs_to(key, config_.scenario)) {
        throw RejectedRequest(key + " is not a live-tunable key of the " + to_string(config_.scenario) + " lab");
    }
    LabConfig next;
    try {
        next = with_value(config_, key, value);
    } catch (const ConfigError& e) {
        std::string reason;
        for (const auto& v : e.violations()) {
            reason += (reason.empty() ? "" : "; ") + v;
        }
        throw RejectedRequest(reason);
    }
    config_ = next;
    retune(*scenario_, config_);
    if (auto* dual = dynamic_cast<DualRig*>(rig_.get())) {
        dual->set_handle_half_length(config_.precession.handle_half_length);
    }
    return {{"type", "param"}, {"name", key}, {"value", value}};
}

json Lab::reset()
{
    scenario_->reset();
    return {{"type", "reset"}};
}

void Lab::apply_event(const json& event)
{
    const std::string type = event.value("type", std::string{});
    if (type == "param") {
        set_param(event.at("name").get<std::string>(), event.at("value"));
    } else if (type == "reset") {
        reset();
    } else {
        throw LogFormatError("unknown logged event: " + event.dump());
    }
}

SessionHeader Lab::header() const
{
    SessionHeader h;
    h.scenario = config_.scenario;
    h.variant = scenario_->variant();
    h.devices = scenario_->device_count();
    h.dt = config_.step().dt;
    h.started_at = utc_timestamp();
    h.config = to_json(config_);
    return h;
}

// ---------------------------------------------------------------------------

HeadlessReport run_headless(const LabConfig& config, const HeadlessOptions& options)
{
    if (options.ticks == 0) {
        throw ConfigurationError("headless run needs a positive tick count");
    }
    if (options.device.kind == DeviceKind::Network) {
        throw ConfigurationError("headless run needs a scripted or replay device");
    }
    Lab lab(config, make_rig(config, options.device, options.script_end).rig);

    std::unique_ptr<AsyncSessionWriter> writer;
    if (options.record_path) {
        writer = std::make_unique<AsyncSessionWriter>(*options.record_path, lab.header());
    }

    ServoLoop loop(lab.scenario(), lab.rig(), config.step(), config.servo_rate_hz, config.snapshot_rate_hz);
    loop.on_tick([&](const TickTrace& trace) {
        if (writer) {
            writer->append(make_record(trace));
        }
        if (options.observer) {
            options.observer(trace);
        }
    });

    HeadlessReport report;
    report.summary = loop.run(SchedulePolicy::Simulated, options.ticks);
    if (writer) {
        writer->close();
    }
    report.final_hash = lab.scenario().state_hash();
    report.early_stop = report.summary.ticks_run < options.ticks;
    return report;
}

LabConfig config_from_header(const SessionHeader& header)
{
    LabConfig config = apply_json(LabConfig{}, header.config);
    if (config.scenario != header.scenario) {
        throw LogFormatError("header scenario disagrees with its config snapshot");
    }
    return config;
}

VerifyReport verify_replay(const SessionLog& log)
{
    const LabConfig config = config_from_header(log.header);
    Lab lab(config, replay_rig(config, log));

    std::vector<std::uint64_t> hashes;
    hashes.reserve(log.records.size());
    ServoLoop loop(lab.scenario(), lab.rig(), config.step(), config.servo_rate_hz, config.snapshot_rate_hz);
    loop.set_control_hook([&](std::uint64_t tick, bool&) {
        if (tick < log.records.size()) {
            for (const auto& e : log.records[tick].events) {
                lab.apply_event(e);
            }
        }
        return std::vector<std::string>{};
    });
    loop.on_tick([&](const TickTrace& trace) { hashes.push_back(trace.state_hash); });
    if (!log.records.empty()) {
        loop.run(SchedulePolicy::Simulated, log.records.size());
    }
    return compare_hashes(log, hashes);
}

} // namespace hlab
