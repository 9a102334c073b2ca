// lab: command-line entry point (run / replay / gain).

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <thread>

#include <CLI11.hpp>

#include "hlab/assessment.hpp"
#include "hlab/config.hpp"
#include "hlab/lab.hpp"
#include "hlab/service.hpp"
#include "hlab/session.hpp"
#include "hlab/state_hash.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct RunArgs {
    std::string scenario;
    std::string variant;
    std::string device = "ws";
    std::string config;
    std::optional<unsigned> port;
    std::string record;
    std::optional<unsigned> rate;
    std::optional<std::uint64_t> ticks;
    std::vector<std::string> sets;
};

bool file_sets_scenario(const std::string& path)
{
    std::ifstream in(path);
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    return doc.is_object() && doc.contains("scenario");
}

int run_command(const RunArgs& a)
{
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "lab: --set expects key=value, got '" << s << "'\n";
            return 2;
        }
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!a.scenario.empty()) {
        overrides.emplace_back("scenario", a.scenario);
    } else if (a.config.empty() || !file_sets_scenario(a.config)) {
        std::cerr << "lab: invalid configuration:\n  scenario: missing (use --scenario or set it in --config)\n";
        return 2;
    }
    if (!a.variant.empty()) {
        overrides.emplace_back("coriolis.variant", a.variant);
    }
    if (a.port) {
        overrides.emplace_back("port", std::to_string(*a.port));
    }
    if (a.rate) {
        overrides.emplace_back("servo.rate_hz", std::to_string(*a.rate));
    }

    std::optional<std::string> env_port;
    if (const char* p = std::getenv("LAB_PORT")) {
        env_port = p;
    }

    hlab::LabConfig config;
    hlab::DeviceSpec device;
    try {
        config = hlab::parse_config(a.config.empty() ? std::nullopt : std::optional(a.config), overrides, env_port);
        device = hlab::parse_device_spec(a.device);
    } catch (const hlab::ConfigError& e) {
        std::cerr << "lab: " << e.what() << "\n";
        return 2;
    } catch (const hlab::ConfigurationError& e) {
        std::cerr << "lab: " << e.what() << "\n";
        return 2;
    }

    if (device.kind != hlab::DeviceKind::Network) {
        hlab::HeadlessOptions opts;
        opts.device = device;
        opts.ticks = a.ticks.value_or(std::numeric_limits<std::uint64_t>::max());
        if (!a.record.empty()) {
            opts.record_path = a.record;
        }
        const auto report = hlab::run_headless(config, opts);
        std::cout << "scenario=" << hlab::to_string(config.scenario) << " ticks=" << report.summary.ticks_run
                  << " t=" << std::setprecision(17) << report.summary.final_t
                  << " final_hash=" << hlab::hash_to_hex(report.final_hash) << "\n";
        if (report.early_stop && a.ticks) {
            std::cout << "stopped early: device input ended after " << report.summary.ticks_run << " of " << *a.ticks
                      << " ticks\n";
        }
        if (opts.record_path) {
            std::cout << "recorded " << *opts.record_path << "\n";
        }
        return 0;
    }

    if (a.ticks) {
        std::cerr << "lab: --ticks needs a script or replay device\n";
        return 2;
    }
    hlab::ServiceOptions opts;
    opts.config = config;
    opts.device = device;
    if (!a.record.empty()) {
        opts.record = a.record;
    }
    hlab::LabService service(opts);
    try {
        service.start();
    } catch (const std::runtime_error& e) {
        std::cerr << "lab: " << e.what() << "\n";
        return 1;
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "lab: " << hlab::to_string(config.scenario) << " lab listening on ws://0.0.0.0:" << service.port()
              << "/ws" << std::endl;
    while (!g_interrupted && service.running()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    service.stop();
    const auto failure = service.failure();
    const auto st = service.stats();
    std::cout << "lab: stopped after " << st.ticks << " ticks, " << st.overruns << " overruns\n";
    if (failure) {
        std::cerr << "lab: " << *failure << "\n";
        return 1;
    }
    return 0;
}

int replay_command(const std::string& in, bool verify)
{
    const hlab::SessionLog log = hlab::read_session_file(in);
    std::cout << "scenario=" << hlab::to_string(log.header.scenario);
    if (!log.header.variant.empty()) {
        std::cout << " variant=" << log.header.variant;
    }
    std::cout << " ticks=" << log.records.size();
    if (!log.records.empty()) {
        std::cout << " final_hash=" << hlab::hash_to_hex(log.records.back().state_hash);
    }
    std::cout << "\n";
    if (!verify) {
        return 0;
    }
    const auto report = hlab::verify_replay(log);
    std::cout << "match=" << (report.match ? "true" : "false");
    if (report.first_divergent_tick) {
        std::cout << " first_divergent_tick=" << *report.first_divergent_tick;
    }
    std::cout << "\n";
    return report.match ? 0 : 1;
}

int gain_command(const std::string& csv, const std::string& agg)
{
    std::ifstream in(csv);
    if (!in) {
        std::cerr << "lab: cannot open " << csv << "\n";
        return 2;
    }
    try {
        const auto reports = hlab::group_gain(hlab::load_scores(in), hlab::aggregation_from_string(agg));
        std::cout << "group,n,mean_gain,excluded\n";
        for (const auto& r : reports) {
            std::cout << r.group << ',' << r.n << ',';
            if (r.mean_gain) {
                std::cout << std::setprecision(6) << *r.mean_gain;
            } else {
                std::cout << "undefined";
            }
            std::cout << ',' << r.excluded.size() << "\n";
        }
    } catch (const hlab::ScoreParseError& e) {
        std::cerr << "lab: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "lab: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Haptic virtual-lab engine"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a lab (service, or headless with a script/replay device)");
    run_cmd->add_option("--scenario", run.scenario, "friction | coriolis | precession")
        ->check(CLI::IsMember({"friction", "coriolis", "precession"}));
    run_cmd->add_option("--variant", run.variant, "Coriolis puck: ball | glider")->check(CLI::IsMember({"ball", "glider"}));
    run_cmd->add_option("--device", run.device, "ws | script:FILE[,FILE] | replay:FILE");
    run_cmd->add_option("--config", run.config, "JSON config file")->check(CLI::ExistingFile);
    run_cmd->add_option("--port", run.port, "WebSocket port (falls back to LAB_PORT, then 8765)");
    run_cmd->add_option("--record", run.record, "Session log to write (.lablog)");
    run_cmd->add_option("--rate", run.rate, "Servo rate in Hz");
    run_cmd->add_option("--ticks", run.ticks, "Headless tick count");
    run_cmd->add_option("--set", run.sets, "Config override key=value (repeatable)");

    std::string replay_in;
    bool verify = false;
    auto* replay_cmd = app.add_subcommand("replay", "Inspect or verify a session log");
    replay_cmd->add_option("--in", replay_in, "Session log")->required()->check(CLI::ExistingFile);
    replay_cmd->add_flag("--verify", verify, "Re-run and compare state hashes");

    std::string csv;
    std::string agg = "per-student";
    auto* gain_cmd = app.add_subcommand("gain", "Normalized learning gain per group");
    gain_cmd->add_option("--csv", csv, "student,group,test2,test3 file")->required();
    gain_cmd->add_option("--agg", agg, "per-student | group-mean")->check(CLI::IsMember({"per-student", "group-mean"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        // Usage errors share the configuration-error exit status.
        app.exit(e);
        return 2;
    }

    try {
        if (*run_cmd) {
            return run_command(run);
        }
        if (*replay_cmd) {
            return replay_command(replay_in, verify);
        }
        if (*gain_cmd) {
            return gain_command(csv, agg);
        }
    } catch (const std::exception& e) {
        std::cerr << "lab: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
