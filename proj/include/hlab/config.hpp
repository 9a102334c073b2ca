#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hlab/coriolis.hpp"
#include "hlab/friction.hpp"
#include "hlab/precession.hpp"
#include "hlab/servo.hpp"

namespace hlab {

/// Coriolis settings as configured (goal given by rim angle).
struct CoriolisSettings {
    double omega = 1.0;
    double platform_radius_m = 1.0;
    double goal_angle_deg = 0.0;
    double goal_radius_m = 0.15;
    PuckKind variant = PuckKind::Ball;
    double drag = 0.5;
    bool centrifugal = false;
    double puck_mass_kg = 0.5;
    double haptic_gain = 1.0;

    [[nodiscard]] CoriolisScene scene() const;
};

struct FrictionSettings {
    double theta_deg = 30.0;
    double mu_s = 0.5;
    double mu_k = 0.3;
    double mass_kg = 1.0;
    double track_len_m = 1.0;

    [[nodiscard]] FrictionScene scene() const;
};

inline constexpr unsigned kDefaultServoRate = 1000;
inline constexpr unsigned kDefaultSnapshotRate = 60;
inline constexpr unsigned kDefaultPort = 8765;

struct LabConfig {
    ScenarioId scenario = ScenarioId::Friction;
    FrictionSettings friction;
    CoriolisSettings coriolis;
    GyroConfig precession;
    CouplingParams coupling;
    double max_force_n = kDefaultMaxForce;
    double workspace_half_extent_m = kDefaultWorkspaceHalfExtent;
    unsigned servo_rate_hz = kDefaultServoRate;
    unsigned snapshot_rate_hz = kDefaultSnapshotRate;
    unsigned port = kDefaultPort;

    [[nodiscard]] StepConfig step() const;
    [[nodiscard]] DeviceDescriptor descriptor(int id) const;
    [[nodiscard]] std::size_t device_count() const { return scenario == ScenarioId::Precession ? 2 : 1; }
    [[nodiscard]] std::string variant() const;
};

/// Every problem found, each prefixed with its key path.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    [[nodiscard]] const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// Checks all invariants; returns the violations (empty when valid).
std::vector<std::string> validate(const LabConfig& config);

/// Whether a key may be changed while a scenario runs.
bool is_live_tunable(const std::string& key);

/// All recognised key paths.
std::vector<std::string> config_keys();

/// Flat `{"key.path": value}` object holding every key.
nlohmann::json to_json(const LabConfig& config);

/// Applies a JSON config (nested objects or dotted keys) over `base`.
/// Throws ConfigError listing every unknown key, type error and invariant
/// violation.
LabConfig apply_json(const LabConfig& base, const nlohmann::json& doc);

/// Applies `key=value` text overrides (CLI flags) over `base`.
LabConfig apply_overrides(const LabConfig& base, const std::vector<std::pair<std::string, std::string>>& overrides);

/// File first, then CLI overrides; `env_port` (LAB_PORT) applies only when
/// neither the file nor the overrides set a port.
LabConfig parse_config(const std::optional<std::string>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides,
                       const std::optional<std::string>& env_port = std::nullopt);

/// Returns `config` with one key changed and revalidated; throws ConfigError.
LabConfig with_value(const LabConfig& config, const std::string& key, const nlohmann::json& value);

/// Builds the active scenario for `config`.
std::unique_ptr<Scenario> make_scenario(const LabConfig& config);

/// Pushes the live-tunable parts of `config` into a running scenario of the
/// same kind.
void retune(Scenario& scenario, const LabConfig& config);

} // namespace hlab
