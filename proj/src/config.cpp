#include "hlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>

namespace hlab {

namespace {

using nlohmann::json;

enum class Kind { Number, Integer, Bool, Text };

struct KeySpec {
    const char* key;
    Kind kind;
    bool live;
    std::function<json(const LabConfig&)> get;
    std::function<void(LabConfig&, const json&)> set;
};

#define HLAB_NUMBER(name, live, field)                                                                          \
    KeySpec                                                                                                     \
    {                                                                                                           \
        name, Kind::Number, live, [](const LabConfig& c) { return json(c.field); },                              \
            [](LabConfig& c, const json& v) { c.field = v.get<double>(); }                                      \
    }

#define HLAB_INTEGER(name, field)                                                                               \
    KeySpec                                                                                                     \
    {                                                                                                           \
        name, Kind::Integer, false, [](const LabConfig& c) { return json(c.field); },                            \
            [](LabConfig& c, const json& v) { c.field = v.get<unsigned>(); }                                    \
    }

const std::vector<KeySpec>& key_table()
{
    static const std::vector<KeySpec> table = {
        {"scenario", Kind::Text, false, [](const LabConfig& c) { return json(to_string(c.scenario)); },
         [](LabConfig& c, const json& v) { c.scenario = scenario_from_string(v.get<std::string>()); }},
        HLAB_NUMBER("friction.theta_deg", true, friction.theta_deg),
        HLAB_NUMBER("friction.mu_s", true, friction.mu_s),
        HLAB_NUMBER("friction.mu_k", true, friction.mu_k),
        HLAB_NUMBER("friction.mass_kg", true, friction.mass_kg),
        HLAB_NUMBER("friction.track_len_m", true, friction.track_len_m),
        HLAB_NUMBER("coriolis.omega", true, coriolis.omega),
        HLAB_NUMBER("coriolis.platform_radius_m", true, coriolis.platform_radius_m),
        HLAB_NUMBER("coriolis.goal_angle_deg", true, coriolis.goal_angle_deg),
        HLAB_NUMBER("coriolis.goal_radius_m", true, coriolis.goal_radius_m),
        {"coriolis.variant", Kind::Text, false, [](const LabConfig& c) { return json(to_string(c.coriolis.variant)); },
         [](LabConfig& c, const json& v) { c.coriolis.variant = puck_kind_from_string(v.get<std::string>()); }},
        HLAB_NUMBER("coriolis.drag", true, coriolis.drag),
        {"coriolis.centrifugal", Kind::Bool, true, [](const LabConfig& c) { return json(c.coriolis.centrifugal); },
         [](LabConfig& c, const json& v) { c.coriolis.centrifugal = v.get<bool>(); }},
        HLAB_NUMBER("coriolis.puck_mass_kg", true, coriolis.puck_mass_kg),
        HLAB_NUMBER("coriolis.haptic_gain", true, coriolis.haptic_gain),
        HLAB_NUMBER("precession.wheel_mass_kg", true, precession.wheel_mass),
        HLAB_NUMBER("precession.wheel_radius_m", true, precession.wheel_radius),
        HLAB_NUMBER("precession.handle_half_len_m", true, precession.handle_half_length),
        HLAB_NUMBER("precession.spin_rate", true, precession.spin_rate),
        HLAB_NUMBER("coupling.k", false, coupling.k_c),
        HLAB_NUMBER("coupling.b", false, coupling.b_c),
        HLAB_NUMBER("clamp.max_force_n", false, max_force_n),
        HLAB_NUMBER("device.workspace_half_extent_m", false, workspace_half_extent_m),
        HLAB_INTEGER("servo.rate_hz", servo_rate_hz),
        HLAB_INTEGER("snapshot.rate_hz", snapshot_rate_hz),
        HLAB_INTEGER("port", port),
    };
    return table;
}

#undef HLAB_NUMBER
#undef HLAB_INTEGER

const KeySpec* find_key(const std::string& key)
{
    const auto& t = key_table();
    const auto it = std::find_if(t.begin(), t.end(), [&](const KeySpec& s) { return key == s.key; });
    return it == t.end() ? nullptr : &*it;
}

std::optional<std::string> type_error(const KeySpec& spec, const json& v)
{
    switch (spec.kind) {
    case Kind::Number:
        if (!v.is_number()) {
            return "expected a number";
        }
        break;
    case Kind::Integer:
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::int64_t>() > 0xffffffffLL) {
            return "expected a non-negative integer";
        }
        break;
    case Kind::Bool:
        if (!v.is_boolean()) {
            return "expected true or false";
        }
        break;
    case Kind::Text:
        if (!v.is_string()) {
            return "expected a string";
        }
        break;
    }
    return std::nullopt;
}

void flatten(const json& doc, const std::string& prefix, std::vector<std::pair<std::string, json>>& out)
{
    for (const auto& [k, v] : doc.items()) {
        const std::string path = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) {
            flatten(v, path, out);
        } else {
            out.emplace_back(path, v);
        }
    }
}

void set_key(LabConfig& config, const std::string& key, const json& value, std::vector<std::string>& problems)
{
    const KeySpec* spec = find_key(key);
    if (!spec) {
        problems.push_back(key + ": unknown key");
        return;
    }
    if (auto err = type_error(*spec, value)) {
        problems.push_back(key + ": " + *err);
        return;
    }
    try {
        spec->set(config, value);
    } catch (const std::exception& e) {
        problems.push_back(key + ": " + e.what());
    }
}

json text_to_json(const KeySpec& spec, const std::string& text)
{
    switch (spec.kind) {
    case Kind::Number: {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec == std::errc{} && ptr == text.data() + text.size()) {
            return v;
        }
        return text;
    }
    case Kind::Integer: {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec == std::errc{} && ptr == text.data() + text.size()) {
            return v;
        }
        return text;
    }
    case Kind::Bool:
        if (text == "true" || text == "1") {
            return true;
        }
        if (text == "false" || text == "0") {
            return false;
        }
        return text;
    case Kind::Text:
        return text;
    }
    return text;
}

double proxy_mass(const LabConfig& c)
{
    switch (c.scenario) {
    case ScenarioId::Friction: return c.friction.mass_kg;
    case ScenarioId::Coriolis: return c.coriolis.puck_mass_kg;
    case ScenarioId::Precession: return c.precession.wheel_mass;
    }
    return 0.0;
}

std::string num(double v)
{
    json j = v;
    return j.dump();
}

} // namespace

FrictionScene FrictionSettings::scene() const
{
    FrictionScene s;
    s.theta = theta_deg * std::numbers::pi / 180.0;
    s.mu_s = mu_s;
    s.mu_k = mu_k;
    s.mass = mass_kg;
    s.track_half_length = track_len_m / 2.0;
    return s;
}

CoriolisScene CoriolisSettings::scene() const
{
    CoriolisScene s;
    s.omega = omega;
    s.platform_radius = platform_radius_m;
    s.goal = goal_on_rim(platform_radius_m, goal_angle_deg * std::numbers::pi / 180.0, goal_radius_m);
    s.puck_mass = puck_mass_kg;
    s.ground_drag = drag;
    s.centrifugal_enabled = centrifugal;
    s.haptic_gain = haptic_gain;
    return s;
}

StepConfig LabConfig::step() const
{
    StepConfig s;
    s.dt = 1.0 / static_cast<double>(servo_rate_hz);
    return s;
}

DeviceDescriptor LabConfig::descriptor(int id) const { return {workspace_half_extent_m, max_force_n, id}; }

std::string LabConfig::variant() const { return scenario == ScenarioId::Coriolis ? to_string(coriolis.variant) : ""; }

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) {
            msg += "\n  " + v;
        }
        return msg;
    }())
    , violations_(std::move(violations))
{
}

std::vector<std::string> validate(const LabConfig& c)
{
    std::vector<std::string> out;
    auto require = [&](bool ok, const std::string& msg) {
        if (!ok) {
            out.push_back(msg);
        }
    };

    const auto& f = c.friction;
    require(f.theta_deg >= 0.0 && f.theta_deg < 90.0, "friction.theta_deg: must satisfy 0 ≤ theta < 90");
    require(f.mu_k >= 0.0, "friction.mu_k: must be ≥ 0");
    require(f.mu_s >= f.mu_k, "friction.mu_k: mu_s ≥ mu_k violated (mu_s=" + num(f.mu_s) + ", mu_k=" + num(f.mu_k) + ")");
    require(f.mass_kg > 0.0, "friction.mass_kg: must be > 0");
    require(f.track_len_m > 0.0, "friction.track_len_m: must be > 0");

    const auto& k = c.coriolis;
    require(std::isfinite(k.omega), "coriolis.omega: must be finite");
    require(k.platform_radius_m > 0.0, "coriolis.platform_radius_m: must be > 0");
    require(std::isfinite(k.goal_angle_deg), "coriolis.goal_angle_deg: must be finite");
    require(k.goal_radius_m > 0.0, "coriolis.goal_radius_m: must be > 0");
    require(k.drag >= 0.0, "coriolis.drag: must be ≥ 0");
    require(k.puck_mass_kg > 0.0, "coriolis.puck_mass_kg: must be > 0");
    require(k.haptic_gain >= 0.0 && std::isfinite(k.haptic_gain), "coriolis.haptic_gain: must be finite and ≥ 0");

    const auto& p = c.precession;
    require(p.wheel_mass > 0.0, "precession.wheel_mass_kg: must be > 0");
    require(p.wheel_radius > 0.0, "precession.wheel_radius_m: must be > 0");
    require(p.handle_half_length > 0.0, "precession.handle_half_len_m: must be > 0");
    require(p.spin_rate >= 0.0 && p.spin_rate <= kMaxSpinRate, "precession.spin_rate: must be within [0, 200] rad/s");

    require(c.max_force_n > 0.0, "clamp.max_force_n: must be > 0");
    require(c.workspace_half_extent_m > 0.0, "device.workspace_half_extent_m: must be > 0");
    const bool rate_ok = c.servo_rate_hz >= 200 && c.servo_rate_hz <= 100000;
    require(rate_ok, "servo.rate_hz: must be within [200, 100000] (dt ≤ 5 ms)");
    require(c.snapshot_rate_hz >= 1 && c.snapshot_rate_hz <= c.servo_rate_hz,
            "snapshot.rate_hz: must be within [1, servo.rate_hz]");
    require(c.port <= 65535, "port: must be ≤ 65535");

    require(c.coupling.k_c > 0.0, "coupling.k: must be > 0");
    require(c.coupling.b_c >= 0.0, "coupling.b: must be ≥ 0");
    if (rate_ok && c.coupling.k_c > 0.0 && c.coupling.b_c >= 0.0 && proxy_mass(c) > 0.0) {
        try {
            c.coupling.validate(c.step().dt, proxy_mass(c));
        } catch (const ConfigurationError& e) {
            out.push_back(std::string("coupling.k: ") + e.what());
        }
    }
    return out;
}

bool is_live_tunable(const std::string& key)
{
    const KeySpec* spec = find_key(key);
    return spec && spec->live;
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> out;
    for (const auto& s : key_table()) {
        out.emplace_back(s.key);
    }
    return out;
}

json to_json(const LabConfig& config)
{
    json out = json::object();
    for (const auto& s : key_table()) {
        out[s.key] = s.get(config);
    }
    return out;
}

LabConfig apply_json(const LabConfig& base, const json& doc)
{
    if (!doc.is_object()) {
        throw ConfigError({"<root>: config must be a JSON object"});
    }
    std::vector<std::pair<std::string, json>> entries;
    flatten(doc, "", entries);

    LabConfig config = base;
    std::vector<std::string> problems;
    for (const auto& [key, value] : entries) {
        set_key(config, key, value, problems);
    }
    for (auto& v : validate(config)) {
        problems.push_back(std::move(v));
    }
    if (!problems.empty()) {
        throw ConfigError(std::move(problems));
    }
    return config;
}

LabConfig apply_overrides(const LabConfig& base, const std::vector<std::pair<std::string, std::string>>& overrides)
{
    json doc = json::object();
    std::vector<std::string> problems;
    for (const auto& [key, text] : overrides) {
        const KeySpec* spec = find_key(key);
        if (!spec) {
            problems.push_back(key + ": unknown key");
            continue;
        }
        doc[key] = text_to_json(*spec, text);
    }
    if (!problems.empty()) {
        throw ConfigError(std::move(problems));
    }
    // Dotted keys are stored flat; apply_json flattens nested objects only.
    LabConfig config = base;
    std::vector<std::string> errors;
    for (const auto& [key, value] : doc.items()) {
        set_key(config, key, value, errors);
    }
    for (auto& v : validate(config)) {
        errors.push_back(std::move(v));
    }
    if (!errors.empty()) {
        throw ConfigError(std::move(errors));
    }
    return config;
}

LabConfig parse_config(const std::optional<std::string>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides,
                       const std::optional<std::string>& env_port)
{
    LabConfig config;
    bool port_set = std::any_of(overrides.begin(), overrides.end(), [](const auto& kv) { return kv.first == "port"; });

    if (file) {
        std::ifstream in(*file);
        if (!in) {
            throw ConfigError({"<file>: cannot open " + *file});
        }
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError({"<file>: " + std::string(e.what())});
        }
        std::vector<std::pair<std::string, json>> entries;
        if (doc.is_object()) {
            flatten(doc, "", entries);
        }
        port_set = port_set || std::any_of(entries.begin(), entries.end(), [](const auto& kv) { return kv.first == "port"; });

        std::vector<std::pair<std::string, std::string>> combined;
        if (env_port && !port_set) {
            combined.emplace_back("port", *env_port);
        }
        LabConfig with_env = combined.empty() ? config : apply_overrides(config, combined);
        // File errors and override errors are reported together.
        std::vector<std::string> problems;
        LabConfig from_file = with_env;
        try {
            from_file = apply_json(with_env, doc);
        } catch (const ConfigError& e) {
            problems = e.violations();
        }
        if (!problems.empty()) {
            LabConfig scratch = with_env;
            for (const auto& [key, value] : entries) {
                std::vector<std::string> ignored;
                set_key(scratch, key, value, ignored);
            }
            try {
                apply_overrides(scratch, overrides);
            } catch (const ConfigError& e) {
                for (const auto& v : e.violations()) {
                    if (std::find(problems.begin(), problems.end(), v) == problems.end()) {
                        problems.push_back(v);
                    }
                }
            }
            throw ConfigError(std::move(problems));
        }
        return apply_overrides(from_file, overrides);
    }

    std::vector<std::pair<std::string, std::string>> all;
    if (env_port && !port_set) {
        all.emplace_back("port", *env_port);
    }
    all.insert(all.end(), overrides.begin(), overrides.end());
    return apply_overrides(config, all);
}

LabConfig with_value(const LabConfig& config, const std::string& key, const json& value)
{
    LabConfig next = config;
    std::vector<std::string> problems;
    set_key(next, key, value, problems);
    if (problems.empty()) {
        problems = validate(next);
    }
    if (!problems.empty()) {
        throw ConfigError(std::move(problems));
    }
    return next;
}

std::unique_ptr<Scenario> make_scenario(const LabConfig& config)
{
    const auto problems = validate(config);
    if (!problems.empty()) {
        throw ConfigError(problems);
    }
    switch (config.scenario) {
    case ScenarioId::Friction:
        return std::make_unique<FrictionLab>(config.friction.scene(), config.coupling, config.workspace_half_extent_m,
                                             config.step().v_eps);
    case ScenarioId::Coriolis:
        return std::make_unique<CoriolisLab>(config.coriolis.scene(), config.coriolis.variant, config.coupling,
                                             config.workspace_half_extent_m);
    case ScenarioId::Precession:
        return std::make_unique<PrecessionLab>(config.precession, config.coupling);
    }
    throw ConfigError({"scenario: unsupported"});
}

void retune(Scenario& scenario, const LabConfig& config)
{
    if (auto* f = dynamic_cast<FrictionLab*>(&scenario)) {
        f->set_scene(config.friction.scene());
    } else if (auto* c = dynamic_cast<CoriolisLab*>(&scenario)) {
        c->set_scene(config.coriolis.scene());
    } else if (auto* p = dynamic_cast<PrecessionLab*>(&scenario)) {
        p->set_config(config.precession);
    }
}

} // namespace hlab
