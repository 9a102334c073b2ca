#include "hlab/snapshot.hpp"

#include <stdexcept>

namespace hlab {

std::string to_string(ScenarioId id)
{
    switch (id) {
    case ScenarioId::Friction: return "friction";
    case ScenarioId::Coriolis: return "coriolis";
    case ScenarioId::Precession: return "precession";
    }
    return "unknown";
}

ScenarioId scenario_from_string(const std::string& name)
{
    if (name == "friction") {
        return ScenarioId::Friction;
    }
    if (name == "coriolis") {
        return ScenarioId::Coriolis;
    }
    if (name == "precession") {
        return ScenarioId::Precession;
    }
    throw std::invalid_argument("unknown scenario: " + name);
}

Arrow make_arrow(const Vec3& origin, const Vec3& force, std::string label)
{
    return Arrow{origin, force, std::move(label), force.norm()};
}

std::optional<double> Snapshot::hud_value(const std::string& key) const
{
    for (const auto& [k, v] : hud) {
        if (k == key) {
            return v;
        }
    }
    return std::nullopt;
}

} // namespace hlab
