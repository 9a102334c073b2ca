#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hlab/vec3.hpp"

namespace hlab {

enum class ScenarioId { Friction, Coriolis, Precession };

std::string to_string(ScenarioId id);
/// Throws std::invalid_argument for unknown names.
ScenarioId scenario_from_string(const std::string& name);

struct Body {
    std::string name;
    Vec3 pos;
    Vec3 axis{1.0, 0.0, 0.0}; ///< orientation hint (unit)
};

/// A force drawn in the scene. `vec` is the force itself in newtons, so the
/// declared arrow scale is 1 N per N and magnitude_n == |vec|.
struct Arrow {
    Vec3 origin;
    Vec3 vec;
    std::string label;
    double magnitude_n = 0.0;
};

Arrow make_arrow(const Vec3& origin, const Vec3& force, std::string label);

/// Render-ready view of one tick. HUD entries keep insertion order.
struct Snapshot {
    double t = 0.0;
    ScenarioId scenario = ScenarioId::Friction;
    std::string variant;
    std::vector<Body> bodies;
    std::vector<Arrow> arrows;
    std::vector<std::pair<std::string, double>> hud;
    std::optional<int> score;
    std::optional<std::string> error;

    [[nodiscard]] std::optional<double> hud_value(const std::string& key) const;
};

} // namespace hlab
