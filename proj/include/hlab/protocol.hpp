#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "hlab/coriolis.hpp"
#include "hlab/snapshot.hpp"
#include "hlab/vec3.hpp"

namespace hlab {

/// Schema version carried in the `v` field of every message.
inline constexpr int kProtocolVersion = 1;

struct PointerMessage {
    Vec3 pos;        ///< normalized, each component clamped to [-1, 1]
    int device = 0;  ///< 0 or 1
};

struct ParamMessage {
    std::string name;
    nlohmann::json value;
};

struct ScenarioMessage {
    ScenarioId scenario = ScenarioId::Friction;
    std::optional<PuckKind> variant;
};

struct ResetMessage {};

using ClientMessage = std::variant<PointerMessage, ParamMessage, ScenarioMessage, ResetMessage>;

/// The frame is not a valid client message; the sender gets disconnected.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ClientMessage parse_client_message(std::string_view text);
std::string serialize(const ClientMessage& message);

nlohmann::json vec_to_json(const Vec3& v);
/// Throws ProtocolError unless `j` is an array of three finite numbers.
Vec3 vec_from_json(const nlohmann::json& j);

nlohmann::json snapshot_to_json(const Snapshot& snap);
Snapshot snapshot_from_json(const nlohmann::json& j);
std::string snapshot_message(const Snapshot& snap);

/// Server -> client replies.
std::string applied_message(const std::string& request, const nlohmann::json& detail);
std::string reject_message(const std::string& request, const std::string& reason);
std::string error_message(const std::string& reason);
std::string hello_message(ScenarioId scenario, const std::string& variant, const nlohmann::json& config);

} // namespace hlab
