#include "hlab/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace hlab {

using nlohmann::json;

namespace {

const json& field(const json& obj, const char* name)
{
    const auto it = obj.find(name);
    if (it == obj.end()) {
        throw ProtocolError(std::string("missing field '") + name + "'");
    }
    return *it;
}

std::string text_field(const json& obj, const char* name)
{
    const json& f = field(obj, name);
    if (!f.is_string()) {
        throw ProtocolError(std::string("field '") + name + "' must be a string");
    }
    return f.get<std::string>();
}

json envelope(const char* type)
{
    return json{{"v", kProtocolVersion}, {"type", type}};
}

} // namespace

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j)
{
    if (!j.is_array() || j.size() != 3 || !std::all_of(j.begin(), j.end(), [](const json& c) { return c.is_number(); })) {
        throw ProtocolError("expected [x, y, z]");
    }
    const Vec3 v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    if (!v.is_finite()) {
        throw ProtocolError("vector components must be finite");
    }
    return v;
}

ClientMessage parse_client_message(std::string_view text)
{
    json doc = json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded()) {
        throw ProtocolError("frame is not valid JSON");
    }
    if (!doc.is_object()) {
        throw ProtocolError("message must be a JSON object");
    }
    const json& v = field(doc, "v");
    if (!v.is_number_integer() || v.get<long long>() != kProtocolVersion) {
        throw ProtocolError("unsupported protocol version (expected v=" + std::to_string(kProtocolVersion) + ")");
    }
    const std::string type = text_field(doc, "type");

    if (type == "pointer") {
        PointerMessage m;
        m.pos = vec_from_json(field(doc, "pos"));
        m.pos = {std::clamp(m.pos.x, -1.0, 1.0), std::clamp(m.pos.y, -1.0, 1.0), std::clamp(m.pos.z, -1.0, 1.0)};
        if (doc.contains("device")) {
            const json& d = doc["device"];
            if (!d.is_number_integer() || (d.get<long long>() != 0 && d.get<long long>() != 1)) {
                throw ProtocolError("pointer device must be 0 or 1");
            }
            m.device = d.get<int>();
        }
        return m;
    }
    if (type == "param") {
        ParamMessage m;
        m.name = text_field(doc, "name");
        m.value = field(doc, "value");
        if (m.value.is_object() || m.value.is_array() || m.value.is_null()) {
            throw ProtocolError("param value must be a number, boolean or string");
        }
        return m;
    }
    if (type == "scenario") {
        ScenarioMessage m;
        try {
            m.scenario = scenario_from_string(text_field(doc, "name"));
            if (doc.contains("variant") && !doc["variant"].is_null()) {
                const std::string variant = text_field(doc, "variant");
                if (!variant.empty()) {
                    m.variant = puck_kind_from_string(variant);
                }
            }
        } catch (const std::invalid_argument& e) {
            throw ProtocolError(e.what());
        }
        return m;
    }
    if (type == "reset") {
        return ResetMessage{};
    }
    throw ProtocolError("unknown message type '" + type + "'");
}

std::string serialize(const ClientMessage& message)
{
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PointerMessage>) {
                json j = envelope("pointer");
                j["pos"] = vec_to_json(m.pos);
                j["device"] = m.device;
                return j.dump();
            } else if constexpr (std::is_same_v<T, ParamMessage>) {
                json j = envelope("param");
                j["name"] = m.name;
                j["value"] = m.value;
                return j.dump();
            } else if constexpr (std::is_same_v<T, ScenarioMessage>) {
                json j = envelope("scenario");
                j["name"] = to_string(m.scenario);
                if (m.variant) {
                    j["variant"] = to_string(*m.variant);
                }
                return j.dump();
            } else {
                return envelope("reset").dump();
            }
        },
        message);
}

json snapshot_to_json(const Snapshot& snap)
{
    json j = envelope("snapshot");
    j["t"] = snap.t;
    j["scenario"] = to_string(snap.scenario);
    j["variant"] = snap.variant;
    json bodies = json::array();
    for (const auto& b : snap.bodies) {
        bodies.push_back({{"name", b.name}, {"pos", vec_to_json(b.pos)}, {"axis", vec_to_json(b.axis)}});
    }
    j["bodies"] = std::move(bodies);
    json arrows = json::array();
    for (const auto& a : snap.arrows) {
        arrows.push_back({{"origin", vec_to_json(a.origin)},
                          {"vec", vec_to_json(a.vec)},
                          {"label", a.label},
                          {"magnitude_n", a.magnitude_n}});
    }
    j["arrows"] = std::move(arrows);
    json hud = json::object();
    for (const auto& [k, v] : snap.hud) {
        hud[k] = v;
    }
    j["hud"] = std::move(hud);
    j["score"] = snap.score ? json(*snap.score) : json(nullptr);
    if (snap.error) {
        j["error"] = *snap.error;
    }
    return j;
}

Snapshot snapshot_from_json(const json& j)
{
    try {
        Snapshot s;
        s.t = j.at("t").get<double>();
        s.scenario = scenario_from_string(j.at("scenario").get<std::string>());
        s.variant = j.value("variant", std::string{});
        for (const auto& b : j.at("bodies")) {
            s.bodies.push_back({b.at("name").get<std::string>(), vec_from_json(b.at("pos")), vec_from_json(b.at("axis"))});
        }
        for (const auto& a : j.at("arrows")) {
            s.arrows.push_back({vec_from_json(a.at("origin")), vec_from_json(a.at("vec")), a.at("label").get<std::string>(),
                                a.at("magnitude_n").get<double>()});
        }
        for (const auto& [k, v] : j.at("hud").items()) {
            s.hud.emplace_back(k, v.get<double>());
        }
        if (j.contains("score") && !j["score"].is_null()) {
            s.score = j["score"].get<int>();
        }
        if (j.contains("error")) {
            s.error = j["error"].get<std::string>();
        }
        return s;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad snapshot: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ProtocolError(std::string("bad snapshot: ") + e.what());
    }
}

std::string snapshot_message(const Snapshot& snap) { return snapshot_to_json(snap).dump(); }

std::string applied_message(const std::string& request, const json& detail)
{
    json j = envelope("applied");
    j["request"] = request;
    j["detail"] = detail;
    return j.dump();
}

std::string reject_message(const std::string& request, const std::string& reason)
{
    json j = envelope("reject");
    j["request"] = request;
    j["reason"] = reason;
    return j.dump();
}

std::string error_message(const std::string& reason)
{
    json j = envelope("error");
    j["reason"] = reason;
    return j.dump();
}

std::string hello_message(ScenarioId scenario, const std::string& variant, const json& config)
{
    json j = envelope("hello");
    j["scenario"] = to_string(scenario);
    j["variant"] = variant;
    j["config"] = config;
    return j.dump();
}

} // namespace hlab
