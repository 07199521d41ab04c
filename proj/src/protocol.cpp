#include "uchain/protocol.hpp"

#include <json.hpp>

#include <array>
#include <utility>

namespace uchain {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<PilotAction, std::string_view>, 4> kActionNames{{
    {PilotAction::Forward, "forward"},
    {PilotAction::Backward, "backward"},
    {PilotAction::Stop, "stop"},
    {PilotAction::LaunchOverride, "launch_override"},
}};

json point(Vec2 p) { return json::array({p.x, p.y}); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

struct Encoder {
    json operator()(const Hello& h) const {
        json walls = json::array();
        for (const auto& w : h.environment.walls) walls.push_back(json::array({point(w.a), point(w.b)}));
        json centerline = json::array();
        for (const auto& p : h.environment.centerline) centerline.push_back(point(p));
        return {{"type", "hello"},
                {"v", kProtocolVersion},
                {"environment",
                 {{"name", h.environment.name},
                  {"walls", walls},
                  {"centerline", centerline},
                  {"length", h.environment.length}}},
                {"decision_period", h.decision_period},
                {"s_min", h.s_min},
                {"pilot_speed", h.pilot_speed},
                {"agents", h.agents},
                {"manual_launch", h.manual_launch}};
    }

    json operator()(const Snapshot& s) const {
        json agents = json::array();
        for (const auto& a : s.agents) {
            agents.push_back({{"id", a.id},
                              {"mode", std::string(to_string(a.mode))},
                              {"position", point(a.position)},
                              {"heading", a.heading},
                              {"abscissa", a.abscissa},
                              {"velocity", a.velocity}});
        }
        json links = json::array();
        for (const auto& l : s.links) {
            links.push_back({{"ids", json::array({l.head_side, l.base_side})},
                             {"raw_q", optional_number(l.raw_q)},
                             {"filtered_q", optional_number(l.filtered_q)},
                             {"true_q", l.true_q},
                             {"s_min", l.s_min}});
        }
        return {{"type", "snapshot"}, {"v", kProtocolVersion},     {"tick", s.tick},   {"substep", s.substep},
                {"time", s.time},     {"pilot_velocity", s.pilot_velocity}, {"agents", agents}, {"links", links}};
    }

    json operator()(const Command& c) const {
        return {{"type", "command"},
                {"v", kProtocolVersion},
                {"action", std::string(to_string(c.action))},
                {"issuer", c.issuer},
                {"client_time", c.client_time}};
    }

    json operator()(const ErrorFrame& e) const {
        return {{"type", "error"}, {"v", kProtocolVersion}, {"code", e.code}, {"message", e.message}};
    }
};

[[noreturn]] void schema_error(const std::string& what) { throw ProtocolError("schema", what); }

const json& field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) schema_error(std::string("missing field '") + key + "'");
    return *it;
}

double number(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_number()) schema_error(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

std::int64_t integer(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_number_integer()) schema_error(std::string("field '") + key + "' must be an integer");
    return v.get<std::int64_t>();
}

std::string text(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_string()) schema_error(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

bool boolean(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_boolean()) schema_error(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
}

const json& array(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_array()) schema_error(std::string("field '") + key + "' must be an array");
    return v;
}

const json& object(const json& obj, const char* key) {
    const json& v = field(obj, key);
    if (!v.is_object()) schema_error(std::string("field '") + key + "' must be an object");
    return v;
}

Vec2 to_point(const json& v) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) schema_error("point must be [x, y]");
    return {v[0].get<double>(), v[1].get<double>()};
}

std::optional<double> optional_number(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) schema_error(std::string("field '") + key + "' must be a number or null");
    return it->get<double>();
}

Hello decode_hello(const json& j) {
    Hello h;
    const json& env = object(j, "environment");
    h.environment.name = text(env, "name");
    for (const auto& w : array(env, "walls")) {
        if (!w.is_array() || w.size() != 2) schema_error("wall must be [[x, y], [x, y]]");
        h.environment.walls.push_back({to_point(w[0]), to_point(w[1])});
    }
    for (const auto& p : array(env, "centerline")) h.environment.centerline.push_back(to_point(p));
    h.environment.length = number(env, "length");
    h.decision_period = number(j, "decision_period");
    h.s_min = number(j, "s_min");
    h.pilot_speed = number(j, "pilot_speed");
    h.agents = static_cast<int>(integer(j, "agents"));
    h.manual_launch = boolean(j, "manual_launch");
    return h;
}

Snapshot decode_snapshot(const json& j) {
    Snapshot s;
    s.tick = integer(j, "tick");
    s.substep = static_cast<int>(integer(j, "substep"));
    s.time = number(j, "time");
    s.pilot_velocity = number(j, "pilot_velocity");
    for (const auto& a : array(j, "agents")) {
        if (!a.is_object()) schema_error("agent must be an object");
        AgentView v;
        v.id = static_cast<AgentId>(integer(a, "id"));
        const auto mode = parse_mode(text(a, "mode"));
        if (!mode) schema_error("unknown agent mode");
        v.mode = *mode;
        v.position = to_point(field(a, "position"));
        v.heading = number(a, "heading");
        v.abscissa = number(a, "abscissa");
        v.velocity = number(a, "velocity");
        s.agents.push_back(v);
    }
    for (const auto& l : array(j, "links")) {
        if (!l.is_object()) schema_error("link must be an object");
        LinkView v;
        const json& ids = array(l, "ids");
        if (ids.size() != 2 || !ids[0].is_number_integer() || !ids[1].is_number_integer()) {
            schema_error("link ids must be [head_side, base_side]");
        }
        v.head_side = ids[0].get<AgentId>();
        v.base_side = ids[1].get<AgentId>();
        v.raw_q = optional_number(l, "raw_q");
        v.filtered_q = optional_number(l, "filtered_q");
        v.true_q = number(l, "true_q");
        v.s_min = number(l, "s_min");
        s.links.push_back(v);
    }
    return s;
}

Command decode_command(const json& j) {
    Command c;
    const auto action = parse_action(text(j, "action"));
    if (!action) schema_error("unknown command action");
    c.action = *action;
    if (j.contains("issuer")) c.issuer = text(j, "issuer");
    if (j.contains("client_time")) c.client_time = number(j, "client_time");
    return c;
}

}  // namespace

std::string_view to_string(PilotAction a) {
    for (const auto& [action, name] : kActionNames) {
        if (action == a) return name;
    }
    return "unknown";
}

std::optional<PilotAction> parse_action(std::string_view text) {
    for (const auto& [action, name] : kActionNames) {
        if (name == text) return action;
    }
    return std::nullopt;
}

std::string encode(const Message& message) { return std::visit(Encoder{}, message).dump(); }

Message decode(std::string_view text_frame) {
    const json j = json::parse(text_frame.begin(), text_frame.end(), nullptr, false);
    if (j.is_discarded()) throw ProtocolError("decode", "frame is not valid JSON");
    if (!j.is_object()) throw ProtocolError("decode", "frame must be a JSON object");
    const auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer() || v->get<std::int64_t>() != kProtocolVersion) {
        throw ProtocolError("version", "unsupported protocol version (expected v = 1)");
    }
    const std::string type = text(j, "type");
    if (type == "hello") return decode_hello(j);
    if (type == "snapshot") return decode_snapshot(j);
    if (type == "command") return decode_command(j);
    if (type == "error") return ErrorFrame{text(j, "code"), text(j, "message")};
    schema_error("unknown message type '" + type + "'");
}

Hello make_hello(const Simulation& sim) {
    const Environment& env = sim.environment();
    Hello h;
    h.environment.name = env.name();
    h.environment.walls.assign(env.walls().begin(), env.walls().end());
    h.environment.centerline.assign(env.centerline().begin(), env.centerline().end());
    h.environment.length = env.length();
    h.decision_period = kDecisionPeriod;
    h.s_min = sim.config().radio.s_min;
    h.pilot_speed = sim.config().head.speed;
    h.agents = static_cast<int>(sim.world().agents.size());
    h.manual_launch = sim.config().manual_launch;
    return h;
}

Snapshot make_snapshot(const Simulation& sim) {
    const WorldState& w = sim.world();
    Snapshot s;
    s.tick = w.tick;
    s.substep = sim.substep();
    s.time = w.time() + sim.substep() * (kDecisionPeriod / kKinematicSubsteps);
    s.pilot_velocity = sim.pilot_velocity();
    for (const auto& a : w.agents) {
        s.agents.push_back({a.controller.id(), a.controller.mode(), a.pose.position, a.pose.heading, a.abscissa,
                            a.velocity});
    }
    for (const auto& l : w.links) {
        s.links.push_back({l.head_side, l.base_side, l.raw_q, l.filtered_q, l.true_q, sim.config().radio.s_min});
    }
    return s;
}

}  // namespace uchain
