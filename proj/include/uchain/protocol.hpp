#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "uchain/agent.hpp"
#include "uchain/geometry.hpp"
#include "uchain/simengine.hpp"

namespace uchain {

inline constexpr int kProtocolVersion = 1;

struct EnvironmentDigest {
    std::string name;
    std::vector<Segment> walls;
    std::vector<Vec2> centerline;
    double length = 0.0;

    bool operator==(const EnvironmentDigest&) const = default;
};

/// First frame on every connection.
struct Hello {
    EnvironmentDigest environment;
    double decision_period = kDecisionPeriod;
    double s_min = 0.0;
    double pilot_speed = 0.0;
    int agents = 0;
    bool manual_launch = false;

    bool operator==(const Hello&) const = default;
};

struct AgentView {
    AgentId id = 0;
    AgentMode mode = AgentMode::Idle;
    Vec2 position;
    double heading = 0.0;
    double abscissa = 0.0;
    double velocity = 0.0;  // commanded along-tunnel speed

    bool operator==(const AgentView&) const = default;
};

struct LinkView {
    AgentId head_side = 0;
    AgentId base_side = 0;
    std::optional<double> raw_q;
    std::optional<double> filtered_q;
    double true_q = 0.0;
    double s_min = 0.0;

    bool operator==(const LinkView&) const = default;
};

/// (tick, substep) strictly increases along a stream.
struct Snapshot {
    std::int64_t tick = 0;
    int substep = 0;
    double time = 0.0;
    double pilot_velocity = 0.0;
    std::vector<AgentView> agents;
    std::vector<LinkView> links;

    bool operator==(const Snapshot&) const = default;
};

enum class PilotAction { Forward, Backward, Stop, LaunchOverride };

[[nodiscard]] std::string_view to_string(PilotAction a);
[[nodiscard]] std::optional<PilotAction> parse_action(std::string_view text);

struct Command {
    PilotAction action = PilotAction::Stop;
    std::string issuer;
    double client_time = 0.0;  // client clock, informational

    bool operator==(const Command&) const = default;
};

struct ErrorFrame {
    std::string code;  // "decode", "version", "schema", "rejected"
    std::string message;

    bool operator==(const ErrorFrame&) const = default;
};

using Message = std::variant<Hello, Snapshot, Command, ErrorFrame>;

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    [[nodiscard]] const std::string& code() const { return code_; }
    [[nodiscard]] ErrorFrame frame() const { return {code_, what()}; }

private:
    std::string code_;
};

/// JSON text with "type" and "v" fields.
[[nodiscard]] std::string encode(const Message& message);

/// Inverse of encode. Unknown fields are ignored. Throws ProtocolError: "decode" for text that is not a
/// JSON object, "version" when v != 1, "schema" for a missing or mistyped field or an unknown type.
[[nodiscard]] Message decode(std::string_view text);

[[nodiscard]] Hello make_hello(const Simulation& sim);
[[nodiscard]] Snapshot make_snapshot(const Simulation& sim);

}  // namespace uchain
