#pragma once

#include <optional>
#include <string_view>

#include "uchain/estimator.hpp"
#include "uchain/geometry.hpp"
#include "uchain/radio.hpp"

namespace uchain {

enum class AgentMode { Base, Idle, TakingOff, Relaying, Retreating, Head };

[[nodiscard]] std::string_view to_string(AgentMode mode);
[[nodiscard]] std::optional<AgentMode> parse_mode(std::string_view text);

/// True for agents that take part in the relay chain (base, head, and airborne relays).
[[nodiscard]] constexpr bool in_chain(AgentMode m) {
    return m == AgentMode::Base || m == AgentMode::Head || m == AgentMode::Relaying || m == AgentMode::Retreating;
}

/// Which quantity the movement policy reads from each link.
enum class SignalSource { Raw, Filtered };

struct PolicyParams {
    double T = 1.0;       // tolerance on r_diff, quality units
    double v_max = 0.5;   // m/s
    double k_v = 0.05;    // (m/s) per quality unit
    double C_t = 1.0;     // 1/s
    double C_r = 1.0;     // rad/(m s)
    double D = 1.17;      // wall-follow distance on the diagonal sensor, m
    double invalid_wall_ratio = 0.4;
    double s_min = -16.0;
    double launch_margin = 5.0;
    double max_lateral_speed = 0.5;  // m/s
    double max_yaw_rate = 1.5;       // rad/s
    double retreat_speed = 0.3;      // m/s, toward the base
    double stop_distance = 0.3;      // m, front clearance at which forward motion stops
    double slow_distance = 1.0;      // m, front clearance below which the speed ramps down
    int opening_memory_ticks = 50;   // how long a detected side opening steers the turn
    int link_timeout_ticks = 10;     // consecutive missed packets before the uplink counts as lost
    int takeoff_ticks = 5;

    void validate() const;
};

struct ChainDecision {
    double forward_velocity = 0.0;  // + toward the head
    double r_diff = 0.0;            // r_b - r_f
    bool acted = false;
};

/// Equalization rule: step toward the neighbor with the weaker link, speed min(k_v |r_diff|, v_max).
[[nodiscard]] ChainDecision decide_motion(double r_b, double r_f, const PolicyParams& params);

/// Speed the equalization rule uses for a given link pair.
[[nodiscard]] double equalization_speed(double r_b, double r_f, const PolicyParams& params);

/// Exact displacement that raises a link of quality `s` by s_d / 3 under the log-distance model.
/// Throws std::invalid_argument when alpha <= 0.
[[nodiscard]] double epsilon_bound(double s_d, double s, double alpha);

struct LateralCommand {
    double lateral_velocity = 0.0;  // body frame, + to the left
    double yaw_rate = 0.0;          // + counter-clockwise
};

struct WallValidity {
    bool left = true;
    bool right = true;
};

enum class WallSide { Left, Right };

/// Two-wall centering law.
[[nodiscard]] LateralCommand centering_command(const RangeReadings& r, const PolicyParams& params);

/// A side is invalid when a sensor is at max range or its front reading exceeds the rear one by more
/// than the ratio.
[[nodiscard]] WallValidity wall_validity(const RangeReadings& r, const PolicyParams& params);

/// Single-wall following at distance D. With no valid side the command is zero.
[[nodiscard]] LateralCommand wall_follow_command(const RangeReadings& r, std::optional<WallSide> valid_side,
                                                 const PolicyParams& params);

/// Full reactive controller: picks centering or wall following from wall validity and saturates
/// the output. When `reversing` the rear sensors act as the front ones.
[[nodiscard]] LateralCommand navigation_command(const RangeReadings& r, bool reversing, const PolicyParams& params);

/// Scales the along-tunnel speed down linearly as the clearance ahead (in the direction of travel)
/// drops from slow_distance to stop_distance.
[[nodiscard]] double limit_speed(double forward_velocity, const RangeReadings& r, const PolicyParams& params);

/// Uplink (base-side link) status as seen by one agent.
struct UplinkStatus {
    std::optional<double> quality;  // current policy estimate, absent before the first packet
    int missed_ticks = 0;           // consecutive decision ticks without a packet
};

[[nodiscard]] bool uplink_weak(const UplinkStatus& uplink, const PolicyParams& params);

struct TransitionInput {
    AgentMode mode = AgentMode::Idle;
    bool launch_commanded = false;
    int ticks_in_mode = 0;
    UplinkStatus uplink;
};

/// Launch / retreat state machine, evaluated once per decision tick.
[[nodiscard]] AgentMode transition(const TransitionInput& in, const PolicyParams& params);

/// Per-link bookkeeping kept by an agent.
struct LinkTrack {
    AgentId neighbor = -1;
    std::optional<LinkEstimate> estimate;
    std::optional<double> last_raw;
    double neighbor_velocity = 0.0;
    int missed_ticks = 0;

    [[nodiscard]] std::optional<double> value(SignalSource source) const;
};

/// What the engine hands an agent on a decision tick.
struct AgentInputs {
    std::int64_t tick = 0;
    AgentId base_neighbor = -1;  // -1 when the agent has no base-side neighbor
    AgentId head_neighbor = -1;
    std::optional<RadioSample> from_base;
    std::optional<RadioSample> from_head;
    RangeReadings ranges;
    bool launch_commanded = false;
    double pilot_velocity = 0.0;  // head only
};

struct AgentCommand {
    double forward_velocity = 0.0;
    LateralCommand lateral;
    ChainDecision decision;
};

/// One UAV's onboard controller. Owns its link filters; talks to others only through samples.
class AgentController {
public:
    AgentController(AgentId id, AgentMode mode, SignalSource source, KalmanParams kalman, PolicyParams policy);

    AgentCommand update(const AgentInputs& in);

    [[nodiscard]] AgentId id() const { return id_; }
    [[nodiscard]] AgentMode mode() const { return mode_; }
    [[nodiscard]] int ticks_in_mode() const { return ticks_in_mode_; }
    [[nodiscard]] SignalSource source() const { return source_; }
    [[nodiscard]] const LinkTrack& base_link() const { return base_link_; }
    [[nodiscard]] const LinkTrack& head_link() const { return head_link_; }
    [[nodiscard]] double velocity() const { return velocity_; }
    [[nodiscard]] const ChainDecision& last_decision() const { return last_decision_; }
    [[nodiscard]] bool uplink_is_weak() const;

    /// Places the controller directly in `mode` (scenario setup only).
    void force_mode(AgentMode mode);

private:
    LateralCommand navigate(const RangeReadings& ranges, double forward_velocity);
    void track(LinkTrack& link, AgentId neighbor, const std::optional<RadioSample>& sample, double separation_rate,
               std::int64_t tick);

    AgentId id_;
    AgentMode mode_;
    SignalSource source_;
    KalmanParams kalman_;
    PolicyParams policy_;
    LinkTrack base_link_;
    LinkTrack head_link_;
    int ticks_in_mode_ = 0;
    double velocity_ = 0.0;
    int travel_direction_ = 0;
    std::optional<WallSide> opening_;  // side where the corridor last opened, in the travel frame
    int opening_age_ = 0;
    ChainDecision last_decision_;
};

}  // namespace uchain
