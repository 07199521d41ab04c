#include "uchain/agent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace uchain {

namespace {

constexpr std::array<std::pair<AgentMode, std::string_view>, 6> kModeNames{{
    {AgentMode::Base, "base"},
    {AgentMode::Idle, "idle"},
    {AgentMode::TakingOff, "taking_off"},
    {AgentMode::Relaying, "relaying"},
    {AgentMode::Retreating, "retreating"},
    {AgentMode::Head, "head"},
}};

// Only an opening ahead (front reading growing past the rear one) invalidates a side. A wall closing in
// at the front is the outer wall of a bend and is exactly what the drone must keep following.
bool side_valid(const RangeReading& front, const RangeReading& rear, double ratio) {
    if (front.max_range || rear.max_range) return false;
    return front.distance - rear.distance <= ratio * rear.distance;
}

}  // namespace

std::string_view to_string(AgentMode mode) {
    for (const auto& [m, name] : kModeNames) {
        if (m == mode) return name;
    }
    return "unknown";
}

std::optional<AgentMode> parse_mode(std::string_view text) {
    for (const auto& [m, name] : kModeNames) {
        if (name == text) return m;
    }
    return std::nullopt;
}

void PolicyParams::validate() const {
    if (!(T >= 0.0)) throw std::invalid_argument("policy: T must be >= 0");
    if (!(v_max > 0.0)) throw std::invalid_argument("policy: v_max must be > 0");
    if (!(k_v > 0.0)) throw std::invalid_argument("policy: k_v must be > 0");
    if (!(C_t > 0.0) || !(C_r > 0.0)) throw std::invalid_argument("policy: C_t and C_r must be > 0");
    if (!(D > 0.0 && D < kSensorRange)) throw std::invalid_argument("policy: D must be in (0, 2)");
    if (!(invalid_wall_ratio > 0.0 && invalid_wall_ratio < 1.0)) {
        throw std::invalid_argument("policy: invalid_wall_ratio must be in (0, 1)");
    }
    if (!(retreat_speed > 0.0 && retreat_speed <= v_max)) {
        throw std::invalid_argument("policy: retreat_speed must be in (0, v_max]");
    }
    if (!(stop_distance >= 0.0 && stop_distance < slow_distance)) {
        throw std::invalid_argument("policy: need 0 <= stop_distance < slow_distance");
    }
    if (link_timeout_ticks < 1 || takeoff_ticks < 0) throw std::invalid_argument("policy: bad tick counts");
}

double equalization_speed(double r_b, double r_f, const PolicyParams& params) {
    return std::min(params.k_v * std::abs(r_b - r_f), params.v_max);
}

ChainDecision decide_motion(double r_b, double r_f, const PolicyParams& params) {
    ChainDecision d;
    d.r_diff = r_b - r_f;
    if (d.r_diff > params.T) {
        // head-side link is the weaker one
        d.forward_velocity = equalization_speed(r_b, r_f, params);
    } else if (d.r_diff < -params.T) {
        d.forward_velocity = -equalization_speed(r_b, r_f, params);
    }
    d.acted = d.forward_velocity != 0.0;
    return d;
}

double epsilon_bound(double s_d, double s, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("epsilon_bound: alpha must be > 0");
    const double d_hat = std::pow(10.0, -s / (10.0 * alpha));
    // Closing the link from d_hat to d_hat - eps raises it by exactly s_d / 3.
    return d_hat * (1.0 - std::pow(10.0, -std::abs(s_d) / (30.0 * alpha)));
}

LateralCommand centering_command(const RangeReadings& r, const PolicyParams& params) {
    return {
        params.C_t * (r.nw.distance - r.ne.distance),
        params.C_r * (r.nw.distance - r.sw.distance) + params.C_r * (r.se.distance - r.ne.distance),
    };
}

WallValidity wall_validity(const RangeReadings& r, const PolicyParams& params) {
    return {side_valid(r.nw, r.sw, params.invalid_wall_ratio), side_valid(r.ne, r.se, params.invalid_wall_ratio)};
}

LateralCommand wall_follow_command(const RangeReadings& r, std::optional<WallSide> valid_side,
                                   const PolicyParams& params) {
    if (!valid_side) return {};
    if (*valid_side == WallSide::Left) {
        return {params.C_t * (r.nw.distance - params.D), 2.0 * params.C_r * (r.nw.distance - r.sw.distance)};
    }
    return {params.C_t * (params.D - r.ne.distance), 2.0 * params.C_r * (r.se.distance - r.ne.distance)};
}

LateralCommand navigation_command(const RangeReadings& readings, bool reversing, const PolicyParams& params) {
    const RangeReadings r = reversing ? readings.reversed() : readings;
    const WallValidity v = wall_validity(r, params);
    LateralCommand cmd;
    if (v.left && v.right) {
        cmd = centering_command(r, params);
    } else if (v.left) {
        cmd = wall_follow_command(r, WallSide::Left, params);
    } else if (v.right) {
        cmd = wall_follow_command(r, WallSide::Right, params);
    }
    if (reversing) cmd.lateral_velocity = -cmd.lateral_velocity;
    cmd.lateral_velocity = std::clamp(cmd.lateral_velocity, -params.max_lateral_speed, params.max_lateral_speed);
    cmd.yaw_rate = std::clamp(cmd.yaw_rate, -params.max_yaw_rate, params.max_yaw_rate);
    return cmd;
}

double limit_speed(double forward_velocity, const RangeReadings& readings, const PolicyParams& params) {
    if (forward_velocity == 0.0) return 0.0;
    const RangeReadings r = forward_velocity < 0.0 ? readings.reversed() : readings;
    const double clearance = std::min(r.nw.distance, r.ne.distance);
    const double scale =
        std::clamp((clearance - params.stop_distance) / (params.slow_distance - params.stop_distance), 0.0, 1.0);
    const double speed = std::abs(forward_velocity) * scale;
    return std::copysign(speed, forward_velocity);
}

bool uplink_weak(const UplinkStatus& uplink, const PolicyParams& params) {
    if (uplink.missed_ticks >= params.link_timeout_ticks) return true;
    return uplink.quality && *uplink.quality < params.s_min;
}

AgentMode transition(const TransitionInput& in, const PolicyParams& params) {
    switch (in.mode) {
        case AgentMode::Idle:
            return in.launch_commanded ? AgentMode::TakingOff : AgentMode::Idle;
        case AgentMode::TakingOff:
            return in.ticks_in_mode >= params.takeoff_ticks ? AgentMode::Relaying : AgentMode::TakingOff;
        case AgentMode::Relaying:
            return uplink_weak(in.uplink, params) ? AgentMode::Retreating : AgentMode::Relaying;
        case AgentMode::Retreating: {
            const bool recovered = in.uplink.quality && *in.uplink.quality >= params.s_min + params.launch_margin &&
                                   in.uplink.missed_ticks < params.link_timeout_ticks;
            return recovered ? AgentMode::Relaying : AgentMode::Retreating;
        }
        case AgentMode::Base:
        case AgentMode::Head:
            return in.mode;
    }
    return in.mode;
}

std::optional<double> LinkTrack::value(SignalSource source) const {
    if (source == SignalSource::Raw) return last_raw;
    if (estimate) return estimate->r_hat;
    return std::nullopt;
}

AgentController::AgentController(AgentId id, AgentMode mode, SignalSource source, KalmanParams kalman,
                                 PolicyParams policy)
    : id_(id), mode_(mode), source_(source), kalman_(kalman), policy_(policy) {}

void AgentController::force_mode(AgentMode mode) {
    mode_ = mode;
    ticks_in_mode_ = 0;
}

bool AgentController::uplink_is_weak() const {
    return uplink_weak({base_link_.value(source_), base_link_.missed_ticks}, policy_);
}

void AgentController::track(LinkTrack& link, AgentId neighbor, const std::optional<RadioSample>& sample,
                            double separation_rate, std::int64_t tick) {
    if (link.neighbor != neighbor) {
        link = LinkTrack{};
        link.neighbor = neighbor;
    }
    if (neighbor < 0) return;

    std::optional<double> z;
    if (sample) z = sample->quality;
    if (link.estimate) {
        link.estimate = step(*link.estimate, separation_rate, z, kalman_);
    } else if (z) {
        link.estimate = initial_estimate(*z, kalman_, tick);
    }
    if (sample) {
        link.estimate->last_tick = tick;
        link.last_raw = sample->quality;
        link.neighbor_velocity = sample->sender_velocity;
        link.missed_ticks = 0;
    } else {
        ++link.missed_ticks;
    }
}

LateralCommand AgentController::navigate(const RangeReadings& ranges, double forward_velocity) {
    const int direction = forward_velocity > 0.0 ? 1 : (forward_velocity < 0.0 ? -1 : 0);
    if (direction != 0 && direction != travel_direction_) {
        travel_direction_ = direction;
        opening_.reset();
    }
    const bool reversing = travel_direction_ < 0;
    const RangeReadings r = reversing ? ranges.reversed() : ranges;
    const WallValidity v = wall_validity(r, policy_);
    if (v.left != v.right) {
        opening_ = v.left ? WallSide::Right : WallSide::Left;
        opening_age_ = 0;
    } else if (opening_ && ++opening_age_ > policy_.opening_memory_ticks) {
        opening_.reset();
    }

    LateralCommand cmd = navigation_command(ranges, reversing, policy_);
    // Facing the outer wall of a bend the diagonal sensors no longer say which way the tunnel goes;
    // the side that opened up on the way in does.
    const double clearance = std::min(r.nw.distance, r.ne.distance);
    if (opening_ && clearance < policy_.slow_distance) {
        const double urgency = std::clamp((policy_.slow_distance - clearance) /
                                              (policy_.slow_distance - policy_.stop_distance),
                                          0.0, 1.0);
        const double turn = (*opening_ == WallSide::Left ? 1.0 : -1.0) * policy_.max_yaw_rate * urgency;
        cmd.yaw_rate = std::clamp(cmd.yaw_rate + turn, -policy_.max_yaw_rate, policy_.max_yaw_rate);
    }
    return cmd;
}

AgentCommand AgentController::update(const AgentInputs& in) {
    ++ticks_in_mode_;
    // The base-side neighbor sits behind us on the abscissa: our own motion forward separates the pair.
    track(base_link_, in.base_neighbor, in.from_base, velocity_ - base_link_.neighbor_velocity, in.tick);
    track(head_link_, in.head_neighbor, in.from_head, head_link_.neighbor_velocity - velocity_, in.tick);

    const AgentMode next = transition(
        {mode_, in.launch_commanded, ticks_in_mode_, {base_link_.value(source_), base_link_.missed_ticks}}, policy_);
    if (next != mode_) {
        mode_ = next;
        ticks_in_mode_ = 0;
    }

    AgentCommand cmd;
    switch (mode_) {
        case AgentMode::Base:
        case AgentMode::Idle:
            velocity_ = 0.0;
            last_decision_ = {};
            return cmd;
        case AgentMode::TakingOff:
            break;
        case AgentMode::Head:
            cmd.forward_velocity = in.pilot_velocity;
            if (uplink_is_weak()) cmd.forward_velocity = std::min(cmd.forward_velocity, 0.0);
            break;
        case AgentMode::Retreating:
            cmd.forward_velocity = -policy_.retreat_speed;
            break;
        case AgentMode::Relaying: {
            const auto r_b = base_link_.value(source_);
            const auto r_f = head_link_.value(source_);
            if (r_b && r_f) {
                cmd.decision = decide_motion(*r_b, *r_f, policy_);
                cmd.forward_velocity = cmd.decision.forward_velocity;
            }
            break;
        }
    }
    cmd.forward_velocity = limit_speed(cmd.forward_velocity, in.ranges, policy_);
    cmd.lateral = navigate(in.ranges, cmd.forward_velocity);
    velocity_ = cmd.forward_velocity;
    last_decision_ = cmd.decision;
    return cmd;
}

}  // namespace uchain
