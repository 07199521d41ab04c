#pragma once

#include <cstdint>

#include "uchain/geometry.hpp"
#include "uchain/random.hpp"

namespace uchain {

using AgentId = int;

/// Links shorter than this are clamped; two drones this close are colliding.
inline constexpr double kMinLinkDistance = 0.1;

struct RadioParams {
    double alpha_base = 2.0;
    double alpha_max = 6.0;
    double noise_variance = 3.0;   // dB^2
    double packet_loss_prob = 0.2;
    double s_min = -16.0;          // quality units; packets at or below this never arrive

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// One delivered packet as seen by the receiver.
struct RadioSample {
    AgentId src = 0;
    AgentId dst = 0;
    double quality = 0.0;
    std::int64_t tick = 0;
    double sender_velocity = 0.0;  // sender's abscissa rate, piggybacked on the packet
};

/// Path-loss exponent: alpha_base plus one per wall crossed, capped at alpha_max.
[[nodiscard]] double attenuation_factor(const Environment& env, Vec2 p1, Vec2 p2, const RadioParams& params);

/// Noiseless quality s = -RSSI = -10 alpha log10(d). Distances below kMinLinkDistance are clamped.
[[nodiscard]] double true_quality(const Environment& env, Vec2 p1, Vec2 p2, const RadioParams& params);

/// Same model evaluated for a given alpha and distance.
[[nodiscard]] double path_loss_quality(double alpha, double dist);

/// true_quality plus N(0, noise_variance) drawn from `rng`.
[[nodiscard]] double sample_quality(const Environment& env, Vec2 p1, Vec2 p2, const RadioParams& params,
                                    RandomStream& rng);

/// Gated lossy channel: never delivers at or below s_min, otherwise loses packet_loss_prob of them.
[[nodiscard]] bool try_transmit(double link_quality, const RadioParams& params, RandomStream& rng);

}  // namespace uchain
