#include "uchain/radio.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uchain {

void RadioParams::validate() const {
    if (!(alpha_base >= 2.0 && alpha_base <= alpha_max && alpha_max <= 6.0)) {
        throw std::invalid_argument("radio: need 2 <= alpha_base <= alpha_max <= 6");
    }
    if (!(packet_loss_prob >= 0.0 && packet_loss_prob < 1.0)) {
        throw std::invalid_argument("radio: packet_loss_prob must be in [0, 1)");
    }
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
        throw std::invalid_argument("radio: noise_variance must be >= 0");
    }
    if (!std::isfinite(s_min)) {
        throw std::invalid_argument("radio: s_min must be finite");
    }
}

double attenuation_factor(const Environment& env, Vec2 p1, Vec2 p2, const RadioParams& params) {
    const int k = wall_crossings(env, p1, p2);
    return std::min(params.alpha_base + static_cast<double>(k), params.alpha_max);
}

double path_loss_quality(double alpha, double dist) {
    return -10.0 * alpha * std::log10(std::max(dist, kMinLinkDistance));
}

double true_quality(const Environment& env, Vec2 p1, Vec2 p2, const RadioParams& params) {
    return path_loss_quality(attenuation_factor(env, p1, p2, params), distance(p1, p2));
}

double sample_quality(const Environment& env, Vec2 p1, Vec2 p2, const RadioParams& params, RandomStream& rng) {
    const double q = true_quality(env, p1, p2, params);
    if (params.noise_variance == 0.0) return q;
    return q + std::sqrt(params.noise_variance) * rng.normal();
}

bool try_transmit(double link_quality, const RadioParams& params, RandomStream& rng) {
    // Always draw so the loss stream advances identically whatever the gate decides.
    const double u = rng.uniform();
    if (link_quality <= params.s_min) return false;
    return u >= params.packet_loss_prob;
}

}  // namespace uchain
