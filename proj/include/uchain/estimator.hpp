#pragma once

#include <cstdint>
#include <optional>

namespace uchain {

/// Scalar Kalman filter over one link's quality, driven by the separation rate of its endpoints.
struct KalmanParams {
    double A = -0.5;  // quality change per tick per (m/s) of separation
    double Q = 0.05;  // process noise variance
    double R = 3.0;   // measurement noise variance

    void validate() const;
};

struct LinkEstimate {
    double r_hat = 0.0;
    double p_var = 3.0;
    std::int64_t last_tick = 0;
};

/// Fresh estimate seeded from a first measurement, variance R.
[[nodiscard]] LinkEstimate initial_estimate(double z, const KalmanParams& params, std::int64_t tick = 0);

/// A priori step. `separation_rate` > 0 means the endpoints are moving apart.
[[nodiscard]] LinkEstimate predict(const LinkEstimate& est, double separation_rate, const KalmanParams& params);

/// A posteriori step with measurement `z`.
[[nodiscard]] LinkEstimate correct(const LinkEstimate& est, double z, const KalmanParams& params);

/// Kalman gain the next correction would use.
[[nodiscard]] double kalman_gain(const LinkEstimate& est, const KalmanParams& params);

/// One decision tick: always predict, correct only if a packet arrived.
[[nodiscard]] LinkEstimate step(const LinkEstimate& est, double separation_rate, std::optional<double> measurement,
                                const KalmanParams& params);

/// Steady-state a priori variance for measurements every tick: the positive root of
/// P^2 - Q P - Q R = 0. The matching a posteriori variance is this minus Q.
[[nodiscard]] double riccati_fixed_point(const KalmanParams& params);

}  // namespace uchain
