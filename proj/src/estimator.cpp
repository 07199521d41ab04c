#include "uchain/estimator.hpp"

#include <cmath>
#include <stdexcept>

namespace uchain {

void KalmanParams::validate() const {
    if (!std::isfinite(A)) throw std::invalid_argument("kalman: A must be finite");
    if (!(Q >= 0.0) || !std::isfinite(Q)) throw std::invalid_argument("kalman: Q must be >= 0");
    if (!(R > 0.0) || !std::isfinite(R)) throw std::invalid_argument("kalman: R must be > 0");
}

LinkEstimate initial_estimate(double z, const KalmanParams& params, std::int64_t tick) {
    return {z, params.R, tick};
}

LinkEstimate predict(const LinkEstimate& est, double separation_rate, const KalmanParams& params) {
    LinkEstimate out = est;
    out.r_hat += params.A * separation_rate;
    out.p_var += params.Q;
    return out;
}

double kalman_gain(const LinkEstimate& est, const KalmanParams& params) {
    return est.p_var / (est.p_var + params.R);
}

LinkEstimate correct(const LinkEstimate& est, double z, const KalmanParams& params) {
    const double k = kalman_gain(est, params);
    LinkEstimate out = est;
    out.r_hat += k * (z - est.r_hat);
    out.p_var = (1.0 - k) * est.p_var;
    return out;
}

LinkEstimate step(const LinkEstimate& est, double separation_rate, std::optional<double> measurement,
                  const KalmanParams& params) {
    LinkEstimate out = predict(est, separation_rate, params);
    if (measurement) out = correct(out, *measurement, params);
    return out;
}

double riccati_fixed_point(const KalmanParams& params) {
    const double q = params.Q;
    return 0.5 * (q + std::sqrt(q * q + 4.0 * q * params.R));
}

}  // namespace uchain
