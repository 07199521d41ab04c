#pragma once

#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace uchain {

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One tick of a link: the sample received, if any, and the endpoints' commanded velocities.
struct LinkObservation {
    std::string link;  // "h-b"
    long tick = 0;
    std::optional<double> raw_q;
    double separation_rate = 0.0;  // head-side velocity minus base-side velocity, m/s
};

struct CalibrationFit {
    double A = 0.0;         // quality units per tick per (m/s)
    double residual = 0.0;  // RMS of the fit residuals
    std::size_t samples = 0;
    std::size_t links = 0;
};

/// Pulls every link row out of an event log, in log order.
/// Throws CalibrationError on a malformed log.
[[nodiscard]] std::vector<LinkObservation> read_link_observations(std::istream& log);

/// Least-squares fit of the separation model. Within each link, quality levels are regressed on the
/// separation accumulated since the start of the log, with one intercept per link:
///   raw_q(k) = c_link + A * sum_{j < k} u(j)
/// Ticks without a sample still accumulate separation.
/// Throws CalibrationError when there are fewer than 3 samples or no link ever changes separation.
[[nodiscard]] CalibrationFit fit_separation_gain(const std::vector<LinkObservation>& observations);

}  // namespace uchain
