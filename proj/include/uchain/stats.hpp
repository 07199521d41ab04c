#pragma once

#include <span>
#include <utility>
#include <vector>

namespace uchain {

/// Linear-interpolation quantile (q in [0, 1]). NaN entries are dropped; NaN if nothing is left.
[[nodiscard]] double quantile(std::vector<double> values, double q);
[[nodiscard]] inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

struct RankSumResult {
    double u = 0.0;        // Mann-Whitney U of the first sample
    double z = 0.0;        // normal score with continuity and tie corrections
    double p_value = 1.0;  // one-sided
};

/// Wilcoxon rank-sum / Mann-Whitney U test of H1: values in `a` tend to be smaller than in `b`.
/// Normal approximation with tie-corrected variance and a 0.5 continuity correction.
/// Throws std::invalid_argument when either sample is empty.
[[nodiscard]] RankSumResult rank_sum_less(std::span<const double> a, std::span<const double> b);

}  // namespace uchain
