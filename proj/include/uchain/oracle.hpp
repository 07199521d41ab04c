#pragma once

#include <vector>

#include "uchain/geometry.hpp"
#include "uchain/radio.hpp"

namespace uchain {

struct OracleResult {
    std::vector<double> abscissae;     // x_0 (head) ... x_n (base = 0)
    std::vector<double> link_quality;  // n links, head side first
    double value = 0.0;                // weakest link quality
    double resolution = 0.0;
};

/// Exhaustive maximin placement on a grid along the centerline: base fixed at 0, head at
/// `head_abscissa`, n - 1 relays at distinct grid abscissae in between, ordered.
/// Qualities are noiseless and evaluated between centerline points.
/// Throws std::invalid_argument when n < 2 or the grid has fewer than n - 1 interior points.
[[nodiscard]] OracleResult maximin_oracle(const Environment& env, const RadioParams& radio, double head_abscissa,
                                          int n, double resolution = 0.05);

/// Largest change of any link of `result` when one of its endpoints moves by one grid cell.
[[nodiscard]] double grid_cell_increment(const Environment& env, const RadioParams& radio,
                                         const OracleResult& result);

}  // namespace uchain
