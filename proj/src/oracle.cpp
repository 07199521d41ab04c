#include "uchain/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace uchain {

OracleResult maximin_oracle(const Environment& env, const RadioParams& radio, double head_abscissa, int n,
                            double resolution) {
    if (n < 2) throw std::invalid_argument("maximin_oracle: need n >= 2 links");
    if (!(resolution > 0.0)) throw std::invalid_argument("maximin_oracle: resolution must be > 0");
    if (!(head_abscissa > 0.0 && head_abscissa <= env.length() + 1e-9)) {
        throw std::invalid_argument("maximin_oracle: head abscissa outside the tunnel");
    }

    // grid: base, interior cells, head
    std::vector<double> xs{0.0};
    for (int k = 1; k * resolution < head_abscissa - 1e-9; ++k) xs.push_back(k * resolution);
    xs.push_back(head_abscissa);
    const auto g = xs.size();
    const auto relays = static_cast<std::size_t>(n - 1);
    if (g - 2 < relays) {
        throw std::invalid_argument("maximin_oracle: head at " + std::to_string(head_abscissa) +
                                    " m leaves no room for " + std::to_string(relays) + " relays");
    }

    std::vector<Vec2> pts(g);
    for (std::size_t i = 0; i < g; ++i) pts[i] = env.point_at(xs[i]);
    std::vector<double> q(g * g, 0.0);
    for (std::size_t i = 0; i < g; ++i) {
        for (std::size_t j = i + 1; j < g; ++j) q[i * g + j] = true_quality(env, pts[i], pts[j], radio);
    }

    // best[m][j]: best weakest link over chains base -> ... -> j using m links
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    const auto links = static_cast<std::size_t>(n);
    std::vector<std::vector<double>> best(links + 1, std::vector<double>(g, neg_inf));
    std::vector<std::vector<std::size_t>> from(links + 1, std::vector<std::size_t>(g, 0));
    best[0][0] = std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m <= links; ++m) {
        const std::size_t lo = m;
        const std::size_t hi = m == links ? g - 1 : g - 2;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (m == links && j != g - 1) continue;
            for (std::size_t i = m - 1; i < j; ++i) {
                if (best[m - 1][i] == neg_inf) continue;
                const double v = std::min(best[m - 1][i], q[i * g + j]);
                if (v > best[m][j]) {
                    best[m][j] = v;
                    from[m][j] = i;
                }
            }
        }
    }

    OracleResult r;
    r.resolution = resolution;
    r.value = best[links][g - 1];
    std::size_t j = g - 1;
    std::vector<std::size_t> path{j};
    for (std::size_t m = links; m > 0; --m) {
        j = from[m][j];
        path.push_back(j);
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
        r.abscissae.push_back(xs[path[k]]);
        if (k + 1 < path.size()) r.link_quality.push_back(q[path[k + 1] * g + path[k]]);
    }
    return r;
}

double grid_cell_increment(const Environment& env, const RadioParams& radio, const OracleResult& result) {
    // Moving an endpoint one cell changes the link length by at most one cell; the attenuation is held.
    double inc = 0.0;
    for (std::size_t k = 0; k + 1 < result.abscissae.size(); ++k) {
        const Vec2 a = env.point_at(result.abscissae[k]);
        const Vec2 b = env.point_at(result.abscissae[k + 1]);
        const double alpha = attenuation_factor(env, a, b, radio);
        const double d = distance(a, b);
        inc = std::max(inc, path_loss_quality(alpha, d - result.resolution) - path_loss_quality(alpha, d));
    }
    return inc;
}

}  // namespace uchain
