#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "uchain/oracle.hpp"

using namespace uchain;

namespace {

struct Brute {
    double value = -std::numeric_limits<double>::infinity();
    std::vector<double> relays;  // head side first
};

// Exhaustive search over every ordered placement of up to three relays.
Brute brute_force(const Environment& env, const RadioParams& radio, double head, int relays, double res) {
    std::vector<double> xs;
    for (int k = 1; k * res < head - 1e-9; ++k) xs.push_back(k * res);
    const auto g = xs.size();
    std::vector<Vec2> pts(g);
    for (std::size_t i = 0; i < g; ++i) pts[i] = env.point_at(xs[i]);
    const Vec2 base = env.point_at(0.0), top = env.point_at(head);
    std::vector<double> to_base(g), to_head(g), pair(g * g);
    for (std::size_t i = 0; i < g; ++i) {
        to_base[i] = true_quality(env, base, pts[i], radio);
        to_head[i] = true_quality(env, pts[i], top, radio);
        for (std::size_t j = i + 1; j < g; ++j) pair[i * g + j] = true_quality(env, pts[i], pts[j], radio);
    }
    Brute b;
    if (relays == 1) {
        for (std::size_t i = 0; i < g; ++i) {
            const double v = std::min(to_base[i], to_head[i]);
            if (v > b.value) b = {v, {xs[i]}};
        }
    } else if (relays == 2) {
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = i + 1; j < g; ++j) {
                const double v = std::min({to_base[i], pair[i * g + j], to_head[j]});
                if (v > b.value) b = {v, {xs[j], xs[i]}};
            }
    } else if (relays == 3) {
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = i + 1; j < g; ++j) {
                const double lower = std::min(to_base[i], pair[i * g + j]);
                if (lower <= b.value) continue;
                for (std::size_t k = j + 1; k < g; ++k) {
                    const double v = std::min({lower, pair[j * g + k], to_head[k]});
                    if (v > b.value) b = {v, {xs[k], xs[j], xs[i]}};
                }
            }
    }
    return b;
}

RadioParams noiseless() {
    RadioParams r;
    r.noise_variance = 0.0;
    return r;
}

}  // namespace

TEST_CASE("oracle: one relay on a straight corridor sits at the midpoint") {
    const auto env = builtin_environment("straight");
    const auto r = maximin_oracle(env, noiseless(), 20.0, 2);
    REQUIRE(r.abscissae.size() == 3);
    CHECK(r.abscissae.front() == 20.0);
    CHECK(r.abscissae.back() == 0.0);
    CHECK(r.abscissae[1] == doctest::Approx(10.0));
    CHECK(r.value == doctest::Approx(-20.0));
}

TEST_CASE("oracle: four links over 30 m are equally spaced") {
    const auto env = builtin_environment("straight");
    const auto r = maximin_oracle(env, noiseless(), 30.0, 4);
    REQUIRE(r.abscissae.size() == 5);
    const std::vector<double> expected{30.0, 22.5, 15.0, 7.5, 0.0};
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(r.abscissae[i] == doctest::Approx(expected[i]));
    for (double q : r.link_quality) CHECK(q == doctest::Approx(-20.0 * std::log10(7.5)));
    CHECK(r.value == doctest::Approx(-17.5012).epsilon(1e-5));
}

TEST_CASE("oracle: five links over 30 m spend the grid evenly") {
    const auto env = builtin_environment("straight");
    const auto r = maximin_oracle(env, noiseless(), 30.0, 5);
    CHECK(r.value == doctest::Approx(-20.0 * std::log10(6.0)));
    for (std::size_t i = 0; i + 1 < r.abscissae.size(); ++i) {
        CHECK(r.abscissae[i] - r.abscissae[i + 1] == doctest::Approx(6.0));
    }
}

TEST_CASE("oracle agrees with exhaustive search") {
    for (const auto& name : builtin_environment_names()) {
        const auto env = builtin_environment(name);
        for (int relays = 1; relays <= 3; ++relays) {
            for (double head : {9.0, 17.5, 30.0}) {
                const auto r = maximin_oracle(env, noiseless(), head, relays + 1, 0.25);
                const auto b = brute_force(env, noiseless(), head, relays, 0.25);
                CAPTURE(name);
                CAPTURE(relays);
                CAPTURE(head);
                CHECK(r.value == doctest::Approx(b.value).epsilon(1e-12));
                CHECK(*std::min_element(r.link_quality.begin(), r.link_quality.end()) == doctest::Approx(r.value));
            }
        }
    }
}

TEST_CASE("oracle: a relay goes to the corner of the L") {
    const auto env = builtin_environment("l_corridor");
    const double corner = env.vertex_abscissae()[1];
    const auto b = brute_force(env, noiseless(), 30.0, 3, 0.05);
    const auto r = maximin_oracle(env, noiseless(), 30.0, 4);
    CHECK(r.value == doctest::Approx(b.value).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(-17.5012).epsilon(1e-5));
    double nearest = 1e9;
    for (double x : r.abscissae) nearest = std::min(nearest, std::abs(x - corner));
    CHECK(nearest <= r.resolution + 1e-9);
}

TEST_CASE("oracle: links at the optimum are equal within one grid cell") {
    const std::vector<std::pair<std::string, int>> cases{{"straight", 5}, {"l_corridor", 4}, {"s_corridor", 3}};
    for (const auto& [name, n] : cases) {
        const auto env = builtin_environment(name);
        const auto r = maximin_oracle(env, noiseless(), env.length(), n);
        const auto [lo, hi] = std::minmax_element(r.link_quality.begin(), r.link_quality.end());
        const double inc = grid_cell_increment(env, noiseless(), r);
        CAPTURE(name);
        CHECK(inc > 0.0);
        CHECK(*hi - *lo <= inc);
    }
}

TEST_CASE("oracle: both bends of the S carry a relay") {
    const auto env = builtin_environment("s_corridor");
    const auto r = maximin_oracle(env, noiseless(), 30.0, 3);
    const auto b = brute_force(env, noiseless(), 30.0, 2, 0.05);
    CHECK(r.value == doctest::Approx(b.value).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(-20.0).epsilon(1e-9));
    CHECK(r.abscissae[1] == doctest::Approx(20.0));
    CHECK(r.abscissae[2] == doctest::Approx(10.0));
}

TEST_CASE("oracle: infeasible grids are rejected") {
    const auto env = builtin_environment("straight");
    CHECK_THROWS_AS((void)maximin_oracle(env, noiseless(), 30.0, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)maximin_oracle(env, noiseless(), 0.1, 4), std::invalid_argument);
    CHECK_THROWS_AS((void)maximin_oracle(env, noiseless(), 40.0, 3), std::invalid_argument);
}
