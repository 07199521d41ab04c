#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "uchain/agent.hpp"

using namespace uchain;

namespace {

RangeReading at(double d) { return {d, d >= kSensorRange}; }

RangeReadings ranges(double nw, double ne, double sw, double se) { return {at(nw), at(ne), at(sw), at(se)}; }

PolicyParams unit_gains() {
    PolicyParams p;
    p.C_t = 1.0;
    p.C_r = 1.0;
    return p;
}

// Smallest displacement toward the neighbor that lifts a link of quality s by s_d / 3, by bisection
// on the path-loss curve itself.
double bisect_step(double s_d, double s, double alpha, int direction) {
    const double d = std::pow(10.0, -s / (10.0 * alpha));
    auto q = [&](double dist) { return -10.0 * alpha * std::log10(dist); };
    const double target = s + direction * s_d / 3.0;
    double lo = 0.0, hi = direction > 0 ? d * (1 - 1e-12) : 100 * d;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double moved = q(d - direction * mid);
        if ((direction > 0 && moved < target) || (direction < 0 && moved > target)) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("decide_motion: equal links and the tolerance band") {
    PolicyParams p;
    p.T = 0.0;
    auto d = decide_motion(-7.0, -7.0, p);
    CHECK(d.forward_velocity == 0.0);
    CHECK_FALSE(d.acted);

    p.T = 5.0;
    d = decide_motion(-10.0, -14.0, p);
    CHECK(d.r_diff == 4.0);
    CHECK(d.forward_velocity == 0.0);
    CHECK_FALSE(d.acted);
}

TEST_CASE("decide_motion: linear signal, one decision period closes a third of the gap") {
    // s = -distance; relay at 12, head-side neighbor at 18, base at 0
    PolicyParams p;
    p.T = 0.0;
    p.k_v = 1.0 / (3.0 * 0.2);
    p.v_max = 100.0;
    double x = 12.0;
    const double head = 18.0, base = 0.0;
    const double r_f = -(head - x), r_b = -(x - base);
    CHECK(r_f == -6.0);
    CHECK(r_b == -12.0);
    const auto d = decide_motion(r_b, r_f, p);
    CHECK(d.forward_velocity < 0.0);  // toward the base, where the weaker link is
    x += d.forward_velocity * 0.2;
    CHECK(-(head - x) == doctest::Approx(-8.0));
    CHECK(-(x - base) == doctest::Approx(-10.0));
}

TEST_CASE("decide_motion: antisymmetry, fixed point and speed cap") {
    PolicyParams p;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> q(-40.0, 5.0), t(0.0, 6.0);
    for (int i = 0; i < 10000; ++i) {
        p.T = t(rng);
        const double a = q(rng), b = q(rng);
        const auto d = decide_motion(a, b, p);
        REQUIRE(decide_motion(b, a, p).forward_velocity == -d.forward_velocity);
        REQUIRE((d.forward_velocity == 0.0) == (std::abs(a - b) <= p.T));
        REQUIRE(std::abs(d.forward_velocity) <= p.v_max);
    }
}

TEST_CASE("epsilon_bound") {
    CHECK(epsilon_bound(0.0, -20.0, 2.0) == 0.0);
    const double eps = epsilon_bound(6.0, -20.0, 2.0);
    CHECK(eps == doctest::Approx(bisect_step(6.0, -20.0, 2.0, +1)).epsilon(1e-9));
    CHECK(eps == doctest::Approx(2.0567).epsilon(1e-4));
    // moving away by the same s_d / 3 takes 10 (10^0.1 - 1) m
    CHECK(bisect_step(6.0, -20.0, 2.0, -1) == doctest::Approx(2.5893).epsilon(1e-4));
    CHECK(epsilon_bound(6.0, -20.0, 4.0) < eps);
    CHECK_THROWS_AS((void)epsilon_bound(6.0, -20.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)epsilon_bound(6.0, -20.0, -1.0), std::invalid_argument);
}

TEST_CASE("speed bound: one decision period never moves more than epsilon") {
    // Straight corridor, alpha = 2. States keep neighbors at least the stop distance apart.
    const PolicyParams p;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> dist(p.stop_distance, 30.0);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const double d_b = dist(rng), d_f = dist(rng);
        const double r_b = -20.0 * std::log10(d_b), r_f = -20.0 * std::log10(d_f);
        const auto d = decide_motion(r_b, r_f, p);
        if (!d.acted) continue;
        const double weak = std::min(r_b, r_f);
        REQUIRE(std::abs(d.forward_velocity) * 0.2 <= epsilon_bound(std::abs(r_b - r_f), weak, 2.0));
        ++checked;
    }
    CHECK(checked > 5000);  // pairs inside the tolerance band do not act
}

TEST_CASE("Lyapunov: synchronous linear-signal rounds") {
    PolicyParams p;
    p.T = 0.0;
    p.k_v = 1.0 / (3.0 * 0.2);
    p.v_max = 1e9;
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> links(3, 8);
    std::uniform_real_distribution<double> head(5.0, 60.0), u(0.0, 1.0);
    int violations = 0, unconverged = 0, max_rounds = 0;
    for (int chain = 0; chain < 1000; ++chain) {
        const int n = links(rng);
        const double x_head = head(rng);
        // x[0] head ... x[n] base = 0, relays at sorted random abscissae
        std::vector<double> x(n + 1);
        x[0] = x_head;
        x[n] = 0.0;
        std::vector<double> inner(n - 1);
        for (auto& v : inner) v = u(rng) * x_head;
        std::sort(inner.begin(), inner.end(), std::greater<>());
        std::copy(inner.begin(), inner.end(), x.begin() + 1);

        auto qualities = [&] {
            std::vector<double> q(n);
            for (int i = 0; i < n; ++i) q[i] = -(x[i] - x[i + 1]);
            return q;
        };
        int round = 0;
        for (; round < 20000; ++round) {
            const auto q = qualities();
            const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
            if (*hi - *lo <= 1e-3) break;
            std::vector<double> next = x;
            for (int i = 1; i < n; ++i) next[i] += decide_motion(q[i], q[i - 1], p).forward_velocity * 0.2;
            x = next;
            const auto q2 = qualities();
            const double before = *lo, after = *std::min_element(q2.begin(), q2.end());
            if (after < before - 1e-12) ++violations;
            // a weakest link next to a strictly better one must improve
            for (int i = 0; i < n; ++i) {
                if (q[i] > before + 1e-12) continue;
                const bool better_neighbor =
                    (i > 0 && q[i - 1] > before + 1e-9) || (i + 1 < n && q[i + 1] > before + 1e-9);
                if (better_neighbor && !(q2[i] > q[i])) ++violations;
            }
        }
        if (round == 20000) ++unconverged;
        max_rounds = std::max(max_rounds, round);
    }
    CAPTURE(max_rounds);
    CHECK(violations == 0);
    CHECK(unconverged == 0);
}

TEST_CASE("centering law") {
    const auto p = unit_gains();
    auto c = centering_command(ranges(1.1, 1.1, 1.1, 1.1), p);
    CHECK(c.lateral_velocity == 0.0);
    CHECK(c.yaw_rate == 0.0);
    c = centering_command(ranges(1.0, 0.6, 1.0, 0.6), p);
    CHECK(c.lateral_velocity == doctest::Approx(0.4));
    CHECK(c.yaw_rate == doctest::Approx(0.0));
    c = centering_command(ranges(1.0, 0.9, 0.8, 0.9), p);
    CHECK(c.yaw_rate == doctest::Approx(0.2));
}

TEST_CASE("wall validity") {
    const PolicyParams p;
    CHECK(wall_validity(ranges(1.0, 1.0, 1.0, 1.0), p).left);
    CHECK_FALSE(wall_validity(ranges(2.0, 1.0, 0.9, 1.0), p).left);
    CHECK(wall_validity(ranges(2.0, 1.0, 0.9, 1.0), p).right);
    // (1.0 - 0.65) / 0.65 = 0.538
    CHECK_FALSE(wall_validity(ranges(1.0, 1.0, 0.65, 1.0), p).left);
    CHECK_FALSE(wall_validity(ranges(1.0, 1.0, 1.0, 0.65), p).right);
    CHECK(wall_validity(ranges(0.9, 1.0, 0.7, 1.0), p).left);  // 0.286
    CHECK_FALSE(wall_validity(ranges(1.0, 1.0, 2.0, 1.0), p).left);
    // the outer wall of a bend closes in at the front and stays usable
    CHECK(wall_validity(ranges(0.65, 1.0, 1.0, 1.0), p).left);
}

TEST_CASE("wall following") {
    const auto p = unit_gains();
    auto c = wall_follow_command(ranges(p.D, 2.0, p.D, 2.0), WallSide::Left, p);
    CHECK(c.lateral_velocity == doctest::Approx(0.0));
    CHECK(c.yaw_rate == doctest::Approx(0.0));
    c = wall_follow_command(ranges(p.D + 0.3, 2.0, 1.0, 2.0), WallSide::Left, p);
    CHECK(c.lateral_velocity == doctest::Approx(0.3));
    CHECK(c.yaw_rate == doctest::Approx(2.0 * (p.D + 0.3 - 1.0)));
    c = wall_follow_command(ranges(2.0, p.D + 0.3, 2.0, p.D + 0.3), WallSide::Right, p);
    CHECK(c.lateral_velocity == doctest::Approx(-0.3));
    CHECK(c.yaw_rate == doctest::Approx(0.0));
    c = wall_follow_command(ranges(2.0, 2.0, 2.0, 2.0), std::nullopt, p);
    CHECK(c.lateral_velocity == 0.0);
    CHECK(c.yaw_rate == 0.0);
}

TEST_CASE("navigation picks the law from wall validity and saturates") {
    const auto p = unit_gains();
    const auto both = navigation_command(ranges(1.0, 0.6, 1.0, 0.6), false, p);
    CHECK(both.lateral_velocity == doctest::Approx(0.4));
    const auto none = navigation_command(ranges(2.0, 2.0, 2.0, 2.0), false, p);
    CHECK(none.lateral_velocity == 0.0);
    CHECK(none.yaw_rate == 0.0);
    const auto sat = navigation_command(ranges(1.9, 0.2, 1.9, 0.2), false, p);
    CHECK(sat.lateral_velocity == p.max_lateral_speed);
    // tail-first with the left wall close: still push to the right in the body frame
    const auto rev = navigation_command(ranges(0.6, 1.0, 0.6, 1.0), true, p);
    CHECK(rev.lateral_velocity == doctest::Approx(-0.4));
    CHECK(navigation_command(ranges(0.6, 1.0, 0.6, 1.0), false, p).lateral_velocity == doctest::Approx(-0.4));
}

TEST_CASE("speed limit ramps with the clearance ahead") {
    const PolicyParams p;
    CHECK(limit_speed(0.4, ranges(2.0, 2.0, 2.0, 2.0), p) == 0.4);
    CHECK(limit_speed(0.4, ranges(p.stop_distance, 2.0, 2.0, 2.0), p) == 0.0);
    const double mid = 0.5 * (p.stop_distance + p.slow_distance);
    CHECK(limit_speed(0.4, ranges(2.0, mid, 2.0, 2.0), p) == doctest::Approx(0.2));
    // backing up reads the rear sensors
    CHECK(limit_speed(-0.4, ranges(0.1, 0.1, 2.0, 2.0), p) == -0.4);
    CHECK(limit_speed(-0.4, ranges(2.0, 2.0, mid, 2.0), p) == doctest::Approx(-0.2));
}

TEST_CASE("transition: launch, take-off, retreat and recovery") {
    PolicyParams p;
    p.s_min = -16.0;
    TransitionInput in;
    in.mode = AgentMode::Idle;
    CHECK(transition(in, p) == AgentMode::Idle);
    in.launch_commanded = true;
    CHECK(transition(in, p) == AgentMode::TakingOff);

    in = {AgentMode::TakingOff, false, p.takeoff_ticks - 1, {}};
    CHECK(transition(in, p) == AgentMode::TakingOff);
    in.ticks_in_mode = p.takeoff_ticks;
    CHECK(transition(in, p) == AgentMode::Relaying);

    in = {AgentMode::Relaying, false, 30, {-10.0, 0}};
    CHECK(transition(in, p) == AgentMode::Relaying);
    in.uplink.quality = -16.5;
    CHECK(transition(in, p) == AgentMode::Retreating);
    in.uplink = {-10.0, p.link_timeout_ticks};
    CHECK(transition(in, p) == AgentMode::Retreating);

    in = {AgentMode::Retreating, false, 3, {-12.0, 0}};
    CHECK(transition(in, p) == AgentMode::Retreating);  // needs s_min + margin
    in.uplink.quality = -11.0;
    CHECK(transition(in, p) == AgentMode::Relaying);

    for (auto m : {AgentMode::Base, AgentMode::Head}) {
        in = {m, true, 0, {-90.0, 40}};
        CHECK(transition(in, p) == m);
    }
}

TEST_CASE("controller: weak uplink forces a retreat toward the base") {
    PolicyParams p;
    p.s_min = -16.0;
    AgentController c(2, AgentMode::Relaying, SignalSource::Raw, {}, p);
    AgentInputs in;
    in.base_neighbor = 3;
    in.head_neighbor = 1;
    in.from_base = RadioSample{3, 2, -8.0, 0, 0.0};
    in.from_head = RadioSample{1, 2, -8.0, 0, 0.0};
    auto cmd = c.update(in);
    CHECK(c.mode() == AgentMode::Relaying);
    CHECK(cmd.forward_velocity == 0.0);

    in.tick = 1;
    in.from_base->quality = -17.0;
    cmd = c.update(in);
    CHECK(c.mode() == AgentMode::Retreating);
    CHECK(cmd.forward_velocity == -p.retreat_speed);
}

TEST_CASE("controller: ten missed packets count as a lost uplink") {
    PolicyParams p;
    AgentController c(1, AgentMode::Relaying, SignalSource::Filtered, {}, p);
    AgentInputs in;
    in.base_neighbor = 2;
    in.head_neighbor = 0;
    in.from_base = RadioSample{2, 1, -6.0, 0, 0.0};
    in.from_head = RadioSample{0, 1, -6.0, 0, 0.0};
    (void)c.update(in);
    in.from_base.reset();
    for (int k = 1; k <= p.link_timeout_ticks; ++k) {
        in.tick = k;
        (void)c.update(in);
        CAPTURE(k);
        CHECK(c.base_link().estimate->r_hat > p.s_min);
        if (k < p.link_timeout_ticks) CHECK(c.mode() == AgentMode::Relaying);
    }
    CHECK(c.mode() == AgentMode::Retreating);
}

TEST_CASE("controller: the head ignores forward commands on a weak uplink") {
    PolicyParams p;
    AgentController head(0, AgentMode::Head, SignalSource::Filtered, {}, p);
    AgentInputs in;
    in.base_neighbor = 1;
    in.from_base = RadioSample{1, 0, -30.0, 0, 0.0};
    in.pilot_velocity = 0.2;
    CHECK(head.update(in).forward_velocity == 0.0);
    in.pilot_velocity = -0.2;
    in.tick = 1;
    CHECK(head.update(in).forward_velocity == -0.2);

    AgentController healthy(0, AgentMode::Head, SignalSource::Filtered, {}, p);
    in.from_base->quality = -5.0;
    in.pilot_velocity = 0.2;
    CHECK(healthy.update(in).forward_velocity == 0.2);
}

TEST_CASE("controller: the Kalman variant predicts from the separation rate") {
    PolicyParams p;
    KalmanParams k;
    AgentController c(1, AgentMode::Relaying, SignalSource::Filtered, k, p);
    AgentInputs in;
    in.base_neighbor = 2;
    in.head_neighbor = 0;
    in.from_base = RadioSample{2, 1, -6.0, 0, 0.0};
    in.from_head = RadioSample{0, 1, -12.0, 0, 0.0};
    (void)c.update(in);  // first packets seed the filters; weaker head link drives us forward
    CHECK(c.velocity() > 0.0);
    const double v = c.velocity();
    const double before = c.base_link().estimate->r_hat;
    in.tick = 1;
    in.from_base.reset();
    in.from_head.reset();
    (void)c.update(in);
    CHECK(c.base_link().estimate->r_hat == doctest::Approx(before + k.A * v));
}

TEST_CASE("policy parameter validation") {
    CHECK_NOTHROW(PolicyParams{}.validate());
    PolicyParams p;
    p.D = 2.0;
    CHECK_THROWS(p.validate());
    p = {};
    p.invalid_wall_ratio = 1.0;
    CHECK_THROWS(p.validate());
    p = {};
    p.stop_distance = 1.2;
    CHECK_THROWS(p.validate());
    p = {};
    p.T = -1.0;
    CHECK_THROWS(p.validate());
}

TEST_CASE("mode names round-trip") {
    for (auto m : {AgentMode::Base, AgentMode::Idle, AgentMode::TakingOff, AgentMode::Relaying, AgentMode::Retreating,
                   AgentMode::Head}) {
        CHECK(parse_mode(to_string(m)) == m);
    }
    CHECK_FALSE(parse_mode("hovering"));
}
