#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "uchain/stats.hpp"

using namespace uchain;

// Reference values: scipy.stats.mannwhitneyu(a, b, alternative="less", method="asymptotic").

TEST_CASE("rank-sum with ties against reference values") {
    const std::vector<double> a{1.2, 3.4, 2.2, 5.0, 0.7, 2.2, 4.1};
    const std::vector<double> b{3.3, 6.1, 5.0, 7.2, 4.4, 8.0, 2.2, 9.1};
    const auto r = rank_sum_less(a, b);
    CHECK(r.u == 8.5);
    CHECK(r.p_value == doctest::Approx(0.013597578478453486).epsilon(1e-10));
}

TEST_CASE("rank-sum: shifted samples of 30, both directions") {
    std::vector<double> c, d;
    for (int i = 1; i <= 30; ++i) {
        c.push_back(i);
        d.push_back(i + 4.5);
    }
    const auto less = rank_sum_less(c, d);
    CHECK(less.u == 325.0);
    CHECK(less.p_value == doctest::Approx(0.03283562884456329).epsilon(1e-10));
    const auto more = rank_sum_less(d, c);
    CHECK(more.u == 575.0);
    CHECK(more.p_value == doctest::Approx(0.9682336746325964).epsilon(1e-10));
}

TEST_CASE("rank-sum: heavy ties") {
    const std::vector<double> e{1, 1, 1, 2, 2, 3};
    const std::vector<double> f{1, 2, 2, 3, 3, 3, 4};
    const auto r = rank_sum_less(e, f);
    CHECK(r.u == 10.0);
    CHECK(r.p_value == doctest::Approx(0.05868403378887677).epsilon(1e-10));
}

TEST_CASE("rank-sum: degenerate inputs") {
    const std::vector<double> same{2.0, 2.0, 2.0};
    CHECK(rank_sum_less(same, same).p_value == 1.0);
    const std::vector<double> none;
    CHECK_THROWS_AS((void)rank_sum_less(none, same), std::invalid_argument);
    CHECK_THROWS_AS((void)rank_sum_less(same, none), std::invalid_argument);
}

TEST_CASE("quantiles interpolate linearly and skip NaN") {
    const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK(median(v) == doctest::Approx(3.5));
    CHECK(quantile(v, 0.75) == doctest::Approx(5.25));
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 9.0);
    CHECK(median({NAN, 2.0, NAN, 4.0}) == 3.0);
    CHECK(std::isnan(median({NAN})));
    CHECK(std::isnan(median({})));
}
