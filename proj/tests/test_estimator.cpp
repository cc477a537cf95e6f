#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "ipsi/estimator.hpp"
#include "ipsi/rng.hpp"

using namespace ipsi;

namespace {

EstimationConfig config_for(int t0, std::vector<double> grid) {
    EstimationConfig cfg;
    cfg.t0 = t0;
    cfg.delta_grid = std::move(grid);
    return cfg;
}

} // namespace

TEST_CASE("incremental weight hand values") {
    // delta=2 at p=0.25: treated ratio 0.4/0.25, control ratio 0.6/0.75
    CHECK(incremental_weight(1, 0.25, 2.0) == doctest::Approx(1.6).epsilon(1e-14));
    CHECK(incremental_weight(0, 0.25, 2.0) == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("identity intervention weight is exactly one") {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const double p = rng.uniform();
        CHECK(incremental_weight(0, p, 1.0) == 1.0);
        CHECK(incremental_weight(1, p, 1.0) == 1.0);
    }
    CHECK(incremental_weight(1, 1e-17, 1.0) == 1.0);
    CHECK(incremental_weight(0, 1.0 - 1e-16, 1.0) == 1.0);
}

TEST_CASE("point estimate: two-day window hand product") {
    // days: ... t-1 (W=1, p=0.25), t (W=0, p=0.5); delta=2, Y_t = 2.0
    auto in = make_estimation_input({0.0, 2.0}, {1, 0});
    const std::vector<double> p{0.25, 0.5};
    const double est = point_estimate_t(in, p, 2.0, 2, 1);
    CHECK(est == doctest::Approx(2.0 * 1.6 * (1.0 / 1.5)).epsilon(1e-14));
    CHECK(est == doctest::Approx(2.13333333333333).epsilon(1e-12));
}

TEST_CASE("point estimate edge behavior") {
    auto in = make_estimation_input({1.0, 2.0, 0.0}, {0, 1, 0});
    const std::vector<double> p{0.3, 0.6, 0.2};
    // delta=1 returns Y_t exactly
    for (std::size_t t = 0; t < 3; ++t)
        CHECK(point_estimate_t(in, p, 1.0, 1, t) == in.outcome[t]);
    // zero outcome collapses the product
    CHECK(point_estimate_t(in, p, 7.3, 2, 2) == 0.0);
    // window cannot start before the season does
    CHECK_THROWS_AS(point_estimate_t(in, p, 2.0, 2, 0), std::invalid_argument);
}

TEST_CASE("temporal average at delta=1 is the plain mean of usable days") {
    Rng rng(5);
    std::vector<double> y(40);
    std::vector<int> w(40);
    std::vector<double> p(40);
    for (std::size_t t = 0; t < 40; ++t) {
        y[t] = rng.normal() * 3.0 + 1.0;
        w[t] = rng.bernoulli(0.3);
        p[t] = 0.05 + 0.9 * rng.uniform();
    }
    auto in = make_estimation_input(y, w);
    const auto cfg = config_for(3, {1.0});
    const auto avg = temporal_average(in, p, 1.0, cfg);
    double plain = 0.0;
    for (std::size_t t = 2; t < 40; ++t) plain += y[t];
    plain /= 38.0;
    CHECK(avg.value == doctest::Approx(plain).epsilon(1e-15));
    CHECK(avg.n_days == 38);
}

TEST_CASE("three-day toy series with doubled odds matches hand product-sum") {
    // propensities 1/4, 1/2, 4/5; W = (1, 0, 1); Y = (1.0, 2.0, 3.0); t0 = 2
    auto in = make_estimation_input({1.0, 2.0, 3.0}, {1, 0, 1});
    const std::vector<double> p{0.25, 0.5, 0.8};
    const double delta = 2.0;
    // day 2: w1=1@p=.25 -> 2/1.25=1.6 ; w2=0@p=.5 -> 1/1.5
    const double est1 = 2.0 * 1.6 * (1.0 / 1.5);
    // day 3: w2=0@p=.5 -> 1/1.5 ; w3=1@p=.8 -> 2/1.8
    const double est2 = 3.0 * (1.0 / 1.5) * (2.0 / 1.8);
    const auto cfg = config_for(2, {delta});
    const auto avg = temporal_average(in, p, delta, cfg);
    CHECK(avg.value == doctest::Approx((est1 + est2) / 2.0).epsilon(1e-14));

    // variance: V_t = Y_t^2 * prod[(W d^2 + (1-W)) / (d p + 1 - p)^2]
    const double v1 = 4.0 * (4.0 / (1.25 * 1.25)) * (1.0 / (1.5 * 1.5));
    const double v2 = 9.0 * (1.0 / (1.5 * 1.5)) * (4.0 / (1.8 * 1.8));
    const double tau = (est1 + est2) / 2.0;
    const double expected_sigma = (v1 + v2) / 2.0 - tau * tau;
    CHECK(variance_estimate(in, p, delta, cfg) ==
          doctest::Approx(expected_sigma).epsilon(1e-13));
}

TEST_CASE("variance at delta=1 collapses to the population variance") {
    std::vector<double> y{1.0, 4.0, 2.0, 6.0, 3.0};
    auto in = make_estimation_input(y, {0, 1, 0, 1, 0});
    const std::vector<double> p{0.2, 0.6, 0.4, 0.8, 0.5};
    const auto cfg = config_for(1, {1.0});
    double m = 0.0, m2 = 0.0;
    for (double v : y) {
        m += v / 5.0;
        m2 += v * v / 5.0;
    }
    CHECK(variance_estimate(in, p, 1.0, cfg) == doctest::Approx(m2 - m * m).epsilon(1e-14));

    // constant outcomes: variance 0 (floored)
    auto flat = make_estimation_input({2.5, 2.5, 2.5, 2.5}, {0, 0, 1, 0});
    const std::vector<double> pf{0.5, 0.5, 0.5, 0.5};
    CHECK(variance_estimate(flat, pf, 1.0, cfg) <= 1e-15);
}

TEST_CASE("effect curve composition and baseline identity") {
    Rng rng(9);
    std::vector<double> y(60);
    std::vector<int> w(60);
    std::vector<double> p(60);
    for (std::size_t t = 0; t < 60; ++t) {
        y[t] = 2.0 + rng.normal();
        w[t] = rng.bernoulli(0.4);
        p[t] = 0.1 + 0.8 * rng.uniform();
    }
    auto in = make_estimation_input(y, w);
    auto cfg = config_for(2, {0.5, 1.0, 2.0});
    const EffectCurve curve = effect_curve(in, p, cfg);
    REQUIRE(curve.points.size() == 3);

    // each grid point matches the per-delta operations
    for (const CurvePoint& pt : curve.points) {
        const auto avg = temporal_average(in, p, pt.delta, cfg);
        CHECK(pt.tau_hat == doctest::Approx(avg.value).epsilon(1e-15));
        CHECK(pt.band_lo <= pt.tau_hat);
        CHECK(pt.tau_hat <= pt.band_hi);
    }
    // exact zero effect with zero-width band at the identity
    const CurvePoint& base = curve.points[1];
    CHECK(base.delta == 1.0);
    CHECK(base.effect == 0.0);
    CHECK(base.effect_lo == 0.0);
    CHECK(base.effect_hi == 0.0);
    // differencing against the baseline
    CHECK(curve.points[0].effect ==
          doctest::Approx(curve.points[0].tau_hat - base.tau_hat).epsilon(1e-15));

    // single-point grid at delta=1
    auto cfg1 = config_for(2, {1.0});
    const EffectCurve single = effect_curve(in, p, cfg1);
    REQUIRE(single.points.size() == 1);
    CHECK(single.points[0].effect == 0.0);
}

TEST_CASE("scale equivariance in the outcome") {
    Rng rng(21);
    std::vector<double> y(30);
    std::vector<int> w(30);
    std::vector<double> p(30);
    for (std::size_t t = 0; t < 30; ++t) {
        y[t] = rng.normal();
        w[t] = rng.bernoulli(0.5);
        p[t] = 0.2 + 0.6 * rng.uniform();
    }
    const double c = -3.7;
    std::vector<double> cy(30);
    for (std::size_t t = 0; t < 30; ++t) cy[t] = c * y[t];
    auto in = make_estimation_input(y, w);
    auto cin = make_estimation_input(cy, w);
    const auto cfg = config_for(2, {2.0});
    CHECK(temporal_average(cin, p, 2.0, cfg).value ==
          doctest::Approx(c * temporal_average(in, p, 2.0, cfg).value).epsilon(1e-13));
    CHECK(variance_estimate(cin, p, 2.0, cfg) ==
          doctest::Approx(c * c * variance_estimate(in, p, 2.0, cfg)).epsilon(1e-12));
}

TEST_CASE("full-true day filter equals no filter; empty day set rejected") {
    std::vector<double> y{1, 2, 3, 4, 5, 6};
    std::vector<int> w{0, 1, 0, 1, 0, 1};
    const std::vector<double> p{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
    auto in = make_estimation_input(y, w);
    auto cfg = config_for(2, {2.0});
    const double unfiltered = temporal_average(in, p, 2.0, cfg).value;
    cfg.day_filter = DayMask(6, 1);
    CHECK(temporal_average(in, p, 2.0, cfg).value == unfiltered);

    cfg.day_filter = DayMask(6, 0);
    CHECK_THROWS_AS(temporal_average(in, p, 2.0, cfg), std::invalid_argument);
}

TEST_CASE("windows and day counts restart at season boundaries") {
    // two seasons of 4 days each; t0=3 usable days are the last two of each
    EstimationInput in;
    in.outcome = {1, 2, 3, 4, 10, 20, 30, 40};
    in.treatment = {0, 0, 0, 0, 0, 0, 0, 0};
    in.day_idx = {0, 1, 2, 3, 0, 1, 2, 3};
    in.season_ord = {0, 0, 0, 0, 1, 1, 1, 1};
    in.n_seasons = 2;
    const std::vector<double> p(8, 0.5);
    auto cfg = config_for(3, {1.0});
    const auto avg = temporal_average(in, p, 1.0, cfg);
    CHECK(avg.n_days == 4);
    CHECK(avg.value == doctest::Approx((3.0 + 4.0 + 30.0 + 40.0) / 4.0));

    // per-season totals: sums within season averaged across seasons
    cfg.kind = EstimandKind::temporal_total;
    const auto total = temporal_average(in, p, 1.0, cfg);
    CHECK(total.value == doctest::Approx((7.0 + 70.0) / 2.0));
}

TEST_CASE("expected treatment count: identity, saturation, hand sum") {
    const std::vector<double> p{0.25, 0.5, 0.8};
    CHECK(expected_treatment_count(p, 1.0) == doctest::Approx(0.25 + 0.5 + 0.8).epsilon(1e-15));
    CHECK(expected_treatment_count(p, 2.0) ==
          doctest::Approx(0.4 + 2.0 / 3.0 + 8.0 / 9.0).epsilon(1e-14));

    const std::vector<double> half(100, 0.5);
    CHECK(expected_treatment_count(half, 1e6) == doctest::Approx(100.0).epsilon(1e-3));

    // nondecreasing in delta, strictly increasing off the boundary
    double prev = 0.0;
    for (double d : {0.1, 0.5, 1.0, 2.0, 8.0}) {
        const double c = expected_treatment_count(p, d);
        CHECK(c > prev);
        prev = c;
    }
}

TEST_CASE("counterfactual path sampling is seed-reproducible and tracks delta") {
    std::vector<double> p(500);
    Rng rng(31);
    for (double& v : p) v = 0.02 + 0.2 * rng.uniform();
    const auto a = sample_counterfactual_path(p, 10.0, 777);
    const auto b = sample_counterfactual_path(p, 10.0, 777);
    CHECK(a == b);
    const auto c = sample_counterfactual_path(p, 10.0, 778);
    CHECK(a != c);

    long hi = 0, lo = 0;
    for (int v : sample_counterfactual_path(p, 10.0, 1)) hi += v;
    for (int v : sample_counterfactual_path(p, 0.1, 1)) lo += v;
    CHECK(hi > lo);
}

TEST_CASE("mean-one weights under the true propensity (quick check)") {
    // independent Bernoulli days: the window weight product has mean 1
    Rng rng(41);
    const int windows = 4000, t0 = 3;
    double acc = 0.0, acc2 = 0.0;
    for (int k = 0; k < windows; ++k) {
        double prod = 1.0;
        for (int s = 0; s < t0; ++s) {
            const double p = 0.1 + 0.8 * rng.uniform();
            const int w = rng.bernoulli(p);
            prod *= incremental_weight(w, p, 2.0);
        }
        acc += prod;
        acc2 += prod * prod;
    }
    const double mean = acc / windows;
    const double se = std::sqrt((acc2 / windows - mean * mean) / windows);
    CHECK(std::fabs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("delta grid construction") {
    const auto lin = make_delta_grid(0.1, 10.0, 25, false);
    CHECK(lin.size() == 25);
    CHECK(lin.front() == doctest::Approx(0.1));
    CHECK(lin.back() == doctest::Approx(10.0));

    const auto logg = make_delta_grid(std::exp(-2.3), std::exp(2.3), 21, true);
    CHECK(logg.size() == 21);
    CHECK(logg[10] == 1.0); // midpoint snaps to the exact identity
    for (std::size_t i = 1; i < logg.size(); ++i) CHECK(logg[i] > logg[i - 1]);

    CHECK(make_delta_grid(2.0, 2.0, 1, false) == std::vector<double>{2.0});
    CHECK_THROWS_AS(make_delta_grid(-1.0, 2.0, 5, false), std::invalid_argument);
    CHECK_THROWS_AS(make_delta_grid(1.0, 2.0, 0, false), std::invalid_argument);
}
