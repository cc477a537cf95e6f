#include <doctest.h>

#include <cmath>
#include <vector>

#include "ipsi/logistic.hpp"
#include "ipsi/rng.hpp"

using namespace ipsi;

TEST_CASE("independence case recovers zero coefficients") {
    // balanced binary feature, W independent with P(W=1)=0.5: MLE is exactly 0
    const std::size_t n = 400;
    Matrix x(n, 1);
    std::vector<int> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        x.at(i, 0) = (i % 2 == 0) ? 0.0 : 1.0;
        w[i] = (i / 2) % 2; // each feature value sees W=0 and W=1 equally
    }
    for (double ridge : {0.0, 1e-4}) {
        const LogisticModel m = fit_logistic(x, w, ridge);
        CHECK(std::fabs(m.coef[0]) < 1e-6);
        CHECK(std::fabs(m.coef[1]) < 1e-6);
        CHECK(m.diagnostics.converged);
        CHECK(m.diagnostics.grad_norm <= 1e-8);
    }
}

TEST_CASE("all-control series with ridge has a finite fit below one half") {
    const std::size_t n = 50;
    Matrix x(n, 1);
    std::vector<int> w(n, 0);
    for (std::size_t i = 0; i < n; ++i) x.at(i, 0) = static_cast<double>(i % 7);
    const LogisticModel m = fit_logistic(x, w, 1.0);
    CHECK(m.diagnostics.converged);
    for (std::size_t i = 0; i < n; ++i) CHECK(m.predict_one(x.row(i)) < 0.5);
}

TEST_CASE("single class without penalty raises separation error") {
    Matrix x(4, 1);
    std::vector<int> w{1, 1, 1, 1};
    CHECK_THROWS_AS(fit_logistic(x, w, 0.0), SeparationError);
}

TEST_CASE("two-point perfect separation raises with zero ridge, fits with ridge") {
    Matrix x(2, 1);
    x.at(0, 0) = 0.0;
    x.at(1, 0) = 1.0;
    std::vector<int> w{0, 1};
    CHECK_THROWS_AS(fit_logistic(x, w, 0.0), SeparationError);
    CHECK_NOTHROW(fit_logistic(x, w, 0.5));
}

TEST_CASE("recovers known coefficients on simulated data") {
    Rng rng(20250401);
    const std::size_t n = 20000;
    Matrix x(n, 2);
    std::vector<int> w(n);
    const double b0 = -0.4, b1 = 1.2, b2 = -0.7;
    for (std::size_t i = 0; i < n; ++i) {
        x.at(i, 0) = rng.normal();
        x.at(i, 1) = rng.normal();
        w[i] = rng.bernoulli(expit(b0 + b1 * x.at(i, 0) + b2 * x.at(i, 1)));
    }
    const LogisticModel m = fit_logistic(x, w, 1e-6);
    CHECK(m.diagnostics.converged);
    // translate standardized coefficients back to the raw scale
    const double raw_b1 = m.coef[1] / m.feat_sd[0];
    const double raw_b2 = m.coef[2] / m.feat_sd[1];
    CHECK(raw_b1 == doctest::Approx(b1).epsilon(0.08));
    CHECK(raw_b2 == doctest::Approx(b2).epsilon(0.08));
}

TEST_CASE("gradient norm at convergence meets the tolerance") {
    Rng rng(7);
    const std::size_t n = 500;
    Matrix x(n, 3);
    std::vector<int> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 3; ++j) x.at(i, j) = rng.normal();
        w[i] = rng.bernoulli(expit(0.3 * x.at(i, 0) - 0.9 * x.at(i, 2)));
    }
    const LogisticModel m = fit_logistic(x, w, 1e-4);
    CHECK(m.diagnostics.converged);
    CHECK(m.diagnostics.grad_norm <= 1e-8);
}

TEST_CASE("arity mismatch rejected at prediction") {
    Matrix x(10, 2);
    std::vector<int> w(10);
    for (std::size_t i = 0; i < 10; ++i) {
        x.at(i, 0) = static_cast<double>(i);
        x.at(i, 1) = static_cast<double>(i % 3);
        w[i] = static_cast<int>(i % 2);
    }
    const LogisticModel m = fit_logistic(x, w, 0.1);
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(m.predict_one(std::span<const double>(bad)), std::invalid_argument);
}
