#pragma once

// Random-effects pooling of per-unit estimates: DerSimonian-Laird between-
// study variance, inverse-variance weights 1/(V_i + tau2), Cochran's Q
// heterogeneity test, and grid-wise pooling of whole effect curves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsi/math.hpp"

namespace ipsi {

struct StudyEstimate {
    std::string unit_id;
    double estimate = 0.0;
    double variance = 0.0; // within-study error variance V_i
};

struct MetaResult {
    double pooled = 0.0;
    double pooled_variance = 0.0;
    double tau2 = 0.0;
    double q_statistic = 0.0;
    long q_df = 0;
    double q_p_value = 1.0;
    std::vector<double> weights; // normalized, sum to 1
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

inline constexpr double kVarianceFloor = 1e-12; // keeps 1/V_i finite

namespace detail {

inline void check_studies(std::span<const StudyEstimate> studies) {
    if (studies.size() < 2)
        throw std::invalid_argument("meta: need at least 2 studies");
    for (const StudyEstimate& s : studies)
        if (!(s.variance >= 0.0) || !std::isfinite(s.estimate))
            throw std::invalid_argument("meta: estimates must be finite with V_i >= 0");
}

struct QParts {
    double q = 0.0;
    double sum_w = 0.0;
    double sum_w2 = 0.0;
};

inline QParts cochran_q(std::span<const StudyEstimate> studies, double floor) {
    QParts parts;
    double sum_wx = 0.0;
    for (const StudyEstimate& s : studies) {
        const double w = 1.0 / std::max(s.variance, floor);
        parts.sum_w += w;
        parts.sum_w2 += w * w;
        sum_wx += w * s.estimate;
    }
    const double xbar = sum_wx / parts.sum_w;
    for (const StudyEstimate& s : studies) {
        const double w = 1.0 / std::max(s.variance, floor);
        const double d = s.estimate - xbar;
        parts.q += w * d * d;
    }
    return parts;
}

} // namespace detail

// DerSimonian-Laird between-study variance.
inline double estimate_tau2(std::span<const StudyEstimate> studies,
                            double variance_floor = kVarianceFloor) {
    detail::check_studies(studies);
    const detail::QParts parts = detail::cochran_q(studies, variance_floor);
    const double denom = parts.sum_w - parts.sum_w2 / parts.sum_w;
    if (!(denom > 0.0)) return 0.0;
    const double tau2 =
        (parts.q - static_cast<double>(studies.size() - 1)) / denom;
    return tau2 > 0.0 ? tau2 : 0.0;
}

struct HeterogeneityTest {
    double q = 0.0;
    long df = 0;
    double p_value = 1.0;
};

inline HeterogeneityTest heterogeneity_test(std::span<const StudyEstimate> studies,
                                            double variance_floor = kVarianceFloor) {
    detail::check_studies(studies);
    HeterogeneityTest t;
    t.q = detail::cochran_q(studies, variance_floor).q;
    t.df = static_cast<long>(studies.size()) - 1;
    t.p_value = chi2_sf(t.q, static_cast<double>(t.df));
    return t;
}

inline MetaResult pool_random_effects(std::span<const StudyEstimate> studies,
                                      double variance_floor = kVarianceFloor) {
    detail::check_studies(studies);
    MetaResult res;
    res.tau2 = estimate_tau2(studies, variance_floor);

    double sum_c = 0.0;
    res.weights.resize(studies.size());
    for (std::size_t i = 0; i < studies.size(); ++i) {
        res.weights[i] = 1.0 / (std::max(studies[i].variance, variance_floor) + res.tau2);
        sum_c += res.weights[i];
    }
    res.pooled_variance = 1.0 / sum_c;
    double pooled = 0.0;
    for (std::size_t i = 0; i < studies.size(); ++i) {
        res.weights[i] /= sum_c;
        pooled += res.weights[i] * studies[i].estimate;
    }
    res.pooled = pooled;

    const detail::QParts parts = detail::cochran_q(studies, variance_floor);
    res.q_statistic = parts.q;
    res.q_df = static_cast<long>(studies.size()) - 1;
    res.q_p_value = chi2_sf(parts.q, static_cast<double>(res.q_df));

    const double half = 1.96 * std::sqrt(res.pooled_variance);
    res.ci_lo = res.pooled - half;
    res.ci_hi = res.pooled + half;
    return res;
}

// ---------------------------------------------------------------------------
// Curve pooling: one random-effects pool per grid delta.
// ---------------------------------------------------------------------------
struct UnitCurve {
    std::string unit_id;
    std::vector<double> delta;
    std::vector<double> effect;
    std::vector<double> variance;
};

struct PooledPoint {
    double delta = 0.0;
    double pooled = 0.0;
    double pooled_variance = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double tau2 = 0.0;
    double q_statistic = 0.0;
    long q_df = 0;
    double q_p_value = 1.0;
    int n_units = 0;
    int n_dropped = 0;
};

struct PooledCurve {
    std::vector<PooledPoint> points;
};

inline PooledCurve pool_curves(const std::vector<UnitCurve>& curves,
                               double variance_floor = kVarianceFloor) {
    if (curves.size() < 2) throw std::invalid_argument("pool_curves: need at least 2 units");
    const std::vector<double>& grid = curves.front().delta;
    for (const UnitCurve& c : curves) {
        if (c.delta != grid)
            throw std::invalid_argument("pool_curves: delta grid mismatch for unit " +
                                        c.unit_id);
        if (c.effect.size() != grid.size() || c.variance.size() != grid.size())
            throw std::invalid_argument("pool_curves: ragged curve for unit " + c.unit_id);
    }

    PooledCurve pooled;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        std::vector<StudyEstimate> studies;
        int dropped = 0;
        for (const UnitCurve& c : curves) {
            if (!std::isfinite(c.effect[j]) || !std::isfinite(c.variance[j]) ||
                c.variance[j] < 0.0) {
                ++dropped;
                continue;
            }
            studies.push_back(StudyEstimate{c.unit_id, c.effect[j], c.variance[j]});
        }
        PooledPoint pt;
        pt.delta = grid[j];
        pt.n_units = static_cast<int>(studies.size());
        pt.n_dropped = dropped;
        if (studies.size() >= 2) {
            const MetaResult r = pool_random_effects(studies, variance_floor);
            pt.pooled = r.pooled;
            pt.pooled_variance = r.pooled_variance;
            pt.ci_lo = r.ci_lo;
            pt.ci_hi = r.ci_hi;
            pt.tau2 = r.tau2;
            pt.q_statistic = r.q_statistic;
            pt.q_df = r.q_df;
            pt.q_p_value = r.q_p_value;
        } else if (studies.size() == 1) {
            pt.pooled = studies[0].estimate;
            pt.pooled_variance = std::max(studies[0].variance, variance_floor);
            const double half = 1.96 * std::sqrt(pt.pooled_variance);
            pt.ci_lo = pt.pooled - half;
            pt.ci_hi = pt.pooled + half;
        } else {
            pt.pooled = std::numeric_limits<double>::quiet_NaN();
            pt.pooled_variance = std::numeric_limits<double>::quiet_NaN();
            pt.ci_lo = pt.ci_hi = pt.pooled;
        }
        pooled.points.push_back(pt);
    }
    return pooled;
}

} // namespace ipsi
