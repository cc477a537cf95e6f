#pragma once

// t0-step effect estimation for one series under the odds-multiplier
// intervention: per-day product weights, temporal averages/totals, the
// plug-in variance, pointwise bands over a delta grid, and counterfactual
// treatment-frequency summaries. Estimation windows never cross a season
// boundary.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsi/features.hpp"
#include "ipsi/math.hpp"
#include "ipsi/panel.hpp"
#include "ipsi/propensity.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {

enum class EstimandKind { temporal_average, temporal_total };

struct EstimationConfig {
    int t0 = 3;
    std::vector<double> delta_grid;
    double alpha = 0.05;
    std::optional<DayMask> day_filter;
    EstimandKind kind = EstimandKind::temporal_average;
};

struct CurvePoint {
    double delta = 0.0;
    double tau_hat = 0.0;
    double sigma_hat = 0.0; // pooled per-day variance estimate
    double band_lo = 0.0;
    double band_hi = 0.0;
    double effect = 0.0; // tau_hat - tau_hat(1), same scaling
    double effect_lo = 0.0;
    double effect_hi = 0.0;
    long n_days = 0;
};

struct EffectCurve {
    std::vector<CurvePoint> points;
    double tau_baseline = 0.0;   // estimate at delta = 1
    double sigma_baseline = 0.0; // variance estimate at delta = 1
    double alpha = 0.05;
    int t0 = 0;
    long n_days = 0;
    std::string estimand_kind = "temporal_average";
    // bands on the baseline difference add the two variances; covariance
    // between tau(delta) and tau(1) is not estimated
    std::string effect_band_method = "independent_variances";
};

// Outcome/treatment view with season bookkeeping, the shape every estimator
// operation consumes.
struct EstimationInput {
    std::vector<double> outcome;
    std::vector<int> treatment;
    std::vector<int> day_idx;    // 0-based day index within its season
    std::vector<int> season_ord; // 0-based season ordinal
    int n_seasons = 1;

    std::size_t size() const { return outcome.size(); }
};

inline EstimationInput make_estimation_input(const TimeSeriesPanel& panel) {
    EstimationInput in;
    in.outcome.reserve(panel.records.size());
    in.treatment.reserve(panel.records.size());
    for (const DayRecord& r : panel.records) {
        in.outcome.push_back(r.outcome);
        in.treatment.push_back(r.treatment);
    }
    in.day_idx = day_in_season(panel);
    in.season_ord = season_ordinal(panel);
    in.n_seasons = in.season_ord.empty() ? 0 : in.season_ord.back() + 1;
    return in;
}

// single-season helper for simulated series
inline EstimationInput make_estimation_input(std::vector<double> outcome,
                                             std::vector<int> treatment) {
    EstimationInput in;
    const std::size_t n = outcome.size();
    in.outcome = std::move(outcome);
    in.treatment = std::move(treatment);
    in.day_idx.resize(n);
    for (std::size_t t = 0; t < n; ++t) in.day_idx[t] = static_cast<int>(t);
    in.season_ord.assign(n, 0);
    in.n_seasons = n > 0 ? 1 : 0;
    return in;
}

// One factor of the estimator's product weight. The denominator is evaluated
// as delta*p + (1 - p) so the identity intervention yields exactly 1.
inline double incremental_weight(int w, double p_hat, double delta) {
    if (!(delta > 0.0))
        throw std::invalid_argument("incremental_weight: delta must be > 0");
    const double den = delta * p_hat + (1.0 - p_hat);
    return (w ? delta : 1.0) / den;
}

namespace detail {

inline void check_config(const EstimationConfig& cfg, std::size_t n) {
    if (cfg.t0 < 1) throw std::invalid_argument("estimator: t0 must be >= 1");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw std::invalid_argument("estimator: alpha must be in (0,1)");
    for (double d : cfg.delta_grid)
        if (!(d > 0.0)) throw std::invalid_argument("estimator: grid deltas must be > 0");
    if (cfg.day_filter && cfg.day_filter->size() != n)
        throw std::invalid_argument("estimator: day_filter length mismatch");
}

inline bool usable_day(const EstimationInput& in, const EstimationConfig& cfg,
                       std::size_t t) {
    if (in.day_idx[t] < cfg.t0 - 1) return false;
    if (cfg.day_filter && !(*cfg.day_filter)[t]) return false;
    return true;
}

} // namespace detail

// Y_t times the product of incremental weights over the t0-day window ending
// at t. t is a 0-based index; the window must lie inside t's season.
inline double point_estimate_t(const EstimationInput& in, std::span<const double> p_hats,
                               double delta, int t0, std::size_t t) {
    if (t >= in.size() || p_hats.size() != in.size())
        throw std::invalid_argument("point_estimate_t: index/length mismatch");
    if (in.day_idx[t] < t0 - 1)
        throw std::invalid_argument("point_estimate_t: fewer than t0 days into the season");
    double w = 1.0;
    for (int s = 0; s < t0; ++s) {
        const std::size_t i = t - static_cast<std::size_t>(s);
        w *= incremental_weight(in.treatment[i], p_hats[i], delta);
    }
    return in.outcome[t] * w;
}

struct PointSummary {
    double value = 0.0; // estimand on the requested scale
    long n_days = 0;
    double mean = 0.0; // per-day mean regardless of scaling
};

namespace detail {

// scale factor turning the per-day mean into the reported estimand
inline double report_scale(const EstimationInput& in, const EstimationConfig& cfg,
                           long n_days) {
    if (cfg.kind == EstimandKind::temporal_average) return 1.0;
    // per-season total: sum within season, averaged across seasons
    return static_cast<double>(n_days) / static_cast<double>(std::max(in.n_seasons, 1));
}

} // namespace detail

inline PointSummary temporal_average(const EstimationInput& in,
                                     std::span<const double> p_hats, double delta,
                                     const EstimationConfig& cfg) {
    detail::check_config(cfg, in.size());
    if (p_hats.size() != in.size())
        throw std::invalid_argument("temporal_average: propensity length mismatch");
    double sum = 0.0;
    long n = 0;
    for (std::size_t t = 0; t < in.size(); ++t) {
        if (!detail::usable_day(in, cfg, t)) continue;
        sum += point_estimate_t(in, p_hats, delta, cfg.t0, t);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("temporal_average: no usable days");
    PointSummary out;
    out.n_days = n;
    out.mean = sum / static_cast<double>(n);
    out.value = out.mean * detail::report_scale(in, cfg, n);
    return out;
}

// Plug-in variance: per-day second-moment product term minus the squared
// temporal average, pooled over usable days and floored at zero.
inline double variance_estimate(const EstimationInput& in, std::span<const double> p_hats,
                                double delta, const EstimationConfig& cfg) {
    detail::check_config(cfg, in.size());
    const PointSummary tau = temporal_average(in, p_hats, delta, cfg);
    double sum_v = 0.0;
    long n = 0;
    for (std::size_t t = 0; t < in.size(); ++t) {
        if (!detail::usable_day(in, cfg, t)) continue;
        double v = 1.0;
        for (int s = 0; s < cfg.t0; ++s) {
            const std::size_t i = t - static_cast<std::size_t>(s);
            const double den = delta * p_hats[i] + (1.0 - p_hats[i]);
            v *= (in.treatment[i] ? delta * delta : 1.0) / (den * den);
        }
        sum_v += v * in.outcome[t] * in.outcome[t];
        ++n;
    }
    const double mean_v = sum_v / static_cast<double>(n);
    const double sigma = mean_v - tau.mean * tau.mean;
    return sigma > 0.0 ? sigma : 0.0;
}

inline std::vector<double> make_delta_grid(double lo, double hi, int points,
                                           bool log_spacing) {
    if (points < 1) throw std::invalid_argument("delta grid: points must be >= 1");
    if (!(lo > 0.0) || !(hi > 0.0) || hi < lo)
        throw std::invalid_argument("delta grid: require 0 < min <= max");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    for (int j = 0; j < points; ++j) {
        const double f = points == 1 ? 0.0
                                     : static_cast<double>(j) / static_cast<double>(points - 1);
        double v = log_spacing ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)))
                               : lo + f * (hi - lo);
        // snap the baseline so the identity delta is hit exactly
        if (std::fabs(v - 1.0) < 1e-12) v = 1.0;
        grid.push_back(v);
    }
    return grid;
}

inline EffectCurve effect_curve(const EstimationInput& in, std::span<const double> p_hats,
                                const EstimationConfig& cfg) {
    detail::check_config(cfg, in.size());
    if (cfg.delta_grid.empty()) throw std::invalid_argument("effect_curve: empty delta grid");

    const double z = normal_quantile(1.0 - cfg.alpha / 2.0);

    const PointSummary base = temporal_average(in, p_hats, 1.0, cfg);
    const double base_sigma = variance_estimate(in, p_hats, 1.0, cfg);
    const double scale = detail::report_scale(in, cfg, base.n_days);
    const double nd = static_cast<double>(base.n_days);

    EffectCurve curve;
    curve.alpha = cfg.alpha;
    curve.t0 = cfg.t0;
    curve.n_days = base.n_days;
    curve.tau_baseline = base.value;
    curve.sigma_baseline = base_sigma * scale * scale;
    curve.estimand_kind =
        cfg.kind == EstimandKind::temporal_average ? "temporal_average" : "temporal_total";

    for (double delta : cfg.delta_grid) {
        CurvePoint pt;
        pt.delta = delta;
        pt.n_days = base.n_days;
        if (delta == 1.0) {
            pt.tau_hat = base.value;
            pt.sigma_hat = curve.sigma_baseline;
            const double half = z * std::sqrt(pt.sigma_hat / nd);
            pt.band_lo = pt.tau_hat - half;
            pt.band_hi = pt.tau_hat + half;
            pt.effect = 0.0;
            pt.effect_lo = 0.0;
            pt.effect_hi = 0.0;
        } else {
            const PointSummary tau = temporal_average(in, p_hats, delta, cfg);
            const double sigma = variance_estimate(in, p_hats, delta, cfg) * scale * scale;
            pt.tau_hat = tau.value;
            pt.sigma_hat = sigma;
            const double half = z * std::sqrt(sigma / nd);
            pt.band_lo = pt.tau_hat - half;
            pt.band_hi = pt.tau_hat + half;
            pt.effect = pt.tau_hat - base.value;
            const double eff_half =
                z * std::sqrt(sigma / nd + curve.sigma_baseline / nd);
            pt.effect_lo = pt.effect - eff_half;
            pt.effect_hi = pt.effect + eff_half;
        }
        curve.points.push_back(pt);
    }
    return curve;
}

// Expected number of treated days under the intervention, optionally over a
// day subset; no t0 restriction applies.
inline double expected_treatment_count(std::span<const double> p_hats, double delta,
                                       const std::optional<DayMask>& day_filter = {}) {
    if (!(delta > 0.0))
        throw std::invalid_argument("expected_treatment_count: delta must be > 0");
    if (day_filter && day_filter->size() != p_hats.size())
        throw std::invalid_argument("expected_treatment_count: day_filter length mismatch");
    double sum = 0.0;
    for (std::size_t t = 0; t < p_hats.size(); ++t) {
        if (day_filter && !(*day_filter)[t]) continue;
        sum += incremental_propensity(p_hats[t], delta);
    }
    return sum;
}

// One sampled counterfactual treatment path, each day drawn independently at
// its intervened probability.
inline std::vector<int> sample_counterfactual_path(std::span<const double> p_hats,
                                                   double delta, std::uint64_t seed) {
    if (!(delta > 0.0))
        throw std::invalid_argument("sample_counterfactual_path: delta must be > 0");
    Rng rng(seed);
    std::vector<int> path(p_hats.size());
    for (std::size_t t = 0; t < p_hats.size(); ++t)
        path[t] = rng.bernoulli(incremental_propensity(p_hats[t], delta));
    return path;
}

} // namespace ipsi
