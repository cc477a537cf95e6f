#pragma once

// Deterministic construction of the per-day feature rows the propensity model
// conditions on: current covariates, within-season lags of covariates and
// treatments, the season-to-date alert total, past-outcome and heat-index
// moving averages, and the holiday flag. Row t may use covariates dated <= t
// and treatments/outcomes dated < t only.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsi/math.hpp"
#include "ipsi/panel.hpp"

namespace ipsi {

struct FeatureSpec {
    std::vector<int> covariate_lags{1, 2};
    std::vector<int> treatment_lags{1, 2};
    bool running_total = true;
    bool moving_average = true;
    int moving_average_window = 0; // 0 = season-to-date
    int heat_index_column = -1;    // covariate index; -1 = none designated
};

struct FiltrationFeatures {
    Matrix x;
    std::vector<std::string> names;
};

using DayMask = std::vector<char>;

namespace detail {

inline void check_spec(const FeatureSpec& spec, std::size_t arity) {
    for (int l : spec.covariate_lags)
        if (l < 1) throw std::invalid_argument("feature spec: covariate lag must be >= 1");
    for (int l : spec.treatment_lags)
        if (l < 1) throw std::invalid_argument("feature spec: treatment lag must be >= 1");
    if (spec.moving_average_window < 0)
        throw std::invalid_argument("feature spec: moving_average_window must be >= 0");
    if (spec.heat_index_column >= static_cast<int>(arity))
        throw std::invalid_argument("feature spec: heat_index_column out of range");
}

} // namespace detail

inline FiltrationFeatures build_filtration_features(const TimeSeriesPanel& panel,
                                                    const FeatureSpec& spec) {
    const std::size_t n = panel.records.size();
    if (n == 0) throw std::invalid_argument("build_filtration_features: empty panel");
    const std::size_t arity = panel.records.front().covariates.size();
    detail::check_spec(spec, arity);

    auto cov_name = [&](std::size_t j) {
        return j < panel.covariate_names.size() ? panel.covariate_names[j]
                                                : "cov" + std::to_string(j);
    };

    // distinct lag orders needing an availability flag
    std::vector<int> flag_lags;
    for (int l : spec.covariate_lags) flag_lags.push_back(l);
    for (int l : spec.treatment_lags) flag_lags.push_back(l);
    std::sort(flag_lags.begin(), flag_lags.end());
    flag_lags.erase(std::unique(flag_lags.begin(), flag_lags.end()), flag_lags.end());

    std::vector<std::string> names;
    for (std::size_t j = 0; j < arity; ++j) names.push_back(cov_name(j));
    for (int l : spec.covariate_lags)
        for (std::size_t j = 0; j < arity; ++j)
            names.push_back(cov_name(j) + "_lag" + std::to_string(l));
    for (int l : spec.treatment_lags)
        names.push_back("treatment_lag" + std::to_string(l));
    for (int l : flag_lags) names.push_back("lag" + std::to_string(l) + "_avail");
    if (spec.running_total) names.push_back("alerts_to_date");
    const bool want_ma_heat = spec.moving_average && spec.heat_index_column >= 0;
    if (spec.moving_average) {
        names.push_back("outcome_ma");
        names.push_back("outcome_ma_avail");
    }
    if (want_ma_heat) names.push_back("heat_index_ma");
    names.push_back("is_holiday");

    const std::vector<int> day_idx = day_in_season(panel);
    FiltrationFeatures out;
    out.names = names;
    out.x = Matrix(n, names.size());

    for (std::size_t t = 0; t < n; ++t) {
        const DayRecord& rec = panel.records[t];
        const int d = day_idx[t]; // 0-based within season
        std::size_t c = 0;

        for (std::size_t j = 0; j < arity; ++j) out.x.at(t, c++) = rec.covariates[j];

        for (int l : spec.covariate_lags) {
            const bool avail = d >= l;
            for (std::size_t j = 0; j < arity; ++j)
                out.x.at(t, c++) = avail ? panel.records[t - static_cast<std::size_t>(l)].covariates[j] : 0.0;
        }
        for (int l : spec.treatment_lags) {
            const bool avail = d >= l;
            out.x.at(t, c++) =
                avail ? static_cast<double>(panel.records[t - static_cast<std::size_t>(l)].treatment) : 0.0;
        }
        for (int l : flag_lags) out.x.at(t, c++) = d >= l ? 1.0 : 0.0;

        if (spec.running_total) {
            // alerts issued strictly before t within this season
            double total = 0.0;
            for (int s = 1; s <= d; ++s)
                total += static_cast<double>(panel.records[t - static_cast<std::size_t>(s)].treatment);
            out.x.at(t, c++) = total;
        }

        if (spec.moving_average) {
            const int win = spec.moving_average_window;
            // past outcomes: days t-1 down to season start, at most `win` of them
            const int back = (win == 0) ? d : std::min(d, win);
            double sum_y = 0.0;
            for (int s = 1; s <= back; ++s)
                sum_y += panel.records[t - static_cast<std::size_t>(s)].outcome;
            out.x.at(t, c++) = back > 0 ? sum_y / static_cast<double>(back) : 0.0;
            out.x.at(t, c++) = back > 0 ? 1.0 : 0.0;
        }
        if (want_ma_heat) {
            const int win = spec.moving_average_window;
            // includes today; window of `win` days ending at t, clipped to season
            const int span = (win == 0) ? d + 1 : std::min(d + 1, win);
            double sum_h = 0.0;
            for (int s = 0; s < span; ++s)
                sum_h += panel.records[t - static_cast<std::size_t>(s)]
                             .covariates[static_cast<std::size_t>(spec.heat_index_column)];
            out.x.at(t, c++) = sum_h / static_cast<double>(span);
        }

        out.x.at(t, c++) = static_cast<double>(rec.is_holiday);
    }
    return out;
}

// Order statistic at ceil(q*n), 1-indexed; the small backoff keeps exact
// integer products like 0.95*100 from ceiling up a slot.
inline double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("empirical_quantile: empty input");
    if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("empirical_quantile: q must be in (0,1)");
    std::sort(values.begin(), values.end());
    const double kd = q * static_cast<double>(values.size());
    auto k = static_cast<std::size_t>(std::ceil(kd - 1e-9 * std::max(1.0, kd)));
    k = std::min(std::max<std::size_t>(k, 1), values.size());
    return values[k - 1];
}

// Days whose designated heat-index covariate strictly exceeds the unit's
// empirical quantile over all its warm-season days; ties excluded.
inline DayMask hot_day_filter(const TimeSeriesPanel& panel, double quantile,
                              int heat_index_column) {
    if (heat_index_column < 0 ||
        (panel.records.empty()
             ? true
             : heat_index_column >= static_cast<int>(panel.records.front().covariates.size())))
        throw std::invalid_argument("hot_day_filter: heat index covariate not designated");
    if (!(quantile > 0.0 && quantile < 1.0))
        throw std::invalid_argument("hot_day_filter: quantile must be in (0,1)");

    std::vector<double> heat(panel.records.size());
    for (std::size_t t = 0; t < panel.records.size(); ++t)
        heat[t] = panel.records[t].covariates[static_cast<std::size_t>(heat_index_column)];

    const double threshold = empirical_quantile(heat, quantile);
    DayMask mask(panel.records.size(), 0);
    for (std::size_t t = 0; t < heat.size(); ++t)
        mask[t] = heat[t] > threshold ? 1 : 0;
    return mask;
}

} // namespace ipsi
