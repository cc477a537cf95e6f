#pragma once

// Bundled synthetic heat-alert style data: a few units, several warm seasons
// of daily heat index, rare alerts (~2.5% of days), and count-like outcomes
// that respond modestly to alerts on hot days. Exercises the full pipeline
// shape without any real meteorology.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ipsi/dates.hpp"
#include "ipsi/panel.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {

struct DemoConfig {
    int units = 3;
    int seasons = 3;
    int first_year = 2014;
    std::uint64_t seed = 42;
};

inline std::vector<TimeSeriesPanel> make_demo_panels(const DemoConfig& cfg = {}) {
    std::vector<TimeSeriesPanel> panels;
    for (int u = 0; u < cfg.units; ++u) {
        Rng rng(derive_seed(cfg.seed, 0xDE30ull, static_cast<std::uint64_t>(u)));
        TimeSeriesPanel panel;
        panel.unit_id = "county_" + std::string(1, static_cast<char>('A' + u));
        panel.covariate_names = {"cov_heat_index"};

        const double unit_shift = 4.0 * (u - (cfg.units - 1) * 0.5);
        for (int season = 0; season < cfg.seasons; ++season) {
            const int year = cfg.first_year + season;
            const long start = serial_day(Date{year, 4, 1});
            const long end = serial_day(Date{year, 10, 31});
            const int season_len = static_cast<int>(end - start + 1);

            double noise = 0.0;
            int w_prev = 0;
            double alerts_so_far = 0.0;
            for (int d = 0; d < season_len; ++d) {
                const Date date = date_from_serial(start + d);
                // seasonal arch peaking mid-season plus AR(1) weather noise
                const double arch =
                    72.0 + 22.0 * std::sin(std::numbers::pi * d / (season_len - 1.0));
                noise = 0.7 * noise + 4.0 * rng.normal();
                const double heat = arch + unit_shift + noise;

                const int holiday = (date.month == 7 && date.day == 4) ? 1 : 0;

                // alerts concentrate on the hottest days; prevalence ~2.5%
                const double eta = -5.1 + 0.28 * (heat - 92.0) + 0.8 * w_prev;
                const int w = rng.bernoulli(expit(eta));

                // small protective effect of an alert on hot days
                const double excess = std::max(heat - 90.0, 0.0);
                const double lambda =
                    std::exp(1.6 + 0.05 * excess -
                             0.12 * (static_cast<double>(w) + 0.5 * w_prev) *
                                 (excess > 0.0 ? 1.0 : 0.0));
                const double y = static_cast<double>(rng.poisson(lambda));

                DayRecord rec;
                rec.date = date;
                rec.season_id = std::to_string(year);
                rec.treatment = w;
                rec.outcome = y;
                rec.covariates = {heat};
                rec.is_holiday = holiday;
                panel.records.push_back(std::move(rec));

                alerts_so_far += w;
                w_prev = w;
            }
            (void)alerts_so_far;
        }
        panels.push_back(std::move(panel));
    }
    return panels;
}

} // namespace ipsi
