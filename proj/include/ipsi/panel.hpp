#pragma once

// Data model for a single-unit daily time series: treatment, outcome,
// covariates and warm-season labels, plus the validation pass that gates
// every downstream computation.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ipsi/dates.hpp"

namespace ipsi {

struct DayRecord {
    Date date;
    std::string season_id; // warm-season year label
    int treatment = 0;     // 0/1
    double outcome = 0.0;
    std::vector<double> covariates;
    int is_holiday = 0;
};

struct TimeSeriesPanel {
    std::string unit_id;
    std::vector<std::string> covariate_names; // parallel to DayRecord::covariates
    std::vector<DayRecord> records;
};

struct ValidationIssue {
    std::size_t record_index = 0;
    std::string kind;
    std::string message;
};

struct ValidationReport {
    std::string unit_id;
    std::vector<ValidationIssue> errors;
    bool analysis_ready() const { return errors.empty(); }
};

inline ValidationReport validate_panel(const TimeSeriesPanel& panel) {
    ValidationReport report;
    report.unit_id = panel.unit_id;
    auto add = [&](std::size_t i, const char* kind, std::string msg) {
        report.errors.push_back(ValidationIssue{i, kind, std::move(msg)});
    };

    const std::size_t n = panel.records.size();
    if (n == 0) {
        add(0, "empty", "panel has no records");
        return report;
    }

    const std::size_t arity = panel.records.front().covariates.size();
    std::vector<std::string> seen_seasons;
    long prev_serial = 0;

    for (std::size_t i = 0; i < n; ++i) {
        const DayRecord& r = panel.records[i];
        const long serial = serial_day(r.date);

        if (i > 0) {
            if (serial == prev_serial)
                add(i, "duplicate_date", "duplicate date " + format_date(r.date));
            else if (serial < prev_serial)
                add(i, "ordering", "date " + format_date(r.date) + " out of order");
        }

        if (r.treatment != 0 && r.treatment != 1)
            add(i, "non_binary_treatment",
                "treatment " + std::to_string(r.treatment) + " on " + format_date(r.date));
        if (!std::isfinite(r.outcome))
            add(i, "missing_outcome", "non-finite outcome on " + format_date(r.date));
        if (r.is_holiday != 0 && r.is_holiday != 1)
            add(i, "non_binary_holiday", "is_holiday must be 0/1 on " + format_date(r.date));

        if (r.covariates.size() != arity)
            add(i, "covariate_arity",
                "covariate count " + std::to_string(r.covariates.size()) +
                    " differs from " + std::to_string(arity));
        for (std::size_t j = 0; j < r.covariates.size(); ++j)
            if (!std::isfinite(r.covariates[j]))
                add(i, "missing_covariate",
                    "non-finite covariate " + std::to_string(j) + " on " + format_date(r.date));

        // season blocks must be contiguous: a season id may not reappear
        // after another season has started, and dates inside a season
        // block must be consecutive days
        if (seen_seasons.empty() || seen_seasons.back() != r.season_id) {
            for (const std::string& s : seen_seasons)
                if (s == r.season_id) {
                    add(i, "season_interleaved",
                        "season " + r.season_id + " reappears after a different season");
                    break;
                }
            seen_seasons.push_back(r.season_id);
        } else if (i > 0 && serial != prev_serial + 1 && serial > prev_serial) {
            add(i, "season_gap",
                "missing day(s) before " + format_date(r.date) + " in season " + r.season_id);
        }

        prev_serial = serial;
    }
    return report;
}

// 0-based day index within each season block; windows and lag features are
// confined to a season through this index.
inline std::vector<int> day_in_season(const TimeSeriesPanel& panel) {
    std::vector<int> idx(panel.records.size(), 0);
    for (std::size_t i = 1; i < panel.records.size(); ++i)
        idx[i] = (panel.records[i].season_id == panel.records[i - 1].season_id)
                     ? idx[i - 1] + 1
                     : 0;
    return idx;
}

// 0-based ordinal of the season block each record belongs to.
inline std::vector<int> season_ordinal(const TimeSeriesPanel& panel) {
    std::vector<int> ord(panel.records.size(), 0);
    for (std::size_t i = 1; i < panel.records.size(); ++i)
        ord[i] = (panel.records[i].season_id == panel.records[i - 1].season_id)
                     ? ord[i - 1]
                     : ord[i - 1] + 1;
    return ord;
}

} // namespace ipsi
