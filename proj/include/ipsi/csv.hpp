#pragma once

// CSV ingestion and emission. Numbers are written with 17 significant digits
// so write-then-read round-trips reproduce doubles exactly.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsi/estimator.hpp"
#include "ipsi/panel.hpp"

namespace ipsi {

struct CsvParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double_field(const std::string& s, const std::string& context) {
    if (s.empty() || s == "NA" || s == "nan" || s == "NaN")
        return std::numeric_limits<double>::quiet_NaN();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw CsvParseError("cannot parse number '" + s + "' (" + context + ")");
    return v;
}

// ---------------------------------------------------------------------------
// Panel CSV: unit_id, date, season_id, treatment, outcome, is_holiday, cov_*
// ---------------------------------------------------------------------------
inline std::vector<TimeSeriesPanel> read_panels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvParseError("cannot open panel file " + path);

    std::string line;
    if (!std::getline(in, line)) throw CsvParseError("empty panel file " + path);
    const std::vector<std::string> header = split_csv_line(line);

    const std::vector<std::string> required{"unit_id", "date",    "season_id",
                                            "treatment", "outcome", "is_holiday"};
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const std::string& name : required)
        if (!col.count(name))
            throw CsvParseError("panel header missing required column '" + name + "'");

    std::vector<std::string> cov_names;
    std::vector<std::size_t> cov_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& name = header[i];
        if (name.rfind("cov_", 0) == 0) {
            cov_names.push_back(name);
            cov_cols.push_back(i);
        } else if (std::find(required.begin(), required.end(), name) == required.end()) {
            throw CsvParseError("panel header has unknown column '" + name + "'");
        }
    }

    std::vector<TimeSeriesPanel> panels;
    std::map<std::string, std::size_t> panel_index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != header.size())
            throw CsvParseError("row " + std::to_string(line_no) + " has " +
                                std::to_string(f.size()) + " fields, expected " +
                                std::to_string(header.size()));
        const std::string ctx = "row " + std::to_string(line_no);

        const std::string& unit = f[col["unit_id"]];
        auto it = panel_index.find(unit);
        if (it == panel_index.end()) {
            panel_index[unit] = panels.size();
            panels.push_back(TimeSeriesPanel{unit, cov_names, {}});
            it = panel_index.find(unit);
        }

        DayRecord rec;
        if (!parse_date(f[col["date"]], rec.date))
            throw CsvParseError("bad date '" + f[col["date"]] + "' (" + ctx + ")");
        rec.season_id = f[col["season_id"]];
        rec.treatment = static_cast<int>(parse_double_field(f[col["treatment"]], ctx));
        rec.outcome = parse_double_field(f[col["outcome"]], ctx);
        rec.is_holiday = static_cast<int>(parse_double_field(f[col["is_holiday"]], ctx));
        for (std::size_t j = 0; j < cov_cols.size(); ++j)
            rec.covariates.push_back(parse_double_field(f[cov_cols[j]], ctx));
        panels[it->second].records.push_back(std::move(rec));
    }
    if (panels.empty()) throw CsvParseError("panel file has no data rows: " + path);
    return panels;
}

inline void write_panels_csv(const std::string& path,
                             const std::vector<TimeSeriesPanel>& panels) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "unit_id,date,season_id,treatment,outcome,is_holiday";
    const std::vector<std::string>& cov_names =
        panels.empty() ? std::vector<std::string>{} : panels.front().covariate_names;
    for (const std::string& c : cov_names) out << ',' << c;
    out << '\n';
    for (const TimeSeriesPanel& p : panels)
        for (const DayRecord& r : p.records) {
            out << p.unit_id << ',' << format_date(r.date) << ',' << r.season_id << ','
                << r.treatment << ',' << format_double(r.outcome) << ',' << r.is_holiday;
            for (double c : r.covariates) out << ',' << format_double(c);
            out << '\n';
        }
}

// ---------------------------------------------------------------------------
// Effect curve CSV
// ---------------------------------------------------------------------------
inline const char* kCurveHeader =
    "delta,tau_hat,sigma_hat,band_lo,band_hi,effect,effect_lo,effect_hi,n_days";

inline void write_curve_csv(const std::string& path, const EffectCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << kCurveHeader << '\n';
    for (const CurvePoint& p : curve.points) {
        out << format_double(p.delta) << ',' << format_double(p.tau_hat) << ','
            << format_double(p.sigma_hat) << ',' << format_double(p.band_lo) << ','
            << format_double(p.band_hi) << ',' << format_double(p.effect) << ','
            << format_double(p.effect_lo) << ',' << format_double(p.effect_hi) << ','
            << p.n_days << '\n';
    }
}

inline EffectCurve read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CsvParseError("cannot open curve file " + path);
    std::string line;
    if (!std::getline(in, line)) throw CsvParseError("empty curve file " + path);
    if (split_csv_line(line) != split_csv_line(kCurveHeader))
        throw CsvParseError("unexpected curve header in " + path);
    EffectCurve curve;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 9)
            throw CsvParseError("curve row " + std::to_string(line_no) + " malformed in " +
                                path);
        const std::string ctx = path + ":" + std::to_string(line_no);
        CurvePoint p;
        p.delta = parse_double_field(f[0], ctx);
        p.tau_hat = parse_double_field(f[1], ctx);
        p.sigma_hat = parse_double_field(f[2], ctx);
        p.band_lo = parse_double_field(f[3], ctx);
        p.band_hi = parse_double_field(f[4], ctx);
        p.effect = parse_double_field(f[5], ctx);
        p.effect_lo = parse_double_field(f[6], ctx);
        p.effect_hi = parse_double_field(f[7], ctx);
        p.n_days = static_cast<long>(parse_double_field(f[8], ctx));
        curve.points.push_back(p);
    }
    return curve;
}

} // namespace ipsi
