#pragma once

// Subcommand implementations shared by the CLI binary and the test suites:
// validate, curve, meta, simulate, demo. Each writes its artifacts plus a
// resolved config echo and a run manifest into one output directory.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipsi/config.hpp"
#include "ipsi/csv.hpp"
#include "ipsi/demo.hpp"
#include "ipsi/estimator.hpp"
#include "ipsi/features.hpp"
#include "ipsi/manifest.hpp"
#include "ipsi/meta.hpp"
#include "ipsi/panel.hpp"
#include "ipsi/parallel.hpp"
#include "ipsi/propensity.hpp"
#include "ipsi/simlab.hpp"

namespace ipsi::cmd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

struct GlobalOptions {
    std::string config_path;
    std::string out_dir = "ipsi_out";
    std::optional<std::uint64_t> seed;
    int workers = 0;
    std::string log_level = "info";
};

namespace detail {

inline bool log_enabled(const GlobalOptions& g, const char* level) {
    static const std::vector<std::string> order{"debug", "info", "warn", "error"};
    auto rank = [&](const std::string& s) {
        const auto it = std::find(order.begin(), order.end(), s);
        return it == order.end() ? 1 : static_cast<int>(it - order.begin());
    };
    return rank(level) >= rank(g.log_level);
}

inline void log(const GlobalOptions& g, const char* level, const std::string& msg) {
    if (!log_enabled(g, level)) return;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[" << level << "] " << msg << "\n";
}

inline std::string sanitize_unit(const std::string& unit) {
    std::string s;
    for (char c : unit)
        s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'
                        ? c
                        : '_');
    return s.empty() ? std::string("unit") : s;
}

inline FeatureSpec resolve_feature_spec(const RunConfig& cfg, const TimeSeriesPanel& panel) {
    FeatureSpec spec;
    spec.covariate_lags = cfg.features.covariate_lags;
    spec.treatment_lags = cfg.features.treatment_lags;
    spec.running_total = cfg.features.running_total;
    spec.moving_average = cfg.features.moving_average;
    spec.moving_average_window = cfg.features.moving_average_window;
    spec.heat_index_column = -1;
    if (!cfg.features.heat_index_column.empty()) {
        const auto& names = panel.covariate_names;
        const auto it =
            std::find(names.begin(), names.end(), cfg.features.heat_index_column);
        if (it == names.end())
            throw std::invalid_argument("designated heat index column '" +
                                        cfg.features.heat_index_column +
                                        "' not found in panel covariates");
        spec.heat_index_column = static_cast<int>(it - names.begin());
    }
    return spec;
}

inline EstimationConfig resolve_estimation_config(const RunConfig& cfg,
                                                  const TimeSeriesPanel& panel,
                                                  const FeatureSpec& spec) {
    EstimationConfig est;
    est.t0 = cfg.estimator.t0;
    est.alpha = cfg.estimator.alpha;
    est.delta_grid = make_delta_grid(cfg.estimator.delta_min, cfg.estimator.delta_max,
                                     cfg.estimator.delta_points, cfg.estimator.log_spacing);
    est.kind = cfg.estimator.estimand_kind == "temporal_total"
                   ? EstimandKind::temporal_total
                   : EstimandKind::temporal_average;
    if (cfg.estimator.day_filter == "hot_days") {
        if (spec.heat_index_column < 0)
            throw std::invalid_argument(
                "estimator.day_filter=hot_days requires features.heat_index_column");
        est.day_filter =
            hot_day_filter(panel, cfg.estimator.hot_day_quantile, spec.heat_index_column);
    }
    return est;
}

inline PropensityModel fit_propensity_model(const RunConfig& cfg, const Matrix& x,
                                            std::span<const int> treatments) {
    PropensityModel model;
    model.epsilon = cfg.propensity.epsilon;
    if (cfg.propensity.model == "ensemble") {
        EnsembleOptions opt;
        opt.logistic_ridge = cfg.propensity.ridge;
        model.fit = fit_stacked_ensemble(x, treatments, cfg.propensity.k_folds, opt);
    } else {
        model.fit = fit_logistic(x, treatments, cfg.propensity.ridge);
    }
    return model;
}

inline nlohmann::json curve_to_json(const std::string& unit_id, const EffectCurve& curve) {
    nlohmann::json pts = nlohmann::json::array();
    for (const CurvePoint& p : curve.points)
        pts.push_back({{"delta", p.delta},
                       {"tau_hat", p.tau_hat},
                       {"sigma_hat", p.sigma_hat},
                       {"band_lo", p.band_lo},
                       {"band_hi", p.band_hi},
                       {"effect", p.effect},
                       {"effect_lo", p.effect_lo},
                       {"effect_hi", p.effect_hi},
                       {"n_days", p.n_days}});
    return nlohmann::json{{"unit_id", unit_id},
                          {"alpha", curve.alpha},
                          {"t0", curve.t0},
                          {"n_days", curve.n_days},
                          {"estimand_kind", curve.estimand_kind},
                          {"effect_band_method", curve.effect_band_method},
                          {"tau_baseline", curve.tau_baseline},
                          {"sigma_baseline", curve.sigma_baseline},
                          {"points", std::move(pts)}};
}

} // namespace detail

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------
inline int run_validate(const GlobalOptions& g, const std::string& panel_csv) {
    const std::vector<TimeSeriesPanel> panels = read_panels_csv(panel_csv);
    bool any_errors = false;
    for (const TimeSeriesPanel& panel : panels) {
        const ValidationReport report = validate_panel(panel);
        if (report.analysis_ready()) {
            std::cout << panel.unit_id << ": ok (" << panel.records.size() << " days)\n";
        } else {
            any_errors = true;
            std::cout << panel.unit_id << ": " << report.errors.size() << " error(s)\n";
            for (const ValidationIssue& e : report.errors)
                std::cout << "  [" << e.kind << "] record " << e.record_index << ": "
                          << e.message << "\n";
        }
    }
    (void)g;
    return any_errors ? kExitUserError : kExitOk;
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------
inline int run_curve(const GlobalOptions& g, const RunConfig& cfg,
                     const std::string& panel_csv) {
    namespace fs = std::filesystem;
    fs::create_directories(g.out_dir);

    RunManifest manifest;
    manifest.command = "curve";
    manifest.resolved_config = config_to_json(cfg);
    manifest.add_input(panel_csv);

    const std::vector<TimeSeriesPanel> panels = read_panels_csv(panel_csv);
    std::vector<std::string> failures(panels.size());
    std::vector<char> succeeded(panels.size(), 0);

    parallel_for(panels.size(), g.workers, [&](std::size_t u) {
        const TimeSeriesPanel& panel = panels[u];
        try {
            const ValidationReport report = validate_panel(panel);
            if (!report.analysis_ready())
                throw std::invalid_argument("panel failed validation with " +
                                            std::to_string(report.errors.size()) +
                                            " error(s): [" + report.errors.front().kind +
                                            "] " + report.errors.front().message);

            const FeatureSpec spec = detail::resolve_feature_spec(cfg, panel);
            const FiltrationFeatures features = build_filtration_features(panel, spec);
            std::vector<int> treatments;
            treatments.reserve(panel.records.size());
            for (const DayRecord& r : panel.records) treatments.push_back(r.treatment);

            const PropensityModel model =
                detail::fit_propensity_model(cfg, features.x, treatments);
            const std::vector<double> p_hat = predict_propensity(model, features.x);

            const EstimationConfig est_cfg =
                detail::resolve_estimation_config(cfg, panel, spec);
            const EstimationInput input = make_estimation_input(panel);
            const EffectCurve curve = effect_curve(input, p_hat, est_cfg);

            const std::string stem = detail::sanitize_unit(panel.unit_id);
            write_curve_csv((fs::path(g.out_dir) / ("curve_" + stem + ".csv")).string(),
                            curve);

            nlohmann::json jcurve = detail::curve_to_json(panel.unit_id, curve);
            double observed = 0.0;
            for (int w : treatments) observed += w;
            nlohmann::json counts = nlohmann::json::array();
            for (double delta : est_cfg.delta_grid)
                counts.push_back(
                    {{"delta", delta},
                     {"expected_count", expected_treatment_count(p_hat, delta)}});
            jcurve["diagnostics"] = {
                {"model_kind", model.kind()},
                {"observed_treatment_count", observed},
                {"expected_treatment_count", std::move(counts)}};
            if (const FitDiagnostics* d = model.logistic_diagnostics())
                jcurve["diagnostics"]["fit"] = {{"iterations", d->iterations},
                                                {"grad_norm", d->grad_norm},
                                                {"converged", d->converged}};
            write_json_file((fs::path(g.out_dir) / ("curve_" + stem + ".json")).string(),
                            jcurve);
            write_json_file(
                (fs::path(g.out_dir) / ("propensity_" + stem + ".json")).string(),
                propensity_to_json(model));
            succeeded[u] = 1;
        } catch (const std::exception& e) {
            failures[u] = e.what();
        }
    });

    std::size_t ok = 0;
    for (std::size_t u = 0; u < panels.size(); ++u) {
        if (succeeded[u]) {
            ++ok;
            detail::log(g, "info", "unit " + panels[u].unit_id + ": curve written");
        } else {
            detail::log(g, "warn", "unit " + panels[u].unit_id + " skipped: " + failures[u]);
        }
    }

    write_json_file((fs::path(g.out_dir) / "resolved_config.json").string(),
                    config_to_json(cfg));
    write_json_file((fs::path(g.out_dir) / "manifest.json").string(), manifest.to_json());
    return ok > 0 ? kExitOk : kExitUserError;
}

// ---------------------------------------------------------------------------
// meta
// ---------------------------------------------------------------------------
namespace detail {

inline UnitCurve unit_curve_from_effect_curve(const std::string& unit_id,
                                              const EffectCurve& curve, double alpha) {
    const double z = normal_quantile(1.0 - alpha / 2.0);
    UnitCurve uc;
    uc.unit_id = unit_id;
    for (const CurvePoint& p : curve.points) {
        uc.delta.push_back(p.delta);
        uc.effect.push_back(p.effect);
        const double half = (p.effect_hi - p.effect_lo) / 2.0;
        uc.variance.push_back((half / z) * (half / z));
    }
    return uc;
}

inline std::vector<UnitCurve> read_meta_inputs(const std::vector<std::string>& paths,
                                               double alpha) {
    std::vector<UnitCurve> curves;
    for (const std::string& path : paths) {
        std::ifstream probe(path);
        if (!probe) throw CsvParseError("cannot open meta input " + path);
        std::string header;
        std::getline(probe, header);
        probe.close();
        const std::vector<std::string> cols = split_csv_line(header);

        if (cols == split_csv_line(kCurveHeader)) {
            std::string stem = std::filesystem::path(path).stem().string();
            if (stem.rfind("curve_", 0) == 0) stem = stem.substr(6);
            curves.push_back(unit_curve_from_effect_curve(stem, read_curve_csv(path), alpha));
            continue;
        }
        if (cols == std::vector<std::string>{"unit_id", "delta", "effect", "variance"}) {
            std::ifstream in(path);
            std::string line;
            std::getline(in, line); // header
            std::vector<UnitCurve> local;
            std::size_t line_no = 1;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                const std::vector<std::string> f = split_csv_line(line);
                if (f.size() != 4)
                    throw CsvParseError("study row " + std::to_string(line_no) +
                                        " malformed in " + path);
                const std::string ctx = path + ":" + std::to_string(line_no);
                auto it = std::find_if(local.begin(), local.end(),
                                       [&](const UnitCurve& c) { return c.unit_id == f[0]; });
                if (it == local.end()) {
                    local.push_back(UnitCurve{f[0], {}, {}, {}});
                    it = std::prev(local.end());
                }
                it->delta.push_back(parse_double_field(f[1], ctx));
                it->effect.push_back(parse_double_field(f[2], ctx));
                it->variance.push_back(parse_double_field(f[3], ctx));
            }
            for (UnitCurve& c : local) curves.push_back(std::move(c));
            continue;
        }
        throw CsvParseError("unrecognized meta input header in " + path);
    }
    return curves;
}

} // namespace detail

inline int run_meta(const GlobalOptions& g, const RunConfig& cfg,
                    const std::vector<std::string>& inputs) {
    namespace fs = std::filesystem;
    if (inputs.size() < 1)
        throw std::invalid_argument("meta: at least one input file required");
    fs::create_directories(g.out_dir);

    RunManifest manifest;
    manifest.command = "meta";
    manifest.resolved_config = config_to_json(cfg);
    for (const std::string& path : inputs) manifest.add_input(path);

    const std::vector<UnitCurve> curves =
        detail::read_meta_inputs(inputs, cfg.estimator.alpha);
    if (curves.size() < 2)
        throw std::invalid_argument("meta: need curves from at least 2 units, got " +
                                    std::to_string(curves.size()));
    const PooledCurve pooled = pool_curves(curves, cfg.meta.zero_variance_floor);

    std::ofstream out(fs::path(g.out_dir) / "pooled_curve.csv");
    out << "delta,pooled_effect,pooled_variance,ci_lo,ci_hi,tau2,q,df,p_value,n_units\n";
    for (const PooledPoint& p : pooled.points)
        out << format_double(p.delta) << ',' << format_double(p.pooled) << ','
            << format_double(p.pooled_variance) << ',' << format_double(p.ci_lo) << ','
            << format_double(p.ci_hi) << ',' << format_double(p.tau2) << ','
            << format_double(p.q_statistic) << ',' << p.q_df << ','
            << format_double(p.q_p_value) << ',' << p.n_units << '\n';
    out.close();

    std::ofstream het(fs::path(g.out_dir) / "heterogeneity.csv");
    het << "delta,q,df,p_value,tau2,n_units,n_dropped\n";
    for (const PooledPoint& p : pooled.points)
        het << format_double(p.delta) << ',' << format_double(p.q_statistic) << ',' << p.q_df
            << ',' << format_double(p.q_p_value) << ',' << format_double(p.tau2) << ','
            << p.n_units << ',' << p.n_dropped << '\n';
    het.close();

    nlohmann::json jpts = nlohmann::json::array();
    for (const PooledPoint& p : pooled.points)
        jpts.push_back({{"delta", p.delta},
                        {"pooled_effect", p.pooled},
                        {"pooled_variance", p.pooled_variance},
                        {"ci_lo", p.ci_lo},
                        {"ci_hi", p.ci_hi},
                        {"tau2", p.tau2},
                        {"q", p.q_statistic},
                        {"df", p.q_df},
                        {"p_value", p.q_p_value},
                        {"n_units", p.n_units},
                        {"n_dropped", p.n_dropped}});
    write_json_file((fs::path(g.out_dir) / "pooled_curve.json").string(),
                    nlohmann::json{{"n_input_units", curves.size()}, {"points", jpts}});

    write_json_file((fs::path(g.out_dir) / "resolved_config.json").string(),
                    config_to_json(cfg));
    write_json_file((fs::path(g.out_dir) / "manifest.json").string(), manifest.to_json());
    detail::log(g, "info",
                "pooled " + std::to_string(curves.size()) + " unit curves at " +
                    std::to_string(pooled.points.size()) + " grid points");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
inline int run_simulate(const GlobalOptions& g, RunConfig cfg) {
    namespace fs = std::filesystem;
    if (g.seed) cfg.sim.seed = *g.seed;
    if (!cfg.sim.seed)
        throw ConfigError("simulate: a master seed is required (sim.seed or --seed)");
    fs::create_directories(g.out_dir);

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.resolved_config = config_to_json(cfg);
    manifest.seeds["master"] = *cfg.sim.seed;

    ExperimentConfig exp;
    exp.T_list = cfg.sim.T_list;
    exp.t0_list = cfg.sim.t0_list;
    exp.replicates = cfg.sim.I;
    exp.grid_points = cfg.sim.J;
    exp.delta_min = cfg.sim.delta_min;
    exp.delta_max = cfg.sim.delta_max;
    exp.model = cfg.sim.model;
    exp.master_seed = *cfg.sim.seed;
    exp.workers = g.workers;
    exp.ridge = cfg.propensity.ridge;
    exp.epsilon = cfg.propensity.epsilon;
    exp.k_folds = cfg.propensity.k_folds;

    const auto t0_clock = std::chrono::steady_clock::now();
    const SimReport report = run_experiment(exp);
    manifest.record_stage("experiment",
                          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                        t0_clock)
                              .count());

    std::ofstream out(fs::path(g.out_dir) / "simreport.csv");
    out << "T,t0,model,bias,rmse\n";
    for (const CellReport& c : report.cells)
        out << c.T << ',' << c.t0 << ',' << c.model << ','
            << format_double(c.integrated_bias_x10) << ',' << format_double(c.rmse_x10)
            << '\n';
    out.close();
    for (const CellReport& c : report.cells)
        detail::log(g, "info",
                    "cell T=" + std::to_string(c.T) + " t0=" + std::to_string(c.t0) +
                        " bias(x10)=" + format_double(c.integrated_bias_x10) +
                        " rmse(x10)=" + format_double(c.rmse_x10));

    if (cfg.sim.coverage.enabled) {
        CoverageConfig cov;
        cov.T = cfg.sim.coverage.T;
        cov.t0 = cfg.sim.coverage.t0;
        cov.replicates = cfg.sim.coverage.I;
        cov.grid_points = cfg.sim.J;
        cov.delta_min = cfg.sim.delta_min;
        cov.delta_max = cfg.sim.delta_max;
        cov.model = cfg.sim.model == "oracle" ? "logistic" : cfg.sim.model;
        cov.master_seed = *cfg.sim.seed;
        cov.workers = g.workers;
        cov.ridge = cfg.propensity.ridge;
        cov.epsilon = cfg.propensity.epsilon;
        cov.k_folds = cfg.propensity.k_folds;
        const auto t1_clock = std::chrono::steady_clock::now();
        const std::vector<CoveragePoint> coverage = coverage_experiment(cov);
        manifest.record_stage(
            "coverage", std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                      t1_clock)
                            .count());
        std::ofstream cov_out(fs::path(g.out_dir) / "coverage.csv");
        cov_out << "delta,coverage\n";
        for (const CoveragePoint& p : coverage)
            cov_out << format_double(p.delta) << ',' << format_double(p.coverage) << '\n';
    }

    write_json_file((fs::path(g.out_dir) / "resolved_config.json").string(),
                    config_to_json(cfg));
    write_json_file((fs::path(g.out_dir) / "manifest.json").string(), manifest.to_json());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------
inline int run_demo(const GlobalOptions& g, RunConfig cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(g.out_dir);

    DemoConfig demo;
    if (g.seed) demo.seed = *g.seed;
    if (cfg.features.heat_index_column.empty())
        cfg.features.heat_index_column = "cov_heat_index";

    RunManifest manifest;
    manifest.command = "demo";
    manifest.resolved_config = config_to_json(cfg);
    manifest.seeds["demo"] = demo.seed;

    const auto t_gen = std::chrono::steady_clock::now();
    const std::vector<TimeSeriesPanel> panels = make_demo_panels(demo);
    const std::string panel_path = (fs::path(g.out_dir) / "panel.csv").string();
    write_panels_csv(panel_path, panels);
    manifest.add_input(panel_path);
    manifest.record_stage("generate", std::chrono::duration<double>(
                                          std::chrono::steady_clock::now() - t_gen)
                                          .count());

    long alert_days = 0, total_days = 0;
    for (const TimeSeriesPanel& p : panels)
        for (const DayRecord& r : p.records) {
            alert_days += r.treatment;
            ++total_days;
        }
    const double prevalence =
        static_cast<double>(alert_days) / static_cast<double>(total_days);
    write_json_file((fs::path(g.out_dir) / "demo_summary.json").string(),
                    nlohmann::json{{"units", panels.size()},
                                   {"days", total_days},
                                   {"alert_days", alert_days},
                                   {"treatment_prevalence", prevalence},
                                   {"seed", demo.seed}});
    detail::log(g, "info",
                "demo panel: " + std::to_string(panels.size()) + " units, " +
                    std::to_string(total_days) + " days, prevalence " +
                    format_double(prevalence));

    const auto t_curve = std::chrono::steady_clock::now();
    const int rc = run_curve(g, cfg, panel_path);
    if (rc != kExitOk) return rc;
    manifest.record_stage("curve", std::chrono::duration<double>(
                                       std::chrono::steady_clock::now() - t_curve)
                                       .count());

    std::vector<std::string> curve_files;
    for (const TimeSeriesPanel& p : panels)
        curve_files.push_back(
            (fs::path(g.out_dir) / ("curve_" + detail::sanitize_unit(p.unit_id) + ".csv"))
                .string());
    const auto t_meta = std::chrono::steady_clock::now();
    const int rc_meta = run_meta(g, cfg, curve_files);
    manifest.record_stage("meta", std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t_meta)
                                      .count());
    // the nested stages wrote their own manifests; the final one describes
    // the demo run as a whole
    write_json_file((fs::path(g.out_dir) / "manifest.json").string(), manifest.to_json());
    return rc_meta;
}

} // namespace ipsi::cmd
