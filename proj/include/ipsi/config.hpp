#pragma once

// Run configuration: built-in defaults, JSON config file on top, command-line
// flag overrides on top of that. Unknown keys are rejected, and every run
// echoes its fully resolved configuration into the output directory.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace ipsi {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FeaturesConfig {
    std::vector<int> covariate_lags{1, 2};
    std::vector<int> treatment_lags{1, 2};
    bool running_total = true;
    bool moving_average = true;
    int moving_average_window = 0;      // 0 = season-to-date
    std::string heat_index_column;      // covariate column name; empty = none
};

struct PropensityConfig {
    std::string model = "logistic"; // logistic | ensemble
    double ridge = 1e-4;
    double epsilon = 1e-6;
    int k_folds = 5;
};

struct EstimatorConfig {
    int t0 = 3;
    double delta_min = std::exp(-2.3);
    double delta_max = std::exp(2.3);
    int delta_points = 21;
    bool log_spacing = true;
    double alpha = 0.05;
    std::string day_filter = "none"; // none | hot_days
    double hot_day_quantile = 0.95;
    std::string estimand_kind = "temporal_average"; // temporal_average | temporal_total
};

struct MetaConfig {
    double zero_variance_floor = 1e-12;
};

struct SimCoverageConfig {
    bool enabled = true;
    long T = 1000;
    int t0 = 2;
    int I = 200;
};

struct SimConfig {
    std::vector<long> T_list{200, 1000};
    std::vector<int> t0_list{2, 5};
    int I = 100;
    int J = 25;
    double delta_min = 0.1;
    double delta_max = 10.0;
    std::optional<std::uint64_t> seed; // mandatory for simulate
    std::string model = "logistic";
    SimCoverageConfig coverage;
};

struct RunConfig {
    FeaturesConfig features;
    PropensityConfig propensity;
    EstimatorConfig estimator;
    MetaConfig meta;
    SimConfig sim;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown config key '" + where + it.key() + "'");
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace detail

inline void apply_config_json(RunConfig& cfg, const nlohmann::json& j) {
    detail::reject_unknown(j, {"features", "propensity", "estimator", "meta", "sim"}, "");

    if (j.contains("features")) {
        const auto& f = j.at("features");
        detail::reject_unknown(f,
                               {"covariate_lags", "treatment_lags", "running_total",
                                "moving_average", "moving_average_window",
                                "heat_index_column"},
                               "features.");
        detail::maybe(f, "covariate_lags", cfg.features.covariate_lags);
        detail::maybe(f, "treatment_lags", cfg.features.treatment_lags);
        detail::maybe(f, "running_total", cfg.features.running_total);
        detail::maybe(f, "moving_average", cfg.features.moving_average);
        detail::maybe(f, "moving_average_window", cfg.features.moving_average_window);
        detail::maybe(f, "heat_index_column", cfg.features.heat_index_column);
    }
    if (j.contains("propensity")) {
        const auto& p = j.at("propensity");
        detail::reject_unknown(p, {"model", "ridge", "epsilon", "k_folds"}, "propensity.");
        detail::maybe(p, "model", cfg.propensity.model);
        detail::maybe(p, "ridge", cfg.propensity.ridge);
        detail::maybe(p, "epsilon", cfg.propensity.epsilon);
        detail::maybe(p, "k_folds", cfg.propensity.k_folds);
        if (cfg.propensity.model != "logistic" && cfg.propensity.model != "ensemble")
            throw ConfigError("propensity.model must be 'logistic' or 'ensemble'");
    }
    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        detail::reject_unknown(e,
                               {"t0", "delta_min", "delta_max", "delta_points",
                                "log_spacing", "alpha", "day_filter", "hot_day_quantile",
                                "estimand_kind"},
                               "estimator.");
        detail::maybe(e, "t0", cfg.estimator.t0);
        detail::maybe(e, "delta_min", cfg.estimator.delta_min);
        detail::maybe(e, "delta_max", cfg.estimator.delta_max);
        detail::maybe(e, "delta_points", cfg.estimator.delta_points);
        detail::maybe(e, "log_spacing", cfg.estimator.log_spacing);
        detail::maybe(e, "alpha", cfg.estimator.alpha);
        detail::maybe(e, "day_filter", cfg.estimator.day_filter);
        detail::maybe(e, "hot_day_quantile", cfg.estimator.hot_day_quantile);
        detail::maybe(e, "estimand_kind", cfg.estimator.estimand_kind);
        if (cfg.estimator.day_filter != "none" && cfg.estimator.day_filter != "hot_days")
            throw ConfigError("estimator.day_filter must be 'none' or 'hot_days'");
        if (cfg.estimator.estimand_kind != "temporal_average" &&
            cfg.estimator.estimand_kind != "temporal_total")
            throw ConfigError(
                "estimator.estimand_kind must be 'temporal_average' or 'temporal_total'");
    }
    if (j.contains("meta")) {
        const auto& m = j.at("meta");
        detail::reject_unknown(m, {"zero_variance_floor"}, "meta.");
        detail::maybe(m, "zero_variance_floor", cfg.meta.zero_variance_floor);
    }
    if (j.contains("sim")) {
        const auto& s = j.at("sim");
        detail::reject_unknown(s,
                               {"T_list", "t0_list", "I", "J", "delta_min", "delta_max",
                                "seed", "model", "coverage"},
                               "sim.");
        detail::maybe(s, "T_list", cfg.sim.T_list);
        detail::maybe(s, "t0_list", cfg.sim.t0_list);
        detail::maybe(s, "I", cfg.sim.I);
        detail::maybe(s, "J", cfg.sim.J);
        detail::maybe(s, "delta_min", cfg.sim.delta_min);
        detail::maybe(s, "delta_max", cfg.sim.delta_max);
        if (s.contains("seed")) cfg.sim.seed = s.at("seed").get<std::uint64_t>();
        detail::maybe(s, "model", cfg.sim.model);
        if (s.contains("coverage")) {
            const auto& c = s.at("coverage");
            detail::reject_unknown(c, {"enabled", "T", "t0", "I"}, "sim.coverage.");
            detail::maybe(c, "enabled", cfg.sim.coverage.enabled);
            detail::maybe(c, "T", cfg.sim.coverage.T);
            detail::maybe(c, "t0", cfg.sim.coverage.t0);
            detail::maybe(c, "I", cfg.sim.coverage.I);
        }
        if (cfg.sim.model != "logistic" && cfg.sim.model != "ensemble" &&
            cfg.sim.model != "true" && cfg.sim.model != "oracle")
            throw ConfigError("sim.model must be logistic|ensemble|true|oracle");
    }
}

inline RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    apply_config_json(cfg, j);
    return cfg;
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["features"] = {{"covariate_lags", cfg.features.covariate_lags},
                     {"treatment_lags", cfg.features.treatment_lags},
                     {"running_total", cfg.features.running_total},
                     {"moving_average", cfg.features.moving_average},
                     {"moving_average_window", cfg.features.moving_average_window},
                     {"heat_index_column", cfg.features.heat_index_column}};
    j["propensity"] = {{"model", cfg.propensity.model},
                       {"ridge", cfg.propensity.ridge},
                       {"epsilon", cfg.propensity.epsilon},
                       {"k_folds", cfg.propensity.k_folds}};
    j["estimator"] = {{"t0", cfg.estimator.t0},
                      {"delta_min", cfg.estimator.delta_min},
                      {"delta_max", cfg.estimator.delta_max},
                      {"delta_points", cfg.estimator.delta_points},
                      {"log_spacing", cfg.estimator.log_spacing},
                      {"alpha", cfg.estimator.alpha},
                      {"day_filter", cfg.estimator.day_filter},
                      {"hot_day_quantile", cfg.estimator.hot_day_quantile},
                      {"estimand_kind", cfg.estimator.estimand_kind}};
    j["meta"] = {{"zero_variance_floor", cfg.meta.zero_variance_floor}};
    j["sim"] = {{"T_list", cfg.sim.T_list},
                {"t0_list", cfg.sim.t0_list},
                {"I", cfg.sim.I},
                {"J", cfg.sim.J},
                {"delta_min", cfg.sim.delta_min},
                {"delta_max", cfg.sim.delta_max},
                {"model", cfg.sim.model},
                {"coverage",
                 {{"enabled", cfg.sim.coverage.enabled},
                  {"T", cfg.sim.coverage.T},
                  {"t0", cfg.sim.coverage.t0},
                  {"I", cfg.sim.coverage.I}}}};
    if (cfg.sim.seed) j["sim"]["seed"] = *cfg.sim.seed;
    return j;
}

} // namespace ipsi
