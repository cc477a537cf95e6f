#pragma once

// Fitted treatment-probability model (logistic or stacked ensemble) with a
// clipping policy, plus the odds-multiplier transform at the heart of the
// intervention: p -> delta*p / (delta*p + 1 - p).

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ipsi/ensemble.hpp"
#include "ipsi/logistic.hpp"
#include "ipsi/math.hpp"

namespace ipsi {

// Incremental propensity score: multiplies the odds of treatment by delta.
// Exact at the identity (delta = 1 returns p unchanged) and at p in {0, 1}.
inline double incremental_propensity(double p, double delta) {
    if (!(delta > 0.0))
        throw std::invalid_argument("incremental_propensity: delta must be > 0");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("incremental_propensity: p must be in [0,1]");
    const double num = delta * p;
    return num / (num + (1.0 - p));
}

struct PropensityModel {
    std::variant<LogisticModel, StackedEnsemble> fit;
    double epsilon = 1e-6;

    std::string kind() const {
        return std::holds_alternative<LogisticModel>(fit) ? "logistic" : "ensemble";
    }

    double predict_one(std::span<const double> x) const {
        const double p = std::holds_alternative<LogisticModel>(fit)
                             ? std::get<LogisticModel>(fit).predict_one(x)
                             : std::get<StackedEnsemble>(fit).predict_one(x);
        return std::clamp(p, epsilon, 1.0 - epsilon);
    }

    const FitDiagnostics* logistic_diagnostics() const {
        if (const auto* m = std::get_if<LogisticModel>(&fit)) return &m->diagnostics;
        return nullptr;
    }
};

inline std::vector<double> predict_propensity(const PropensityModel& model, const Matrix& x) {
    std::vector<double> p(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) p[i] = model.predict_one(x.row(i));
    return p;
}

// ---------------------------------------------------------------------------
// Versioned JSON persistence
// ---------------------------------------------------------------------------
namespace detail {

inline nlohmann::json logistic_to_json(const LogisticModel& m) {
    return nlohmann::json{{"coefficients", m.coef},
                          {"feature_mean", m.feat_mean},
                          {"feature_sd", m.feat_sd},
                          {"diagnostics",
                           {{"iterations", m.diagnostics.iterations},
                            {"grad_norm", m.diagnostics.grad_norm},
                            {"converged", m.diagnostics.converged},
                            {"ridge", m.diagnostics.ridge}}}};
}

inline LogisticModel logistic_from_json(const nlohmann::json& j) {
    LogisticModel m;
    m.coef = j.at("coefficients").get<std::vector<double>>();
    m.feat_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feat_sd = j.at("feature_sd").get<std::vector<double>>();
    const auto& d = j.at("diagnostics");
    m.diagnostics = FitDiagnostics{d.at("iterations").get<int>(), d.at("grad_norm").get<double>(),
                                   d.at("converged").get<bool>(), d.at("ridge").get<double>()};
    return m;
}

inline nlohmann::json stumps_to_json(const BoostedStumpsModel& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Stump& s : m.stumps)
        arr.push_back({{"feature", s.feature},
                       {"threshold", s.threshold},
                       {"left", s.left_value},
                       {"right", s.right_value}});
    return nlohmann::json{
        {"f0", m.f0}, {"shrinkage", m.shrinkage}, {"arity", m.arity_hint}, {"stumps", arr}};
}

inline BoostedStumpsModel stumps_from_json(const nlohmann::json& j) {
    BoostedStumpsModel m;
    m.f0 = j.at("f0").get<double>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.arity_hint = j.at("arity").get<std::size_t>();
    for (const auto& s : j.at("stumps"))
        m.stumps.push_back(Stump{s.at("feature").get<int>(), s.at("threshold").get<double>(),
                                 s.at("left").get<double>(), s.at("right").get<double>()});
    return m;
}

} // namespace detail

inline nlohmann::json propensity_to_json(const PropensityModel& model) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = model.kind();
    j["epsilon"] = model.epsilon;
    if (const auto* m = std::get_if<LogisticModel>(&model.fit)) {
        j["logistic"] = detail::logistic_to_json(*m);
    } else {
        const auto& ens = std::get<StackedEnsemble>(model.fit);
        nlohmann::json bases = nlohmann::json::array();
        for (std::size_t l = 0; l < ens.learners.size(); ++l) {
            nlohmann::json b;
            b["learner"] = learner_name(ens.learners[l]);
            b["weight"] = ens.weights[l];
            if (ens.learners[l] == BaseLearner::boosted_stumps)
                b["model"] = detail::stumps_to_json(ens.stump_fits[l]);
            else
                b["model"] = detail::logistic_to_json(ens.logistic_fits[l]);
            bases.push_back(std::move(b));
        }
        j["ensemble"] = {{"cv_logloss", ens.cv_logloss},
                         {"cv_logloss_per_learner", ens.cv_logloss_per_learner},
                         {"base_models", std::move(bases)}};
    }
    return j;
}

inline PropensityModel propensity_from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw std::invalid_argument("propensity model: unsupported format_version");
    PropensityModel model;
    model.epsilon = j.at("epsilon").get<double>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "logistic") {
        model.fit = detail::logistic_from_json(j.at("logistic"));
    } else if (kind == "ensemble") {
        StackedEnsemble ens;
        const auto& je = j.at("ensemble");
        ens.cv_logloss = je.at("cv_logloss").get<double>();
        ens.cv_logloss_per_learner =
            je.at("cv_logloss_per_learner").get<std::vector<double>>();
        for (const auto& b : je.at("base_models")) {
            const std::string name = b.at("learner").get<std::string>();
            ens.weights.push_back(b.at("weight").get<double>());
            if (name == "boosted_stumps") {
                ens.learners.push_back(BaseLearner::boosted_stumps);
                ens.stump_fits.push_back(detail::stumps_from_json(b.at("model")));
                ens.logistic_fits.emplace_back();
            } else {
                ens.learners.push_back(name == "logistic" ? BaseLearner::logistic
                                                          : BaseLearner::ridge_logistic);
                ens.logistic_fits.push_back(detail::logistic_from_json(b.at("model")));
                ens.stump_fits.emplace_back();
            }
        }
        model.fit = std::move(ens);
    } else {
        throw std::invalid_argument("propensity model: unknown kind " + kind);
    }
    return model;
}

} // namespace ipsi
