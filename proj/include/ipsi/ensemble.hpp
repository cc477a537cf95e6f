#pragma once

// Stacked generalization for the treatment probability: base learners are
// cross-fit on contiguous time blocks, the blending weights minimize the
// out-of-fold log-loss over the probability simplex, and survivors are refit
// on the full series.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsi/logistic.hpp"
#include "ipsi/math.hpp"
#include "ipsi/stumps.hpp"

namespace ipsi {

enum class BaseLearner { logistic, ridge_logistic, boosted_stumps };

inline const char* learner_name(BaseLearner l) {
    switch (l) {
        case BaseLearner::logistic: return "logistic";
        case BaseLearner::ridge_logistic: return "ridge_logistic";
        case BaseLearner::boosted_stumps: return "boosted_stumps";
    }
    return "?";
}

struct EnsembleOptions {
    std::vector<BaseLearner> learners{BaseLearner::logistic, BaseLearner::ridge_logistic,
                                      BaseLearner::boosted_stumps};
    double logistic_ridge = 1e-4;
    double strong_ridge = 1.0;
    BoostedStumpsOptions stumps;
    int simplex_iterations = 500;
    double simplex_tol = 1e-10;
};

struct StackedEnsemble {
    std::vector<BaseLearner> learners;
    std::vector<double> weights; // simplex
    std::vector<LogisticModel> logistic_fits;     // parallel, unused slots empty
    std::vector<BoostedStumpsModel> stump_fits;   // parallel, unused slots empty
    double cv_logloss = 0.0;
    std::vector<double> cv_logloss_per_learner;

    double predict_one(std::span<const double> x) const {
        double p = 0.0;
        for (std::size_t l = 0; l < learners.size(); ++l) {
            if (weights[l] == 0.0) continue;
            const double pl = learners[l] == BaseLearner::boosted_stumps
                                  ? stump_fits[l].predict_one(x)
                                  : logistic_fits[l].predict_one(x);
            p += weights[l] * pl;
        }
        return p;
    }
};

namespace detail {

// [begin, end) of held-out block f among k contiguous folds over n rows
inline std::pair<std::size_t, std::size_t> fold_block(std::size_t n, int k, int f) {
    const std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(k);
    const std::size_t hi = n * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(k);
    return {lo, hi};
}

inline double oof_logloss(const Matrix& preds, std::span<const int> y,
                          std::span<const double> w) {
    double loss = 0.0;
    for (std::size_t i = 0; i < preds.rows; ++i) {
        double p = 0.0;
        for (std::size_t l = 0; l < preds.cols; ++l) p += w[l] * preds.at(i, l);
        loss += bernoulli_logloss(static_cast<double>(y[i]), p);
    }
    return loss / static_cast<double>(preds.rows);
}

// projected gradient on the simplex with backtracking; convex objective
inline std::vector<double> minimize_simplex_logloss(const Matrix& preds,
                                                    std::span<const int> y, int iterations,
                                                    double tol) {
    const std::size_t L = preds.cols;
    std::vector<double> w(L, 1.0 / static_cast<double>(L));
    double f = oof_logloss(preds, y, w);
    double step = 1.0;
    for (int it = 0; it < iterations; ++it) {
        std::vector<double> grad(L, 0.0);
        const double invn = 1.0 / static_cast<double>(preds.rows);
        for (std::size_t i = 0; i < preds.rows; ++i) {
            double p = 0.0;
            for (std::size_t l = 0; l < L; ++l) p += w[l] * preds.at(i, l);
            p = std::clamp(p, 1e-12, 1.0 - 1e-12);
            const double gi = (p - static_cast<double>(y[i])) / (p * (1.0 - p)) * invn;
            for (std::size_t l = 0; l < L; ++l) grad[l] += gi * preds.at(i, l);
        }
        bool moved = false;
        for (int bt = 0; bt < 50; ++bt) {
            std::vector<double> cand(L);
            for (std::size_t l = 0; l < L; ++l) cand[l] = w[l] - step * grad[l];
            cand = project_to_simplex(std::move(cand));
            const double fc = oof_logloss(preds, y, cand);
            if (fc < f - 1e-16) {
                const double delta = f - fc;
                w = std::move(cand);
                f = fc;
                moved = true;
                step *= 1.3;
                if (delta < tol) return w;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return w;
}

} // namespace detail

struct StackingWeights {
    std::vector<double> weights;
    double logloss = 0.0;
    std::vector<double> vertex_logloss;
};

// Minimizes out-of-fold log-loss over the simplex. The simplex contains every
// vertex, so the result is never worse than the best single learner.
inline StackingWeights optimize_stacking_weights(const Matrix& oof_preds,
                                                 std::span<const int> y,
                                                 int iterations = 500, double tol = 1e-10) {
    if (oof_preds.cols == 0 || oof_preds.rows != y.size())
        throw std::invalid_argument("optimize_stacking_weights: shape mismatch");
    StackingWeights out;
    out.vertex_logloss.resize(oof_preds.cols);
    for (std::size_t l = 0; l < oof_preds.cols; ++l) {
        std::vector<double> vertex(oof_preds.cols, 0.0);
        vertex[l] = 1.0;
        out.vertex_logloss[l] = detail::oof_logloss(oof_preds, y, vertex);
    }
    out.weights = oof_preds.cols == 1
                      ? std::vector<double>{1.0}
                      : detail::minimize_simplex_logloss(oof_preds, y, iterations, tol);
    out.logloss = detail::oof_logloss(oof_preds, y, out.weights);
    for (std::size_t l = 0; l < oof_preds.cols; ++l) {
        if (out.vertex_logloss[l] < out.logloss) {
            out.logloss = out.vertex_logloss[l];
            out.weights.assign(oof_preds.cols, 0.0);
            out.weights[l] = 1.0;
        }
    }
    return out;
}

inline StackedEnsemble fit_stacked_ensemble(const Matrix& x, std::span<const int> treatments,
                                            int k_folds, const EnsembleOptions& opt = {}) {
    const std::size_t n = x.rows;
    if (k_folds < 2) throw std::invalid_argument("fit_stacked_ensemble: k_folds must be >= 2");
    if (n < 2 * static_cast<std::size_t>(k_folds))
        throw std::invalid_argument("fit_stacked_ensemble: series too short for k folds");
    if (opt.learners.empty())
        throw std::invalid_argument("fit_stacked_ensemble: empty learner set");

    auto fit_predict = [&](BaseLearner kind, const Matrix& xtr, std::span<const int> ytr,
                           const Matrix& xte, std::vector<double>& out) {
        if (kind == BaseLearner::boosted_stumps) {
            const BoostedStumpsModel m = fit_boosted_stumps(xtr, ytr, opt.stumps);
            for (std::size_t i = 0; i < xte.rows; ++i) out.push_back(m.predict_one(xte.row(i)));
        } else {
            const double ridge =
                kind == BaseLearner::logistic ? opt.logistic_ridge : opt.strong_ridge;
            const LogisticModel m = fit_logistic(xtr, ytr, ridge);
            for (std::size_t i = 0; i < xte.rows; ++i) out.push_back(m.predict_one(xte.row(i)));
        }
    };

    // out-of-fold predictions, learner by learner; a learner that fails on
    // any fold is dropped as a whole
    std::vector<BaseLearner> alive;
    std::vector<std::vector<double>> oof_cols;
    std::string last_error = "none";
    for (BaseLearner kind : opt.learners) {
        std::vector<double> col(n, 0.0);
        bool ok = true;
        try {
            for (int fold = 0; fold < k_folds; ++fold) {
                const auto [lo, hi] = detail::fold_block(n, k_folds, fold);
                Matrix xtr(n - (hi - lo), x.cols), xte(hi - lo, x.cols);
                std::vector<int> ytr;
                ytr.reserve(n - (hi - lo));
                std::size_t rtr = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i >= lo && i < hi) continue;
                    for (std::size_t j = 0; j < x.cols; ++j) xtr.at(rtr, j) = x.at(i, j);
                    ytr.push_back(treatments[i]);
                    ++rtr;
                }
                for (std::size_t i = lo; i < hi; ++i)
                    for (std::size_t j = 0; j < x.cols; ++j) xte.at(i - lo, j) = x.at(i, j);
                std::vector<double> preds;
                fit_predict(kind, xtr, ytr, xte, preds);
                for (std::size_t i = lo; i < hi; ++i) col[i] = preds[i - lo];
            }
        } catch (const std::exception& e) {
            ok = false;
            last_error = e.what();
        }
        if (ok) {
            alive.push_back(kind);
            oof_cols.push_back(std::move(col));
        }
    }
    if (alive.empty())
        throw std::runtime_error("fit_stacked_ensemble: all base learners failed (last: " +
                                 last_error + ")");

    Matrix preds(n, alive.size());
    for (std::size_t l = 0; l < alive.size(); ++l)
        for (std::size_t i = 0; i < n; ++i) preds.at(i, l) = oof_cols[l][i];

    StackedEnsemble ens;
    ens.learners = alive;
    const StackingWeights stack = optimize_stacking_weights(
        preds, treatments, opt.simplex_iterations, opt.simplex_tol);
    ens.weights = stack.weights;
    ens.cv_logloss = stack.logloss;
    ens.cv_logloss_per_learner = stack.vertex_logloss;

    // refit survivors on the full series
    ens.logistic_fits.resize(alive.size());
    ens.stump_fits.resize(alive.size());
    for (std::size_t l = 0; l < alive.size(); ++l) {
        if (alive[l] == BaseLearner::boosted_stumps)
            ens.stump_fits[l] = fit_boosted_stumps(x, treatments, opt.stumps);
        else
            ens.logistic_fits[l] = fit_logistic(
                x, treatments,
                alive[l] == BaseLearner::logistic ? opt.logistic_ridge : opt.strong_ridge);
    }
    return ens;
}

} // namespace ipsi
