#pragma once

// Depth-one gradient boosting on the Bernoulli deviance: each round fits a
// single split by Newton gain and adds shrunken leaf values to the logit.
// Serves as the flexible member of the propensity base-learner set.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ipsi/math.hpp"

namespace ipsi {

struct Stump {
    int feature = 0;
    double threshold = 0.0;
    double left_value = 0.0;  // x[feature] <= threshold
    double right_value = 0.0;
};

struct BoostedStumpsModel {
    double f0 = 0.0;
    double shrinkage = 0.1;
    std::vector<Stump> stumps;

    std::size_t arity_hint = 0;

    double linear_predictor(std::span<const double> x) const {
        if (arity_hint != 0 && x.size() != arity_hint)
            throw std::invalid_argument("boosted stumps predict: feature arity mismatch");
        double f = f0;
        for (const Stump& s : stumps) {
            const double v = x[static_cast<std::size_t>(s.feature)];
            f += shrinkage * (v <= s.threshold ? s.left_value : s.right_value);
        }
        return f;
    }

    double predict_one(std::span<const double> x) const { return expit(linear_predictor(x)); }
};

struct BoostedStumpsOptions {
    int rounds = 120;
    double shrinkage = 0.1;
    int max_thresholds = 16;
    double leaf_clamp = 4.0;
};

inline BoostedStumpsModel fit_boosted_stumps(const Matrix& x, std::span<const int> y,
                                             const BoostedStumpsOptions& opt = {}) {
    const std::size_t n = x.rows;
    const std::size_t p = x.cols;
    if (y.size() != n) throw std::invalid_argument("fit_boosted_stumps: length mismatch");
    if (n == 0) throw std::invalid_argument("fit_boosted_stumps: no observations");

    double ybar = 0.0;
    for (int v : y) ybar += static_cast<double>(v);
    ybar /= static_cast<double>(n);
    ybar = std::clamp(ybar, 1e-6, 1.0 - 1e-6);

    BoostedStumpsModel model;
    model.f0 = logit(ybar);
    model.shrinkage = opt.shrinkage;
    model.arity_hint = p;

    // quantile-type candidate thresholds per feature, fixed across rounds
    std::vector<std::vector<double>> cuts(p);
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<double> vals(n);
        for (std::size_t i = 0; i < n; ++i) vals[i] = x.at(i, j);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        if (vals.size() < 2) continue;
        const std::size_t m = vals.size() - 1; // candidate midpoints
        const std::size_t take = std::min<std::size_t>(m, static_cast<std::size_t>(opt.max_thresholds));
        for (std::size_t k = 0; k < take; ++k) {
            const std::size_t idx = (m - 1) * k / std::max<std::size_t>(take - 1, 1);
            cuts[j].push_back(0.5 * (vals[idx] + vals[idx + 1]));
        }
        std::sort(cuts[j].begin(), cuts[j].end());
        cuts[j].erase(std::unique(cuts[j].begin(), cuts[j].end()), cuts[j].end());
    }

    std::vector<double> f(n, model.f0), prob(n), resid(n), hess(n);
    const double hmin = 1e-6;

    for (int round = 0; round < opt.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            prob[i] = expit(f[i]);
            resid[i] = static_cast<double>(y[i]) - prob[i];
            hess[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-12);
        }

        double best_gain = 0.0;
        Stump best;
        bool found = false;
        for (std::size_t j = 0; j < p; ++j) {
            if (cuts[j].empty()) continue;
            for (double cut : cuts[j]) {
                double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (x.at(i, j) <= cut) {
                        gl += resid[i];
                        hl += hess[i];
                    } else {
                        gr += resid[i];
                        hr += hess[i];
                    }
                }
                const double gain = gl * gl / (hl + hmin) + gr * gr / (hr + hmin);
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best.feature = static_cast<int>(j);
                    best.threshold = cut;
                    best.left_value = std::clamp(gl / (hl + hmin), -opt.leaf_clamp, opt.leaf_clamp);
                    best.right_value = std::clamp(gr / (hr + hmin), -opt.leaf_clamp, opt.leaf_clamp);
                    found = true;
                }
            }
        }
        if (!found || best_gain < 1e-10) break;

        model.stumps.push_back(best);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = x.at(i, static_cast<std::size_t>(best.feature));
            f[i] += model.shrinkage * (v <= best.threshold ? best.left_value : best.right_value);
        }
    }
    return model;
}

} // namespace ipsi
