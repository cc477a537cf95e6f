#pragma once

// Ridge-penalized logistic regression fitted by iteratively reweighted least
// squares (Newton steps with halving). Features are standardized internally;
// the stored model maps raw feature rows to probabilities.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsi/math.hpp"

namespace ipsi {

struct SeparationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitDiagnostics {
    int iterations = 0;
    double grad_norm = 0.0;
    bool converged = false;
    double ridge = 0.0;
};

struct LogisticModel {
    // coefficients on the standardized scale; [0] is the intercept
    std::vector<double> coef;
    std::vector<double> feat_mean;
    std::vector<double> feat_sd; // 1.0 for constant columns
    FitDiagnostics diagnostics;

    std::size_t arity() const { return feat_mean.size(); }

    double linear_predictor(std::span<const double> x) const {
        if (x.size() != arity())
            throw std::invalid_argument("logistic predict: feature arity mismatch");
        double eta = coef[0];
        for (std::size_t j = 0; j < x.size(); ++j)
            eta += coef[j + 1] * (x[j] - feat_mean[j]) / feat_sd[j];
        return eta;
    }

    double predict_one(std::span<const double> x) const { return expit(linear_predictor(x)); }
};

namespace detail {

inline double penalized_deviance(const Matrix& z, std::span<const int> y,
                                 const std::vector<double>& beta, double ridge) {
    double f = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) {
        double eta = beta[0];
        for (std::size_t j = 0; j < z.cols; ++j) eta += beta[j + 1] * z.at(i, j);
        f += log1pexp(eta) - (y[i] ? eta : 0.0);
    }
    for (double b : beta) f += 0.5 * ridge * b * b;
    return f;
}

} // namespace detail

inline LogisticModel fit_logistic(const Matrix& x, std::span<const int> treatments,
                                  double ridge, int max_iter = 100,
                                  double grad_tol = 1e-8) {
    const std::size_t n = x.rows;
    const std::size_t p = x.cols;
    if (treatments.size() != n)
        throw std::invalid_argument("fit_logistic: feature/treatment length mismatch");
    if (n == 0) throw std::invalid_argument("fit_logistic: no observations");
    if (ridge < 0.0) throw std::invalid_argument("fit_logistic: ridge must be >= 0");

    std::size_t ones = 0;
    for (int w : treatments) ones += static_cast<std::size_t>(w != 0);
    if (ridge == 0.0 && (ones == 0 || ones == n))
        throw SeparationError("fit_logistic: single treatment class with no penalty");

    LogisticModel model;
    model.feat_mean.assign(p, 0.0);
    model.feat_sd.assign(p, 1.0);
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += x.at(i, j);
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x.at(i, j) - m;
            v += d * d;
        }
        v /= static_cast<double>(n);
        model.feat_mean[j] = m;
        model.feat_sd[j] = v > 0.0 ? std::sqrt(v) : 1.0;
    }

    Matrix z(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            z.at(i, j) = (x.at(i, j) - model.feat_mean[j]) / model.feat_sd[j];

    const std::size_t dim = p + 1;
    std::vector<double> beta(dim, 0.0);
    std::vector<double> eta(n, 0.0), prob(n, 0.5);
    std::vector<double> grad(dim), step(dim), hess(dim * dim);

    double f = detail::penalized_deviance(z, treatments, beta, ridge);
    double grad_norm = 0.0;
    int iter = 0;
    bool converged = false;

    for (; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double e = beta[0];
            for (std::size_t j = 0; j < p; ++j) e += beta[j + 1] * z.at(i, j);
            eta[i] = e;
            prob[i] = expit(e);
        }

        grad.assign(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = prob[i] - static_cast<double>(treatments[i]);
            grad[0] += r;
            for (std::size_t j = 0; j < p; ++j) grad[j + 1] += r * z.at(i, j);
        }
        for (std::size_t j = 0; j < dim; ++j) grad[j] += ridge * beta[j];

        grad_norm = 0.0;
        for (double g : grad) grad_norm = std::max(grad_norm, std::fabs(g));
        if (grad_norm <= grad_tol) {
            converged = true;
            break;
        }

        hess.assign(dim * dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double wgt = std::max(prob[i] * (1.0 - prob[i]), 1e-12);
            hess[0] += wgt;
            for (std::size_t j = 0; j < p; ++j) {
                const double zw = wgt * z.at(i, j);
                hess[j + 1] += zw; // column 0
                for (std::size_t k = 0; k <= j; ++k)
                    hess[(j + 1) * dim + (k + 1)] += zw * z.at(i, k);
            }
        }
        for (std::size_t j = 1; j < dim; ++j) hess[j * dim] = hess[j];
        for (std::size_t j = 0; j < dim; ++j)
            for (std::size_t k = j + 1; k < dim; ++k) hess[j * dim + k] = hess[k * dim + j];
        for (std::size_t j = 0; j < dim; ++j) hess[j * dim + j] += ridge + 1e-12;

        step = grad;
        if (!cholesky_solve(hess, dim, step))
            throw SeparationError("fit_logistic: singular IRLS system");

        // Newton step with halving on the penalized deviance
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            std::vector<double> cand(dim);
            for (std::size_t j = 0; j < dim; ++j) cand[j] = beta[j] - scale * step[j];
            const double fc = detail::penalized_deviance(z, treatments, cand, ridge);
            if (fc <= f + 1e-14 * std::fabs(f)) {
                beta = std::move(cand);
                f = fc;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;

        if (ridge == 0.0) {
            // unpenalized fit drifting to infinity; stop and let the margin
            // check below classify it
            double max_beta = 0.0;
            for (double b : beta) max_beta = std::max(max_beta, std::fabs(b));
            if (max_beta > 1e4) break;
        }
    }

    if (ridge == 0.0) {
        // every point classified with a large margin means the likelihood has
        // no finite maximizer
        bool separated = true;
        for (std::size_t i = 0; i < n && separated; ++i) {
            const double signed_eta = (treatments[i] ? 1.0 : -1.0) * eta[i];
            if (signed_eta < 10.0) separated = false;
        }
        if (separated)
            throw SeparationError("fit_logistic: perfect separation");
    }

    model.coef = beta;
    model.diagnostics = FitDiagnostics{iter, grad_norm, converged, ridge};
    return model;
}

} // namespace ipsi
