#pragma once

// Synthetic benchmark laboratory: the five-covariate Gaussian DGP with a
// near-deterministic assignment mechanism, a brute-force oracle for the true
// t0-step estimands (full path enumeration, cross-checked by Monte Carlo
// rollouts), and the bias/RMSE/coverage experiment runners.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipsi/ensemble.hpp"
#include "ipsi/estimator.hpp"
#include "ipsi/logistic.hpp"
#include "ipsi/math.hpp"
#include "ipsi/parallel.hpp"
#include "ipsi/propensity.hpp"
#include "ipsi/rng.hpp"

namespace ipsi {

inline constexpr int kDgpCovariates = 5;

struct DgpConfig {
    long T = 0;
    std::uint64_t seed = 0;
};

struct SimSeries {
    Matrix cov;                  // T x 5
    std::vector<double> cov_sum; // row sums of cov
    std::vector<int> w;
    std::vector<double> y;
    std::vector<double> p_true; // realized propensity given observed W_{t-1}
    double nonoverlap_fraction = 0.0;
};

// logit p_t = 10 * (sum of covariates) - W_{t-1} + 0.5
inline double true_propensity(double cov_sum, int w_prev) {
    return expit(10.0 * cov_sum - static_cast<double>(w_prev) + 0.5);
}

// E[Y_t | W_t, W_{t-1}, C_t] = 3 W_t + W_{t-1} + sum of covariates
inline double outcome_mean(double cov_sum, int w, int w_prev) {
    return 3.0 * static_cast<double>(w) + static_cast<double>(w_prev) + cov_sum;
}

inline SimSeries generate_dgp(const DgpConfig& cfg) {
    if (cfg.T < 2) throw std::invalid_argument("generate_dgp: T must be >= 2");
    const auto n = static_cast<std::size_t>(cfg.T);
    Rng rng(cfg.seed);

    SimSeries s;
    s.cov = Matrix(n, kDgpCovariates);
    s.cov_sum.resize(n);
    s.w.resize(n);
    s.y.resize(n);
    s.p_true.resize(n);

    int w_prev = 0; // W_0 = 0
    std::size_t extreme = 0;
    for (std::size_t t = 0; t < n; ++t) {
        double cs = 0.0;
        for (int j = 0; j < kDgpCovariates; ++j) {
            const double c = rng.normal();
            s.cov.at(t, static_cast<std::size_t>(j)) = c;
            cs += c;
        }
        s.cov_sum[t] = cs;
        const double p = true_propensity(cs, w_prev);
        s.p_true[t] = p;
        if (p > 0.9 || p < 0.1) ++extreme;
        const int w = rng.bernoulli(p);
        s.w[t] = w;
        s.y[t] = outcome_mean(cs, w, w_prev) + rng.normal();
        w_prev = w;
    }
    s.nonoverlap_fraction = static_cast<double>(extreme) / static_cast<double>(n);
    // the assignment mechanism is meant to be mostly deterministic; a long
    // series far from that indicates the generator itself is wrong
    if (cfg.T >= 1000 && s.nonoverlap_fraction <= 0.5)
        throw std::logic_error("generate_dgp: non-overlap fraction implausibly low");
    return s;
}

// Feature block for the correctly specified propensity model {C_t, W_{t-1}}.
inline Matrix sim_feature_matrix(const SimSeries& s) {
    const std::size_t n = s.w.size();
    Matrix x(n, kDgpCovariates + 1);
    for (std::size_t t = 0; t < n; ++t) {
        for (int j = 0; j < kDgpCovariates; ++j)
            x.at(t, static_cast<std::size_t>(j)) = s.cov.at(t, static_cast<std::size_t>(j));
        x.at(t, kDgpCovariates) = t == 0 ? 0.0 : static_cast<double>(s.w[t - 1]);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Oracle: true t0-step temporal average by exhaustive path enumeration.
// ---------------------------------------------------------------------------
inline double oracle_estimand(const SimSeries& s, double delta, int t0,
                              const std::optional<DayMask>& day_filter = {}) {
    const std::size_t n = s.w.size();
    if (t0 < 1) throw std::invalid_argument("oracle_estimand: t0 must be >= 1");
    if (t0 > 20) throw std::invalid_argument("oracle_estimand: 2^t0 paths exceed guard");
    if (!(delta > 0.0)) throw std::invalid_argument("oracle_estimand: delta must be > 0");
    if (day_filter && day_filter->size() != n)
        throw std::invalid_argument("oracle_estimand: day_filter length mismatch");

    const std::uint32_t paths = 1u << t0;
    double sum = 0.0;
    long count = 0;

    for (std::size_t t = static_cast<std::size_t>(t0 - 1); t < n; ++t) {
        if (day_filter && !(*day_filter)[t]) continue;
        const std::size_t start = t - static_cast<std::size_t>(t0 - 1);
        // treatment entering the window: observed, or 0 at the series start
        const int w_enter = start == 0 ? 0 : s.w[start - 1];

        double tau_t = 0.0;
        for (std::uint32_t m = 0; m < paths; ++m) {
            double weight = 1.0;
            int w_prev = w_enter;
            int w_cur = w_enter;
            for (int k = 0; k < t0; ++k) {
                w_prev = w_cur;
                w_cur = static_cast<int>((m >> k) & 1u);
                const double p = true_propensity(s.cov_sum[start + static_cast<std::size_t>(k)],
                                                 w_prev);
                const double p_inc = incremental_propensity(p, delta);
                weight *= w_cur ? p_inc : 1.0 - p_inc;
            }
            const int w_last_prev = t0 >= 2 ? static_cast<int>((m >> (t0 - 2)) & 1u) : w_enter;
            tau_t += weight * outcome_mean(s.cov_sum[t], w_cur, w_last_prev);
        }
        sum += tau_t;
        ++count;
    }
    if (count == 0) throw std::invalid_argument("oracle_estimand: no usable days");
    return sum / static_cast<double>(count);
}

struct OracleMc {
    double mean = 0.0;
    double std_error = 0.0;
    long rollouts = 0;
};

// Monte Carlo rollout cross-check of the enumeration oracle: sample the
// intervened path sequentially, score the true conditional outcome mean.
inline OracleMc oracle_estimand_mc(const SimSeries& s, double delta, int t0, long rollouts,
                                   std::uint64_t seed,
                                   const std::optional<DayMask>& day_filter = {}) {
    const std::size_t n = s.w.size();
    if (t0 < 1) throw std::invalid_argument("oracle_estimand_mc: t0 must be >= 1");
    if (rollouts < 2) throw std::invalid_argument("oracle_estimand_mc: rollouts must be >= 2");

    std::vector<std::size_t> days;
    for (std::size_t t = static_cast<std::size_t>(t0 - 1); t < n; ++t) {
        if (day_filter && !(*day_filter)[t]) continue;
        days.push_back(t);
    }
    if (days.empty()) throw std::invalid_argument("oracle_estimand_mc: no usable days");

    Rng rng(seed);
    double acc = 0.0, acc2 = 0.0;
    for (long r = 0; r < rollouts; ++r) {
        double day_sum = 0.0;
        for (std::size_t t : days) {
            const std::size_t start = t - static_cast<std::size_t>(t0 - 1);
            int w_prev = start == 0 ? 0 : s.w[start - 1];
            int w_cur = w_prev;
            int w_before_last = w_prev;
            for (int k = 0; k < t0; ++k) {
                w_before_last = w_cur;
                const double p = true_propensity(s.cov_sum[start + static_cast<std::size_t>(k)],
                                                 w_cur);
                w_cur = rng.bernoulli(incremental_propensity(p, delta));
            }
            day_sum += outcome_mean(s.cov_sum[t], w_cur, w_before_last);
        }
        const double v = day_sum / static_cast<double>(days.size());
        acc += v;
        acc2 += v * v;
    }
    OracleMc out;
    out.rollouts = rollouts;
    out.mean = acc / static_cast<double>(rollouts);
    const double var =
        std::max(0.0, acc2 / static_cast<double>(rollouts) - out.mean * out.mean);
    out.std_error = std::sqrt(var / static_cast<double>(rollouts));
    return out;
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------
struct ExperimentConfig {
    std::vector<long> T_list{200, 1000};
    std::vector<int> t0_list{2, 5};
    int replicates = 100; // I
    int grid_points = 25; // J
    double delta_min = 0.1;
    double delta_max = 10.0;
    std::string model = "logistic"; // logistic | ensemble | true | oracle
    std::uint64_t master_seed = 0;
    int workers = 0;
    double ridge = 1e-4;
    double epsilon = 1e-6;
    int k_folds = 5;
};

struct CellReport {
    long T = 0;
    int t0 = 0;
    std::string model;
    double integrated_bias_x10 = 0.0;
    double rmse_x10 = 0.0;
    double walltime_s = 0.0;
};

struct SimReport {
    std::vector<CellReport> cells;
};

namespace detail {

inline std::vector<double> fitted_propensities(const SimSeries& s,
                                               const ExperimentConfig& cfg) {
    if (cfg.model == "true") return s.p_true;
    const Matrix x = sim_feature_matrix(s);
    PropensityModel model;
    model.epsilon = cfg.epsilon;
    if (cfg.model == "logistic") {
        model.fit = fit_logistic(x, s.w, cfg.ridge);
    } else if (cfg.model == "ensemble") {
        EnsembleOptions opt;
        opt.logistic_ridge = cfg.ridge;
        model.fit = fit_stacked_ensemble(x, s.w, cfg.k_folds, opt);
    } else {
        throw std::invalid_argument("run_experiment: unknown model " + cfg.model);
    }
    return predict_propensity(model, x);
}

// sorted before summing so aggregates are invariant to replicate order
inline double stable_mean(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

} // namespace detail

inline SimReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.replicates < 1 || cfg.grid_points < 1)
        throw std::invalid_argument("run_experiment: I and J must be >= 1");
    if (cfg.model != "logistic" && cfg.model != "ensemble" && cfg.model != "true" &&
        cfg.model != "oracle")
        throw std::invalid_argument("run_experiment: unknown model " + cfg.model);
    const std::vector<double> grid =
        make_delta_grid(cfg.delta_min, cfg.delta_max, cfg.grid_points, false);

    SimReport report;
    for (long T : cfg.T_list) {
        for (int t0 : cfg.t0_list) {
            const auto t_start = std::chrono::steady_clock::now();
            const auto I = static_cast<std::size_t>(cfg.replicates);
            const auto J = grid.size();
            // diffs[i][j] = estimate - oracle
            std::vector<std::vector<double>> diffs(I, std::vector<double>(J, 0.0));

            parallel_for(I, cfg.workers, [&](std::size_t i) {
                const DgpConfig dgp{T, derive_seed(cfg.master_seed,
                                                   static_cast<std::uint64_t>(T), 1, i)};
                const SimSeries s = generate_dgp(dgp);
                EstimationConfig est_cfg;
                est_cfg.t0 = t0;
                est_cfg.delta_grid = grid;
                const EstimationInput input = make_estimation_input(s.y, s.w);

                std::vector<double> p_hat;
                if (cfg.model != "oracle") p_hat = detail::fitted_propensities(s, cfg);

                for (std::size_t j = 0; j < J; ++j) {
                    const double truth = oracle_estimand(s, grid[j], t0);
                    const double est =
                        cfg.model == "oracle"
                            ? truth
                            : temporal_average(input, p_hat, grid[j], est_cfg).value;
                    diffs[i][j] = est - truth;
                }
            });

            // per grid point: mean absolute error and root mean squared error
            // over replicates, each averaged across the grid
            double bias_sum = 0.0, rmse_sum = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                std::vector<double> dj(I), dj2(I);
                for (std::size_t i = 0; i < I; ++i) {
                    dj[i] = std::fabs(diffs[i][j]);
                    dj2[i] = diffs[i][j] * diffs[i][j];
                }
                bias_sum += detail::stable_mean(std::move(dj));
                rmse_sum += std::sqrt(detail::stable_mean(std::move(dj2)));
            }
            CellReport cell;
            cell.T = T;
            cell.t0 = t0;
            cell.model = cfg.model;
            cell.integrated_bias_x10 = 10.0 * bias_sum / static_cast<double>(J);
            cell.rmse_x10 = 10.0 * rmse_sum / static_cast<double>(J);
            cell.walltime_s = std::chrono::duration<double>(
                                  std::chrono::steady_clock::now() - t_start)
                                  .count();
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

struct CoverageConfig {
    long T = 1000;
    int t0 = 2;
    int replicates = 200;
    int grid_points = 25;
    double delta_min = 0.1;
    double delta_max = 10.0;
    double alpha = 0.05;
    std::string model = "logistic";
    std::uint64_t master_seed = 0;
    int workers = 0;
    double ridge = 1e-4;
    double epsilon = 1e-6;
    int k_folds = 5;
};

struct CoveragePoint {
    double delta = 0.0;
    double coverage = 0.0;
};

inline std::vector<CoveragePoint> coverage_experiment(const CoverageConfig& cfg) {
    const std::vector<double> grid =
        make_delta_grid(cfg.delta_min, cfg.delta_max, cfg.grid_points, false);
    const auto I = static_cast<std::size_t>(cfg.replicates);
    std::vector<std::vector<char>> covered(I, std::vector<char>(grid.size(), 0));

    ExperimentConfig fit_cfg;
    fit_cfg.model = cfg.model;
    fit_cfg.ridge = cfg.ridge;
    fit_cfg.epsilon = cfg.epsilon;
    fit_cfg.k_folds = cfg.k_folds;

    parallel_for(I, cfg.workers, [&](std::size_t i) {
        const DgpConfig dgp{cfg.T, derive_seed(cfg.master_seed,
                                               static_cast<std::uint64_t>(cfg.T), 2, i)};
        const SimSeries s = generate_dgp(dgp);
        EstimationConfig est_cfg;
        est_cfg.t0 = cfg.t0;
        est_cfg.delta_grid = grid;
        est_cfg.alpha = cfg.alpha;
        const EstimationInput input = make_estimation_input(s.y, s.w);
        const std::vector<double> p_hat = detail::fitted_propensities(s, fit_cfg);
        const EffectCurve curve = effect_curve(input, p_hat, est_cfg);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double truth = oracle_estimand(s, grid[j], cfg.t0);
            covered[i][j] =
                curve.points[j].band_lo <= truth && truth <= curve.points[j].band_hi;
        }
    });

    std::vector<CoveragePoint> out;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        long hits = 0;
        for (std::size_t i = 0; i < I; ++i) hits += covered[i][j];
        out.push_back(CoveragePoint{grid[j],
                                    static_cast<double>(hits) / static_cast<double>(I)});
    }
    return out;
}

} // namespace ipsi
