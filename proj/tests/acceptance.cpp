// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ipsi/commands.hpp"
#include "ipsi/csv.hpp"
#include "ipsi/estimator.hpp"
#include "ipsi/meta.hpp"
#include "ipsi/propensity.hpp"
#include "ipsi/simlab.hpp"

namespace fs = std::filesystem;
using namespace ipsi;

namespace {

int g_failures = 0;

struct Criterion {
    int id;
    std::string name;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    Criterion(int id_, std::string name_) : id(id_), name(std::move(name_)) {}

    void require(bool cond, const std::string& msg) {
        if (!cond && ok) {
            ok = false;
            detail = msg;
        } else if (!cond) {
            detail += "; " + msg;
        }
    }

    ~Criterion() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", id,
                    name.c_str(), secs, ok ? "" : " -- ", ok ? "" : detail.c_str());
        std::fflush(stdout);
        if (!ok) ++g_failures;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
}

int worker_count() { return 0; } // 0 = hardware concurrency

// ---------------------------------------------------------------------------

void criterion_1_incremental_exactness() {
    Criterion c(1, "incremental propensity exactness");
    struct Case {
        double p, delta, expected;
    };
    const std::vector<Case> cases{{0.9, 10.0, 9.0 / 9.1},   {0.9, 0.1, 0.09 / 0.19},
                                  {0.25, 2.0, 0.4},         {0.5, 2.0, 2.0 / 3.0},
                                  {0.8, 2.0, 8.0 / 9.0}};
    for (const Case& k : cases) {
        const double got = incremental_propensity(k.p, k.delta);
        c.require(std::fabs(got - k.expected) <= 1e-12,
                  "p=" + fmt(k.p) + " delta=" + fmt(k.delta) + " got " + fmt(got) +
                      " want " + fmt(k.expected));
    }
}

void criterion_2_identity_suite() {
    Criterion c(2, "delta=1 identity suite");
    Rng rng(909);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 30 + static_cast<std::size_t>(rng.uniform() * 200);
        std::vector<double> y(n), p(n);
        std::vector<int> w(n);
        EstimationInput in;
        in.n_seasons = 1 + rep % 3;
        for (std::size_t t = 0; t < n; ++t) {
            y[t] = rng.normal() * 5.0;
            w[t] = rng.bernoulli(0.3);
            p[t] = rng.uniform(); // arbitrary, even unclipped
            c.require(incremental_weight(w[t], p[t], 1.0) == 1.0, "weight != 1 exactly");
        }
        in.outcome = y;
        in.treatment = w;
        in.day_idx.resize(n);
        in.season_ord.resize(n);
        const std::size_t block = n / static_cast<std::size_t>(in.n_seasons) + 1;
        for (std::size_t t = 0; t < n; ++t) {
            in.season_ord[t] = static_cast<int>(t / block);
            in.day_idx[t] = static_cast<int>(t % block);
        }

        EstimationConfig cfg;
        cfg.t0 = 1 + rep % 4;
        cfg.delta_grid = {0.5, 1.0, 2.0};
        const auto avg = temporal_average(in, p, 1.0, cfg);
        double plain = 0.0;
        long nd = 0;
        for (std::size_t t = 0; t < n; ++t)
            if (in.day_idx[t] >= cfg.t0 - 1) {
                plain += y[t];
                ++nd;
            }
        plain /= static_cast<double>(nd);
        c.require(std::fabs(avg.mean - plain) <= 1e-12,
                  "tau(1) != plain mean: " + fmt(avg.mean) + " vs " + fmt(plain));

        const EffectCurve curve = effect_curve(in, p, cfg);
        c.require(curve.points[1].delta == 1.0 && curve.points[1].effect == 0.0 &&
                      curve.points[1].effect_lo == 0.0 && curve.points[1].effect_hi == 0.0,
                  "effect at delta=1 not exactly zero");
    }
}

void criterion_3_unbiasedness() {
    Criterion c(3, "unbiasedness with true propensities (T=1000, t0=2, I=500)");
    const std::vector<double> deltas{0.2, 0.5, 1.0, 2.0, 5.0};
    const int I = 500;
    std::vector<std::vector<double>> diffs(deltas.size(), std::vector<double>(I));

    parallel_for(static_cast<std::size_t>(I), worker_count(), [&](std::size_t i) {
        const SimSeries s = generate_dgp({1000, derive_seed(777001, 1000, 3, i)});
        EstimationConfig cfg;
        cfg.t0 = 2;
        cfg.delta_grid = deltas;
        const EstimationInput in = make_estimation_input(s.y, s.w);
        for (std::size_t j = 0; j < deltas.size(); ++j) {
            const double est = temporal_average(in, s.p_true, deltas[j], cfg).value;
            const double truth = oracle_estimand(s, deltas[j], 2);
            diffs[j][i] = est - truth;
        }
    });

    for (std::size_t j = 0; j < deltas.size(); ++j) {
        double m = 0.0, m2 = 0.0;
        for (double d : diffs[j]) {
            m += d;
            m2 += d * d;
        }
        m /= I;
        m2 /= I;
        const double se = std::sqrt(std::max(m2 - m * m, 0.0) / I);
        c.require(std::fabs(m) <= 3.0 * se,
                  "delta=" + fmt(deltas[j]) + ": mean diff " + fmt(m) + " vs 3*se " +
                      fmt(3.0 * se));
    }
}

void criterion_4_table_reproduction() {
    Criterion c(4, "reduced-scale bias/RMSE table, logistic column");
    ExperimentConfig cfg;
    cfg.T_list = {200, 1000};
    cfg.t0_list = {2, 5};
    cfg.replicates = 100;
    cfg.grid_points = 25;
    cfg.model = "logistic";
    cfg.master_seed = 20260808;
    cfg.workers = worker_count();
    const SimReport report = run_experiment(cfg);

    struct Want {
        long T;
        int t0;
        double bias, rmse;
    };
    const std::vector<Want> wants{
        {200, 2, 0.85, 1.17}, {200, 5, 1.78, 2.12}, {1000, 2, 0.36, 0.51}, {1000, 5, 0.67, 0.79}};
    auto cell = [&](long T, int t0) -> const CellReport& {
        for (const CellReport& r : report.cells)
            if (r.T == T && r.t0 == t0) return r;
        throw std::logic_error("cell missing");
    };
    for (const Want& w : wants) {
        const CellReport& r = cell(w.T, w.t0);
        const double bias_rel = std::fabs(r.integrated_bias_x10 - w.bias) / w.bias;
        const double rmse_rel = std::fabs(r.rmse_x10 - w.rmse) / w.rmse;
        c.require(bias_rel <= 0.5, "bias(" + std::to_string(w.T) + "," +
                                       std::to_string(w.t0) + ")=" +
                                       fmt(r.integrated_bias_x10) + " want " + fmt(w.bias) +
                                       " +/-50%");
        c.require(rmse_rel <= 0.5, "rmse(" + std::to_string(w.T) + "," +
                                       std::to_string(w.t0) + ")=" + fmt(r.rmse_x10) +
                                       " want " + fmt(w.rmse) + " +/-50%");
        std::printf("         cell T=%ld t0=%d: bias(x10)=%.3f [table %.2f]  "
                    "rmse(x10)=%.3f [table %.2f]\n",
                    w.T, w.t0, r.integrated_bias_x10, w.bias, r.rmse_x10, w.rmse);
    }
    // monotone trends: down in T at fixed t0, up in t0 at fixed T
    for (int t0 : {2, 5}) {
        c.require(cell(1000, t0).integrated_bias_x10 < cell(200, t0).integrated_bias_x10,
                  "bias not decreasing in T at t0=" + std::to_string(t0));
        c.require(cell(1000, t0).rmse_x10 < cell(200, t0).rmse_x10,
                  "rmse not decreasing in T at t0=" + std::to_string(t0));
    }
    for (long T : {200L, 1000L}) {
        c.require(cell(T, 5).integrated_bias_x10 > cell(T, 2).integrated_bias_x10,
                  "bias not increasing in t0 at T=" + std::to_string(T));
        c.require(cell(T, 5).rmse_x10 > cell(T, 2).rmse_x10,
                  "rmse not increasing in t0 at T=" + std::to_string(T));
    }

    // optional slow rows (IPSI_ACCEPTANCE_SLOW=1): the T=5000 cells carry no
    // pinned tolerance; the monotone decay into T=5000 must still hold
    if (const char* slow = std::getenv("IPSI_ACCEPTANCE_SLOW"); slow && slow[0] == '1') {
        ExperimentConfig big = cfg;
        big.T_list = {5000};
        const SimReport rep5k = run_experiment(big);
        const std::vector<Want> wants5k{{5000, 2, 0.11, 0.19}, {5000, 5, 0.21, 0.28}};
        for (const Want& w : wants5k) {
            const CellReport* r = nullptr;
            for (const CellReport& rc : rep5k.cells)
                if (rc.T == w.T && rc.t0 == w.t0) r = &rc;
            c.require(r != nullptr, "missing 5000 cell");
            if (!r) continue;
            std::printf("         cell T=%ld t0=%d: bias(x10)=%.3f [table %.2f]  "
                        "rmse(x10)=%.3f [table %.2f]\n",
                        w.T, w.t0, r->integrated_bias_x10, w.bias, r->rmse_x10, w.rmse);
            c.require(r->integrated_bias_x10 < cell(1000, w.t0).integrated_bias_x10,
                      "bias not decreasing into T=5000");
            c.require(r->rmse_x10 < cell(1000, w.t0).rmse_x10,
                      "rmse not decreasing into T=5000");
        }
    }
}

void criterion_5_coverage() {
    Criterion c(5, "pointwise 95% band coverage (T=1000, t0=2, I=200)");
    CoverageConfig cfg;
    cfg.T = 1000;
    cfg.t0 = 2;
    cfg.replicates = 200;
    cfg.grid_points = 25;
    cfg.model = "logistic";
    cfg.master_seed = 555123;
    cfg.workers = worker_count();
    const std::vector<CoveragePoint> pts = coverage_experiment(cfg);
    double min_cov = 1.0;
    for (const CoveragePoint& p : pts) {
        min_cov = std::min(min_cov, p.coverage);
        c.require(p.coverage >= 0.90,
                  "coverage " + fmt(p.coverage) + " at delta " + fmt(p.delta));
    }
    std::printf("         min coverage over 25-point grid: %.3f\n", min_cov);
}

void criterion_6_mean_one_weights() {
    Criterion c(6, "mean-one weight products under the true propensity");
    const int t0 = 3;
    const long windows = 10000;
    const SimSeries s = generate_dgp({windows * t0, 60601});
    for (double delta : {0.5, 2.0}) {
        double acc = 0.0, acc2 = 0.0;
        for (long k = 0; k < windows; ++k) {
            double prod = 1.0;
            for (int j = 0; j < t0; ++j) {
                const auto t = static_cast<std::size_t>(k * t0 + j);
                prod *= incremental_weight(s.w[t], s.p_true[t], delta);
            }
            acc += prod;
            acc2 += prod * prod;
        }
        const double mean = acc / static_cast<double>(windows);
        const double se = std::sqrt(
            std::max(acc2 / static_cast<double>(windows) - mean * mean, 0.0) /
            static_cast<double>(windows));
        c.require(std::fabs(mean - 1.0) <= 3.0 * se,
                  "delta=" + fmt(delta) + ": mean " + fmt(mean) + " vs 3*se " + fmt(3 * se));
    }
}

void criterion_7_meta_exactness() {
    Criterion c(7, "meta-analysis exactness");
    const std::vector<StudyEstimate> studies{{"a", 1.0, 1.0}, {"b", 3.0, 1.0}};
    const MetaResult r = pool_random_effects(studies);
    c.require(std::fabs(r.tau2 - 1.0) <= 1e-9, "tau2 " + fmt(r.tau2));
    c.require(std::fabs(r.weights[0] - 0.5) <= 1e-9 && std::fabs(r.weights[1] - 0.5) <= 1e-9,
              "weights " + fmt(r.weights[0]) + "," + fmt(r.weights[1]));
    c.require(std::fabs(r.pooled - 2.0) <= 1e-9, "pooled " + fmt(r.pooled));
    c.require(std::fabs(r.pooled_variance - 1.0) <= 1e-9, "variance " + fmt(r.pooled_variance));
    c.require(std::fabs(r.q_statistic - 2.0) <= 1e-9, "Q " + fmt(r.q_statistic));
    c.require(std::fabs(r.q_p_value - 0.15729920705028513) <= 1e-9,
              "p " + fmt(r.q_p_value));

    const std::vector<StudyEstimate> same{{"a", 1.5, 0.7}, {"b", 1.5, 0.7}, {"c", 1.5, 0.7}};
    const MetaResult r2 = pool_random_effects(same);
    c.require(r2.tau2 == 0.0, "identical inputs tau2 != 0");
    c.require(r2.q_p_value == 1.0, "identical inputs p != 1");
}

void criterion_8_oracle_self_consistency() {
    Criterion c(8, "enumeration oracle vs Monte Carlo rollouts (10 triples)");
    Rng rng(880011);
    std::vector<std::array<double, 3>> triples;
    for (int k = 0; k < 10; ++k) {
        const double seed = std::floor(rng.uniform() * 1e6);
        const double delta = 0.2 + 4.8 * rng.uniform();
        const double t0 = 1.0 + std::floor(rng.uniform() * 3.0);
        triples.push_back({seed, delta, t0});
    }
    std::vector<std::string> problems(triples.size());
    parallel_for(triples.size(), worker_count(), [&](std::size_t k) {
        const auto [seedf, delta, t0f] = triples[k];
        const SimSeries s = generate_dgp({120, static_cast<std::uint64_t>(seedf)});
        const int t0 = static_cast<int>(t0f);
        const double exact = oracle_estimand(s, delta, t0);
        const OracleMc mc =
            oracle_estimand_mc(s, delta, t0, 100000, derive_seed(42, k, 8));
        if (std::fabs(exact - mc.mean) > 3.0 * mc.std_error)
            problems[k] = "triple " + std::to_string(k) + ": |" + fmt(exact) + " - " +
                          fmt(mc.mean) + "| > 3*" + fmt(mc.std_error);
    });
    for (const std::string& p : problems) c.require(p.empty(), p);
}

void criterion_9_determinism_roundtrip() {
    Criterion c(9, "seeded determinism and CSV round-trips");
    const fs::path base =
        fs::temp_directory_path() / ("ipsi_acc_" + std::to_string(std::random_device{}()));
    fs::create_directories(base);

    auto result_files = [](const fs::path& dir) {
        std::vector<std::string> names;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file() && e.path().filename() != "manifest.json")
                names.push_back(fs::relative(e.path(), dir).string());
        std::sort(names.begin(), names.end());
        return names;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    auto compare_dirs = [&](const fs::path& a, const fs::path& b, const std::string& what) {
        const auto fa = result_files(a);
        const auto fb = result_files(b);
        c.require(fa == fb, what + ": differing file sets");
        for (const std::string& name : fa)
            c.require(slurp(a / name) == slurp(b / name), what + ": " + name + " differs");
    };

    RunConfig sim_cfg;
    sim_cfg.sim.T_list = {100};
    sim_cfg.sim.t0_list = {2};
    sim_cfg.sim.I = 5;
    sim_cfg.sim.J = 5;
    sim_cfg.sim.model = "logistic";
    sim_cfg.sim.coverage.enabled = true;
    sim_cfg.sim.coverage.T = 100;
    sim_cfg.sim.coverage.I = 5;
    for (const char* name : {"sim1", "sim2"}) {
        cmd::GlobalOptions g;
        g.out_dir = (base / name).string();
        g.seed = 314159;
        g.workers = 2;
        g.log_level = "error";
        cmd::run_simulate(g, sim_cfg);
    }
    compare_dirs(base / "sim1", base / "sim2", "simulate");

    RunConfig demo_cfg;
    demo_cfg.estimator.delta_points = 11;
    for (const char* name : {"demo1", "demo2"}) {
        cmd::GlobalOptions g;
        g.out_dir = (base / name).string();
        g.seed = 42;
        g.workers = 2;
        g.log_level = "error";
        cmd::run_demo(g, demo_cfg);
    }
    compare_dirs(base / "demo1", base / "demo2", "demo");

    // CSV round-trips reproduce doubles exactly
    Rng rng(4321);
    EffectCurve curve;
    for (int j = 0; j < 9; ++j) {
        CurvePoint p;
        p.delta = std::exp(rng.normal());
        p.tau_hat = rng.normal() * 1e3;
        p.sigma_hat = rng.uniform();
        p.band_lo = p.tau_hat - rng.uniform();
        p.band_hi = p.tau_hat + rng.uniform();
        p.effect = rng.normal() * 1e-7;
        p.effect_lo = p.effect - rng.uniform();
        p.effect_hi = p.effect + rng.uniform();
        p.n_days = 100 + j;
        curve.points.push_back(p);
    }
    const fs::path curve_path = base / "roundtrip_curve.csv";
    write_curve_csv(curve_path.string(), curve);
    const EffectCurve back = read_curve_csv(curve_path.string());
    for (std::size_t j = 0; j < curve.points.size(); ++j) {
        c.require(back.points[j].tau_hat == curve.points[j].tau_hat &&
                      back.points[j].effect == curve.points[j].effect &&
                      back.points[j].sigma_hat == curve.points[j].sigma_hat,
                  "curve round trip inexact at row " + std::to_string(j));
    }

    const auto panels = make_demo_panels({2, 1, 2016, 5});
    const fs::path panel_path = base / "roundtrip_panel.csv";
    write_panels_csv(panel_path.string(), panels);
    const auto panels_back = read_panels_csv(panel_path.string());
    bool panel_ok = panels_back.size() == panels.size();
    for (std::size_t u = 0; panel_ok && u < panels.size(); ++u) {
        panel_ok = panels_back[u].records.size() == panels[u].records.size();
        for (std::size_t t = 0; panel_ok && t < panels[u].records.size(); ++t)
            panel_ok = panels_back[u].records[t].outcome == panels[u].records[t].outcome &&
                       panels_back[u].records[t].covariates == panels[u].records[t].covariates;
    }
    c.require(panel_ok, "panel round trip inexact");

    std::error_code ec;
    fs::remove_all(base, ec);
}

} // namespace

int main() {
    std::printf("acceptance suite (criteria 1-9)\n");
    criterion_1_incremental_exactness();
    criterion_2_identity_suite();
    criterion_7_meta_exactness();
    criterion_6_mean_one_weights();
    criterion_9_determinism_roundtrip();
    criterion_8_oracle_self_consistency();
    criterion_3_unbiasedness();
    criterion_5_coverage();
    criterion_4_table_reproduction();
    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
