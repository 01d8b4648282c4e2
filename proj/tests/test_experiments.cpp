#include <gtest/gtest.h>

#include <cmath>

#include "klstd/experiments.hpp"
#include "klstd/rng.hpp"

using namespace klstd;
using experiments::SweepConfig;

TEST(LogLogFit, ExactPowerLaws) {
    std::vector<std::pair<double, double>> quad;
    for (double x : {1.0, 2.0, 4.0, 9.0}) quad.emplace_back(x, x * x);
    auto fit = experiments::fit_loglog_slope(quad);
    EXPECT_NEAR(fit.slope, 2.0, 1e-12);
    EXPECT_NEAR(fit.stderr_, 0.0, 1e-12);

    std::vector<std::pair<double, double>> inv;
    for (double x : {1.0, 3.0, 10.0}) inv.emplace_back(x, 3.0 / x);
    EXPECT_NEAR(experiments::fit_loglog_slope(inv).slope, -1.0, 1e-12);
}

TEST(LogLogFit, NoisyPowerLaw) {
    // six points on y = x^{-2/3} (1 +/- 0.05): slope within [-0.75, -0.58]
    rng::CounterRng gen(3);
    std::vector<std::pair<double, double>> pts;
    for (double x : {10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0}) {
        double noise = gen.bernoulli(0.5) ? 1.05 : 0.95;
        pts.emplace_back(x, std::pow(x, -2.0 / 3.0) * noise);
    }
    auto fit = experiments::fit_loglog_slope(pts);
    EXPECT_GE(fit.slope, -0.75);
    EXPECT_LE(fit.slope, -0.58);
    EXPECT_GT(fit.stderr_, 0.0);
}

TEST(LogLogFit, Degenerate) {
    std::vector<std::pair<double, double>> same{{2.0, 1.0}, {2.0, 3.0}};
    EXPECT_THROW(experiments::fit_loglog_slope(same), std::invalid_argument);
    EXPECT_THROW(experiments::fit_loglog_slope({{1.0, 2.0}}), std::invalid_argument);
}

namespace {

SweepConfig tiny_config() {
    SweepConfig cfg;
    cfg.kernel_spec = "exp";
    cfg.ensemble = "easy";
    cfg.gamma_grid = {0.9};
    cfg.n_grid = {32, 64, 128};
    cfg.trials = 5;
    cfg.seed = 17;
    cfg.truncation = 64;
    return cfg;
}

}  // namespace

TEST(SweepN, DeterministicByteIdenticalCsv) {
    auto cfg = tiny_config();
    auto r1 = experiments::run_sweep_n(cfg);
    auto r2 = experiments::run_sweep_n(cfg);
    EXPECT_EQ(experiments::csv_string(r1, true), experiments::csv_string(r2, true));
}

TEST(SweepN, RowContractsHold) {
    auto cfg = tiny_config();
    auto res = experiments::run_sweep_n(cfg);
    ASSERT_EQ(res.rows.size(), 3u);
    EXPECT_LT(res.rows.back().mean_mse, res.rows.front().mean_mse);  // monotone MSE
    for (const auto& row : res.rows) {
        EXPECT_EQ(row.trials, 5u);
        EXPECT_EQ(row.missing, 0u);
        EXPECT_GT(row.mean_mse, 0.0);
        // recorded lambda_n = c0 (1-gamma) delta_n^2 exactly
        EXPECT_EQ(row.lambda_n, cfg.c0 * (1.0 - row.gamma) * row.delta_n * row.delta_n);
    }
    ASSERT_TRUE(res.fit.has_value());
    EXPECT_LT(res.fit->slope, 0.0);
    ASSERT_TRUE(res.predicted.has_value());
    EXPECT_DOUBLE_EQ(*res.predicted, -1.0);
}

TEST(SweepN, SingleRowSlopeAbsent) {
    auto cfg = tiny_config();
    cfg.n_grid = {64};
    cfg.trials = 1;
    auto res = experiments::run_sweep_n(cfg);
    ASSERT_EQ(res.rows.size(), 1u);
    EXPECT_FALSE(res.fit.has_value());
    std::string csv = experiments::csv_string(res, true);
    EXPECT_NE(csv.find("slope,nan"), std::string::npos);
}

TEST(SweepN, CsvHeaderExact) {
    auto cfg = tiny_config();
    cfg.n_grid = {32};
    auto res = experiments::run_sweep_n(cfg);
    std::string csv = experiments::csv_string(res, false);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "n,gamma,H,trials,missing,mean_mse,std_mse,delta_n,lambda_n");
}

TEST(SweepHorizon, RunsAndRejectsBadGammas) {
    SweepConfig cfg = tiny_config();
    cfg.ensemble = "hard";
    cfg.gamma_grid = {0.6, 0.75, 0.9};
    cfg.n_grid = {64};
    auto res = experiments::run_sweep_horizon(cfg);
    ASSERT_EQ(res.rows.size(), 3u);
    EXPECT_TRUE(std::is_sorted(res.rows.begin(), res.rows.end(),
                               [](auto& a, auto& b) { return a.H < b.H; }));
    ASSERT_TRUE(res.predicted.has_value());
    EXPECT_DOUBLE_EQ(*res.predicted, 3.0);

    cfg.gamma_grid = {0.4, 0.9};
    EXPECT_THROW(experiments::run_sweep_horizon(cfg), std::invalid_argument);
}

TEST(SweepConfigValidation, Errors) {
    SweepConfig cfg = tiny_config();
    cfg.ensemble = "regimeA";
    EXPECT_THROW(experiments::run_sweep_n(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.n_grid.clear();
    EXPECT_THROW(experiments::run_sweep_n(cfg), std::invalid_argument);

    cfg = tiny_config();
    cfg.gamma_grid = {0.8, 0.9};
    EXPECT_THROW(experiments::run_sweep_n(cfg), std::invalid_argument);
}

TEST(VerifyLowerbound, RegimeAEndToEnd) {
    auto res = experiments::run_verify_lowerbound(lowerbound::Regime::A, "poly:1", 0.95, 100000,
                                                  7, 4096);
    EXPECT_TRUE(res.report.pass);
    EXPECT_LE(res.report.max_pairwise_kl, res.report.kl_budget);
}

TEST(VerifyLowerbound, SurfacesParameterViolation) {
    EXPECT_THROW(
        experiments::run_verify_lowerbound(lowerbound::Regime::A, "poly:1", 0.95, 10, 1, 4096),
        ParameterViolation);
}

TEST(VerifyLowerbound, WritesFamilyFile) {
    std::string path = ::testing::TempDir() + "family_a.txt";
    auto res = experiments::run_verify_lowerbound(lowerbound::Regime::B, "poly:1", 0.9, 10000, 3,
                                                  4096, path);
    std::ifstream is(path);
    ASSERT_TRUE(is.good());
    auto spec = kernel::EigenSpectrum::polynomial(1.0, 1.0, 4096);
    auto back = lowerbound::read_family(is, spec);
    EXPECT_EQ(back.instances.size(), res.family.instances.size());
    auto rep = lowerbound::certify(back);
    EXPECT_EQ(rep.pass, res.report.pass);
}
