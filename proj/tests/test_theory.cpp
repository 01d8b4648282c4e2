#include <gtest/gtest.h>

#include <cmath>

#include "klstd/kernel.hpp"
#include "klstd/mrp.hpp"
#include "klstd/rng.hpp"
#include "klstd/theory.hpp"

using namespace klstd;
using kernel::EigenSpectrum;
using theory::CriticalRadiusProblem;

TEST(Complexity, FiniteLinearPlateau) {
    auto spec = EigenSpectrum::finite_linear({1.0, 1.0, 1.0, 1.0});
    // delta below every eigenvalue: every min saturates at 1, C = sqrt(d)
    EXPECT_DOUBLE_EQ(theory::kernel_complexity(spec, 0.05), 2.0);
    // delta above sqrt(mu_1): C = sqrt(sum mu_j)/delta
    EXPECT_DOUBLE_EQ(theory::kernel_complexity(spec, 2.0), std::sqrt(4.0) / 2.0);
}

TEST(Complexity, LargeDeltaEqualsTraceOverDelta) {
    auto exp_spec = EigenSpectrum::exponential();
    double trace = exp_spec.truncated_trace();
    EXPECT_NEAR(theory::kernel_complexity(exp_spec, 3.0), std::sqrt(trace) / 3.0, 1e-12);

    // Polynomial uses the analytic infinite tail, which matches the
    // truncated trace plus the reported tail energy.
    auto poly = EigenSpectrum::polynomial(1.0);
    double full = poly.truncated_trace() + poly.tail_energy();
    EXPECT_NEAR(theory::kernel_complexity(poly, 5.0), std::sqrt(full) / 5.0, 1e-9);
}

TEST(Complexity, PolynomialBruteForceOracle) {
    auto spec = EigenSpectrum::polynomial(1.0);
    const double delta = 0.1, d2 = delta * delta;
    double brute = 0.0;
    for (std::size_t j = 1; j <= 10000000; ++j)
        brute += std::min(std::pow(static_cast<double>(j), -2.0) / d2, 1.0);
    EXPECT_NEAR(theory::kernel_complexity(spec, delta), std::sqrt(brute),
                1e-4 * std::sqrt(brute));

    auto spec06 = EigenSpectrum::polynomial(0.6);
    brute = 0.0;
    for (std::size_t j = 1; j <= 10000000; ++j)
        brute += std::min(std::pow(static_cast<double>(j), -1.2) / d2, 1.0);
    // alpha = 0.6 tails off so slowly that the 1e7-term sum still misses a
    // few percent; add the midpoint-rule remainder to the oracle.
    brute += std::pow(1e7 + 0.5, -0.2) / 0.2 / d2;
    EXPECT_NEAR(theory::kernel_complexity(spec06, delta), std::sqrt(brute),
                1e-3 * std::sqrt(brute));
}

TEST(Complexity, MonotoneInDelta) {
    auto spec = EigenSpectrum::polynomial(0.8);
    double prev = theory::kernel_complexity(spec, 1e-4);
    for (double delta : {1e-3, 1e-2, 1e-1, 1.0, 10.0}) {
        double cur = theory::kernel_complexity(spec, delta);
        EXPECT_LT(cur, prev);
        prev = cur;
    }
}

TEST(CriticalRadius, LinearClosedForm) {
    // d unit eigenvalues: delta_n^2 = zeta^2 d / (R^2 (1-gamma)^2 n).
    CriticalRadiusProblem prob{EigenSpectrum::finite_linear({1.0, 1.0, 1.0, 1.0}), 400, 1.0, 0.5,
                               1.0};
    EXPECT_NEAR(theory::critical_radius(prob), 0.2, 1e-9);
}

TEST(CriticalRadius, PolynomialExponentFit) {
    // delta_n^2 vs n follows n^{-2 alpha/(2 alpha + 1)}; alpha = 1 gives -2/3.
    auto spec = EigenSpectrum::polynomial(1.0);
    std::vector<std::pair<double, double>> pts;
    for (double n : {1e3, 1e4, 1e5, 1e6}) {
        CriticalRadiusProblem prob{spec, static_cast<std::size_t>(n), 1.0, 0.5, 1.0};
        double dn = theory::critical_radius(prob);
        pts.emplace_back(n, dn * dn);
    }
    double mean_slope = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        mean_slope += std::log(pts[i].second / pts[i - 1].second) /
                      std::log(pts[i].first / pts[i - 1].first);
    mean_slope /= static_cast<double>(pts.size() - 1);
    EXPECT_NEAR(mean_slope, -2.0 / 3.0, 0.02);
}

TEST(CriticalRadius, MonotoneInSnr) {
    auto spec = EigenSpectrum::polynomial(1.0);
    CriticalRadiusProblem prob{spec, 1000, 1.0, 0.7, 1.0};
    double base = theory::critical_radius(prob);
    prob.R = 2.0;  // doubling R increases the slope, so delta_n decreases
    EXPECT_LT(theory::critical_radius(prob), base);
}

TEST(CriticalRadius, BisectionCertificateProperty) {
    rng::CounterRng gen(13);
    for (int trial = 0; trial < 200; ++trial) {
        EigenSpectrum spec;
        switch (trial % 3) {
            case 0: spec = EigenSpectrum::polynomial(gen.uniform(0.55, 2.0)); break;
            case 1: spec = EigenSpectrum::exponential(); break;
            default: {
                std::vector<double> vals;
                double v = gen.uniform(0.5, 2.0);
                std::size_t d = 1 + gen.next_u64() % 12;
                for (std::size_t j = 0; j < d; ++j) {
                    vals.push_back(v);
                    v *= gen.uniform(0.3, 1.0);
                }
                spec = EigenSpectrum::finite_linear(vals);
            }
        }
        CriticalRadiusProblem prob{spec, 10 + gen.next_u64() % 100000, gen.uniform(0.1, 10.0),
                                   gen.uniform(0.05, 0.99), gen.uniform(0.1, 10.0)};
        double dn = theory::critical_radius(prob);
        double slope = prob.slope();
        EXPECT_LE(theory::kernel_complexity(spec, dn), slope * dn * (1.0 + 1e-12));
        double shrunk = 0.999 * dn;
        EXPECT_GT(theory::kernel_complexity(spec, shrunk), slope * shrunk);
    }
}

TEST(CriticalRadius, ScaleCovariance) {
    auto spec = EigenSpectrum::polynomial(0.7);
    CriticalRadiusProblem a{spec, 5000, 1.3, 0.9, 0.8};
    CriticalRadiusProblem b = a;
    b.R *= 7.5;
    b.zeta *= 7.5;
    EXPECT_NEAR(theory::critical_radius(a), theory::critical_radius(b),
                1e-12 * theory::critical_radius(a));
}

TEST(CriticalRadius, NoSolutionOnBadSlope) {
    CriticalRadiusProblem prob{EigenSpectrum::exponential(), 100, 0.0, 0.5, 1.0};
    EXPECT_THROW(theory::critical_radius(prob), NoSolution);
}

TEST(StatisticalDimension, KnownValues) {
    EXPECT_EQ(theory::statistical_dimension(EigenSpectrum::finite_linear({1.0, 1.0, 1.0}), 0.5),
              3u);
    EXPECT_EQ(theory::statistical_dimension(EigenSpectrum::exponential(), std::sqrt(0.5)), 1u);
    EXPECT_EQ(theory::statistical_dimension(EigenSpectrum::polynomial(1.0), 0.1), 10u);
    EXPECT_EQ(theory::statistical_dimension(EigenSpectrum::exponential(), 1.5), 0u);
}

TEST(StatisticalDimension, ConsistencyProperty) {
    rng::CounterRng gen(23);
    for (int trial = 0; trial < 300; ++trial) {
        EigenSpectrum spec = trial % 2 ? EigenSpectrum::polynomial(gen.uniform(0.55, 3.0))
                                       : EigenSpectrum::exponential();
        double delta = std::pow(10.0, gen.uniform(-4.0, 0.3));
        std::size_t d = theory::statistical_dimension(spec, delta);
        double d2 = delta * delta;
        if (d > 0) EXPECT_GE(spec.eigenvalue(d), d2 * (1.0 - 1e-11));
        EXPECT_LT(spec.eigenvalue(d + 1), d2);
    }
}

TEST(ChooseLambda, Arithmetic) {
    EXPECT_NEAR(theory::choose_lambda(0.2, 0.9, 0.01), 4e-5, 1e-18);
    EXPECT_DOUBLE_EQ(theory::choose_lambda(0.0, 0.5, 0.01), 0.0);
    // default constant is c0 = 0.01
    EXPECT_DOUBLE_EQ(theory::choose_lambda(0.3, 0.7), 0.01 * (1.0 - 0.7) * 0.09);
}

TEST(RadiusR, ThetaEqualsReward) {
    // p = 1/2 makes 1 - gamma + 2 gamma p = 1, so theta* = r exactly and
    // only the sup-norm term is active.
    mrp::BlockMRP m = mrp::single_block(mrp::ChainVariant::Base, 0.5, 0.0, 1.0, 0.9);
    kernel::MercerKernel kern{EigenSpectrum::exponential()};
    double b = kernel::kernel_bounds(kern).b;
    EXPECT_NEAR(theory::compute_radius_R(kern, m), 2.0 / b, 1e-13);
}

TEST(RadiusR, EasyEnsembleClosedForm) {
    mrp::BlockMRP m = mrp::make_ensemble(mrp::EnsembleKind::Easy, 0.9);
    kernel::MercerKernel kern{EigenSpectrum::exponential()};
    double b = kernel::kernel_bounds(kern).b;
    // theta* - r = (gamma (1 - 2p)/s) W_1, and W_1 carries eigenvalue mu_2
    double s = 1.0 - 0.9 + 2.0 * 0.9 * 0.25;
    double expect = std::max(0.9 * 0.5 / (s * std::sqrt(std::exp(-1.0))), 2.0 / (s * b));
    EXPECT_NEAR(theory::compute_radius_R(kern, m), expect, 1e-12);
    EXPECT_NEAR(theory::compute_radius_R(kern, m), 3.0885, 1e-4);
}

TEST(RadiusR, HardEnsembleScalesWithHorizon) {
    kernel::MercerKernel kern{EigenSpectrum::exponential()};
    double r08 = theory::compute_radius_R(kern, mrp::make_ensemble(mrp::EnsembleKind::Hard, 0.8));
    double r09 = theory::compute_radius_R(kern, mrp::make_ensemble(mrp::EnsembleKind::Hard, 0.9));
    double r095 = theory::compute_radius_R(kern, mrp::make_ensemble(mrp::EnsembleKind::Hard, 0.95));
    EXPECT_NEAR(r09 / r08, 2.0, 0.2);
    EXPECT_NEAR(r095 / r09, 2.0, 0.2);
}

TEST(RadiusR, SpanErrorOutsideKernel) {
    mrp::BlockMRP m = mrp::make_ensemble(mrp::EnsembleKind::Easy, 0.9);
    // a rank-1 kernel spans only W_0 and cannot carry theta* - r (~ W_1)
    kernel::MercerKernel k0(EigenSpectrum::finite_linear({1.0}));
    EXPECT_THROW(theory::compute_radius_R(k0, m), SpanError);
}

TEST(Exponents, PaperValues) {
    auto hard = mrp::EnsembleKind::Hard;
    auto easy = mrp::EnsembleKind::Easy;
    auto p1 = theory::predicted_exponents(EigenSpectrum::polynomial(1.0), hard);
    EXPECT_NEAR(p1.h_exponent, 8.0 / 3.0, 1e-12);
    EXPECT_NEAR(p1.n_exponent, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(theory::predicted_exponents(EigenSpectrum::polynomial(1.0), easy).h_exponent,
                4.0 / 3.0, 1e-12);
    EXPECT_NEAR(theory::predicted_exponents(EigenSpectrum::polynomial(0.6), hard).h_exponent,
                2.5454545454545454, 1e-12);
    EXPECT_NEAR(theory::predicted_exponents(EigenSpectrum::polynomial(0.6), easy).h_exponent,
                1.0909090909090908, 1e-12);
    EXPECT_DOUBLE_EQ(theory::predicted_exponents(EigenSpectrum::exponential(), hard).h_exponent,
                     3.0);
    EXPECT_DOUBLE_EQ(theory::predicted_exponents(EigenSpectrum::exponential(), easy).h_exponent,
                     2.0);
    EXPECT_THROW(theory::predicted_exponents(EigenSpectrum::finite_linear({1.0}), hard),
                 std::invalid_argument);
}

TEST(Regularity, RatioBoundedBelow) {
    // (2 sigma / (R (1-gamma)))^2 d_n / (n delta_n^2) = d_n / (slope delta_n)^2
    // stays above a positive constant across spectra and (n, gamma).
    for (auto spec : {EigenSpectrum::polynomial(0.6), EigenSpectrum::polynomial(1.0),
                      EigenSpectrum::exponential(),
                      EigenSpectrum::finite_linear({1.0, 0.7, 0.5, 0.3, 0.2})}) {
        for (std::size_t n : {1000UL, 10000UL, 100000UL}) {
            for (double gamma : {0.6, 0.9}) {
                CriticalRadiusProblem prob{spec, n, 2.0, gamma, 2.0};
                double dn = theory::critical_radius(prob);
                std::size_t d = theory::statistical_dimension(spec, dn);
                double slope = prob.slope();
                double ratio = static_cast<double>(d) / (slope * slope * dn * dn);
                EXPECT_GE(ratio, 0.1) << "n=" << n << " gamma=" << gamma;
            }
        }
    }
}
