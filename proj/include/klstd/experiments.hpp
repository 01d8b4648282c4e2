#pragma once

// Monte Carlo harness: sweeps of the fitted estimator's exact L2 error over
// sample size or effective horizon, log-log slope regression against the
// predicted exponents, and lower-bound family certification runs.
//
// Trials are independent tasks over a small worker pool; each trial draws
// its own counter-based sub-seed and results are reduced by trial index, so
// parallel execution never changes the output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "klstd/errors.hpp"
#include "klstd/estimator.hpp"
#include "klstd/format.hpp"
#include "klstd/kernel.hpp"
#include "klstd/lowerbound.hpp"
#include "klstd/mrp.hpp"
#include "klstd/rng.hpp"
#include "klstd/theory.hpp"

namespace klstd::experiments {

enum class ZetaRule { BR, Sigma };  // zeta = b R (slow rate) or kappa sigma (fast rate)

struct SweepConfig {
    std::string kernel_spec = "exp";
    std::string ensemble = "easy";  // "easy" or "hard" for sweeps
    std::vector<double> gamma_grid{0.9};
    std::vector<std::size_t> n_grid{128, 256, 512, 1024, 2048, 4096, 8192};
    std::size_t trials = 2000;
    std::uint64_t seed = 0;
    double c0 = 0.01;
    ZetaRule zeta = ZetaRule::BR;
    std::size_t truncation = kernel::kDefaultTruncation;
    std::string out_path;
    bool summary = false;
};

struct SweepRow {
    std::size_t n = 0;
    double gamma = 0.0;
    double H = 0.0;
    std::size_t trials = 0;
    std::size_t missing = 0;
    double mean_mse = 0.0;
    double std_mse = 0.0;
    double delta_n = 0.0;
    double lambda_n = 0.0;
};

struct SlopeFit {
    double slope = 0.0;
    double stderr_ = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<SlopeFit> fit;
    std::optional<double> predicted;
};

// Ordinary least squares of log y on log x.
inline SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw std::invalid_argument("fit_loglog_slope: need at least 2 points");
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0 && y > 0.0)) throw std::invalid_argument("fit_loglog_slope: points must be positive");
        sx += std::log(x);
        sy += std::log(y);
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y) - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_loglog_slope: degenerate (all x equal)");
    SlopeFit out;
    out.slope = sxy / sxx;
    double rss = 0.0;
    for (const auto& [x, y] : points) {
        double resid = (std::log(y) - my) - out.slope * (std::log(x) - mx);
        rss += resid * resid;
    }
    out.stderr_ = points.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    return out;
}

namespace detail {

inline mrp::EnsembleKind parse_sweep_ensemble(const std::string& name) {
    if (name == "easy") return mrp::EnsembleKind::Easy;
    if (name == "hard") return mrp::EnsembleKind::Hard;
    throw std::invalid_argument("ensemble '" + name + "' is not a sweep ensemble (use easy|hard)");
}

struct TrialOutcome {
    double mse = 0.0;
    bool ok = false;
};

// One grid point: delta_n and lambda_n from theory, then `trials`
// independent fits.  A SingularSystem solve is resampled with a fresh
// sub-seed up to 3 times, then recorded as missing.
inline SweepRow run_point(const kernel::MercerKernel& kern, mrp::EnsembleKind ens_kind,
                          double gamma, std::size_t n, const SweepConfig& cfg,
                          std::uint64_t point_stream) {
    mrp::BlockMRP m = mrp::make_ensemble(ens_kind, gamma);
    walsh::DyadicFunction theta_star = mrp::exact_value_function(m);
    walsh::DyadicFunction density = mrp::stationary_density(m);
    walsh::DyadicFunction reward = m.reward();

    kernel::KernelBounds kb = kernel::kernel_bounds(kern);
    double R = theory::compute_radius_R(kern, m);
    double zeta = cfg.zeta == ZetaRule::BR ? kb.b * R
                                           : kb.kappa * std::sqrt(mrp::bellman_residual_variance(m));
    theory::CriticalRadiusProblem prob{kern.spectrum(), n, R, gamma, zeta};
    double delta_n = theory::critical_radius(prob);
    double lambda_n = theory::choose_lambda(delta_n, gamma, cfg.c0);

    std::vector<TrialOutcome> outcomes(cfg.trials);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t t = next.fetch_add(1);
            if (t >= cfg.trials) return;
            for (int attempt = 0; attempt < 4; ++attempt) {
                std::uint64_t sub_seed =
                    rng::derive(cfg.seed, point_stream * 0x10000ULL + t * 8ULL + attempt);
                try {
                    mrp::SampleSet samples = mrp::sample_pairs(m, n, sub_seed);
                    estimator::LstdEstimate est =
                        estimator::fit(kern, samples, reward, gamma, lambda_n);
                    double err = estimator::l2_error(est, theta_star, density);
                    outcomes[t] = {err * err, true};
                    break;
                } catch (const SingularSystem&) {
                    // resample and retry; leave as missing after the cap
                }
            }
        }
    };
    std::size_t threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    threads = std::min(threads, cfg.trials);
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    SweepRow row;
    row.n = n;
    row.gamma = gamma;
    row.H = 1.0 / (1.0 - gamma);
    row.trials = cfg.trials;
    row.delta_n = delta_n;
    row.lambda_n = lambda_n;
    double sum = 0.0;
    std::size_t good = 0;
    for (const auto& o : outcomes) {
        if (o.ok) {
            sum += o.mse;
            ++good;
        }
    }
    row.missing = cfg.trials - good;
    if (good > 0) {
        row.mean_mse = sum / static_cast<double>(good);
        double ss = 0.0;
        for (const auto& o : outcomes)
            if (o.ok) ss += (o.mse - row.mean_mse) * (o.mse - row.mean_mse);
        row.std_mse = good > 1 ? std::sqrt(ss / static_cast<double>(good - 1)) : 0.0;
    }
    return row;
}

inline std::optional<SlopeFit> fit_rows(const std::vector<SweepRow>& rows, bool vs_n) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows)
        if (r.mean_mse > 0.0) pts.emplace_back(vs_n ? static_cast<double>(r.n) : r.H, r.mean_mse);
    if (pts.size() < 2) return std::nullopt;
    double x0 = pts.front().first;
    bool distinct = false;
    for (const auto& [x, y] : pts) distinct = distinct || x != x0;
    if (!distinct) return std::nullopt;
    return fit_loglog_slope(pts);
}

inline std::optional<double> predicted_slope(const kernel::MercerKernel& kern,
                                             mrp::EnsembleKind ens, bool vs_n) {
    if (kern.spectrum().family == kernel::SpectrumFamily::FiniteLinear) return std::nullopt;
    theory::RatePrediction pred = theory::predicted_exponents(kern.spectrum(), ens);
    return vs_n ? -pred.n_exponent : pred.h_exponent;
}

}  // namespace detail

// MSE versus sample size at fixed gamma.
inline SweepResult run_sweep_n(const SweepConfig& cfg) {
    if (cfg.n_grid.empty() || cfg.gamma_grid.size() != 1)
        throw std::invalid_argument("run_sweep_n: needs a nonempty n-grid and exactly one gamma");
    if (cfg.trials < 1) throw std::invalid_argument("run_sweep_n: trials must be >= 1");
    kernel::MercerKernel kern = kernel::parse_kernel(cfg.kernel_spec, cfg.truncation);
    mrp::EnsembleKind ens = detail::parse_sweep_ensemble(cfg.ensemble);
    const double gamma = cfg.gamma_grid.front();

    SweepResult out;
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
        out.rows.push_back(detail::run_point(kern, ens, gamma, cfg.n_grid[i], cfg, i));
    std::sort(out.rows.begin(), out.rows.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.n < b.n; });
    out.fit = detail::fit_rows(out.rows, true);
    out.predicted = detail::predicted_slope(kern, ens, true);
    return out;
}

// MSE versus effective horizon H = 1/(1-gamma) at fixed n.
inline SweepResult run_sweep_horizon(const SweepConfig& cfg) {
    if (cfg.gamma_grid.empty() || cfg.n_grid.size() != 1)
        throw std::invalid_argument("run_sweep_horizon: needs a gamma-grid and exactly one n");
    if (cfg.trials < 1) throw std::invalid_argument("run_sweep_horizon: trials must be >= 1");
    kernel::MercerKernel kern = kernel::parse_kernel(cfg.kernel_spec, cfg.truncation);
    mrp::EnsembleKind ens = detail::parse_sweep_ensemble(cfg.ensemble);
    if (ens == mrp::EnsembleKind::Hard)
        for (double g : cfg.gamma_grid)
            if (!(g > 0.5)) throw std::invalid_argument("hard ensemble needs every gamma > 1/2");

    SweepResult out;
    for (std::size_t i = 0; i < cfg.gamma_grid.size(); ++i)
        out.rows.push_back(
            detail::run_point(kern, ens, cfg.gamma_grid[i], cfg.n_grid.front(), cfg, i));
    std::sort(out.rows.begin(), out.rows.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.H < b.H; });
    out.fit = detail::fit_rows(out.rows, false);
    out.predicted = detail::predicted_slope(kern, ens, false);
    return out;
}

inline void write_csv(std::ostream& os, const SweepResult& res, bool summary) {
    os << "n,gamma,H,trials,missing,mean_mse,std_mse,delta_n,lambda_n\n";
    for (const auto& r : res.rows) {
        os << r.n << ',' << format_double(r.gamma) << ',' << format_double(r.H) << ',' << r.trials
           << ',' << r.missing << ',' << format_double(r.mean_mse) << ','
           << format_double(r.std_mse) << ',' << format_double(r.delta_n) << ','
           << format_double(r.lambda_n) << '\n';
    }
    if (summary) {
        os << "slope," << (res.fit ? format_double(res.fit->slope) : "nan") << ",stderr,"
           << (res.fit ? format_double(res.fit->stderr_) : "nan") << ",predicted,"
           << (res.predicted ? format_double(*res.predicted) : "nan") << '\n';
    }
}

inline std::string csv_string(const SweepResult& res, bool summary) {
    std::ostringstream os;
    write_csv(os, res, summary);
    return os.str();
}

struct VerifyResult {
    lowerbound::InstanceFamily family;
    lowerbound::CertificationReport report;
};

// Builds a lower-bound family, certifies it, and (optionally) writes the
// family file for later re-verification.
inline VerifyResult run_verify_lowerbound(lowerbound::Regime regime,
                                          const std::string& kernel_spec, double gamma,
                                          std::size_t n, std::uint64_t seed,
                                          std::size_t truncation = kernel::kDefaultTruncation,
                                          const std::string& family_out = std::string()) {
    kernel::EigenSpectrum spec = kernel::parse_kernel(kernel_spec, truncation).spectrum();
    lowerbound::InstanceFamily fam = lowerbound::build_family(regime, spec, gamma, n, seed);
    lowerbound::CertificationReport rep = lowerbound::certify(fam);
    if (!family_out.empty()) {
        std::ofstream os(family_out);
        if (!os) throw std::runtime_error("cannot open family output file: " + family_out);
        lowerbound::write_family(os, fam);
    }
    return {std::move(fam), std::move(rep)};
}

inline void write_report(std::ostream& os, const lowerbound::CertificationReport& rep,
                         const lowerbound::InstanceFamily& fam) {
    os << "regime " << (fam.regime == lowerbound::Regime::A ? 'A' : 'B') << " gamma "
       << format_double(fam.gamma) << " n " << fam.n << " M " << fam.instances.size() << " K "
       << fam.blocks() << " d_n " << fam.params.d_n << '\n';
    os << "delta_n " << format_double(fam.params.delta_n) << " R_bar "
       << format_double(fam.params.R_bar) << " sigma_bar " << format_double(fam.params.sigma_bar)
       << '\n';
    os << "max_pairwise_kl " << format_double(rep.max_pairwise_kl) << " budget "
       << format_double(rep.kl_budget) << '\n';
    os << "min_value_gap " << format_double(rep.min_value_gap) << " floor "
       << format_double(rep.gap_floor) << " gap/(R_bar delta_n) "
       << format_double(rep.gap_over_r_delta) << '\n';
    os << "eigengap_precondition " << (rep.eigengap_precondition ? "holds" : "fails (l1 skipped)")
       << '\n';
    for (std::size_t m = 0; m < rep.instances.size(); ++m) {
        const auto& c = rep.instances[m];
        os << "instance " << m << (c.hilbert_ok && c.sup_ok && c.variance_ok && c.density_ok &&
                                           c.interlace_ok && c.l1_ok
                                       ? " ok"
                                       : " FAIL")
           << " hnorm " << format_double(c.hilbert_norm) << " sup_ratio "
           << format_double(c.sup_ratio) << " variance " << format_double(c.variance)
           << " density_min " << format_double(c.density_min) << '\n';
    }
    os << (rep.pass ? "PASS" : "FAIL") << '\n';
}

}  // namespace klstd::experiments
