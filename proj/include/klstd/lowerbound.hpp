#pragma once

// Constructive generation and numerical certification of the minimax
// lower-bound MRP families.
//
// Regime A: antisymmetric perturbations (odd Walsh basis W_{2j-1}), uniform
// stationary law, p = 3(1-gamma)/gamma, unit reward.  Regime B: symmetric
// perturbations (even Walsh basis), p = 1/8, reward scale p+(1-gamma)/(2.gamma),
// perturbed stationary law 1 +/- f_m/p.  Instances are indexed by vectors of
// a 1/4-packing of the Boolean hypercube {0,1}^{d_n-1}.
//
// The certifier computes exact per-block chi-square/KL divergences from the
// four-cell joint laws and exact value-function gaps, then checks them
// against the budgets the constructions are designed to meet (KL <= d_n/40,
// validity norms, density ratio >= 1/2, arrowhead interlacing and
// eigenvector l1 bounds).  Family-validity constants follow the kappa = 2,
// b^2 = 4 sum mu_j convention; rate-facing code elsewhere uses the tight
// kappa = 1.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "klstd/errors.hpp"
#include "klstd/format.hpp"
#include "klstd/kernel.hpp"
#include "klstd/mrp.hpp"
#include "klstd/rng.hpp"
#include "klstd/theory.hpp"
#include "klstd/walsh.hpp"

namespace klstd::lowerbound {

enum class Regime { A, B };

// ---------------------------------------------------------------------------
// Hypercube packing

struct PackingSet {
    std::size_t dim = 0;
    std::vector<std::vector<std::uint8_t>> vectors;

    std::size_t size() const { return vectors.size(); }
};

inline double hamming_rescaled(const std::vector<std::uint8_t>& a,
                               const std::vector<std::uint8_t>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("hamming_rescaled: size mismatch");
    std::size_t diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

// Greedy randomized 1/4-packing: sample candidates, keep those at rescaled
// Hamming distance >= 1/4 from everything kept so far, until ceil(e^{target})
// vectors are found or the retry cap trips.
inline PackingSet hypercube_packing(std::size_t dim, double target_log_M, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("hypercube_packing: dim must be >= 1");
    const std::size_t target =
        static_cast<std::size_t>(std::max(2.0, std::ceil(std::exp(target_log_M))));
    rng::CounterRng gen(seed, 0x7061636bULL);
    PackingSet out;
    out.dim = dim;
    std::size_t consecutive_failures = 0;
    const std::size_t cap = 2000 + 200 * target;
    while (out.vectors.size() < target) {
        std::vector<std::uint8_t> cand(dim);
        for (auto& bit : cand) bit = gen.bernoulli(0.5) ? 1 : 0;
        bool ok = true;
        for (const auto& kept : out.vectors) {
            if (hamming_rescaled(cand, kept) < 0.25) {
                ok = false;
                break;
            }
        }
        if (ok) {
            out.vectors.push_back(std::move(cand));
            consecutive_failures = 0;
        } else if (++consecutive_failures > cap) {
            throw PackingFailure("hypercube_packing: achieved M = " +
                                 std::to_string(out.vectors.size()) + " of target " +
                                 std::to_string(target));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Family construction

struct FamilyParams {
    double p = 0.0;
    double reward_scale = 0.0;
    double delta_n = 0.0;
    std::size_t d_n = 0;
    double R_bar = 0.0;
    double sigma_bar = 0.0;  // noise cap; variance budget is sigma_bar^2
    double b_family = 0.0;   // 2 sqrt(sum mu_j), the kappa = 2 convention
};

struct InstanceFamily {
    Regime regime = Regime::A;
    kernel::MercerKernel kern;
    double gamma = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    PackingSet packing;
    std::vector<mrp::BlockMRP> instances;
    FamilyParams params;

    std::size_t blocks() const { return instances.empty() ? 0 : instances.front().blocks(); }
};

inline kernel::IndexMap map_of(Regime r) {
    return r == Regime::A ? kernel::IndexMap::RegimeA : kernel::IndexMap::RegimeB;
}

inline FamilyParams family_params(Regime regime, const kernel::EigenSpectrum& spec, double gamma,
                                  std::size_t n) {
    FamilyParams fp;
    const double mu1 = spec.eigenvalue(1);
    fp.b_family = 2.0 * std::sqrt(spec.truncated_trace());
    if (regime == Regime::A) {
        fp.p = 3.0 * (1.0 - gamma) / gamma;
        fp.reward_scale = 1.0;
        fp.sigma_bar = std::sqrt((1.0 + gamma) / (5.0 * (1.0 - gamma)));
        fp.R_bar = std::max(gamma / std::sqrt(mu1), 2.0 / fp.b_family) / (6.0 * (1.0 - gamma));
    } else {
        fp.p = 0.125;
        fp.reward_scale = fp.p + (1.0 - gamma) / (2.0 * gamma);
        fp.sigma_bar = 1.0;
        fp.R_bar = std::max(0.5 / std::sqrt(mu1), 2.0 / (gamma * fp.b_family));
    }
    theory::CriticalRadiusProblem prob{spec, n, fp.R_bar, gamma, 2.0 * fp.sigma_bar};
    fp.delta_n = theory::critical_radius(prob);
    fp.d_n = theory::statistical_dimension(spec, fp.delta_n);
    return fp;
}

// Perturbation scale on coordinates 2..d_n.
inline double perturbation_scale(Regime regime, const FamilyParams& fp, std::size_t n) {
    return regime == Regime::A
               ? std::sqrt(fp.p * (1.0 - fp.p) / (120.0 * static_cast<double>(n)))
               : fp.p / (25.0 * std::sqrt(static_cast<double>(n)));
}

// f_m on the "+" cells (blocks 0..K-1 at the MRP grid level); the value on
// the "-" half follows by (anti)symmetry of the basis.
inline std::vector<double> perturbation_on_blocks(Regime regime, const FamilyParams& fp,
                                                  std::size_t n, std::size_t K,
                                                  const std::vector<std::uint8_t>& alpha) {
    int level = 1;
    while ((std::size_t{1} << level) < 2 * K) ++level;
    const double scale = perturbation_scale(regime, fp, n);
    std::vector<double> f(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        double acc = 0.0;
        for (std::size_t j = 2; j <= fp.d_n; ++j) {
            if (!alpha[j - 2]) continue;
            acc += walsh::sign_on_cell(kernel::mapped_index(map_of(regime), j), k, level);
        }
        f[k] = scale * acc;
    }
    return f;
}

inline mrp::BlockMRP instance_from_alpha(Regime regime, const FamilyParams& fp, double gamma,
                                         std::size_t n, const std::vector<std::uint8_t>& alpha) {
    std::size_t K = 1;
    while (K < fp.d_n) K <<= 1;
    std::vector<double> f = perturbation_on_blocks(regime, fp, n, K, alpha);

    const double p = fp.p;
    mrp::BlockMRP out;
    out.reward_scale = fp.reward_scale;
    out.gamma = gamma;
    out.chains.resize(K);
    if (regime == Regime::A) {
        const double s = 1.0 - gamma + 2.0 * gamma * p;
        for (std::size_t k = 0; k < K; ++k) {
            if (!(std::abs(f[k]) <= p / 9.0))
                throw ParameterViolation("regime A: |f_m|_inf > p/9 (sample size too small)");
            double dp = s * f[k] / (s - 2.0 * gamma * f[k]);
            if (!(std::abs(dp) <= p / 8.0))
                throw ParameterViolation("regime A: |dp| > p/8 (sample size too small)");
            out.chains[k] = mrp::TwoStateChain{mrp::ChainVariant::A, p, dp};
        }
    } else {
        for (std::size_t k = 0; k < K; ++k) {
            if (!(std::abs(f[k]) <= p / 2.0))
                throw ParameterViolation("regime B: |f_m|_inf > p/2 (density ratio below 1/2)");
            out.chains[k] = mrp::TwoStateChain{mrp::ChainVariant::B, p, f[k]};
        }
    }
    return out;
}

inline InstanceFamily build_family(Regime regime, const kernel::EigenSpectrum& spec, double gamma,
                                   std::size_t n, std::uint64_t seed) {
    if (regime == Regime::A && !(gamma >= 0.9 && gamma < 1.0))
        throw ParameterViolation("regime A requires gamma in [0.9, 1)");
    if (regime == Regime::B && !(gamma > 0.0 && gamma < 1.0))
        throw ParameterViolation("regime B requires gamma in (0, 1)");
    if (n < 1) throw std::invalid_argument("build_family: n must be >= 1");

    FamilyParams fp = family_params(regime, spec, gamma, n);
    if (fp.d_n < 2)
        throw ParameterViolation(
            "statistical dimension d_n < 2: the critical inequality admits no "
            "nontrivial packing at this sample size");
    if (fp.d_n > spec.truncation)
        throw ParameterViolation("statistical dimension exceeds kernel truncation");

    InstanceFamily fam{regime, kernel::MercerKernel(spec, map_of(regime)), gamma, n, seed,
                       hypercube_packing(fp.d_n - 1, static_cast<double>(fp.d_n) / 10.0, seed),
                       {}, fp};
    fam.instances.reserve(fam.packing.size());
    for (const auto& alpha : fam.packing.vectors)
        fam.instances.push_back(instance_from_alpha(regime, fp, gamma, n, alpha));
    return fam;
}

inline InstanceFamily build_regime_a_family(const kernel::EigenSpectrum& spec, double gamma,
                                            std::size_t n, std::uint64_t seed) {
    return build_family(Regime::A, spec, gamma, n, seed);
}

inline InstanceFamily build_regime_b_family(const kernel::EigenSpectrum& spec, double gamma,
                                            std::size_t n, std::uint64_t seed) {
    return build_family(Regime::B, spec, gamma, n, seed);
}

// ---------------------------------------------------------------------------
// Divergences

struct Divergence {
    double chi2 = 0.0;  // exact chi^2( joint_{m'} || joint_m ), block average
    double kl_n = 0.0;  // n times the exact joint KL( m' || m )
};

// Exact four-cell joint laws per block: J(s,s') = pi(s) P(s,s').  The
// reference measure (denominator) is instance m, the first index.
inline Divergence pairwise_divergence(const InstanceFamily& fam, std::size_t m, std::size_t mp) {
    if (m >= fam.instances.size() || mp >= fam.instances.size())
        throw std::invalid_argument("pairwise_divergence: index out of range");
    const mrp::BlockMRP& ref = fam.instances[m];
    const mrp::BlockMRP& other = fam.instances[mp];
    const std::size_t K = ref.blocks();
    double chi2 = 0.0;
    double kl = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        auto Pr = ref.chains[k].transition();
        auto Po = other.chains[k].transition();
        auto wr = ref.chains[k].stationary();
        auto wo = other.chains[k].stationary();
        for (int s = 0; s < 2; ++s) {
            for (int t = 0; t < 2; ++t) {
                double Jr = wr[s] * Pr[s][t];
                double Jo = wo[s] * Po[s][t];
                chi2 += (Jo - Jr) * (Jo - Jr) / Jr;
                if (Jo > 0.0) kl += Jo * std::log(Jo / Jr);
            }
        }
    }
    return {chi2 / static_cast<double>(K),
            static_cast<double>(fam.n) * kl / static_cast<double>(K)};
}

// ---------------------------------------------------------------------------
// Arrowhead spectra

struct ArrowheadResult {
    Eigen::VectorXd eigenvalues;  // nonincreasing
    Eigen::VectorXd eigvec_l1;    // l1 norms of the matching unit eigenvectors
};

// Full symmetric eigendecomposition of [[mu_1, x^T], [x, diag(mu_2..mu_d)]].
inline ArrowheadResult arrowhead_spectrum(const Eigen::VectorXd& mu, const Eigen::VectorXd& x) {
    const Eigen::Index d = mu.size();
    if (d < 1 || x.size() != d - 1)
        throw std::invalid_argument("arrowhead_spectrum: need |x| = |mu| - 1");
    for (Eigen::Index i = 0; i + 1 < d; ++i)
        if (mu(i) < mu(i + 1)) throw std::invalid_argument("arrowhead_spectrum: mu not nonincreasing");
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    S(0, 0) = mu(0);
    for (Eigen::Index i = 1; i < d; ++i) {
        S(i, i) = mu(i);
        S(0, i) = S(i, 0) = x(i - 1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    if (eig.info() != Eigen::Success) throw std::runtime_error("arrowhead_spectrum: eigensolver failed");
    ArrowheadResult out;
    out.eigenvalues.resize(d);
    out.eigvec_l1.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        out.eigenvalues(i) = eig.eigenvalues()(d - 1 - i);
        out.eigvec_l1(i) = eig.eigenvectors().col(d - 1 - i).lpNorm<1>();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Certification

struct InstanceChecks {
    double hilbert_norm = 0.0;    // ||theta* - r||_H
    double span_residual = 0.0;   // Walsh energy of theta* - r outside the span
    double sup_ratio = 0.0;       // 2 ||theta*||_inf / b
    double variance = 0.0;        // sigma^2(theta*)
    double density_min = 0.0;     // min over cells of the stationary density
    bool hilbert_ok = false;
    bool sup_ok = false;
    bool variance_ok = false;
    bool density_ok = false;
    bool interlace_ok = true;     // regime B arrowhead checks; vacuous in A
    bool l1_ok = true;
};

struct CertificationReport {
    double max_pairwise_kl = 0.0;
    double kl_budget = 0.0;  // d_n / 40
    double min_value_gap = std::numeric_limits<double>::infinity();
    double gap_floor = 0.0;  // regime B explicit floor; 0 (unasserted) in A
    double gap_over_r_delta = std::numeric_limits<double>::infinity();
    bool eigengap_precondition = true;  // controls whether l1 bounds are asserted
    std::vector<InstanceChecks> instances;
    bool pass = false;
};

inline CertificationReport certify(const InstanceFamily& fam) {
    const FamilyParams& fp = fam.params;
    CertificationReport rep;
    rep.kl_budget = static_cast<double>(fp.d_n) / 40.0;

    const double sigma_budget = fp.sigma_bar * fp.sigma_bar;
    const auto& spec = fam.kern.spectrum();

    // Eigengap precondition for the arrowhead l1 bounds.
    for (std::size_t j = 3; j <= fp.d_n; ++j) {
        double gap = std::sqrt(spec.eigenvalue(j - 1)) - std::sqrt(spec.eigenvalue(j));
        if (gap < fp.delta_n / (2.0 * static_cast<double>(fp.d_n))) {
            rep.eigengap_precondition = false;
            break;
        }
    }

    std::vector<walsh::DyadicFunction> thetas;
    thetas.reserve(fam.instances.size());

    for (std::size_t m = 0; m < fam.instances.size(); ++m) {
        const mrp::BlockMRP& inst = fam.instances[m];
        InstanceChecks chk;
        walsh::DyadicFunction theta = exact_value_function(inst);
        walsh::DyadicFunction density = stationary_density(inst);

        walsh::WalshCoefficients dhat = walsh::walsh_transform(walsh::subtract(theta, inst.reward()));
        double hsq = 0.0;
        for (std::size_t e = 0; e < dhat.coeffs.size(); ++e) {
            double coef = dhat.coeffs[e];
            if (coef == 0.0) continue;
            std::size_t j = kernel::eigen_index_of_walsh(fam.kern.index_map(), e);
            double mu = (j >= 1 && j <= fam.kern.terms()) ? spec.eigenvalue(j) : 0.0;
            if (mu > 0.0)
                hsq += coef * coef / mu;
            else
                chk.span_residual += coef * coef;
        }
        chk.hilbert_norm = std::sqrt(hsq);
        chk.sup_ratio = 2.0 * theta.sup_norm() / fp.b_family;
        chk.variance = bellman_residual_variance(inst);
        chk.density_min = density.min_value();

        chk.hilbert_ok = chk.hilbert_norm <= fp.R_bar && chk.span_residual <= 1e-12;
        chk.sup_ok = chk.sup_ratio <= fp.R_bar;
        chk.variance_ok = chk.variance <= sigma_budget;
        chk.density_ok = fam.regime == Regime::A || chk.density_min >= 0.5;

        if (fam.regime == Regime::B) {
            Eigen::VectorXd mu(fp.d_n);
            for (std::size_t j = 1; j <= fp.d_n; ++j) mu(j - 1) = spec.eigenvalue(j);
            Eigen::VectorXd x(fp.d_n - 1);
            const double c = 1.0 / (25.0 * std::sqrt(static_cast<double>(fam.n)));
            for (std::size_t i = 0; i + 1 < fp.d_n; ++i)
                x(i) = c * std::sqrt(mu(0) * mu(i + 1)) *
                       static_cast<double>(fam.packing.vectors[m][i]);
            ArrowheadResult arrow = arrowhead_spectrum(mu, x);
            const double slack = 1e-12 * mu(0);
            // Interlacing: tilde mu_1 >= mu_2 >= tilde mu_2 >= ... >= tilde mu_d.
            for (std::size_t j = 2; j <= fp.d_n; ++j) {
                if (arrow.eigenvalues(j - 1) > mu(j - 1) + slack ||
                    arrow.eigenvalues(j - 2) < mu(j - 1) - slack)
                    chk.interlace_ok = false;
            }
            if (rep.eigengap_precondition) {
                for (Eigen::Index i = 0; i < arrow.eigvec_l1.size(); ++i)
                    if (arrow.eigvec_l1(i) > 2.0) chk.l1_ok = false;
            }
        }
        rep.instances.push_back(chk);
        thetas.push_back(std::move(theta));
    }

    const walsh::DyadicFunction lebesgue = walsh::DyadicFunction::constant(1.0);
    for (std::size_t m = 0; m < fam.instances.size(); ++m) {
        for (std::size_t mp = 0; mp < fam.instances.size(); ++mp) {
            if (m == mp) continue;
            rep.max_pairwise_kl = std::max(rep.max_pairwise_kl, pairwise_divergence(fam, m, mp).kl_n);
            if (mp > m) {
                double gap = walsh::l2_norm(walsh::subtract(thetas[m], thetas[mp]), lebesgue);
                rep.min_value_gap = std::min(rep.min_value_gap, gap);
            }
        }
    }

    if (fam.regime == Regime::B)
        rep.gap_floor = fp.p / (50.0 * (1.0 - fam.gamma)) *
                        std::sqrt(static_cast<double>(fp.d_n - 1) / static_cast<double>(fam.n));
    rep.gap_over_r_delta = rep.min_value_gap / (fp.R_bar * fp.delta_n);

    bool ok = rep.max_pairwise_kl <= rep.kl_budget && rep.min_value_gap >= rep.gap_floor;
    for (const auto& chk : rep.instances)
        ok = ok && chk.hilbert_ok && chk.sup_ok && chk.variance_ok && chk.density_ok &&
             chk.interlace_ok && chk.l1_ok;
    rep.pass = ok;
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization: line-oriented text, one instance per row, decimals chosen
// to round-trip exactly so a re-read family re-certifies identically.

inline void write_family(std::ostream& os, const InstanceFamily& fam) {
    std::size_t K = fam.blocks();
    os << "regime " << (fam.regime == Regime::A ? 'A' : 'B') << '\n';
    os << "gamma " << format_double(fam.gamma) << '\n';
    os << "n " << fam.n << '\n';
    os << "K " << K << '\n';
    os << "d_n " << fam.params.d_n << '\n';
    os << "p " << format_double(fam.params.p) << '\n';
    os << "reward_scale " << format_double(fam.params.reward_scale) << '\n';
    os << "seed " << fam.seed << '\n';
    for (std::size_t m = 0; m < fam.instances.size(); ++m) {
        os << "instance ";
        for (auto bit : fam.packing.vectors[m]) os << (bit ? '1' : '0');
        for (const auto& chain : fam.instances[m].chains) os << ' ' << format_double(chain.dp);
        os << '\n';
    }
}

inline InstanceFamily read_family(std::istream& is, const kernel::EigenSpectrum& spec) {
    auto expect_line = [&](const std::string& key) {
        std::string line;
        if (!std::getline(is, line)) throw std::runtime_error("family file: truncated header");
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k != key) throw std::runtime_error("family file: expected '" + key + "', got '" + k + "'");
        std::string rest;
        ls >> rest;
        return rest;
    };

    std::string regime_str = expect_line("regime");
    if (regime_str != "A" && regime_str != "B") throw std::runtime_error("family file: bad regime");
    Regime regime = regime_str == "A" ? Regime::A : Regime::B;
    double gamma = std::stod(expect_line("gamma"));
    std::size_t n = std::stoull(expect_line("n"));
    std::size_t K = std::stoull(expect_line("K"));
    std::size_t d_n = std::stoull(expect_line("d_n"));
    double p = std::stod(expect_line("p"));
    double reward_scale = std::stod(expect_line("reward_scale"));
    std::uint64_t seed = std::stoull(expect_line("seed"));

    FamilyParams fp = family_params(regime, spec, gamma, n);
    if (fp.d_n != d_n)
        throw std::runtime_error("family file: d_n does not match the supplied spectrum");
    if (std::abs(fp.p - p) > 1e-12 || std::abs(fp.reward_scale - reward_scale) > 1e-12)
        throw std::runtime_error("family file: header parameters inconsistent with regime");

    InstanceFamily fam{regime, kernel::MercerKernel(spec, map_of(regime)), gamma, n, seed,
                       PackingSet{d_n - 1, {}}, {}, fp};
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag, bits;
        ls >> tag >> bits;
        if (tag != "instance") throw std::runtime_error("family file: expected instance row");
        if (bits.size() != d_n - 1) throw std::runtime_error("family file: bad packing vector length");
        std::vector<std::uint8_t> alpha(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) alpha[i] = bits[i] == '1';
        mrp::BlockMRP inst;
        inst.reward_scale = reward_scale;
        inst.gamma = gamma;
        inst.chains.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            std::string dp_str;
            if (!(ls >> dp_str)) throw std::runtime_error("family file: missing dp value");
            inst.chains[k] = mrp::TwoStateChain{
                regime == Regime::A ? mrp::ChainVariant::A : mrp::ChainVariant::B, p,
                std::stod(dp_str)};
        }
        fam.packing.vectors.push_back(std::move(alpha));
        fam.instances.push_back(std::move(inst));
    }
    if (fam.instances.empty()) throw std::runtime_error("family file: no instances");
    return fam;
}

}  // namespace klstd::lowerbound
