#pragma once

// Mercer kernels over the Walsh system with prescribed eigenvalue decay.
//
// A kernel here is K(x,y) = sum_{j<=J} mu_j W_{m(j)}(x) W_{m(j)}(y) for an
// injective index map m.  Because the Walsh family is multiplicative under
// index XOR, K(x,y) depends only on cell(x) XOR cell(y) at the kernel's grid
// level; the constructor tabulates that function once with a single fast
// transform, after which every evaluation is a lookup.

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "klstd/errors.hpp"
#include "klstd/walsh.hpp"

namespace klstd::mrp {
struct SampleSet;  // defined in mrp.hpp
}

namespace klstd::kernel {

inline constexpr std::size_t kDefaultTruncation = 4096;

enum class SpectrumFamily { Polynomial, Exponential, FiniteLinear };

namespace detail {

// sum_{j>k} j^{-two_alpha}, accurate to ~1e-6 relative: direct summation of
// the first block, then a midpoint-rule integral for the remainder.
inline double poly_tail(double two_alpha, std::uint64_t k) {
    double sum = 0.0;
    const std::uint64_t direct_until = k + 1024;
    for (std::uint64_t j = k + 1; j <= direct_until; ++j)
        sum += std::pow(static_cast<double>(j), -two_alpha);
    const double m = static_cast<double>(direct_until) + 0.5;
    sum += std::pow(m, 1.0 - two_alpha) / (two_alpha - 1.0);
    return sum;
}

}  // namespace detail

// Eigenvalue sequence mu_1 >= mu_2 >= ... >= 0 with a truncation level J for
// kernel evaluation.  Polynomial: mu_j = scale * j^{-2 alpha} (2 alpha > 1);
// Exponential: mu_j = exp(-(j-1)^2); FiniteLinear: an explicit finite list.
struct EigenSpectrum {
    SpectrumFamily family = SpectrumFamily::Exponential;
    double alpha = 1.0;
    double scale = 1.0;
    std::vector<double> values;  // FiniteLinear only
    std::size_t truncation = kDefaultTruncation;

    static EigenSpectrum polynomial(double alpha, double scale = 1.0,
                                    std::size_t J = kDefaultTruncation) {
        if (!(2.0 * alpha > 1.0)) throw std::invalid_argument("polynomial spectrum needs 2*alpha > 1");
        if (!(scale > 0.0)) throw std::invalid_argument("polynomial spectrum needs scale > 0");
        EigenSpectrum s;
        s.family = SpectrumFamily::Polynomial;
        s.alpha = alpha;
        s.scale = scale;
        s.truncation = J;
        return s;
    }

    static EigenSpectrum exponential(std::size_t J = kDefaultTruncation) {
        EigenSpectrum s;
        s.family = SpectrumFamily::Exponential;
        s.truncation = J;
        return s;
    }

    static EigenSpectrum finite_linear(std::vector<double> vals) {
        for (std::size_t i = 0; i + 1 < vals.size(); ++i)
            if (vals[i] < vals[i + 1]) throw std::invalid_argument("spectrum must be nonincreasing");
        for (double v : vals)
            if (v < 0.0) throw std::invalid_argument("spectrum must be nonnegative");
        EigenSpectrum s;
        s.family = SpectrumFamily::FiniteLinear;
        s.values = std::move(vals);
        s.truncation = s.values.size();
        return s;
    }

    // j is 1-based.  Beyond the FiniteLinear rank the sequence is zero.
    double eigenvalue(std::size_t j) const {
        if (j < 1) throw std::invalid_argument("eigenvalue index is 1-based");
        switch (family) {
            case SpectrumFamily::Polynomial:
                return scale * std::pow(static_cast<double>(j), -2.0 * alpha);
            case SpectrumFamily::Exponential: {
                double d = static_cast<double>(j) - 1.0;
                return std::exp(-d * d);
            }
            case SpectrumFamily::FiniteLinear:
                return j <= values.size() ? values[j - 1] : 0.0;
        }
        return 0.0;
    }

    // sum_{j<=J} mu_j.
    double truncated_trace() const {
        double t = 0.0;
        for (std::size_t j = 1; j <= truncation; ++j) t += eigenvalue(j);
        return t;
    }

    // sum_{j>J} mu_j; analytic for Polynomial, negligible/zero otherwise.
    double tail_energy() const {
        switch (family) {
            case SpectrumFamily::Polynomial:
                return scale * detail::poly_tail(2.0 * alpha, truncation);
            case SpectrumFamily::Exponential: {
                double t = 0.0;
                for (std::size_t j = truncation + 1; j < truncation + 64; ++j) {
                    double mu = eigenvalue(j);
                    if (mu == 0.0) break;
                    t += mu;
                }
                return t;
            }
            case SpectrumFamily::FiniteLinear:
                return 0.0;
        }
        return 0.0;
    }
};

// Walsh index assignment of eigenfunctions.  Simulation: phi_j = W_{j-1};
// RegimeA: phi_j = W_{2j-1} (odd, antisymmetric about 1/2);
// RegimeB: phi_1 = W_1, phi_j = W_{2(j-1)} (even, symmetric) for j >= 2.
enum class IndexMap { Simulation, RegimeA, RegimeB };

inline std::uint64_t mapped_index(IndexMap map, std::size_t j) {
    switch (map) {
        case IndexMap::Simulation: return j - 1;
        case IndexMap::RegimeA: return 2 * j - 1;
        case IndexMap::RegimeB: return j == 1 ? 1 : 2 * (j - 1);
    }
    return 0;
}

// Inverse of mapped_index; 0 when the Walsh index is not in the map's image.
inline std::size_t eigen_index_of_walsh(IndexMap map, std::uint64_t w) {
    switch (map) {
        case IndexMap::Simulation: return static_cast<std::size_t>(w + 1);
        case IndexMap::RegimeA: return (w % 2 == 1) ? static_cast<std::size_t>((w + 1) / 2) : 0;
        case IndexMap::RegimeB:
            if (w == 1) return 1;
            return (w != 0 && w % 2 == 0) ? static_cast<std::size_t>(w / 2 + 1) : 0;
    }
    return 0;
}

struct KernelBounds {
    double b = 0.0;            // sqrt(sum_{j<=J} mu_j); tight since |phi_j| = 1
    double kappa = 1.0;        // true sup-norm of the Walsh eigenfunctions
    double tail_energy = 0.0;  // discarded sum_{j>J} mu_j, for truncation-bias bounds
};

class MercerKernel {
public:
    explicit MercerKernel(EigenSpectrum spec, IndexMap map = IndexMap::Simulation)
        : spectrum_(std::move(spec)), map_(map) {
        std::uint64_t max_index = 0;
        std::size_t last_nonzero = 0;
        for (std::size_t j = 1; j <= spectrum_.truncation; ++j) {
            if (spectrum_.eigenvalue(j) > 0.0) {
                max_index = std::max(max_index, mapped_index(map_, j));
                last_nonzero = j;
            }
        }
        terms_ = last_nonzero;
        level_ = 0;
        while ((std::uint64_t{1} << level_) <= max_index) ++level_;
        std::vector<double> nu(std::size_t{1} << level_, 0.0);
        for (std::size_t j = 1; j <= terms_; ++j) {
            double mu = spectrum_.eigenvalue(j);
            if (mu > 0.0) nu[walsh::bit_reverse(mapped_index(map_, j), level_)] += mu;
        }
        walsh::fwht(nu);
        xor_table_ = std::move(nu);
    }

    const EigenSpectrum& spectrum() const { return spectrum_; }
    IndexMap index_map() const { return map_; }
    int level() const { return level_; }
    // Number of leading spectrum terms with mu_j > 0 (trailing zeros dropped).
    std::size_t terms() const { return terms_; }

    std::size_t cell_of(double x) const {
        if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("kernel: point outside [0,1)");
        return static_cast<std::size_t>(std::ldexp(x, level_));
    }

    // K restricted to cells: value for cell pair with XOR difference d.
    double value_for_xor(std::size_t d) const { return xor_table_[d]; }

    double operator()(double x, double y) const {
        return xor_table_[cell_of(x) ^ cell_of(y)];
    }

private:
    EigenSpectrum spectrum_;
    IndexMap map_;
    std::size_t terms_ = 0;
    int level_ = 0;
    std::vector<double> xor_table_;
};

inline double kernel_eval(const MercerKernel& k, double x, double y) { return k(x, y); }

inline KernelBounds kernel_bounds(const MercerKernel& k) {
    KernelBounds out;
    out.b = std::sqrt(k.spectrum().truncated_trace());
    out.kappa = 1.0;
    out.tail_energy = k.spectrum().tail_energy();
    return out;
}

// Kernel matrices of Appendix-style LSTD computations:
// K_cov(i,j) = K(x_i, x_j)/n and K_cr(i,j) = K(x_i, x'_j)/n.
struct GramPair {
    Eigen::MatrixXd K_cov;
    Eigen::MatrixXd K_cr;
    std::size_t n = 0;
};

template <class Samples>
GramPair gram_matrices(const MercerKernel& k, const Samples& samples) {
    const std::size_t n = samples.pairs.size();
    if (n < 1) throw std::invalid_argument("gram_matrices: empty sample set");
    std::vector<std::size_t> cx(n), cxp(n);
    for (std::size_t i = 0; i < n; ++i) {
        cx[i] = k.cell_of(samples.pairs[i].first);
        cxp[i] = k.cell_of(samples.pairs[i].second);
    }
    GramPair g;
    g.n = n;
    g.K_cov.resize(n, n);
    g.K_cr.resize(n, n);
    const double dn = static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            g.K_cov(i, j) = k.value_for_xor(cx[i] ^ cx[j]) / dn;
            g.K_cr(i, j) = k.value_for_xor(cx[i] ^ cxp[j]) / dn;
        }
    }
    return g;
}

// CLI kernel grammar (case-sensitive): "poly:<alpha>[:<c>]", "exp",
// "linear:<d>" (d unit eigenvalues).
inline MercerKernel parse_kernel(const std::string& spec,
                                 std::size_t truncation = kDefaultTruncation,
                                 IndexMap map = IndexMap::Simulation) {
    auto bad = [&] { return std::invalid_argument("unrecognized kernel spec: " + spec); };
    if (spec == "exp") return MercerKernel(EigenSpectrum::exponential(truncation), map);
    if (spec.rfind("poly:", 0) == 0) {
        std::string rest = spec.substr(5);
        std::size_t colon = rest.find(':');
        try {
            double alpha = std::stod(colon == std::string::npos ? rest : rest.substr(0, colon));
            double c = colon == std::string::npos ? 1.0 : std::stod(rest.substr(colon + 1));
            return MercerKernel(EigenSpectrum::polynomial(alpha, c, truncation), map);
        } catch (const std::invalid_argument&) {
            throw bad();
        }
    }
    if (spec.rfind("linear:", 0) == 0) {
        try {
            long d = std::stol(spec.substr(7));
            if (d < 1) throw bad();
            return MercerKernel(EigenSpectrum::finite_linear(std::vector<double>(d, 1.0)), map);
        } catch (const std::invalid_argument&) {
            throw bad();
        }
    }
    throw bad();
}

}  // namespace klstd::kernel
