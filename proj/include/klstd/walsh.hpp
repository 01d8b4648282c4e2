#pragma once

// Walsh functions and exact algebra for dyadic piecewise-constant functions
// on [0,1).
//
// Indexing convention (natural binary, not Hadamard/Paley ordering):
//
//   W_j(x) = (-1)^{sum_i k_i x_{i+1}}
//
// where j = sum_{i>=0} k_i 2^i and x = 0.x_1 x_2 x_3 ... in binary.  Bit i
// of the index pairs with fractional bit i+1 of the argument, so the LSB of
// j controls the coarsest oscillation: W_1 = +1 on [0,1/2), -1 on [1/2,1).
// The family is multiplicative under index XOR: W_i * W_j = W_{i XOR j}.
//
// On the level-L grid (cells [k/2^L, (k+1)/2^L)), W_j for j < 2^L is
// constant per cell with sign (-1)^{popcount(bitrev_L(j) & k)}, which is
// what ties the transform below to the standard fast Walsh-Hadamard
// butterfly plus a bit reversal.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace klstd::walsh {

inline std::uint64_t bit_reverse(std::uint64_t v, int bits) {
    std::uint64_t out = 0;
    for (int i = 0; i < bits; ++i) out |= ((v >> i) & 1ULL) << (bits - 1 - i);
    return out;
}

// Sign of W_j on cell `cell` of the level-`level` grid.  Requires j < 2^level.
inline int sign_on_cell(std::uint64_t j, std::uint64_t cell, int level) {
    return (__builtin_popcountll(bit_reverse(j, level) & cell) & 1) ? -1 : +1;
}

// Exact evaluation of W_j at a point; the argument's bits are consumed by
// repeated doubling, which is exact binary arithmetic on doubles.
inline int walsh_eval(std::uint64_t j, double x) {
    if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("walsh_eval: x outside [0,1)");
    int parity = 0;
    double t = x;
    while (j != 0 && t != 0.0) {
        t *= 2.0;
        int bit = t >= 1.0 ? 1 : 0;
        t -= bit;
        parity ^= bit & static_cast<int>(j & 1ULL);
        j >>= 1;
    }
    return parity ? -1 : +1;
}

// In-place unnormalized Walsh-Hadamard transform in natural binary order:
// out[d] = sum_t in[t] * (-1)^{popcount(t & d)}.  Length must be a power of 2.
inline void fwht(std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fwht: length not a power of 2");
    for (std::size_t stride = 1; stride < n; stride <<= 1) {
        for (std::size_t base = 0; base < n; base += 2 * stride) {
            for (std::size_t k = base; k < base + stride; ++k) {
                double a = v[k];
                double b = v[k + stride];
                v[k] = a + b;
                v[k + stride] = a - b;
            }
        }
    }
}

// Piecewise-constant function on the level-L dyadic partition of [0,1).
struct DyadicFunction {
    int level = 0;
    std::vector<double> values{0.0};  // 2^level entries, cell k = [k/2^L,(k+1)/2^L)

    DyadicFunction() = default;
    DyadicFunction(int lev, std::vector<double> vals) : level(lev), values(std::move(vals)) {
        if (level < 0 || values.size() != (std::size_t{1} << level))
            throw std::invalid_argument("DyadicFunction: values size != 2^level");
    }

    static DyadicFunction constant(double c, int lev = 0) {
        return DyadicFunction(lev, std::vector<double>(std::size_t{1} << lev, c));
    }

    std::size_t size() const { return values.size(); }

    std::size_t cell_of(double x) const {
        if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("DyadicFunction: x outside [0,1)");
        return static_cast<std::size_t>(std::ldexp(x, level));
    }

    double at(double x) const { return values[cell_of(x)]; }

    // Same function represented on a finer grid; pointwise identical.
    DyadicFunction refined(int new_level) const {
        if (new_level < level) throw std::invalid_argument("DyadicFunction: cannot coarsen");
        if (new_level == level) return *this;
        const std::size_t rep = std::size_t{1} << (new_level - level);
        std::vector<double> out;
        out.reserve(values.size() * rep);
        for (double v : values)
            for (std::size_t r = 0; r < rep; ++r) out.push_back(v);
        return DyadicFunction(new_level, std::move(out));
    }

    double sup_norm() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }

    double min_value() const {
        double m = values.front();
        for (double v : values) m = std::min(m, v);
        return m;
    }
};

inline DyadicFunction subtract(const DyadicFunction& f, const DyadicFunction& g) {
    int lev = std::max(f.level, g.level);
    DyadicFunction a = f.refined(lev);
    DyadicFunction b = g.refined(lev);
    for (std::size_t k = 0; k < a.size(); ++k) a.values[k] -= b.values[k];
    return a;
}

// Walsh expansion of a level-L function: coeffs[j] = <f, W_j> under Lebesgue
// measure, j = 0 .. 2^L - 1.
struct WalshCoefficients {
    int level = 0;
    std::vector<double> coeffs{0.0};
};

inline WalshCoefficients walsh_transform(const DyadicFunction& f) {
    std::vector<double> t = f.values;
    fwht(t);
    const double scale = 1.0 / static_cast<double>(f.size());
    WalshCoefficients out;
    out.level = f.level;
    out.coeffs.resize(f.size());
    for (std::size_t j = 0; j < f.size(); ++j)
        out.coeffs[j] = t[bit_reverse(j, f.level)] * scale;
    return out;
}

inline DyadicFunction walsh_inverse(const WalshCoefficients& c) {
    std::vector<double> t(c.coeffs.size());
    for (std::size_t j = 0; j < t.size(); ++j) t[bit_reverse(j, c.level)] = c.coeffs[j];
    fwht(t);
    return DyadicFunction(c.level, std::move(t));
}

// Exact Riemann sum of f*g*density at the common refinement level.
inline double l2_inner(const DyadicFunction& f, const DyadicFunction& g,
                       const DyadicFunction& density) {
    int lev = std::max({f.level, g.level, density.level});
    DyadicFunction a = f.refined(lev);
    DyadicFunction b = g.refined(lev);
    DyadicFunction w = density.refined(lev);
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += a.values[k] * b.values[k] * w.values[k];
    return sum / static_cast<double>(a.size());
}

inline double l2_norm(const DyadicFunction& f, const DyadicFunction& density) {
    return std::sqrt(l2_inner(f, f, density));
}

}  // namespace klstd::walsh
