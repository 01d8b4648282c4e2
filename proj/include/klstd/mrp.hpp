#pragma once

// Two-state Markov chains, their block embedding into [0,1), exact value
// functions and stationary densities, i.i.d. pair sampling, and the
// hard/easy simulation ensembles.
//
// A BlockMRP partitions [0,1) into 2K dyadic cells: cells 0..K-1 are the
// "+" states of blocks 1..K, cells K..2K-1 the "-" states.  Dynamics stay
// within a block, mixing its two cells by a 2x2 chain; successor states are
// uniform within the destination cell.  The reward is r * W_1.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "klstd/rng.hpp"
#include "klstd/walsh.hpp"

namespace klstd::mrp {

enum class ChainVariant { Base, A, B };

// Flip-probability parameterization of the three chain shapes:
//   Base(p):  [[1-p, p], [p, 1-p]]
//   A(p,dp):  [[1-p-dp, p+dp], [p+dp, 1-p-dp]]
//   B(p,dp):  [[1-p+dp, p-dp], [p+dp, 1-p-dp]]
struct TwoStateChain {
    ChainVariant variant = ChainVariant::Base;
    double p = 0.0;
    double dp = 0.0;

    // Rows/cols ordered (x_+, x_-).
    std::array<std::array<double, 2>, 2> transition() const {
        switch (variant) {
            case ChainVariant::Base: return {{{1.0 - p, p}, {p, 1.0 - p}}};
            case ChainVariant::A: return {{{1.0 - p - dp, p + dp}, {p + dp, 1.0 - p - dp}}};
            case ChainVariant::B: return {{{1.0 - p + dp, p - dp}, {p + dp, 1.0 - p - dp}}};
        }
        return {};
    }

    std::array<double, 2> stationary() const {
        auto P = transition();
        // pi_+ * P(+,-) = pi_- * P(-,+)
        double up = P[1][0];
        double um = P[0][1];
        double total = up + um;
        if (total <= 0.0) return {0.5, 0.5};  // absorbing pair of cells
        return {up / total, um / total};
    }

    bool valid() const {
        // The perturbed variants keep p in [0, 1/2] so dp has headroom; a
        // Base chain is a valid stochastic matrix for any p in [0, 1]
        // (the hard simulation ensemble uses p = (1-gamma)/gamma > 1/2).
        const double p_max = variant == ChainVariant::Base ? 1.0 : 0.5;
        if (!(p >= 0.0 && p <= p_max)) return false;
        if (!(dp >= -p && dp <= p)) return false;
        if (variant == ChainVariant::Base && dp != 0.0) return false;
        auto P = transition();
        for (const auto& row : P) {
            for (double q : row)
                if (!(q >= 0.0 && q <= 1.0)) return false;
        }
        return true;
    }
};

struct TwoStateValue {
    double plus = 0.0;
    double minus = 0.0;
};

// Exact 2x2 solve of (I - gamma P) theta = [r, -r]; always invertible for
// gamma < 1.
inline TwoStateValue two_state_value(const TwoStateChain& chain, double r, double gamma) {
    if (!chain.valid()) throw std::invalid_argument("two_state_value: invalid chain");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("two_state_value: gamma outside [0,1)");
    auto P = chain.transition();
    const double a = 1.0 - gamma * P[0][0];
    const double b = -gamma * P[0][1];
    const double c = -gamma * P[1][0];
    const double d = 1.0 - gamma * P[1][1];
    const double det = a * d - b * c;
    return {(d * r - b * (-r)) / det, (a * (-r) - c * r) / det};
}

struct BlockMRP {
    std::vector<TwoStateChain> chains;  // K blocks; K must be a power of 2
    double reward_scale = 1.0;
    double gamma = 0.9;

    std::size_t blocks() const { return chains.size(); }

    int level() const {
        std::size_t k = blocks();
        if (k == 0 || (k & (k - 1)) != 0) throw std::invalid_argument("BlockMRP: K must be a power of 2");
        int lev = 1;
        while ((std::size_t{1} << lev) < 2 * k) ++lev;
        return lev;
    }

    bool valid() const {
        if (chains.empty() || (blocks() & (blocks() - 1)) != 0) return false;
        if (!(gamma > 0.0 && gamma < 1.0)) return false;
        for (const auto& c : chains)
            if (!c.valid()) return false;
        return true;
    }

    walsh::DyadicFunction reward() const {
        int lev = level();
        std::size_t cells = std::size_t{1} << lev;
        std::vector<double> vals(cells);
        for (std::size_t c = 0; c < cells; ++c)
            vals[c] = c < cells / 2 ? reward_scale : -reward_scale;
        return walsh::DyadicFunction(lev, std::move(vals));
    }
};

inline BlockMRP single_block(ChainVariant variant, double p, double dp, double r, double gamma) {
    BlockMRP m;
    m.chains = {TwoStateChain{variant, p, dp}};
    m.reward_scale = r;
    m.gamma = gamma;
    return m;
}

// Value function, piecewise constant on the 2K-cell grid; satisfies the
// Bellman fixed point exactly under the block transition.
inline walsh::DyadicFunction exact_value_function(const BlockMRP& m) {
    if (!m.valid()) throw std::invalid_argument("exact_value_function: invalid MRP");
    const std::size_t K = m.blocks();
    int lev = m.level();
    std::vector<double> vals(std::size_t{1} << lev);
    for (std::size_t k = 0; k < K; ++k) {
        TwoStateValue v = two_state_value(m.chains[k], m.reward_scale, m.gamma);
        vals[k] = v.plus;
        vals[K + k] = v.minus;
    }
    return walsh::DyadicFunction(lev, std::move(vals));
}

// Stationary density w.r.t. Lebesgue measure; each block carries mass 1/K
// split between its two cells by the chain's stationary distribution.
inline walsh::DyadicFunction stationary_density(const BlockMRP& m) {
    if (!m.valid()) throw std::invalid_argument("stationary_density: invalid MRP");
    const std::size_t K = m.blocks();
    int lev = m.level();
    std::vector<double> vals(std::size_t{1} << lev);
    for (std::size_t k = 0; k < K; ++k) {
        auto pi = m.chains[k].stationary();
        vals[k] = 2.0 * pi[0];
        vals[K + k] = 2.0 * pi[1];
    }
    return walsh::DyadicFunction(lev, std::move(vals));
}

struct SampleSet {
    std::vector<std::pair<double, double>> pairs;
    std::uint64_t seed = 0;

    std::size_t n() const { return pairs.size(); }
};

// n i.i.d. pairs: x ~ stationary density, x' ~ block transition given x's
// cell, uniform within the destination cell.  Deterministic given seed.
inline SampleSet sample_pairs(const BlockMRP& m, std::size_t n, std::uint64_t seed) {
    if (!m.valid()) throw std::invalid_argument("sample_pairs: invalid MRP");
    if (n < 1) throw std::invalid_argument("sample_pairs: n must be >= 1");
    const std::size_t K = m.blocks();
    const int lev = m.level();
    const double cell_width = 1.0 / static_cast<double>(std::size_t{1} << lev);

    walsh::DyadicFunction density = stationary_density(m);
    rng::CounterRng gen(seed);

    SampleSet out;
    out.seed = seed;
    out.pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = gen.categorical(density.values);
        double x = (static_cast<double>(c) + gen.next_unit()) * cell_width;
        std::size_t k = c % K;
        bool minus = c >= K;
        auto P = m.chains[k].transition();
        bool flip = gen.bernoulli(minus ? P[1][0] : P[0][1]);
        std::size_t c_next = (minus != flip) ? K + k : k;
        double xp = (static_cast<double>(c_next) + gen.next_unit()) * cell_width;
        out.pairs.emplace_back(x, xp);
    }
    return out;
}

// Variance of the Bellman residual theta*(X) - r(X) - gamma theta*(X').
// The residual has zero conditional mean, so this is
// gamma^2 E[Var(theta*(X') | X)], an exact two-point computation per cell.
inline double bellman_residual_variance(const BlockMRP& m) {
    if (!m.valid()) throw std::invalid_argument("bellman_residual_variance: invalid MRP");
    const std::size_t K = m.blocks();
    walsh::DyadicFunction density = stationary_density(m);
    const double cell_mass = 1.0 / static_cast<double>(2 * K);
    double var = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        TwoStateValue v = two_state_value(m.chains[k], m.reward_scale, m.gamma);
        auto P = m.chains[k].transition();
        for (int s = 0; s < 2; ++s) {
            double mean = P[s][0] * v.plus + P[s][1] * v.minus;
            double second = P[s][0] * v.plus * v.plus + P[s][1] * v.minus * v.minus;
            double mass = density.values[s == 0 ? k : K + k] * cell_mass;
            var += mass * (second - mean * mean);
        }
    }
    return m.gamma * m.gamma * var;
}

enum class EnsembleKind { Hard, Easy };

// The two K=1 simulation ensembles: easy has p = 1/4 (noise and radius of
// constant order in the horizon), hard has p = (1-gamma)/gamma (both scale
// with the horizon).  The hard choice needs gamma > 1/2 to keep p <= 1/2.
inline BlockMRP make_ensemble(EnsembleKind kind, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("make_ensemble: gamma outside (0,1)");
    double p = 0.25;
    if (kind == EnsembleKind::Hard) {
        if (!(gamma > 0.5)) throw std::invalid_argument("make_ensemble: hard ensemble needs gamma > 1/2");
        p = (1.0 - gamma) / gamma;
    }
    return single_block(ChainVariant::Base, p, 0.0, 1.0, gamma);
}

}  // namespace klstd::mrp
