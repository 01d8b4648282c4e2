#pragma once

// Critical-inequality machinery: the kernel complexity function
// C(delta) = sqrt(sum_j min{mu_j/delta^2, 1}), its smallest crossing with
// the SNR line (the critical radius), the statistical dimension, the
// regularization rule lambda = c0 (1-gamma) delta_n^2, the problem radius
// R, and the predicted scaling exponents in n and in the effective horizon
// H = 1/(1-gamma).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "klstd/errors.hpp"
#include "klstd/kernel.hpp"
#include "klstd/mrp.hpp"
#include "klstd/walsh.hpp"

namespace klstd::theory {

namespace detail {
// mu >= delta^2 up to one-ulp slack, so dyadic boundaries like
// mu_10 = 0.01 vs (0.1)^2 land on the intended side.
inline bool meets_threshold(double mu, double d2) { return mu >= d2 * (1.0 - 1e-12); }
}  // namespace detail

// Largest j with mu_j >= delta^2 (0 if mu_1 < delta^2).  Closed form per
// family, then nudged across floating-point boundaries.  For absurdly small
// delta the polynomial count is clamped at 2^60; every consumer saturates
// long before that.
inline std::size_t statistical_dimension(const kernel::EigenSpectrum& spec, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("statistical_dimension: delta must be > 0");
    const double d2 = delta * delta;
    const double cap = 0x1p60;
    std::size_t guess = 0;
    switch (spec.family) {
        case kernel::SpectrumFamily::FiniteLinear: {
            std::size_t j = 0;
            while (j < spec.values.size() && detail::meets_threshold(spec.values[j], d2)) ++j;
            return j;
        }
        case kernel::SpectrumFamily::Polynomial: {
            // scale j^{-2 alpha} >= d2  <=>  j <= (scale/d2)^{1/(2 alpha)}
            double g = std::pow(spec.scale / d2, 0.5 / spec.alpha);
            guess = static_cast<std::size_t>(std::clamp(g, 0.0, cap));
            break;
        }
        case kernel::SpectrumFamily::Exponential: {
            double l = -std::log(d2);
            guess = l <= 0.0 ? 1 : 1 + static_cast<std::size_t>(std::sqrt(l));
            break;
        }
    }
    if (guess >= static_cast<std::size_t>(cap)) return guess;
    for (int budget = 0; budget < 1000 && guess > 0; ++budget) {
        if (detail::meets_threshold(spec.eigenvalue(guess), d2)) break;
        --guess;
    }
    for (int budget = 0; budget < 1000; ++budget) {
        if (!detail::meets_threshold(spec.eigenvalue(guess + 1), d2)) break;
        ++guess;
    }
    return guess;
}

// C(delta) over the full (untruncated) sequence: the head with mu_j >= d2
// contributes one per term, the tail contributes mu_j/d2 with an analytic
// remainder for polynomial decay.
inline double kernel_complexity(const kernel::EigenSpectrum& spec, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("kernel_complexity: delta must be > 0");
    const double d2 = delta * delta;
    const std::size_t head = statistical_dimension(spec, delta);
    double tail = 0.0;
    switch (spec.family) {
        case kernel::SpectrumFamily::FiniteLinear:
            for (std::size_t j = head; j < spec.values.size(); ++j) tail += spec.values[j];
            break;
        case kernel::SpectrumFamily::Polynomial:
            tail = spec.scale * kernel::detail::poly_tail(2.0 * spec.alpha, head);
            break;
        case kernel::SpectrumFamily::Exponential:
            for (std::size_t j = head + 1;; ++j) {
                double mu = spec.eigenvalue(j);
                if (mu == 0.0 || mu < d2 * 1e-18) break;
                tail += mu;
            }
            break;
    }
    return std::sqrt(static_cast<double>(head) + tail / d2);
}

struct CriticalRadiusProblem {
    kernel::EigenSpectrum spectrum;
    std::size_t n = 0;
    double R = 1.0;      // Hilbert-norm scale of the fixed point
    double gamma = 0.0;  // discount; enters through 1/(1-gamma)
    double zeta = 1.0;   // noise scale

    double slope() const {
        return std::sqrt(static_cast<double>(n)) * R * (1.0 - gamma) / zeta;
    }
};

// Smallest delta with C(delta) <= slope * delta.  C is decreasing and the
// right side linear, so the crossing is unique; bisection brackets it and
// the certificate C(0.999 delta) > 0.999 slope delta holds at return.
inline double critical_radius(const CriticalRadiusProblem& prob) {
    const double slope = prob.slope();
    if (!(slope > 0.0)) throw NoSolution("critical_radius: non-positive slope");
    auto satisfied = [&](double delta) { return kernel_complexity(prob.spectrum, delta) <= slope * delta; };

    double lo = 1e-12;
    double b = std::sqrt(prob.spectrum.truncated_trace() + prob.spectrum.tail_energy());
    // For delta >= sqrt(mu_1), C(delta) = b/delta, so the crossing is at
    // most sqrt(b/slope); widen a little for safety.
    double hi = 2.0 * std::max(b, std::sqrt(b / slope));
    if (!satisfied(hi)) throw NoSolution("critical_radius: no crossing in bracket");
    if (satisfied(lo)) return lo;

    for (int it = 0; it < 200 && (hi - lo) > 1e-10 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        (satisfied(mid) ? hi : lo) = mid;
    }
    return hi;
}

// lambda_n = c0 (1-gamma) delta_n^2.
inline double choose_lambda(double delta_n, double gamma, double c0 = 0.01) {
    if (delta_n < 0.0 || c0 <= 0.0 || !(gamma < 1.0))
        throw std::invalid_argument("choose_lambda: bad inputs");
    return c0 * (1.0 - gamma) * delta_n * delta_n;
}

// R = max{ ||theta* - r||_H, 2 ||theta*||_inf / b }, with the Hilbert norm
// computed from Walsh coefficients (||f||_H^2 = sum_j f_j^2 / mu_j).
inline double compute_radius_R(const kernel::MercerKernel& kern, const mrp::BlockMRP& m) {
    walsh::DyadicFunction theta = exact_value_function(m);
    walsh::DyadicFunction diff = walsh::subtract(theta, m.reward());
    walsh::WalshCoefficients dhat = walsh::walsh_transform(diff);

    double hilbert_sq = 0.0;
    double outside = 0.0;
    for (std::size_t e = 0; e < dhat.coeffs.size(); ++e) {
        double coef = dhat.coeffs[e];
        if (coef == 0.0) continue;
        std::size_t j = kernel::eigen_index_of_walsh(kern.index_map(), e);
        double mu = (j >= 1 && j <= kern.terms()) ? kern.spectrum().eigenvalue(j) : 0.0;
        if (mu > 0.0)
            hilbert_sq += coef * coef / mu;
        else
            outside += coef * coef;
    }
    if (outside > 1e-10)
        throw SpanError("compute_radius_R: theta* - r has energy outside the kernel span");

    double b = kernel_bounds(kern).b;
    return std::max(std::sqrt(hilbert_sq), 2.0 * theta.sup_norm() / b);
}

struct RatePrediction {
    double n_exponent = 0.0;  // squared error ~ n^{-n_exponent}
    double h_exponent = 0.0;  // squared error ~ H^{h_exponent}
    mrp::EnsembleKind regime = mrp::EnsembleKind::Easy;
};

// Predicted exponents: error^2 ~ (1/n)^{2a/(2a+1)} in the sample size, and
// H^{2(3a+1)/(2a+1)} (hard) or H^{4a/(2a+1)} (easy) in the horizon.  The
// exponential family is the a -> infinity limit.
inline RatePrediction predicted_exponents(const kernel::EigenSpectrum& spec,
                                          mrp::EnsembleKind regime) {
    RatePrediction out;
    out.regime = regime;
    switch (spec.family) {
        case kernel::SpectrumFamily::Polynomial: {
            double a = spec.alpha;
            out.n_exponent = 2.0 * a / (2.0 * a + 1.0);
            out.h_exponent = regime == mrp::EnsembleKind::Hard
                                 ? 2.0 * (3.0 * a + 1.0) / (2.0 * a + 1.0)
                                 : 4.0 * a / (2.0 * a + 1.0);
            return out;
        }
        case kernel::SpectrumFamily::Exponential:
            out.n_exponent = 1.0;
            out.h_exponent = regime == mrp::EnsembleKind::Hard ? 3.0 : 2.0;
            return out;
        case kernel::SpectrumFamily::FiniteLinear:
            throw std::invalid_argument("predicted_exponents: unsupported spectrum family");
    }
    throw std::invalid_argument("predicted_exponents: unsupported spectrum family");
}

}  // namespace klstd::theory
