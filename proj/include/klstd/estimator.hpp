#pragma once

// The regularized kernel LSTD estimator.
//
// Sample fit: solve the n x n system (K_cov + lambda I - gamma K_cr^T) a = y
// with y_i = r(x'_i)/sqrt(n); the estimate is
// theta_hat = r + (gamma/sqrt(n)) sum_i a_i K(., x_i).
//
// Population fit: the same fixed-point equation with exact covariance and
// cross-covariance operators, solved in the kernel eigenbasis; with
// lambda = 0 and theta* in the span it recovers theta* exactly.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "klstd/errors.hpp"
#include "klstd/kernel.hpp"
#include "klstd/linalg.hpp"
#include "klstd/mrp.hpp"
#include "klstd/walsh.hpp"

namespace klstd::estimator {

struct LstdEstimate {
    Eigen::VectorXd alpha;
    mrp::SampleSet samples;
    kernel::MercerKernel kern;
    walsh::DyadicFunction reward;
    double gamma = 0.0;
    double lambda = 0.0;
    double solve_residual = 0.0;  // relative residual of the fitted system
    double rcond = 0.0;           // reciprocal condition estimate
};

inline LstdEstimate fit(const kernel::MercerKernel& kern, const mrp::SampleSet& samples,
                        const walsh::DyadicFunction& reward, double gamma, double lambda) {
    const std::size_t n = samples.n();
    if (n < 1) throw std::invalid_argument("fit: empty sample set");
    if (lambda < 0.0) throw std::invalid_argument("fit: lambda must be >= 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("fit: gamma outside [0,1)");

    std::vector<std::size_t> cx(n), cxp(n);
    for (std::size_t i = 0; i < n; ++i) {
        cx[i] = kern.cell_of(samples.pairs[i].first);
        cxp[i] = kern.cell_of(samples.pairs[i].second);
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    // M(i,j) = K(x_i,x_j)/n + lambda 1{i=j} - gamma K(x_j,x'_i)/n
    Eigen::MatrixXd M(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = (kern.value_for_xor(cx[i] ^ cx[j]) -
                        gamma * kern.value_for_xor(cx[j] ^ cxp[i])) * inv_n;
            M(i, j) = v;
        }
        M(j, j) += lambda;
    }

    Eigen::VectorXd y(n);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) y(i) = reward.at(samples.pairs[i].second) * inv_sqrt_n;

    // Re-applies the system matrix from the kernel table so refinement does
    // not need a second dense copy.
    auto apply = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out(n);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                acc += (kern.value_for_xor(cx[i] ^ cx[j]) -
                        gamma * kern.value_for_xor(cx[j] ^ cxp[i])) * v(j);
            out(i) = acc * inv_n + lambda * v(i);
        }
        return out;
    };

    linalg::SolveInfo info;
    Eigen::VectorXd alpha = linalg::solve_refined(M, y, apply, &info);

    LstdEstimate est{std::move(alpha), samples, kern, reward, gamma, lambda,
                     info.residual_rel, info.rcond};
    return est;
}

inline double predict(const LstdEstimate& est, double x) {
    if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("predict: x outside [0,1)");
    const std::size_t n = est.samples.n();
    const std::size_t cx = est.kern.cell_of(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += est.alpha(i) * est.kern.value_for_xor(cx ^ est.kern.cell_of(est.samples.pairs[i].first));
    return est.reward.at(x) + est.gamma / std::sqrt(static_cast<double>(n)) * acc;
}

// Finite Walsh expansion of theta_hat.  The correction theta_hat - r puts
// weight (gamma/sqrt(n)) mu_j sum_i a_i W_{m(j)}(x_i) on Walsh index m(j);
// the per-sample sign sums are obtained by aggregating alpha per cell and
// applying one fast transform.
inline walsh::WalshCoefficients estimate_as_walsh(const LstdEstimate& est, int level) {
    const int klevel = est.kern.level();
    if (level < klevel || level < est.reward.level)
        throw std::invalid_argument("estimate_as_walsh: level too small for kernel truncation");

    std::vector<double> by_cell(std::size_t{1} << klevel, 0.0);
    for (std::size_t i = 0; i < est.samples.n(); ++i)
        by_cell[est.kern.cell_of(est.samples.pairs[i].first)] += est.alpha(i);
    walsh::fwht(by_cell);  // by_cell[t] = sum_i alpha_i (-1)^{popcount(t & c_i)}

    walsh::WalshCoefficients out;
    out.level = level;
    out.coeffs.assign(std::size_t{1} << level, 0.0);

    const double scale = est.gamma / std::sqrt(static_cast<double>(est.samples.n()));
    const auto& spec = est.kern.spectrum();
    for (std::size_t j = 1; j <= est.kern.terms(); ++j) {
        double mu = spec.eigenvalue(j);
        if (mu <= 0.0) continue;
        std::uint64_t m = kernel::mapped_index(est.kern.index_map(), j);
        out.coeffs[m] += scale * mu * by_cell[walsh::bit_reverse(m, klevel)];
    }

    walsh::WalshCoefficients rc = walsh::walsh_transform(est.reward);
    for (std::size_t e = 0; e < rc.coeffs.size(); ++e) out.coeffs[e] += rc.coeffs[e];
    return out;
}

// Exact L2(density) distance between the fitted estimate and theta*; no
// Monte Carlo is involved, everything is piecewise constant.
inline double l2_error(const LstdEstimate& est, const walsh::DyadicFunction& theta_star,
                       const walsh::DyadicFunction& density) {
    int level = std::max({est.kern.level(), est.reward.level, theta_star.level, density.level});
    walsh::DyadicFunction fitted = walsh::walsh_inverse(estimate_as_walsh(est, level));
    walsh::DyadicFunction diff = walsh::subtract(fitted, theta_star);
    return walsh::l2_norm(diff, density);
}

// Population-level fixed point in the eigenbasis.  With G the density-
// weighted Gram of the eigenfunctions and G_P its transition-smoothed
// counterpart, the coefficients solve
//   [diag(mu) G + lambda I - gamma diag(mu) G_P] c = [diag(mu) G + lambda I] r.
inline walsh::DyadicFunction population_fixed_point(const kernel::MercerKernel& kern,
                                                    const mrp::BlockMRP& m, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("population_fixed_point: lambda must be >= 0");
    const std::size_t J = kern.terms();
    if (J == 0) throw std::invalid_argument("population_fixed_point: empty spectrum");
    const int mlevel = m.level();
    const std::size_t mcells = std::size_t{1} << mlevel;
    const std::size_t K = m.blocks();

    walsh::DyadicFunction density = stationary_density(m);
    walsh::WalshCoefficients dhat = walsh::walsh_transform(density);

    // Walsh coefficients of the reward, expressed in the eigenbasis.
    walsh::WalshCoefficients rhat = walsh::walsh_transform(m.reward());
    Eigen::VectorXd r_coef = Eigen::VectorXd::Zero(J);
    double outside = 0.0;
    std::vector<std::int64_t> eigen_of_walsh(mcells, -1);
    for (std::size_t j = 1; j <= J; ++j) {
        std::uint64_t w = kernel::mapped_index(kern.index_map(), j);
        if (w < mcells) eigen_of_walsh[w] = static_cast<std::int64_t>(j);
    }
    for (std::size_t e = 0; e < mcells; ++e) {
        if (eigen_of_walsh[e] >= 0)
            r_coef(eigen_of_walsh[e] - 1) = rhat.coeffs[e];
        else
            outside += rhat.coeffs[e] * rhat.coeffs[e];
    }
    if (outside > 1e-10)
        throw SpanError("population_fixed_point: reward has energy outside the kernel span");

    // G(i,j) = <phi_i, phi_j>_density = dhat[m_i XOR m_j] (0 beyond the grid).
    auto gram_entry = [&](std::uint64_t wi, std::uint64_t wj) {
        std::uint64_t d = wi ^ wj;
        return d < mcells ? dhat.coeffs[d] : 0.0;
    };

    // (P phi_j) is nonzero only when m_j lives on the MRP grid; it is then a
    // grid function, and column j of G_P consists of Walsh coefficients of
    // (P phi_j) * density.
    Eigen::MatrixXd A(J, J);
    Eigen::VectorXd mu(J);
    for (std::size_t j = 1; j <= J; ++j) mu(j - 1) = kern.spectrum().eigenvalue(j);

    std::vector<std::uint64_t> widx(J);
    for (std::size_t j = 0; j < J; ++j) widx[j] = kernel::mapped_index(kern.index_map(), j + 1);

    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < J; ++i)
            A(i, j) = mu(i) * gram_entry(widx[i], widx[j]);
        A(j, j) += lambda;
    }
    for (std::size_t j = 0; j < J; ++j) {
        if (widx[j] >= mcells) continue;
        std::vector<double> pphi(mcells);
        for (std::size_t c = 0; c < mcells; ++c) {
            std::size_t k = c % K;
            bool minus = c >= K;
            auto P = m.chains[k].transition();
            double stay = minus ? P[1][1] : P[0][0];
            double move = minus ? P[1][0] : P[0][1];
            std::size_t other = minus ? k : K + k;
            double phi_here = walsh::sign_on_cell(widx[j], c, mlevel);
            double phi_other = walsh::sign_on_cell(widx[j], other, mlevel);
            pphi[c] = (stay * phi_here + move * phi_other) * density.values[c];
        }
        walsh::WalshCoefficients ghat =
            walsh::walsh_transform(walsh::DyadicFunction(mlevel, std::move(pphi)));
        for (std::size_t i = 0; i < J; ++i) {
            if (widx[i] < mcells)
                A(i, j) -= m.gamma * mu(i) * ghat.coeffs[widx[i]];
        }
    }

    Eigen::MatrixXd A0 = A;
    // RHS is [diag(mu) G + lambda I] r, built directly from G.
    Eigen::VectorXd rhs(J);
    for (std::size_t i = 0; i < J; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < J; ++j) acc += mu(i) * gram_entry(widx[i], widx[j]) * r_coef(j);
        rhs(i) = acc + lambda * r_coef(i);
    }

    Eigen::VectorXd c = linalg::solve_refined(A, rhs, [&](const Eigen::VectorXd& v) { return A0 * v; });

    int out_level = std::max(kern.level(), mlevel);
    walsh::WalshCoefficients chat;
    chat.level = out_level;
    chat.coeffs.assign(std::size_t{1} << out_level, 0.0);
    for (std::size_t j = 0; j < J; ++j) chat.coeffs[widx[j]] += c(j);
    return walsh::walsh_inverse(chat);
}

}  // namespace klstd::estimator
