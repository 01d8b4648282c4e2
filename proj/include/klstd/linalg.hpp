#pragma once

// Dense solver shared by the sample-level and population-level fits: general
// (non-symmetric) partial-pivot LU, one step of iterative refinement, and a
// residual certificate.  The factorization runs in place; callers supply a
// functor that re-applies the original matrix so the residual can be formed
// without keeping a second dense copy.

#include <Eigen/Dense>
#include <cmath>

#include "klstd/errors.hpp"

namespace klstd::linalg {

struct SolveInfo {
    double residual_rel = 0.0;  // ||y - A x|| / ||y|| after refinement
    double rcond = 0.0;         // reciprocal condition estimate from the LU
};

// Solves A x = y, destroying A.  apply(v) must return A0 * v for the matrix
// as it was on entry.  Throws SingularSystem when the refined residual
// exceeds tol * ||y||.
template <class Apply>
Eigen::VectorXd solve_refined(Eigen::MatrixXd& A, const Eigen::VectorXd& y, Apply&& apply,
                              SolveInfo* info = nullptr, double tol = 1e-8) {
    Eigen::PartialPivLU<Eigen::Ref<Eigen::MatrixXd>> lu(A);
    Eigen::VectorXd x = lu.solve(y);
    const double y_norm = y.norm();
    if (!x.allFinite()) throw SingularSystem("linear solve produced non-finite solution");

    Eigen::VectorXd residual = y - apply(x);
    x += lu.solve(residual);
    residual = y - apply(x);

    double rel = y_norm > 0.0 ? residual.norm() / y_norm : residual.norm();
    if (info) {
        info->residual_rel = rel;
        info->rcond = lu.rcond();
    }
    if (!x.allFinite() || !(rel <= tol))
        throw SingularSystem("linear solve residual " + std::to_string(rel) +
                             " exceeds tolerance " + std::to_string(tol));
    return x;
}

}  // namespace klstd::linalg
