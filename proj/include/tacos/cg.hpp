#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

namespace tacos {

enum class CgStatus {
    converged,
    max_iterations,  // non-fatal: caller decides what to do with the iterate
    nonfinite,       // the operator produced NaN/Inf
};

template <class Vec>
struct CgResult {
    Vec x;
    int iterations = 0;
    double relative_residual = 0.0;
    CgStatus status = CgStatus::converged;

    bool converged() const { return status == CgStatus::converged; }
};

namespace detail {
template <class Vec>
double frob_dot(const Vec& a, const Vec& b) {
    return (a.array() * b.array()).sum();
}
}  // namespace detail

/// Conjugate gradient on a symmetric positive (semi)definite operator given
/// only through matrix-vector products. Vec is any real Eigen vector/matrix
/// type (inner products are taken entrywise). Stops when
/// ||Ax - b|| <= tol * ||b|| or after max_iter steps; supports warm starts.
template <class Vec, class MatVec>
CgResult<Vec> conjugate_gradient(MatVec&& apply_a, const Vec& b, const Vec& x0,
                                 double tol, int max_iter) {
    if (!b.allFinite()) throw std::invalid_argument("conjugate_gradient: non-finite rhs");
    if (x0.rows() != b.rows() || x0.cols() != b.cols())
        throw std::invalid_argument("conjugate_gradient: x0 shape mismatch");

    CgResult<Vec> result;
    const double b_norm = std::sqrt(detail::frob_dot(b, b));
    if (b_norm == 0.0) {
        result.x = Vec::Zero(b.rows(), b.cols());
        return result;
    }

    result.x = x0;
    Vec r = b - apply_a(x0);
    double rr = detail::frob_dot(r, r);
    result.relative_residual = std::sqrt(rr) / b_norm;
    if (result.relative_residual <= tol) return result;

    Vec p = r;
    for (int k = 1; k <= max_iter; ++k) {
        Vec ap = apply_a(p);
        if (!ap.allFinite()) {
            result.iterations = k;
            result.status = CgStatus::nonfinite;
            return result;
        }
        const double p_ap = detail::frob_dot(p, ap);
        if (!(p_ap > 0.0)) {
            // curvature breakdown on a supposedly PSD map
            result.iterations = k;
            result.status = CgStatus::nonfinite;
            return result;
        }
        const double alpha = rr / p_ap;
        result.x += alpha * p;
        r -= alpha * ap;
        const double rr_new = detail::frob_dot(r, r);
        result.iterations = k;
        result.relative_residual = std::sqrt(rr_new) / b_norm;
        if (result.relative_residual <= tol) return result;
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    result.status = CgStatus::max_iterations;
    return result;
}

}  // namespace tacos
