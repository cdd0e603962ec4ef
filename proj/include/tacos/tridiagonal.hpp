#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tacos {

/// Complex tridiagonal system. lower/upper have length n-1, diag length n.
/// The covariance-smoothing normal equations always produce the Hermitian
/// case (upper[i] == conj(lower[i]), real diagonal), but the solver only
/// needs non-vanishing elimination pivots.
struct TridiagonalSystem {
    Eigen::VectorXcd lower;
    Eigen::VectorXcd diag;
    Eigen::VectorXcd upper;

    int size() const { return static_cast<int>(diag.size()); }

    void validate() const {
        const int n = size();
        if (n < 1) throw std::invalid_argument("TridiagonalSystem: empty diagonal");
        if (lower.size() != n - 1 || upper.size() != n - 1)
            throw std::invalid_argument("TridiagonalSystem: band length mismatch");
    }

    Eigen::MatrixXcd dense() const {
        validate();
        const int n = size();
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = diag[i];
        for (int i = 0; i + 1 < n; ++i) {
            m(i + 1, i) = lower[i];
            m(i, i + 1) = upper[i];
        }
        return m;
    }
};

/// Thomas elimination, column by column, O(n * cols).
/// Throws if an elimination pivot falls below pivot_rel_tol * max |diag|.
inline Eigen::MatrixXcd thomas_solve(const TridiagonalSystem& sys,
                                     const Eigen::MatrixXcd& rhs,
                                     double pivot_rel_tol = 1e-14) {
    sys.validate();
    const int n = sys.size();
    if (rhs.rows() != n) throw std::invalid_argument("thomas_solve: rhs row count mismatch");

    const double pivot_floor = pivot_rel_tol * sys.diag.cwiseAbs().maxCoeff();

    Eigen::VectorXcd upper_scaled(n > 1 ? n - 1 : 0);
    Eigen::MatrixXcd x = rhs;

    std::complex<double> pivot = sys.diag[0];
    if (std::abs(pivot) <= pivot_floor)
        throw std::runtime_error("thomas_solve: vanishing pivot at row 0");
    if (n > 1) upper_scaled[0] = sys.upper[0] / pivot;
    x.row(0) /= pivot;

    for (int i = 1; i < n; ++i) {
        pivot = sys.diag[i] - sys.lower[i - 1] * upper_scaled[i - 1];
        if (std::abs(pivot) <= pivot_floor)
            throw std::runtime_error("thomas_solve: vanishing pivot at row " + std::to_string(i));
        if (i < n - 1) upper_scaled[i] = sys.upper[i] / pivot;
        x.row(i) = (x.row(i) - sys.lower[i - 1] * x.row(i - 1)) / pivot;
    }

    for (int i = n - 2; i >= 0; --i) x.row(i) -= upper_scaled[i] * x.row(i + 1);
    return x;
}

}  // namespace tacos
