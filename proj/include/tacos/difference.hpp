#pragma once

#include <stdexcept>

#include <Eigen/Dense>

namespace tacos {

/// First-order forward differences: maps N x c to (N-1) x c, row i holds
/// x[i+1] - x[i]. Constants are annihilated.
template <typename Derived>
auto difference_apply(const Eigen::MatrixBase<Derived>& x)
    -> Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> {
    const Eigen::Index n = x.rows();
    if (n < 2) throw std::invalid_argument("difference_apply: need at least 2 rows");
    return x.bottomRows(n - 1) - x.topRows(n - 1);
}

/// Adjoint of difference_apply: maps (N-1) x c back to N x c.
template <typename Derived>
auto difference_adjoint(const Eigen::MatrixBase<Derived>& d)
    -> Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> {
    using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime>;
    const Eigen::Index m = d.rows();
    Mat out = Mat::Zero(m + 1, d.cols());
    out.topRows(m) -= d;
    out.bottomRows(m) += d;
    return out;
}

/// Gram operator D^T D, the second-difference Laplacian with free ends.
template <typename Derived>
auto difference_gram(const Eigen::MatrixBase<Derived>& x)
    -> Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Derived::ColsAtCompileTime> {
    return difference_adjoint(difference_apply(x));
}

}  // namespace tacos
