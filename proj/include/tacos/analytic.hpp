#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "tacos/fft.hpp"

namespace tacos {

/// Analytic-signal filter: suppresses the negative-frequency half of the
/// spectrum so that the real part of the output reproduces the input.
///
/// Discrete gains (even N): g[0] = 1, g[k] = 2 for 0 < k < N/2, g[N/2] = 1,
/// g[k] = 0 for k > N/2. Odd N has no Nyquist bin: g[k] = 2 for
/// 1 <= k <= (N-1)/2 and 0 above. Because the gains are real and diagonal in
/// frequency, the operator is Hermitian: the adjoint applies the same gains.
class AnalyticFilter {
public:
    explicit AnalyticFilter(int n) : n_(n), gains_(build_gains(n)) {}

    int size() const { return n_; }
    const Eigen::VectorXd& frequency_gains() const { return gains_; }

    /// H x for a real input; the analytic signal of x.
    Eigen::VectorXcd transform(const Eigen::VectorXd& x) const {
        require_finite(x);
        return apply(x.cast<cplx>().eval());
    }

    /// H z for a general complex input.
    Eigen::VectorXcd apply(const Eigen::VectorXcd& z) const {
        if (z.size() != n_) throw std::invalid_argument("AnalyticFilter: length mismatch");
        return apply_spectral_gain(gains_, z);
    }

    /// H^H z. Equal to apply(z): the gain vector is real, so H is Hermitian.
    Eigen::VectorXcd adjoint(const Eigen::VectorXcd& z) const { return apply(z); }

    /// Columnwise H applied to an N x 2 real matrix.
    Eigen::MatrixX2cd transform_columns(const Eigen::MatrixX2d& x) const {
        Eigen::MatrixX2cd out(x.rows(), 2);
        out.col(0) = transform(Eigen::VectorXd(x.col(0)));
        out.col(1) = transform(Eigen::VectorXd(x.col(1)));
        return out;
    }

    Eigen::MatrixX2cd apply_columns(const Eigen::MatrixX2cd& z) const {
        Eigen::MatrixX2cd out(z.rows(), 2);
        out.col(0) = apply(Eigen::VectorXcd(z.col(0)));
        out.col(1) = apply(Eigen::VectorXcd(z.col(1)));
        return out;
    }

    Eigen::MatrixX2cd adjoint_columns(const Eigen::MatrixX2cd& z) const {
        return apply_columns(z);
    }

private:
    static Eigen::VectorXd build_gains(int n) {
        if (n < 2) throw std::invalid_argument("AnalyticFilter: need at least 2 samples");
        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
        g[0] = 1.0;
        if (n % 2 == 0) {
            for (int k = 1; k < n / 2; ++k) g[k] = 2.0;
            g[n / 2] = 1.0;
        } else {
            for (int k = 1; k <= (n - 1) / 2; ++k) g[k] = 2.0;
        }
        return g;
    }

    static void require_finite(const Eigen::VectorXd& x) {
        if (!x.allFinite()) throw std::invalid_argument("AnalyticFilter: non-finite input");
    }

    int n_;
    Eigen::VectorXd gains_;
};

inline Eigen::VectorXcd analytic_transform(const Eigen::VectorXd& x) {
    return AnalyticFilter(static_cast<int>(x.size())).transform(x);
}

inline Eigen::VectorXcd analytic_adjoint(const Eigen::VectorXcd& z) {
    return AnalyticFilter(static_cast<int>(z.size())).adjoint(z);
}

}  // namespace tacos
