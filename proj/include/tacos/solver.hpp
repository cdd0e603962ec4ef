#pragma once

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tacos/analytic.hpp"
#include "tacos/cg.hpp"
#include "tacos/difference.hpp"
#include "tacos/fft.hpp"
#include "tacos/forward_model.hpp"
#include "tacos/rng.hpp"
#include "tacos/signal.hpp"
#include "tacos/tridiagonal.hpp"

namespace tacos {

struct SolverConfig {
    double lambda1 = 0.0;  // time-smoothing weight
    double lambda2 = 0.0;  // covariance-smoothing weight
    double rho = 1.0;      // augmentation parameter
    int max_outer_iters = 100;
    double primal_tol = 1e-3;
    double dual_tol = 1e-3;
    double cg_tol = 1e-8;
    int cg_max_iters = 500;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (lambda1 < 0.0 || lambda2 < 0.0)
            throw std::invalid_argument("SolverConfig: penalty weights must be nonnegative");
        if (!(rho > 0.0)) throw std::invalid_argument("SolverConfig: rho must be positive");
        if (max_outer_iters < 1 || cg_max_iters < 1)
            throw std::invalid_argument("SolverConfig: iteration limits must be positive");
        if (!(primal_tol > 0.0) || !(dual_tol > 0.0) || !(cg_tol > 0.0))
            throw std::invalid_argument("SolverConfig: tolerances must be positive");
    }
};

/// Configuration family implied by which penalties are active.
inline std::string config_label(double lambda1, double lambda2) {
    if (lambda1 > 0.0 && lambda2 > 0.0) return "TACOS";
    if (lambda1 > 0.0) return "TS";
    if (lambda2 > 0.0) return "COS";
    return "MLE";
}

/// Observations plus the channels that produced them.
struct RestorationProblem {
    std::vector<ChannelModel> channels;
    std::vector<Eigen::VectorXd> observations;

    int n() const { return channels.empty() ? 0 : channels.front().n(); }
    int channel_count() const { return static_cast<int>(channels.size()); }

    void validate() const {
        if (channels.empty()) throw std::invalid_argument("RestorationProblem: no channels");
        if (observations.size() != channels.size())
            throw std::invalid_argument("RestorationProblem: one observation per channel required");
        for (size_t d = 0; d < channels.size(); ++d) {
            channels[d].validate();
            if (observations[d].size() != n())
                throw std::invalid_argument("RestorationProblem: observation length mismatch");
            if (!observations[d].allFinite())
                throw std::invalid_argument("RestorationProblem: non-finite observation");
        }
    }
};

struct ObjectiveParts {
    double data_fidelity = 0.0;       // ||Phi(X) - Y||_F^2
    double time_penalty = 0.0;        // ||D X||_F^2
    double covariance_penalty = 0.0;  // sum ||Sigma[i] - Sigma[i-1]||_F^2
    double total = 0.0;
};

inline double data_fidelity(const Eigen::MatrixX2d& x, const RestorationProblem& problem) {
    const std::vector<Eigen::VectorXd> predicted = apply_forward(problem.channels, x);
    double total = 0.0;
    for (size_t d = 0; d < predicted.size(); ++d)
        total += (predicted[d] - problem.observations[d]).squaredNorm();
    return total;
}

inline ObjectiveParts objective(const Eigen::MatrixX2d& x, const RestorationProblem& problem,
                                const SolverConfig& config) {
    problem.validate();
    if (x.rows() != problem.n()) throw std::invalid_argument("objective: signal length mismatch");
    ObjectiveParts parts;
    parts.data_fidelity = data_fidelity(x, problem);
    parts.time_penalty = difference_apply(x).squaredNorm();
    parts.covariance_penalty = covariance_smoothness(BivariateSignal(x));
    parts.total = parts.data_fidelity + config.lambda1 * parts.time_penalty +
                  config.lambda2 * parts.covariance_penalty;
    return parts;
}

/// The relaxed covariance penalty of the splitting: with A the analytic
/// signal of X, sum_i || A[i]^H Z[i] - A[i-1]^H Z[i-1] ||_F^2. Coincides with
/// the covariance penalty when Z == A.
inline double split_covariance_penalty(const Eigen::MatrixX2cd& analytic_x,
                                       const Eigen::MatrixX2cd& z) {
    if (analytic_x.rows() != z.rows())
        throw std::invalid_argument("split_covariance_penalty: shape mismatch");
    double total = 0.0;
    for (Eigen::Index i = 1; i < z.rows(); ++i) {
        const Eigen::Matrix2cd step = analytic_x.row(i).adjoint() * z.row(i) -
                                      analytic_x.row(i - 1).adjoint() * z.row(i - 1);
        total += step.squaredNorm();
    }
    return total;
}

inline double split_covariance_penalty(const Eigen::MatrixX2d& x, const Eigen::MatrixX2cd& z) {
    const AnalyticFilter filter(static_cast<int>(x.rows()));
    return split_covariance_penalty(Eigen::MatrixX2cd(filter.transform_columns(x)), z);
}

/// Augmented Lagrangian of the splitting Z = HX with scaled dual U:
/// L = f + lambda1 g1 + lambda2 g2~(X, Z) + (rho/2)(||HX - Z + U||^2 - ||U||^2).
inline double augmented_lagrangian(const Eigen::MatrixX2d& x, const Eigen::MatrixX2cd& z,
                                   const Eigen::MatrixX2cd& u, const RestorationProblem& problem,
                                   const SolverConfig& config) {
    config.validate();
    const AnalyticFilter filter(static_cast<int>(x.rows()));
    const Eigen::MatrixX2cd analytic_x = filter.transform_columns(x);
    double value = data_fidelity(x, problem);
    value += config.lambda1 * difference_apply(x).squaredNorm();
    value += config.lambda2 * split_covariance_penalty(analytic_x, z);
    value += 0.5 * config.rho * ((analytic_x - z + u).squaredNorm() - u.squaredNorm());
    return value;
}

namespace detail {

/// Accumulates G = sum_i J_i Z (Z^H J_i P) for P = H V; applying Re{H^H G}
/// afterwards gives the covariance-smoothing Gram operator acting on V.
inline Eigen::MatrixX2cd covariance_gram_core(const Eigen::MatrixX2cd& z,
                                              const Eigen::MatrixX2cd& p) {
    Eigen::MatrixX2cd g = Eigen::MatrixX2cd::Zero(z.rows(), 2);
    for (Eigen::Index i = 1; i < z.rows(); ++i) {
        const Eigen::Matrix2cd c = z.row(i).adjoint() * p.row(i) -
                                   z.row(i - 1).adjoint() * p.row(i - 1);
        g.row(i) += z.row(i) * c;
        g.row(i - 1) -= z.row(i - 1) * c;
    }
    return g;
}

inline double guarded(double denom) { return denom > 0.0 ? denom : 1.0; }

}  // namespace detail

/// Gradient of the data-fidelity term: 2 sum_d Re{T_d^H (T_d X r_d - y_d)} r_d^T.
inline Eigen::MatrixX2d data_fidelity_gradient(const Eigen::MatrixX2d& x,
                                               const RestorationProblem& problem) {
    std::vector<Eigen::VectorXd> residuals = apply_forward(problem.channels, x);
    for (size_t d = 0; d < residuals.size(); ++d) residuals[d] -= problem.observations[d];
    return 2.0 * apply_adjoint(problem.channels, residuals);
}

/// Gradient of ||D X||_F^2.
inline Eigen::MatrixX2d time_penalty_gradient(const Eigen::MatrixX2d& x) {
    return 2.0 * difference_gram(x);
}

/// Gradient of the quartic covariance penalty: with A = HX and
/// S_i = Sigma[i] - Sigma[i-1], equals 4 sum_i Re{H^H J_i A S_i}.
inline Eigen::MatrixX2d covariance_penalty_gradient(const Eigen::MatrixX2d& x) {
    const int n = static_cast<int>(x.rows());
    const AnalyticFilter filter(n);
    const Eigen::MatrixX2cd a = filter.transform_columns(x);
    Eigen::MatrixX2cd g = Eigen::MatrixX2cd::Zero(n, 2);
    for (int i = 1; i < n; ++i) {
        const Eigen::Matrix2cd step = a.row(i).adjoint() * a.row(i) -
                                      a.row(i - 1).adjoint() * a.row(i - 1);
        g.row(i) += a.row(i) * step;
        g.row(i - 1) -= a.row(i - 1) * step;
    }
    return 4.0 * filter.adjoint_columns(g).real();
}

/// Gradient of the full objective f + lambda1 g1 + lambda2 g2.
inline Eigen::MatrixX2d objective_gradient(const Eigen::MatrixX2d& x,
                                           const RestorationProblem& problem,
                                           const SolverConfig& config) {
    Eigen::MatrixX2d grad = data_fidelity_gradient(x, problem);
    if (config.lambda1 > 0.0) grad += config.lambda1 * time_penalty_gradient(x);
    if (config.lambda2 > 0.0) grad += config.lambda2 * covariance_penalty_gradient(x);
    return grad;
}

/// Gradient of the augmented Lagrangian in X (Z, U held fixed).
inline Eigen::MatrixX2d lagrangian_x_gradient(const Eigen::MatrixX2d& x,
                                              const Eigen::MatrixX2cd& z,
                                              const Eigen::MatrixX2cd& u,
                                              const RestorationProblem& problem,
                                              const SolverConfig& config) {
    const AnalyticFilter filter(static_cast<int>(x.rows()));
    const Eigen::MatrixX2cd p = filter.transform_columns(x);
    Eigen::MatrixX2d grad = data_fidelity_gradient(x, problem);
    if (config.lambda1 > 0.0) grad += config.lambda1 * time_penalty_gradient(x);
    Eigen::MatrixX2cd g = 0.5 * config.rho * (p - z + u);
    if (config.lambda2 > 0.0) g += config.lambda2 * detail::covariance_gram_core(z, p);
    grad += 2.0 * filter.adjoint_columns(g).real();
    return grad;
}

struct XStepResult {
    Eigen::MatrixX2d x;
    int cg_iterations = 0;
    CgStatus cg_status = CgStatus::converged;
};

/// Minimizes the augmented Lagrangian over X: conjugate gradient on the
/// stationarity system assembled matrix-free from the channel Gram terms,
/// lambda1 D^T D, the covariance Gram pinned at the current Z, and the exact
/// augmentation curvature (rho/2) Re{H^H H}. Warm-started at the previous X.
inline XStepResult x_step(const Eigen::MatrixX2d& x_start, const Eigen::MatrixX2cd& z,
                          const Eigen::MatrixX2cd& u, const RestorationProblem& problem,
                          const SolverConfig& config) {
    const int n = problem.n();
    const AnalyticFilter filter(n);
    const double half_rho = 0.5 * config.rho;

    std::vector<Eigen::VectorXd> gram_gains(problem.channels.size());
    for (size_t d = 0; d < problem.channels.size(); ++d)
        gram_gains[d] = problem.channels[d].spectral_gain.array().square();

    const Eigen::MatrixX2d rhs =
        apply_adjoint(problem.channels, problem.observations) +
        half_rho * filter.adjoint_columns(Eigen::MatrixX2cd(z - u)).real();

    auto apply_normal_matrix = [&](const Eigen::MatrixX2d& v) -> Eigen::MatrixX2d {
        Eigen::MatrixX2d out = Eigen::MatrixX2d::Zero(n, 2);
        for (size_t d = 0; d < problem.channels.size(); ++d) {
            const Eigen::Vector2d mix = problem.channels[d].mix;
            out += apply_spectral_gain_real(gram_gains[d], Eigen::VectorXd(v * mix)) *
                   mix.transpose();
        }
        if (config.lambda1 > 0.0) out += config.lambda1 * difference_gram(v);
        const Eigen::MatrixX2cd p = filter.apply_columns(v.cast<cplx>());
        Eigen::MatrixX2cd g = half_rho * p;
        if (config.lambda2 > 0.0) g += config.lambda2 * detail::covariance_gram_core(z, p);
        out += filter.adjoint_columns(g).real();
        return out;
    };

    CgResult<Eigen::MatrixX2d> cg =
        conjugate_gradient(apply_normal_matrix, rhs, x_start, config.cg_tol, config.cg_max_iters);
    if (cg.status == CgStatus::nonfinite)
        throw std::runtime_error("x_step: non-finite values in the conjugate gradient iteration");
    return XStepResult{std::move(cg.x), cg.iterations, cg.status};
}

/// Stationarity system of the Z update given A = HX:
/// [2 lambda2 sum_i J_i A A^H J_i + rho I] Z = rho (A + U). Each J_i (.) J_i
/// touches one 2x2 principal block, so the sum is Hermitian tridiagonal.
inline TridiagonalSystem z_step_system(const Eigen::MatrixX2cd& analytic_x, double lambda2,
                                       double rho) {
    const int n = static_cast<int>(analytic_x.rows());
    const double w = 2.0 * lambda2;
    TridiagonalSystem sys;
    sys.diag.resize(n);
    sys.lower.resize(n - 1);
    sys.upper.resize(n - 1);
    for (int i = 0; i < n; ++i) {
        const double multiplicity = (i == 0 || i == n - 1) ? 1.0 : 2.0;
        sys.diag[i] = rho + w * multiplicity * analytic_x.row(i).squaredNorm();
    }
    for (int i = 0; i + 1 < n; ++i) {
        // -(A A^H)_{i+1, i} contribution from the pair {i, i+1}
        const cplx cross = analytic_x.row(i).dot(analytic_x.row(i + 1));
        sys.lower[i] = -w * cross;
        sys.upper[i] = -w * std::conj(cross);
    }
    return sys;
}

/// Minimizes the augmented Lagrangian over Z, solving the tridiagonal
/// stationarity system directly by Thomas elimination.
inline Eigen::MatrixX2cd z_step(const Eigen::MatrixX2cd& analytic_x, const Eigen::MatrixX2cd& u,
                                const SolverConfig& config) {
    if (config.lambda2 == 0.0) return analytic_x + u;
    const TridiagonalSystem sys = z_step_system(analytic_x, config.lambda2, config.rho);
    const Eigen::MatrixXcd rhs = config.rho * (analytic_x + u);
    return thomas_solve(sys, rhs);
}

/// Scaled dual ascent: U + rho (HX - Z).
inline Eigen::MatrixX2cd u_step(const Eigen::MatrixX2cd& u, const Eigen::MatrixX2cd& analytic_x,
                                const Eigen::MatrixX2cd& z, double rho) {
    return u + rho * (analytic_x - z);
}

struct TraceRow {
    int iter = 0;
    double objective = 0.0;
    double data_fidelity = 0.0;
    double time_penalty = 0.0;
    double covariance_penalty = 0.0;
    double primal_error = 0.0;
    double dual_error = 0.0;
    int cg_iters = 0;
    double elapsed_s = 0.0;
};

struct AdmmState {
    Eigen::MatrixX2d x;
    Eigen::MatrixX2cd z;
    Eigen::MatrixX2cd u;
    int iteration = 0;
    double primal_error = std::numeric_limits<double>::infinity();
    double dual_error = std::numeric_limits<double>::infinity();
    bool converged = false;
    int total_cg_iterations = 0;
    std::vector<TraceRow> trace;
};

struct SolveResult {
    BivariateSignal restored;
    AdmmState state;
};

/// Full ADMM loop. X starts from a seeded standard normal draw, Z = HX,
/// U = 0; iterates x/z/u steps until the relative primal error
/// ||Z - HX|| / ||HX|| and dual error ||Z - Z_prev|| / ||Z_prev|| both fall
/// under their tolerances, or the iteration budget runs out (reported in
/// the converged flag, not an error: the problem is nonconvex and hard
/// instances are expected to be survivable).
inline SolveResult solve(const RestorationProblem& problem, const SolverConfig& config) {
    problem.validate();
    config.validate();
    const int n = problem.n();
    const AnalyticFilter filter(n);
    const auto t0 = std::chrono::steady_clock::now();
    const auto elapsed = [&t0]() {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    AdmmState state;
    state.x.resize(n, 2);
    Rng init_rng(derive_seed(config.rng_seed, "init"));
    for (int i = 0; i < n; ++i) {
        state.x(i, 0) = init_rng.normal();
        state.x(i, 1) = init_rng.normal();
    }
    Eigen::MatrixX2cd analytic_x = filter.transform_columns(state.x);
    state.z = analytic_x;
    state.u = Eigen::MatrixX2cd::Zero(n, 2);

    const auto record = [&](int cg_iters) {
        const ObjectiveParts parts = objective(state.x, problem, config);
        state.trace.push_back(TraceRow{state.iteration, parts.total, parts.data_fidelity,
                                       parts.time_penalty, parts.covariance_penalty,
                                       state.primal_error, state.dual_error, cg_iters,
                                       elapsed()});
    };

    state.primal_error = 0.0;  // Z == HX at initialization
    state.dual_error = std::numeric_limits<double>::infinity();
    record(0);

    for (int l = 1; l <= config.max_outer_iters; ++l) {
        state.iteration = l;
        XStepResult xres = x_step(state.x, state.z, state.u, problem, config);
        state.x = std::move(xres.x);
        state.total_cg_iterations += xres.cg_iterations;

        analytic_x = filter.transform_columns(state.x);
        const Eigen::MatrixX2cd z_prev = state.z;
        state.z = z_step(analytic_x, state.u, config);
        state.u = u_step(state.u, analytic_x, state.z, config.rho);

        state.primal_error =
            (state.z - analytic_x).norm() / detail::guarded(analytic_x.norm());
        state.dual_error = (state.z - z_prev).norm() / detail::guarded(z_prev.norm());
        record(xres.cg_iterations);

        if (state.primal_error <= config.primal_tol && state.dual_error <= config.dual_tol) {
            state.converged = true;
            break;
        }
    }

    return SolveResult{BivariateSignal(state.x), std::move(state)};
}

}  // namespace tacos
