#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "tacos/solver.hpp"

using tacos::cplx;

namespace {

/// A small random restoration problem with noisy observations.
tacos::RestorationProblem random_problem(int n, int channels, tacos::Rng& rng) {
    tacos::RestorationProblem p;
    p.channels = oracle::random_channels(n, channels, rng);
    const Eigen::MatrixX2d truth = oracle::random_matrix(n, rng);
    p.observations = tacos::apply_forward(p.channels, truth);
    for (auto& y : p.observations)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.3 * rng.normal();
    return p;
}

tacos::SolverConfig make_config(double l1, double l2, double rho = 1.0) {
    tacos::SolverConfig config;
    config.lambda1 = l1;
    config.lambda2 = l2;
    config.rho = rho;
    return config;
}

}  // namespace

TEST_CASE("objective parts") {
    const int n = 48;
    tacos::Rng rng(1);
    SECTION("exact data gives zero fidelity") {
        tacos::RestorationProblem p;
        p.channels = oracle::random_channels(n, 3, rng);
        const Eigen::MatrixX2d truth = oracle::random_matrix(n, rng);
        p.observations = tacos::apply_forward(p.channels, truth);
        const auto parts = tacos::objective(truth, p, make_config(0.0, 0.0));
        CHECK(parts.data_fidelity < 1e-16 * (1.0 + truth.squaredNorm()));
        CHECK(parts.total == parts.data_fidelity);
    }
    SECTION("constant signal has zero time penalty") {
        const auto p = random_problem(n, 2, rng);
        const auto parts =
            tacos::objective(Eigen::MatrixX2d::Ones(n, 2), p, make_config(5.0, 0.0));
        CHECK(parts.time_penalty == 0.0);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    const int n = 24;
    tacos::Rng rng(7);
    const auto config = make_config(2.0, 50.0);
    int trials_done = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_problem(n, 3, rng);
        const Eigen::MatrixX2d x = oracle::random_matrix(n, rng);
        const Eigen::MatrixX2cd z = oracle::random_complex_matrix(n, rng);
        const Eigen::MatrixX2cd u = oracle::random_complex_matrix(n, rng);

        const auto check_gradient = [&](const std::function<double(const Eigen::MatrixX2d&)>& f,
                                        const Eigen::MatrixX2d& analytic) {
            const Eigen::MatrixX2d numeric = oracle::finite_difference_gradient(f, x, 1e-6);
            const double rel = (analytic - numeric).norm() / numeric.norm();
            CHECK(rel < 1e-5);
        };

        check_gradient([&](const Eigen::MatrixX2d& v) { return tacos::data_fidelity(v, p); },
                       tacos::data_fidelity_gradient(x, p));
        check_gradient(
            [&](const Eigen::MatrixX2d& v) { return tacos::difference_apply(v).squaredNorm(); },
            tacos::time_penalty_gradient(x));
        check_gradient(
            [&](const Eigen::MatrixX2d& v) {
                return tacos::covariance_smoothness(tacos::BivariateSignal(v));
            },
            tacos::covariance_penalty_gradient(x));
        check_gradient(
            [&](const Eigen::MatrixX2d& v) { return tacos::objective(v, p, config).total; },
            tacos::objective_gradient(x, p, config));
        check_gradient(
            [&](const Eigen::MatrixX2d& v) {
                return tacos::augmented_lagrangian(v, z, u, p, config);
            },
            tacos::lagrangian_x_gradient(x, z, u, p, config));
        ++trials_done;
    }
    CHECK(trials_done == 20);
}

TEST_CASE("augmented Lagrangian consistency") {
    const int n = 32;
    tacos::Rng rng(3);
    const auto p = random_problem(n, 3, rng);
    const Eigen::MatrixX2d x = oracle::random_matrix(n, rng);
    const tacos::AnalyticFilter filter(n);
    const Eigen::MatrixX2cd hx = filter.transform_columns(x);

    SECTION("at Z = HX, U = 0 the Lagrangian is the plain objective") {
        const auto config = make_config(1.5, 20.0);
        const double lagr =
            tacos::augmented_lagrangian(x, hx, Eigen::MatrixX2cd::Zero(n, 2), p, config);
        const double obj = tacos::objective(x, p, config).total;
        CHECK(lagr == Catch::Approx(obj).epsilon(1e-10));
    }
    SECTION("split penalty at Z = HX equals the covariance penalty") {
        const double split = tacos::split_covariance_penalty(hx, hx);
        const double direct = tacos::covariance_smoothness(tacos::BivariateSignal(x));
        CHECK(split == Catch::Approx(direct).epsilon(1e-10));
    }
    SECTION("rho must be positive") {
        auto config = make_config(1.0, 1.0);
        config.rho = 0.0;
        CHECK_THROWS_AS(tacos::augmented_lagrangian(x, hx, hx, p, config),
                        std::invalid_argument);
        config.rho = -1.0;
        CHECK_THROWS_AS(tacos::augmented_lagrangian(x, hx, hx, p, config),
                        std::invalid_argument);
    }
}

TEST_CASE("x-step") {
    tacos::Rng rng(9);
    SECTION("lambda2 = 0 reduces to ridge least squares, checked densely") {
        const int n = 16;
        const auto p = random_problem(n, 2, rng);
        auto config = make_config(3.0, 0.0, 0.7);
        config.cg_tol = 1e-12;
        config.cg_max_iters = 2000;
        const Eigen::MatrixX2cd z = oracle::random_complex_matrix(n, rng);
        const Eigen::MatrixX2cd u = oracle::random_complex_matrix(n, rng);

        const auto result = tacos::x_step(Eigen::MatrixX2d::Zero(n, 2), z, u, p, config);

        // dense normal equations: [Phi^T Phi + lambda1 I2 (x) D^T D
        //   + (rho/2) Re{H^H H}] vec(X) = Phi^T y + (rho/2) vec(Re{H^H (Z - U)})
        const Eigen::MatrixXd phi = oracle::dense_forward_matrix(p.channels);
        const Eigen::MatrixXd dtd =
            oracle::dense_difference(n).transpose() * oracle::dense_difference(n);
        const Eigen::MatrixXcd h = oracle::dense_analytic(n);
        const Eigen::MatrixXd re_hh = (h.adjoint() * h).real();
        Eigen::MatrixXd m = phi.transpose() * phi;
        m.block(0, 0, n, n) += config.lambda1 * dtd + 0.5 * config.rho * re_hh;
        m.block(n, n, n, n) += config.lambda1 * dtd + 0.5 * config.rho * re_hh;
        const Eigen::MatrixXcd zu = z - u;
        Eigen::VectorXd rhs = phi.transpose() * oracle::stack_observations(p.observations);
        rhs.head(n) += 0.5 * config.rho * (h.adjoint() * zu.col(0)).real();
        rhs.tail(n) += 0.5 * config.rho * (h.adjoint() * zu.col(1)).real();
        const Eigen::VectorXd dense = m.ldlt().solve(rhs);

        CHECK((result.x.col(0) - dense.head(n)).norm() / dense.norm() < 1e-8);
        CHECK((result.x.col(1) - dense.tail(n)).norm() / dense.norm() < 1e-8);
    }
    SECTION("single identity channel, no penalties, Z = U = 0, dense check") {
        const int n = 8;
        tacos::RestorationProblem p;
        p.channels = {tacos::ChannelModel{Eigen::VectorXd::Ones(n), Eigen::Vector2d(1.0, 0.0)}};
        p.observations = {oracle::random_vector(n, rng)};
        const auto config = make_config(0.0, 0.0, 1.0);
        const auto result = tacos::x_step(Eigen::MatrixX2d::Zero(n, 2),
                                          Eigen::MatrixX2cd::Zero(n, 2),
                                          Eigen::MatrixX2cd::Zero(n, 2), p, config);
        const Eigen::MatrixXcd h = oracle::dense_analytic(n);
        const Eigen::MatrixXd re_hh = (h.adjoint() * h).real();
        const Eigen::MatrixXd m_u = Eigen::MatrixXd::Identity(n, n) + 0.5 * re_hh;
        const Eigen::VectorXd u_dense = m_u.ldlt().solve(p.observations[0]);
        CHECK((result.x.col(0) - u_dense).norm() / u_dense.norm() < 1e-8);
        CHECK(result.x.col(1).cwiseAbs().maxCoeff() < 1e-8 * u_dense.norm());
    }
    SECTION("output is stationary for the Lagrangian in X") {
        const int n = 24;
        for (int trial = 0; trial < 5; ++trial) {
            const auto p = random_problem(n, 3, rng);
            const auto config = make_config(2.0, 25.0);
            const Eigen::MatrixX2d x0 = oracle::random_matrix(n, rng);
            const Eigen::MatrixX2cd z = oracle::random_complex_matrix(n, rng);
            const Eigen::MatrixX2cd u = oracle::random_complex_matrix(n, rng);
            const auto result = tacos::x_step(x0, z, u, p, config);

            const double scale = tacos::lagrangian_x_gradient(x0, z, u, p, config).norm();
            for (int dir = 0; dir < 10; ++dir) {
                Eigen::MatrixX2d v = oracle::random_matrix(n, rng);
                v /= v.norm();
                const double deriv = oracle::directional_derivative(
                    [&](const Eigen::MatrixX2d& xx) {
                        return tacos::augmented_lagrangian(xx, z, u, p, config);
                    },
                    result.x, v);
                CHECK(std::abs(deriv) < 1e-5 * scale);
            }
        }
    }
}

TEST_CASE("z-step") {
    tacos::Rng rng(13);
    SECTION("lambda2 = 0 gives Z = HX + U exactly") {
        const int n = 20;
        const Eigen::MatrixX2cd a = oracle::random_complex_matrix(n, rng);
        const Eigen::MatrixX2cd u = oracle::random_complex_matrix(n, rng);
        const Eigen::MatrixX2cd z = tacos::z_step(a, u, make_config(1.0, 0.0, 2.0));
        CHECK((z - (a + u)).cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("tridiagonal assembly matches the dense selector sum and dense solve") {
        const int n = 12;
        const double lambda2 = 7.0;
        const double rho = 0.9;
        const Eigen::MatrixX2cd a = oracle::random_complex_matrix(n, rng);
        const Eigen::MatrixX2cd u = oracle::random_complex_matrix(n, rng);

        Eigen::MatrixXcd m = rho * Eigen::MatrixXcd::Identity(n, n);
        for (int i = 1; i < n; ++i) {
            const Eigen::MatrixXcd j = oracle::dense_selector(n, i).cast<cplx>();
            m += 2.0 * lambda2 * j * a * a.adjoint() * j;
        }
        const Eigen::MatrixXcd rhs = rho * (a + u);
        const Eigen::MatrixXcd dense = m.fullPivLu().solve(rhs);

        const Eigen::MatrixX2cd z = tacos::z_step(a, u, make_config(0.0, lambda2, rho));
        CHECK((z - dense).norm() / dense.norm() < 1e-11);
    }
    SECTION("output is stationary for the Lagrangian in Z") {
        const int n = 24;
        for (int trial = 0; trial < 5; ++trial) {
            const auto p = random_problem(n, 3, rng);
            const auto config = make_config(1.0, 30.0);
            const Eigen::MatrixX2d x = oracle::random_matrix(n, rng);
            const tacos::AnalyticFilter filter(n);
            const Eigen::MatrixX2cd a = filter.transform_columns(x);
            const Eigen::MatrixX2cd u = oracle::random_complex_matrix(n, rng);
            const Eigen::MatrixX2cd z = tacos::z_step(a, u, config);

            const auto lagr = [&](const Eigen::MatrixX2cd& zz) {
                return tacos::augmented_lagrangian(x, zz, u, p, config);
            };
            const double scale =
                2.0 * config.lambda2 * a.squaredNorm() + config.rho * (a.norm() + u.norm());
            for (int dir = 0; dir < 10; ++dir) {
                Eigen::MatrixX2cd v = oracle::random_complex_matrix(n, rng);
                v /= v.norm();
                const double deriv = oracle::directional_derivative_complex(lagr, z, v);
                CHECK(std::abs(deriv) < 1e-6 * scale);
            }
        }
    }
}

TEST_CASE("u-step") {
    const int n = 10;
    tacos::Rng rng(17);
    const Eigen::MatrixX2cd a = oracle::random_complex_matrix(n, rng);
    const Eigen::MatrixX2cd u = oracle::random_complex_matrix(n, rng);
    SECTION("feasible point leaves the dual unchanged") {
        CHECK((tacos::u_step(u, a, a, 1.3) - u).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("from zero dual with rho = 1 the update is the primal residual") {
        const Eigen::MatrixX2cd z = oracle::random_complex_matrix(n, rng);
        const Eigen::MatrixX2cd out = tacos::u_step(Eigen::MatrixX2cd::Zero(n, 2), a, z, 1.0);
        CHECK((out - (a - z)).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("solve") {
    tacos::Rng rng(23);
    SECTION("MLE matches the dense least-squares oracle") {
        const int n = 32;
        const auto p = random_problem(n, 3, rng);
        auto config = make_config(0.0, 0.0);
        config.rng_seed = 5;
        config.primal_tol = config.dual_tol = 1e-7;
        config.max_outer_iters = 300;
        const auto result = tacos::solve(p, config);
        const Eigen::MatrixX2d dense = oracle::dense_least_squares(p.channels, p.observations);
        CHECK(tacos::r_snr_db(tacos::BivariateSignal(dense), result.restored) >= 80.0);
    }
    SECTION("noise-free MLE recovers the signal") {
        const int n = 32;
        tacos::RestorationProblem p;
        p.channels = oracle::random_channels(n, 3, rng);
        const Eigen::MatrixX2d truth = oracle::random_matrix(n, rng);
        p.observations = tacos::apply_forward(p.channels, truth);
        auto config = make_config(0.0, 0.0);
        config.rng_seed = 11;
        config.primal_tol = config.dual_tol = 1e-7;
        config.max_outer_iters = 300;
        const auto result = tacos::solve(p, config);
        CHECK(tacos::r_snr_db(tacos::BivariateSignal(truth), result.restored) >= 80.0);
    }
    SECTION("trace bookkeeping and convergence flags") {
        const int n = 48;
        const auto p = random_problem(n, 3, rng);
        auto config = make_config(1.0, 10.0);
        config.rng_seed = 3;
        const auto result = tacos::solve(p, config);
        REQUIRE(result.state.trace.size() >= 2);
        CHECK(result.state.trace.front().iter == 0);
        CHECK(result.state.trace.back().iter == result.state.iteration);
        // endpoint objective decrease from the random initialization
        CHECK(result.state.trace.back().objective < result.state.trace.front().objective);
        if (result.state.converged) {
            CHECK(result.state.primal_error <= config.primal_tol);
            CHECK(result.state.dual_error <= config.dual_tol);
        }
        // the dual variable stays bounded along the run
        CHECK(result.state.u.allFinite());
    }
    SECTION("config label classification") {
        CHECK(tacos::config_label(0.0, 0.0) == "MLE");
        CHECK(tacos::config_label(1.0, 0.0) == "TS");
        CHECK(tacos::config_label(0.0, 1.0) == "COS");
        CHECK(tacos::config_label(1.0, 1.0) == "TACOS");
    }
}

TEST_CASE("splitting identity across three code paths") {
    for (int n : {16, 64, 257}) {
        tacos::Rng rng(400 + n);
        const Eigen::MatrixX2d x = oracle::random_matrix(n, rng);
        const tacos::AnalyticFilter filter(n);
        const Eigen::MatrixX2cd hx = filter.transform_columns(x);

        const double via_split = tacos::split_covariance_penalty(hx, hx);
        const double via_track = tacos::covariance_smoothness(tacos::BivariateSignal(x));

        const Eigen::MatrixXcd h = oracle::dense_analytic(n);
        const Eigen::MatrixXcd hx_dense = h * x.cast<cplx>();
        double via_dense = 0.0;
        for (int i = 1; i < n; ++i) {
            const Eigen::Matrix2cd term =
                hx_dense.adjoint() * oracle::dense_selector(n, i).cast<cplx>() * hx_dense;
            via_dense += term.squaredNorm();
        }

        CHECK(via_split == Catch::Approx(via_track).epsilon(1e-10));
        CHECK(via_dense == Catch::Approx(via_track).epsilon(1e-10));
    }
}
