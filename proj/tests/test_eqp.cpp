#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mars/eqp.hpp"
#include "oracles.hpp"

#include <random>

using namespace mars;

TEST_CASE("equality QP reproduces the closed-form KKT solution")
{
    // min x'x subject to sum x = 3: x = (1, 1, 1), multiplier -2.
    const MatX H = 2.0 * MatX::Identity(3, 3);
    const QpResult r = solve_equality_qp(H, VecX::Zero(3), MatX::Ones(1, 3), VecX::Constant(1, 3.0));
    CHECK((r.x - VecX::Ones(3)).norm() < 1e-12);
    CHECK(std::abs(std::abs(r.multipliers(0)) - 2.0) < 1e-12);
}

TEST_CASE("equality QP validates shapes and consistency")
{
    CHECK_THROWS_AS(solve_equality_qp(MatX::Identity(2, 2), VecX::Zero(3), MatX::Ones(1, 2), VecX::Ones(1)),
                    InvalidArgument);
    MatX A(2, 2);
    A << 1, 1, 1, 1;
    VecX b(2);
    b << 1, 2;
    CHECK_THROWS_AS(solve_equality_qp(MatX::Identity(2, 2), VecX::Zero(2), A, b), Infeasible);
}

TEST_CASE("bounded QP matches the lattice oracle on random variance problems")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(-1.0, 1.0);
    for (int trial = 0; trial < 15; ++trial)
    {
        const int n = 5;
        BoundedQp qp;
        qp.H = (2.0 / n) * (MatX::Identity(n, n) - MatX::Constant(n, n, 1.0 / n));
        qp.g = VecX::Zero(n);
        qp.A = MatX(2, n);
        for (int c = 0; c < n; ++c)
        {
            qp.A(0, c) = 1.0;
            qp.A(1, c) = pos(rng);
        }
        qp.b = VecX(2);
        qp.b << 20.0, 0.3 * pos(rng);
        qp.lb = VecX::Zero(n);
        qp.ub = VecX::Constant(n, 8.0);
        const auto ref = oracle::min_variance_lattice(qp.A, qp.b, 0.0, 8.0);
        if (!ref.feasible)
        {
            CHECK_THROWS(solve_bounded_qp(qp));
            continue;
        }
        const QpResult r = solve_bounded_qp(qp);
        CHECK((qp.A * r.x - qp.b).norm() < 1e-9);
        CHECK(r.x.minCoeff() >= -1e-12);
        CHECK(r.x.maxCoeff() <= 8.0 + 1e-12);
        CHECK(oracle::variance(r.x) <= ref.variance + 1e-9);
        CHECK(oracle::variance(r.x) >= ref.variance - 1e-6);
    }
}

TEST_CASE("active bounds are reported")
{
    BoundedQp qp;
    qp.H = MatX::Identity(2, 2);
    qp.g = VecX::Zero(2);
    qp.g << -10.0, 0.0;
    qp.A = MatX::Zero(0, 2);
    qp.b = VecX::Zero(0);
    qp.lb = VecX::Zero(2);
    qp.ub = VecX::Constant(2, 1.0);
    const QpResult r = solve_bounded_qp(qp);
    CHECK(r.x(0) == doctest::Approx(1.0));
    CHECK(r.x(1) == doctest::Approx(0.0));
    CHECK(r.active_bounds >= 1);
}
