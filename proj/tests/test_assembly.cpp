#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mars/assembly.hpp"

using namespace mars;

namespace
{

AssemblyLayout line(int n)
{
    std::vector<Cell> cells;
    for (int c = 0; c < n; ++c)
        cells.push_back({0, c});
    return build_assembly(cells, 0.5, default_unit());
}

} // namespace

TEST_CASE("positions are centred on the grid centroid")
{
    const AssemblyLayout l = line(4);
    REQUIRE(l.n() == 4);
    CHECK(l.positions[0].x() == doctest::Approx(-0.75));
    CHECK(l.positions[3].x() == doctest::Approx(0.75));
    Vec2 sum = Vec2::Zero();
    for (const auto &p : l.positions)
        sum += p;
    CHECK(sum.norm() < 1e-12);
}

TEST_CASE("invalid layouts are rejected")
{
    CHECK_THROWS_AS(build_assembly({}, 0.5, default_unit()), InvalidArgument);
    CHECK_THROWS_AS(build_assembly({{0, 0}, {0, 0}}, 0.5, default_unit()), InvalidArgument);
    CHECK_THROWS_AS(build_assembly({{0, 0}, {0, 2}}, 0.5, default_unit()), InvalidArgument);
    CHECK_THROWS_AS(build_assembly({{0, 0}}, -1.0, default_unit()), InvalidArgument);
    CHECK_THROWS_AS(make_unit(0.0, Mat3::Identity(), 0.15, 6.0, 0.016), InvalidArgument);
    CHECK_THROWS_AS(make_unit(1.0, -Mat3::Identity(), 0.15, 6.0, 0.016), InvalidArgument);
}

TEST_CASE("assembly inertia follows the parallel-axis theorem")
{
    const AssemblyLayout l = line(3);
    const InertialModel im = assembly_inertia(l);
    CHECK(im.total_mass == doctest::Approx(3.0));
    // Units at x = -0.5, 0, 0.5: pitch and yaw pick up m * x^2 each.
    CHECK(im.J_assembly(0, 0) == doctest::Approx(3 * 0.01));
    CHECK(im.J_assembly(1, 1) == doctest::Approx(3 * 0.01 + 2 * 0.25));
    CHECK(im.J_assembly(2, 2) == doctest::Approx(3 * 0.018 + 2 * 0.25));
    CHECK(im.com.norm() < 1e-12);
}

TEST_CASE("single unit wrench matches the cross-quad map")
{
    const AssemblyLayout l = build_assembly({{0, 0}}, 0.5, default_unit());
    RotorThrusts f(1, 4);
    f << 1.0, 2.0, 3.0, 4.0;
    const Vec4 w = rotor_wrench(l, f);
    // Rotors at +x, +y, -x, -y with arm 0.15 and alternating spin.
    CHECK(w(0) == doctest::Approx(10.0));
    CHECK(w(1) == doctest::Approx(0.15 * (2.0 - 4.0)));
    CHECK(w(2) == doctest::Approx(-0.15 * (1.0 - 3.0)));
    CHECK(w(3) == doctest::Approx(0.016 * (1.0 - 2.0 + 3.0 - 4.0)));
}

TEST_CASE("tau_pm splits lever torques by sign")
{
    const AssemblyLayout l = line(2);
    const std::vector<double> u{3.0, 5.0};
    const TauPM t = tau_pm(u, l);
    // Layout: [negative x, negative y, positive x, positive y] lever sums.
    CHECK(t.v(0) == doctest::Approx(-0.25 * 3.0));
    CHECK(t.v(1) == doctest::Approx(0.0));
    CHECK(t.v(2) == doctest::Approx(0.25 * 5.0));
    CHECK(t.v(3) == doctest::Approx(0.0));
    CHECK(t.sum_abs() == doctest::Approx(2.0));
    CHECK_THROWS_AS(tau_pm(std::vector<double>{1.0}, l), InvalidArgument);
}

TEST_CASE("efficiency matrix weights units by lever")
{
    const AssemblyLayout l = line(3);
    const Mat4 E0 = efficiency_matrix(l, 0, 1e-6);
    const Mat4 E1 = efficiency_matrix(l, 1, 1e-6);
    CHECK(E0(0, 0) == doctest::Approx(1.0 / 3.0));
    CHECK(E0(2, 2) > 100.0 * E1(2, 2));
    double sum = 0.0;
    for (int i = 0; i < 3; ++i)
        sum += efficiency_matrix(l, i, 1e-6)(2, 2) * l.unit.J_unit(1, 1);
    CHECK(sum == doctest::Approx(assembly_inertia(l).J_assembly(1, 1)));
    CHECK_THROWS_AS(efficiency_matrix(l, 3, 1e-6), InvalidArgument);
    CHECK_THROWS_AS(efficiency_matrix(l, 0, 0.0), InvalidArgument);
}

TEST_CASE("yaw symmetry period")
{
    CHECK(yaw_symmetry_period(build_assembly({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, 0.5, default_unit())) ==
          doctest::Approx(kPi / 2));
    CHECK(yaw_symmetry_period(line(4)) == doctest::Approx(kPi));
    CHECK(yaw_symmetry_period(build_assembly({{0, 0}, {0, 1}, {1, 0}}, 0.5, default_unit())) ==
          doctest::Approx(2 * kPi));
}
