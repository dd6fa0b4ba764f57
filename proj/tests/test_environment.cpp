#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mars/environment.hpp"

#include <random>

using namespace mars;

namespace
{

// Brute-force signed distance of a cell centre, in cells. The map is
// surrounded by a one-cell wall.
double brute_sdf_cells(int rows, int cols, const std::vector<char> &occ, int r, int c)
{
    auto blocked = [&](int rr, int cc) {
        return rr < 0 || cc < 0 || rr >= rows || cc >= cols || occ[rr * cols + cc];
    };
    const bool inside = blocked(r, c);
    double best = std::numeric_limits<double>::infinity();
    for (int rr = -1; rr <= rows; ++rr)
        for (int cc = -1; cc <= cols; ++cc)
            if (blocked(rr, cc) != inside)
                best = std::min(best, std::hypot(rr - r, cc - c));
    return inside ? -(best - 0.5) : best - 0.5;
}

} // namespace

TEST_CASE("cell SDF matches a brute-force distance scan")
{
    std::mt19937_64 rng(3);
    std::bernoulli_distribution wall(0.15);
    const int rows = 17, cols = 23;
    std::vector<char> occ(rows * cols);
    for (auto &o : occ)
        o = wall(rng) ? 1 : 0;
    const Environment env(rows, cols, 0.2, occ);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            CHECK(env.sdf_cell(r, c) == doctest::Approx(0.2 * brute_sdf_cells(rows, cols, occ, r, c)));
}

TEST_CASE("SDF interpolates between cell centres and is negative outside")
{
    const Environment env(10, 10, 0.1, std::vector<char>(100, 0));
    const Vec2 a = env.cell_center(4, 4), b = env.cell_center(4, 5);
    CHECK(env.sdf(a) == doctest::Approx(env.sdf_cell(4, 4)));
    CHECK(env.sdf(0.5 * (a + b)) == doctest::Approx(0.5 * (env.sdf_cell(4, 4) + env.sdf_cell(4, 5))));
    CHECK(env.sdf(Vec2(-0.3, 0.5)) < 0.0);
    CHECK(env.occupied(-1, 0));
    CHECK(env.with_obstacle(4, 4).sdf_cell(4, 4) < 0.0);
    CHECK_THROWS_AS(env.with_obstacle(10, 0), InvalidArgument);
}

TEST_CASE("map text parsing")
{
    const Environment env = parse_environment("resolution 0.5\n// top row is the highest y\n#..\n...\n");
    CHECK(env.rows() == 2);
    CHECK(env.cols() == 3);
    CHECK(env.resolution() == 0.5);
    CHECK(env.occupied(1, 0));
    CHECK_FALSE(env.occupied(0, 0));

    CHECK_THROWS_AS(parse_environment("#..\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_environment("resolution 0.1\n#.x\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_environment("resolution 0.1\n#..\n..\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_environment("resolution -1\n...\n"), InvalidArgument);
    CHECK_THROWS_AS(load_environment("/nonexistent/file.map"), InvalidArgument);
}

TEST_CASE("committed maps load")
{
    for (const char *name : {"corridor_4x1.map", "corridor_3x2.map"})
    {
        const Environment env = load_environment(std::string(MARS_SOURCE_DIR) + "/maps/" + name);
        CHECK(env.rows() == 60);
        CHECK(env.cols() == 120);
    }
}

TEST_CASE("footprint samples trace the outer boundary only")
{
    const AssemblyLayout l = build_assembly({{0, 0}, {0, 1}}, 0.5, default_unit());
    const auto s = footprint_samples(l, 0.05);
    REQUIRE_FALSE(s.empty());
    for (const Vec2 &p : s)
    {
        const bool on_x_edge = std::abs(std::abs(p.x()) - 0.5) < 1e-9 && std::abs(p.y()) <= 0.25 + 1e-9;
        const bool on_y_edge = std::abs(std::abs(p.y()) - 0.25) < 1e-9 && std::abs(p.x()) <= 0.5 + 1e-9;
        CHECK((on_x_edge || on_y_edge));
    }
    CHECK_THROWS_AS(footprint_samples(l, 0.0), InvalidArgument);

    const Environment env(40, 40, 0.1, std::vector<char>(1600, 0));
    const double c0 = footprint_clearance(env, s, Vec2(2.0, 2.0), 0.0);
    double expect = std::numeric_limits<double>::infinity();
    for (const Vec2 &q : s)
        expect = std::min(expect, env.sdf(Vec2(2.0, 2.0) + q));
    CHECK(c0 == doctest::Approx(expect));
    // A quarter turn of a 2x1 footprint swaps which edges face the walls.
    const double c90 = footprint_clearance(env, s, Vec2(2.0, 2.0), kPi / 2);
    double expect90 = std::numeric_limits<double>::infinity();
    for (const Vec2 &q : s)
        expect90 = std::min(expect90, env.sdf(Vec2(2.0 - q.y(), 2.0 + q.x())));
    CHECK(c90 == doctest::Approx(expect90));
    CHECK(footprint_clearance(env, s, Vec2(0.3, 2.0), 0.0) < 0.0);
}
