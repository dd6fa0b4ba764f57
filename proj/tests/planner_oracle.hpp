#pragma once

// Uniform-cost search over the planner lattice (row, col, yaw bin) with
// the same move set and step costs, and no heuristic or attitude term.

#include "mars/planner.hpp"

#include <functional>
#include <queue>
#include <vector>

namespace oracle
{

inline double lattice_dijkstra(const mars::Environment &env, const mars::AssemblyLayout &layout,
                               const mars::SE3Node &start, const mars::SE3Node &goal, double yaw_step,
                               double yaw_weight, double margin)
{
    const int bins = static_cast<int>(std::lround(2.0 * M_PI / yaw_step));
    const int R = env.rows(), C = env.cols();
    auto bin_of = [&](double yaw) {
        int k = static_cast<int>(std::lround(mars::wrapAngle(yaw) / yaw_step)) % bins;
        return k < 0 ? k + bins : k;
    };
    auto id = [&](int r, int c, int k) { return (r * C + c) * bins + k; };
    auto cell = [&](const mars::SE3Node &n) {
        return std::pair<int, int>(static_cast<int>(std::floor(n.position.y() / env.resolution())),
                                   static_cast<int>(std::floor(n.position.x() / env.resolution())));
    };
    std::vector<signed char> clear(static_cast<size_t>(R) * C * bins, -1);
    auto is_clear = [&](int r, int c, int k) {
        signed char &v = clear[id(r, c, k)];
        if (v < 0)
        {
            mars::SE3Node n;
            const mars::Vec2 xy = env.cell_center(r, c);
            n.position = mars::Vec3(xy.x(), xy.y(), 0.0);
            n.attitude = mars::Vec3(0.0, 0.0, mars::wrapAngle(k * yaw_step));
            v = mars::footprint_collision_check(n, layout, env, margin) ? 1 : 0;
        }
        return v == 1;
    };

    const auto [r0, c0] = cell(start);
    const auto [r1, c1] = cell(goal);
    const int k0 = bin_of(start.yaw()), k1 = bin_of(goal.yaw());
    std::vector<double> dist(clear.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    dist[id(r0, c0, k0)] = 0.0;
    open.emplace(0.0, id(r0, c0, k0));
    while (!open.empty())
    {
        const auto [d, s] = open.top();
        open.pop();
        if (d > dist[s])
            continue;
        const int k = s % bins, rc = s / bins, r = rc / C, c = rc % C;
        if (r == r1 && c == c1 && k == k1)
            return d;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc)
                for (int dk = -1; dk <= 1; ++dk)
                {
                    if (!dr && !dc && !dk)
                        continue;
                    const int nr = r + dr, nc = c + dc, nk = (k + dk + bins) % bins;
                    if (nr < 0 || nc < 0 || nr >= R || nc >= C || !is_clear(nr, nc, nk))
                        continue;
                    const double nd =
                        d + env.resolution() * std::hypot(dr, dc) + yaw_weight * std::abs(dk) * yaw_step;
                    if (nd < dist[id(nr, nc, nk)])
                    {
                        dist[id(nr, nc, nk)] = nd;
                        open.emplace(nd, id(nr, nc, nk));
                    }
                }
    }
    return std::numeric_limits<double>::infinity();
}

} // namespace oracle
