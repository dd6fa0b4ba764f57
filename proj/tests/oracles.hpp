#pragma once

// Brute-force reference computations shared by the unit and acceptance
// tests. They rely only on Eigen and the layout geometry, never on the
// library routine under test.

#include "mars/assembly.hpp"
#include "mars/environment.hpp"
#include "mars/fault.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace oracle
{

using mars::MatX;
using mars::VecX;

inline double variance(const VecX &u)
{
    const double mean = u.mean();
    return (u.array() - mean).square().sum() / static_cast<double>(u.size());
}

struct LatticeResult
{
    bool feasible = false;
    VecX u;
    double variance = std::numeric_limits<double>::infinity();
};

// Minimum variance of u subject to A u = b and lo <= u <= hi. The affine
// solution set is parametrized as u0 + N z and searched on a lattice that
// recentres on the best point and halves its spacing every round.
inline LatticeResult min_variance_lattice(const MatX &A, const VecX &b, double lo, double hi, int points = 13,
                                          int rounds = 160)
{
    const int n = static_cast<int>(A.cols());
    Eigen::FullPivLU<MatX> lu(A);
    const VecX u0 = A.completeOrthogonalDecomposition().solve(b);
    LatticeResult out;
    if ((A * u0 - b).norm() > 1e-9 * std::max(1.0, b.norm()))
        return out;
    MatX N = lu.kernel();
    if (lu.rank() == n)
        N = MatX::Zero(n, 0);
    const int d = static_cast<int>(N.cols());
    if (d > 0)
        N = Eigen::HouseholderQR<MatX>(N).householderQ() * MatX::Identity(n, d);

    auto admissible = [&](const VecX &u) { return (u.array() >= lo - 1e-12).all() && (u.array() <= hi + 1e-12).all(); };
    auto consider = [&](const VecX &z) {
        const VecX u = u0 + N * z;
        if (!admissible(u))
            return;
        const double v = variance(u);
        if (v < out.variance)
        {
            out.variance = v;
            out.u = u;
            out.feasible = true;
        }
    };

    if (d == 0)
    {
        consider(VecX::Zero(0));
        return out;
    }

    VecX center = VecX::Zero(d);
    double half = (hi - lo) * std::sqrt(static_cast<double>(n));
    for (int round = 0; round < rounds; ++round)
    {
        const double step = 2.0 * half / (points - 1);
        std::vector<int> idx(d, 0);
        while (true)
        {
            VecX z(d);
            for (int k = 0; k < d; ++k)
                z(k) = center(k) - half + step * idx[k];
            consider(z);
            int k = 0;
            while (k < d && ++idx[k] == points)
                idx[k++] = 0;
            if (k == d)
                break;
        }
        if (out.feasible)
            center = N.transpose() * (out.u - u0);
        half *= out.feasible ? 0.7 : 1.0;
        if (!out.feasible && round > 2)
            break;
    }
    if (!out.feasible)
        return out;

    // The lattice can stall on a bound face. Pin every subset of the bounds
    // that are nearly active at the lattice optimum and solve the remaining
    // equality-constrained problem exactly.
    std::vector<std::pair<int, double>> near;
    const double reach = 0.05 * (hi - lo);
    for (int i = 0; i < n; ++i)
    {
        if (out.u(i) - lo < reach)
            near.push_back({i, lo});
        else if (hi - out.u(i) < reach)
            near.push_back({i, hi});
    }
    for (unsigned mask = 0; mask < (1u << near.size()); ++mask)
    {
        std::vector<std::pair<int, double>> pinned;
        for (std::size_t k = 0; k < near.size(); ++k)
            if (mask & (1u << k))
                pinned.push_back(near[k]);
        const int m = static_cast<int>(A.rows()), p = static_cast<int>(pinned.size());
        // Variance of u is u' Q u / n with Q = I - 11'/n.
        MatX K = MatX::Zero(n + m + p, n + m + p);
        VecX rhs = VecX::Zero(n + m + p);
        K.topLeftCorner(n, n) = 2.0 * (MatX::Identity(n, n) - MatX::Constant(n, n, 1.0 / n)) / n;
        K.block(0, n, n, m) = A.transpose();
        K.block(n, 0, m, n) = A;
        rhs.segment(n, m) = b;
        for (int k = 0; k < p; ++k)
        {
            K(pinned[k].first, n + m + k) = 1.0;
            K(n + m + k, pinned[k].first) = 1.0;
            rhs(n + m + k) = pinned[k].second;
        }
        const VecX sol = K.completeOrthogonalDecomposition().solve(rhs);
        const VecX u = sol.head(n);
        if ((K * sol - rhs).norm() > 1e-8 || (A * u - b).norm() > 1e-9 * std::max(1.0, b.norm()))
            continue;
        if ((u.array() < lo - 1e-9).any() || (u.array() > hi + 1e-9).any())
            continue;
        const double v = variance(u);
        if (v < out.variance)
        {
            out.variance = v;
            out.u = u;
        }
    }
    return out;
}

// Yaw sweep of the lever capacity sum_j eta_j f_max (|x'_j| + |y'_j|), the
// quantity the attitude objective rewards. Returns every yaw (deg) whose
// capacity is within `tol` of the best one.
inline std::vector<double> best_yaws(const mars::AssemblyLayout &layout, const mars::FaultState &faults,
                                     double step_deg, double tol)
{
    std::vector<std::pair<double, double>> values;
    double best = -1.0;
    for (double deg = -90.0; deg < 90.0 - 1e-9; deg += step_deg)
    {
        const double c = std::cos(deg * M_PI / 180.0), s = std::sin(deg * M_PI / 180.0);
        double cap = 0.0;
        for (int i = 0; i < layout.n(); ++i)
            for (int j = 0; j < mars::kRotorsPerUnit; ++j)
            {
                const mars::Vec2 r = layout.rotor_position(i, j);
                const double x = c * r.x() - s * r.y(), y = s * r.x() + c * r.y();
                cap += faults.eta(i, j) * layout.unit.rotors[j].f_max * (std::abs(x) + std::abs(y));
            }
        values.emplace_back(deg, cap);
        best = std::max(best, cap);
    }
    std::vector<double> out;
    for (const auto &[deg, cap] : values)
        if (cap >= best - tol)
            out.push_back(deg);
    return out;
}

// Shortest 8-connected path length (m) between two cells of a grid,
// treating `blocked` cells as walls.
inline double dijkstra(int rows, int cols, double res, const std::vector<char> &blocked, int r0, int c0, int r1,
                       int c1)
{
    std::vector<double> dist(static_cast<size_t>(rows) * cols, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    dist[r0 * cols + c0] = 0.0;
    open.emplace(0.0, r0 * cols + c0);
    while (!open.empty())
    {
        const auto [d, id] = open.top();
        open.pop();
        if (d > dist[id])
            continue;
        const int r = id / cols, c = id % cols;
        if (r == r1 && c == c1)
            return d;
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc)
            {
                if (!dr && !dc)
                    continue;
                const int rr = r + dr, cc = c + dc;
                if (rr < 0 || cc < 0 || rr >= rows || cc >= cols || blocked[rr * cols + cc])
                    continue;
                const double nd = d + res * std::hypot(dr, dc);
                if (nd < dist[rr * cols + cc])
                {
                    dist[rr * cols + cc] = nd;
                    open.emplace(nd, rr * cols + cc);
                }
            }
    }
    return std::numeric_limits<double>::infinity();
}

// Footprint audit by point-in-obstacle tests on a dense grid covering
// every unit square. Counts samples that fall in occupied or out-of-map cells.
inline int footprint_hits(const mars::AssemblyLayout &layout, const mars::Environment &env, const mars::Vec2 &p,
                          double yaw, int per_edge = 40)
{
    // Shrunk by a hair so an edge lying on a cell boundary counts as contact.
    const double c = std::cos(yaw), s = std::sin(yaw), h = 0.5 * layout.pitch - 1e-9;
    int hits = 0;
    for (const mars::Vec2 &q : layout.positions)
        for (int i = 0; i <= per_edge; ++i)
            for (int k = 0; k <= per_edge; ++k)
            {
                const mars::Vec2 b = q + mars::Vec2(-h + 2.0 * h * i / per_edge, -h + 2.0 * h * k / per_edge);
                const mars::Vec2 w = p + mars::Vec2(c * b.x() - s * b.y(), s * b.x() + c * b.y());
                const int r = static_cast<int>(std::floor(w.y() / env.resolution()));
                const int col = static_cast<int>(std::floor(w.x() / env.resolution()));
                if (!env.in_bounds(r, col) || env.occupied(r, col))
                    ++hits;
            }
    return hits;
}

} // namespace oracle
