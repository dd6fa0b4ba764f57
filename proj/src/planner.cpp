#include "mars/planner.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <tuple>

namespace mars
{

void AttitudeObjectiveSpec::validate(const AssemblyLayout &layout) const
{
    if (C_tau != Vec4(1.0, 1.0, -1.0, -1.0))
        throw InvalidArgument("attitude objective: C_tau must be [1, 1, -1, -1]");
    if (u_max.size() != 0)
    {
        if (u_max.size() != kRotorsPerUnit * layout.n())
            throw InvalidArgument("attitude objective: u_max must have one entry per rotor");
        if ((u_max.array() <= 0.0).any())
            throw InvalidArgument("attitude objective: u_max must be positive");
    }
    if (!(L_phi >= 0.0))
        throw InvalidArgument("attitude objective: L_phi must be nonnegative");
}

TauPM tau_pm_max(const AssemblyLayout &layout, const FaultState &faults, const Vec3 &attitude,
                 const AttitudeObjectiveSpec &spec)
{
    spec.validate(layout);
    if (faults.n() != layout.n())
        throw InvalidArgument("tau_pm_max: fault state does not match the layout");

    const Mat3 R = (Eigen::AngleAxisd(attitude.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(attitude.y(), Vec3::UnitY()) *
                    Eigen::AngleAxisd(attitude.x(), Vec3::UnitX()))
                       .toRotationMatrix();
    const int k = kRotorsPerUnit * layout.n();
    Eigen::Matrix2Xd levers(2, k);
    VecX weights(k);
    for (int i = 0; i < layout.n(); ++i)
    {
        for (int j = 0; j < kRotorsPerUnit; ++j)
        {
            const int idx = i * kRotorsPerUnit + j;
            const Vec2 r = layout.rotor_position(i, j);
            levers.col(idx) = (R * Vec3(r.x(), r.y(), 0.0)).head<2>();
            const double u = spec.u_max.size() ? spec.u_max(idx) : layout.unit.rotors[j].f_max;
            weights(idx) = faults.eta(i, j) * u;
        }
    }
    return tau_pm_from_levers(levers, weights);
}

double attitude_objective(const AssemblyLayout &layout, const FaultState &faults, double yaw,
                          const AttitudeObjectiveSpec &spec)
{
    return tau_pm_max(layout, faults, Vec3(0.0, 0.0, yaw), spec).v.dot(spec.C_tau);
}

Vec3 optimal_attitude(const AssemblyLayout &layout, const FaultState &faults, const AttitudeObjectiveSpec &spec)
{
    int best_deg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int deg = -90; deg < 90; ++deg)
    {
        const double v = attitude_objective(layout, faults, deg2rad(deg), spec);
        const double tol = 1e-9 * std::max(1.0, std::abs(v));
        bool take = v < best - tol;
        if (!take && std::abs(v - best) <= tol)
        {
            // Tie: smaller |yaw| wins, then positive yaw.
            take = std::abs(deg) < std::abs(best_deg) || (std::abs(deg) == std::abs(best_deg) && deg > best_deg);
        }
        if (take)
        {
            best = std::min(best, v);
            best_deg = deg;
        }
    }
    return Vec3(0.0, 0.0, deg2rad(best_deg));
}

std::vector<Vec2> planner_footprint(const AssemblyLayout &layout, const Environment &env)
{
    return footprint_samples(layout, 0.5 * env.resolution());
}

namespace
{

// Exact overlap test between the unit squares of the footprint, each grown
// by `margin`, and every occupied or out-of-map grid cell. Separating axes
// are the two cell axes and the two body axes; contact without overlap
// counts as clear.
bool footprint_clear(const AssemblyLayout &layout, const Environment &env, const Vec2 &p, double yaw, double margin)
{
    const double res = env.resolution();
    const double h = 0.5 * layout.pitch + margin;
    const double c = std::cos(yaw), s = std::sin(yaw);
    const Vec2 ax(c, s), ay(-s, c);
    const double extent = h * (std::abs(c) + std::abs(s)); // half-size of the rotated square's bounding box
    const double half_cell = 0.5 * res;
    const double cell_proj = half_cell * (std::abs(c) + std::abs(s)); // cell half-width on a body axis
    constexpr double kTouch = 1e-9;

    for (const Vec2 &q : layout.positions)
    {
        const Vec2 center = p + Vec2(c * q.x() - s * q.y(), s * q.x() + c * q.y());
        const int r0 = static_cast<int>(std::floor((center.y() - extent) / res));
        const int r1 = static_cast<int>(std::floor((center.y() + extent) / res));
        const int c0 = static_cast<int>(std::floor((center.x() - extent) / res));
        const int c1 = static_cast<int>(std::floor((center.x() + extent) / res));
        for (int r = r0; r <= r1; ++r)
        {
            for (int col = c0; col <= c1; ++col)
            {
                if (!env.occupied(r, col))
                    continue;
                const Vec2 d = env.cell_center(r, col) - center;
                if (std::abs(d.x()) >= extent + half_cell - kTouch || std::abs(d.y()) >= extent + half_cell - kTouch)
                    continue;
                if (std::abs(d.dot(ax)) >= h + cell_proj - kTouch || std::abs(d.dot(ay)) >= h + cell_proj - kTouch)
                    continue;
                return false;
            }
        }
    }
    return true;
}

struct Lattice
{
    int rows, cols, yaw_bins;
    double res, yaw_step;

    int index(int r, int c, int k) const { return (r * cols + c) * yaw_bins + k; }
    std::tuple<int, int, int> coords(int s) const
    {
        const int k = s % yaw_bins;
        const int rc = s / yaw_bins;
        return {rc / cols, rc % cols, k};
    }
    double yaw(int k) const { return wrapAngle(k * yaw_step); }
    int yaw_bin(double yaw) const
    {
        int k = static_cast<int>(std::lround(wrapAngle(yaw) / yaw_step)) % yaw_bins;
        return k < 0 ? k + yaw_bins : k;
    }
};

} // namespace

bool footprint_collision_check(const SE3Node &node, const AssemblyLayout &layout, const Environment &env,
                               double margin)
{
    return footprint_clear(layout, env, node.position.head<2>(), node.yaw(), margin);
}

DiscreteSequence astar_plan(const Environment &env, const SE3Node &start, const SE3Node &goal,
                            const AssemblyLayout &layout, const FaultState &faults, const AttitudeObjectiveSpec &spec,
                            const PlannerOptions &opt)
{
    if (!(opt.yaw_step > 0.0))
        throw InvalidArgument("astar_plan: yaw_step must be positive");
    const int bins = static_cast<int>(std::lround(2.0 * kPi / opt.yaw_step));
    if (bins < 1 || std::abs(bins * opt.yaw_step - 2.0 * kPi) > 1e-9)
        throw InvalidArgument("astar_plan: yaw_step must divide 360 degrees");

    const Lattice lat{env.rows(), env.cols(), bins, env.resolution(), opt.yaw_step};
    const double z = start.position.z();

    auto snap = [&](const SE3Node &n) {
        const int r = static_cast<int>(std::floor(n.position.y() / lat.res));
        const int c = static_cast<int>(std::floor(n.position.x() / lat.res));
        if (!env.in_bounds(r, c))
            throw InvalidArgument("astar_plan: start or goal outside the map");
        return lat.index(r, c, lat.yaw_bin(n.yaw()));
    };
    const int s0 = snap(start);
    const int sg = snap(goal);

    std::vector<signed char> clear(static_cast<std::size_t>(lat.rows) * lat.cols * lat.yaw_bins, -1);
    auto is_clear = [&](int s) {
        if (clear[s] < 0)
        {
            const auto [r, c, k] = lat.coords(s);
            clear[s] = footprint_clear(layout, env, env.cell_center(r, c), lat.yaw(k), opt.margin) ? 1 : 0;
        }
        return clear[s] == 1;
    };
    if (!is_clear(s0))
        throw InvalidArgument("astar_plan: start node collides");
    if (!is_clear(sg))
        throw InvalidArgument("astar_plan: goal node collides");

    // The optimal attitude does not depend on the node, so it is computed once.
    const double yaw_star = optimal_attitude(layout, faults, spec).z();
    const double period = yaw_symmetry_period(layout);
    const auto [gr, gc, gk] = lat.coords(sg);
    const Vec2 goal_xy = env.cell_center(gr, gc);
    auto heuristic = [&](int r, int c) { return (env.cell_center(r, c) - goal_xy).norm(); };
    auto attitude_cost = [&](int k) { return spec.L_phi * std::abs(wrapPeriod(lat.yaw(k) - yaw_star, period)); };

    const std::size_t N = clear.size();
    std::vector<double> g(N, std::numeric_limits<double>::infinity());
    std::vector<int> parent(N, -1);
    std::vector<char> closed(N, 0);

    using Entry = std::tuple<double, std::uint64_t, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::uint64_t counter = 0;
    {
        const auto [r, c, k] = lat.coords(s0);
        g[s0] = 0.0;
        open.emplace(heuristic(r, c) + attitude_cost(k), counter++, s0);
    }

    int expansions = 0;
    while (!open.empty())
    {
        const auto [f, order, s] = open.top();
        open.pop();
        (void)order;
        if (closed[s])
            continue;
        if (s == sg)
            break;
        closed[s] = 1;
        if (++expansions > opt.max_expansions)
            throw Infeasible("astar_plan: expansion limit reached");

        const auto [r, c, k] = lat.coords(s);
        for (int dr = -1; dr <= 1; ++dr)
        {
            for (int dc = -1; dc <= 1; ++dc)
            {
                for (int dk = -1; dk <= 1; ++dk)
                {
                    if (dr == 0 && dc == 0 && dk == 0)
                        continue;
                    const int nr = r + dr;
                    const int nc = c + dc;
                    if (!env.in_bounds(nr, nc))
                        continue;
                    const int nk = (k + dk + lat.yaw_bins) % lat.yaw_bins;
                    const int ns = lat.index(nr, nc, nk);
                    if (closed[ns] || !is_clear(ns))
                        continue;
                    const double step = lat.res * std::hypot(dr, dc) + opt.yaw_weight * std::abs(dk) * lat.yaw_step;
                    const double g_temp = g[s] + step;
                    if (g_temp < g[ns])
                    {
                        g[ns] = g_temp;
                        parent[ns] = s;
                        open.emplace(g_temp + heuristic(nr, nc) + attitude_cost(nk), counter++, ns);
                    }
                }
            }
        }
    }
    if (!std::isfinite(g[sg]))
        throw Infeasible("astar_plan: open set exhausted without reaching the goal");

    std::vector<int> chain;
    for (int s = sg; s >= 0; s = parent[s])
        chain.push_back(s);
    std::reverse(chain.begin(), chain.end());

    DiscreteSequence out;
    out.cost = g[sg];
    out.expansions = expansions;
    for (std::size_t i = 0; i < chain.size(); ++i)
    {
        const auto [r, c, k] = lat.coords(chain[i]);
        SE3Node node;
        const Vec2 xy = env.cell_center(r, c);
        node.position = Vec3(xy.x(), xy.y(), z);
        node.attitude = Vec3(0.0, 0.0, lat.yaw(k));
        node.g = g[chain[i]];
        node.f = node.g + heuristic(r, c) + attitude_cost(k);
        if (i > 0)
            node.parent = static_cast<int>(i) - 1;
        out.nodes.push_back(node);
    }
    return out;
}

DiscreteSequence thin_sequence(const DiscreteSequence &seq, int max_stride, int max_nodes)
{
    const int n = static_cast<int>(seq.nodes.size());
    if (n <= 2)
        return seq;
    if (max_stride < 1 || max_nodes < 2)
        throw InvalidArgument("thin_sequence: max_stride >= 1 and max_nodes >= 2 required");

    auto delta = [&](int i) -> Vec3 {
        const SE3Node &a = seq.nodes[i];
        const SE3Node &b = seq.nodes[i + 1];
        return Vec3(b.position.x() - a.position.x(), b.position.y() - a.position.y(),
                    wrapAngle(b.yaw() - a.yaw()));
    };

    std::vector<int> keep{0};
    for (int i = 1; i + 1 < n; ++i)
    {
        const bool turn = (delta(i - 1) - delta(i)).norm() > 1e-9;
        if (turn || i - keep.back() >= max_stride)
            keep.push_back(i);
    }
    keep.push_back(n - 1);

    if (static_cast<int>(keep.size()) > max_nodes)
    {
        std::vector<int> sub;
        const int m = static_cast<int>(keep.size());
        for (int j = 0; j < max_nodes; ++j)
            sub.push_back(keep[static_cast<std::size_t>(std::lround(double(j) * (m - 1) / (max_nodes - 1)))]);
        sub.erase(std::unique(sub.begin(), sub.end()), sub.end());
        keep = std::move(sub);
    }

    DiscreteSequence out;
    out.cost = seq.cost;
    out.expansions = seq.expansions;
    for (std::size_t j = 0; j < keep.size(); ++j)
    {
        SE3Node node = seq.nodes[keep[j]];
        node.parent = j == 0 ? std::nullopt : std::optional<int>(static_cast<int>(j) - 1);
        out.nodes.push_back(node);
    }
    return out;
}

} // namespace mars
