#include "mars/trajopt.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace mars
{

namespace
{

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

// Maps Hermite boundary data [p0 v0 a0 p1 v1 a1] to the three highest
// quintic coefficients c3, c4, c5.
Mat36 hermite_high(double T)
{
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    Mat36 M;
    M << -20, -12 * T, -3 * T2, 20, -8 * T, T2, //
        30, 16 * T, 3 * T2, -30, 14 * T, -2 * T2,   //
        -12, -6 * T, -T2, 12, -6 * T, T2;
    M.row(0) /= 2 * T3;
    M.row(1) /= 2 * T4;
    M.row(2) /= 2 * T5;
    return M;
}

// Squared-jerk integral over [0, T] as a quadratic form in boundary data.
Mat6 jerk_gram(double T)
{
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    Eigen::Matrix3d G;
    G << 36 * T, 72 * T2, 120 * T3, //
        72 * T2, 192 * T3, 360 * T4, //
        120 * T3, 360 * T4, 720 * T5;
    const Mat36 M = hermite_high(T);
    return M.transpose() * G * M;
}

double cube_hinge(double x) { return x > 0.0 ? x * x * x : 0.0; }

} // namespace

PiecewiseTrajectory::PiecewiseTrajectory(std::vector<Vec4> waypoints, std::vector<double> durations)
    : waypoints_(std::move(waypoints))
    , durations_(std::move(durations))
{
    if (waypoints_.size() < 2)
        throw InvalidArgument("trajectory needs at least two waypoints");
    if (durations_.size() + 1 != waypoints_.size())
        throw InvalidArgument("trajectory needs one duration per segment");
    for (double T : durations_)
        if (!(T > 0.0) || !std::isfinite(T))
            throw InvalidArgument("trajectory segment durations must be positive");
    solve();
}

void PiecewiseTrajectory::solve()
{
    const int m = segments();
    const int K = m + 1;
    const int nv = 3 * K;

    MatX Q = MatX::Zero(nv, nv);
    for (int k = 0; k < m; ++k)
        Q.block<6, 6>(3 * k, 3 * k) += jerk_gram(durations_[k]);

    // Free variables: velocity and acceleration of interior knots.
    std::vector<int> free_idx;
    for (int k = 1; k < K - 1; ++k)
    {
        free_idx.push_back(3 * k + 1);
        free_idx.push_back(3 * k + 2);
    }
    MatX X = MatX::Zero(nv, 4);
    for (int k = 0; k < K; ++k)
        X.row(3 * k) = waypoints_[k].transpose();

    if (!free_idx.empty())
    {
        const int nf = static_cast<int>(free_idx.size());
        MatX Qff(nf, nf);
        MatX rhs = MatX::Zero(nf, 4);
        for (int a = 0; a < nf; ++a)
        {
            for (int b = 0; b < nf; ++b)
                Qff(a, b) = Q(free_idx[a], free_idx[b]);
            for (int k = 0; k < K; ++k)
                rhs.row(a) -= Q(free_idx[a], 3 * k) * X.row(3 * k);
        }
        const MatX sol = Qff.ldlt().solve(rhs);
        for (int a = 0; a < nf; ++a)
            X.row(free_idx[a]) = sol.row(a);
    }

    vel_.assign(K, Vec4::Zero());
    acc_.assign(K, Vec4::Zero());
    for (int k = 0; k < K; ++k)
    {
        vel_[k] = X.row(3 * k + 1).transpose();
        acc_[k] = X.row(3 * k + 2).transpose();
    }

    coeffs_.assign(m, Coeffs::Zero());
    starts_.assign(m, 0.0);
    total_ = 0.0;
    for (int k = 0; k < m; ++k)
    {
        starts_[k] = total_;
        total_ += durations_[k];
        const Mat36 M = hermite_high(durations_[k]);
        Eigen::Matrix<double, 6, 4> B;
        B.row(0) = waypoints_[k].transpose();
        B.row(1) = vel_[k].transpose();
        B.row(2) = acc_[k].transpose();
        B.row(3) = waypoints_[k + 1].transpose();
        B.row(4) = vel_[k + 1].transpose();
        B.row(5) = acc_[k + 1].transpose();
        Coeffs &c = coeffs_[k];
        c.row(0) = B.row(0);
        c.row(1) = B.row(1);
        c.row(2) = 0.5 * B.row(2);
        c.bottomRows<3>() = M * B;
    }
}

TrajectorySample PiecewiseTrajectory::evaluate_segment(int k, double tau) const
{
    const Coeffs &c = coeffs_.at(k);
    const double t1 = tau, t2 = t1 * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
    TrajectorySample s;
    s.p = (c.row(0) + c.row(1) * t1 + c.row(2) * t2 + c.row(3) * t3 + c.row(4) * t4 + c.row(5) * t5).transpose();
    s.v = (c.row(1) + 2 * c.row(2) * t1 + 3 * c.row(3) * t2 + 4 * c.row(4) * t3 + 5 * c.row(5) * t4).transpose();
    s.a = (2 * c.row(2) + 6 * c.row(3) * t1 + 12 * c.row(4) * t2 + 20 * c.row(5) * t3).transpose();
    s.j = (6 * c.row(3) + 24 * c.row(4) * t1 + 60 * c.row(5) * t2).transpose();
    return s;
}

TrajectorySample PiecewiseTrajectory::evaluate(double t) const
{
    if (coeffs_.empty())
        throw InvalidArgument("evaluate on an empty trajectory");
    bool clamped = false;
    if (t < 0.0 || t > total_ || std::isnan(t))
    {
        clamped = true;
        t = std::isnan(t) ? 0.0 : std::clamp(t, 0.0, total_);
    }
    // Last segment whose start is <= t.
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
    const int k = std::max(0, static_cast<int>(it - starts_.begin()) - 1);
    TrajectorySample s = evaluate_segment(k, std::min(t - starts_[k], durations_[k]));
    s.clamped = clamped;
    return s;
}

double PiecewiseTrajectory::jerk_cost() const
{
    double J = 0.0;
    for (int k = 0; k < segments(); ++k)
    {
        const Mat6 G = jerk_gram(durations_[k]);
        for (int ax = 0; ax < 4; ++ax)
        {
            Eigen::Matrix<double, 6, 1> b;
            b << waypoints_[k](ax), vel_[k](ax), acc_[k](ax), waypoints_[k + 1](ax), vel_[k + 1](ax),
                acc_[k + 1](ax);
            J += b.dot(G * b);
        }
    }
    return J;
}

TrajectorySample evaluate(const PiecewiseTrajectory &traj, double t) { return traj.evaluate(t); }

PiecewiseTrajectory init_from_sequence(const DiscreteSequence &seq, double v_nominal)
{
    if (seq.nodes.size() < 2)
        throw InvalidArgument("init_from_sequence: sequence needs at least two nodes");
    if (!(v_nominal > 0.0))
        throw InvalidArgument("init_from_sequence: v_nominal must be positive");

    constexpr double kYawLength = 0.3; // m per rad of yaw change
    constexpr double kMinDuration = 0.2;

    std::vector<Vec4> pts;
    double yaw = seq.nodes.front().yaw();
    for (std::size_t i = 0; i < seq.nodes.size(); ++i)
    {
        const SE3Node &n = seq.nodes[i];
        if (i > 0)
            yaw += wrapAngle(n.yaw() - seq.nodes[i - 1].yaw());
        const Vec4 p(n.position.x(), n.position.y(), n.position.z(), yaw);
        if (!pts.empty() && (p - pts.back()).norm() < 1e-12)
            continue; // no motion at all: merge
        pts.push_back(p);
    }
    if (pts.size() < 2)
        throw InvalidArgument("init_from_sequence: start and goal coincide");

    std::vector<double> T;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    {
        const Vec4 d = pts[i + 1] - pts[i];
        const double len = std::hypot(d.head<3>().norm(), kYawLength * d(3));
        T.push_back(std::max(kMinDuration, len / v_nominal));
    }
    // Rest-to-rest end segments need extra time to reach cruising speed.
    T.front() *= 1.5;
    T.back() *= 1.5;
    return PiecewiseTrajectory(std::move(pts), std::move(T));
}

void CostWeights::validate() const
{
    for (double v : {lambda_m, lambda_t, lambda_o, lambda_d, lambda_v, lambda_a, lambda_j, lambda_phi, margin})
        if (!(v >= 0.0))
            throw InvalidArgument("cost weights must be nonnegative");
    if (!(v_max > 0.0 && a_max > 0.0 && j_max > 0.0))
        throw InvalidArgument("dynamic limits must be positive");
    if (samples_per_segment < 1)
        throw InvalidArgument("samples_per_segment must be at least 1");
}

CostContext make_cost_context(const Environment *env, const AssemblyLayout &layout, const FaultState &faults,
                              const AttitudeObjectiveSpec &spec)
{
    CostContext ctx;
    ctx.env = env;
    if (env)
        ctx.footprint = planner_footprint(layout, *env);
    ctx.yaw_star = optimal_attitude(layout, faults, spec).z();
    ctx.yaw_period = yaw_symmetry_period(layout);
    return ctx;
}

std::vector<double> cost_sample_times(const PiecewiseTrajectory &traj, int samples_per_segment)
{
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(traj.segments()) * samples_per_segment);
    for (int k = 0; k < traj.segments(); ++k)
        for (int i = 0; i < samples_per_segment; ++i)
            t.push_back(traj.start_time(k) + traj.durations()[k] * (i + 0.5) / samples_per_segment);
    return t;
}

CostBreakdown total_cost(const PiecewiseTrajectory &traj, const CostContext &ctx, const CostWeights &w)
{
    CostBreakdown c;
    c.J_m = traj.jerk_cost();
    c.J_t = traj.duration();
    for (double t : cost_sample_times(traj, w.samples_per_segment))
    {
        const TrajectorySample s = traj.evaluate(t);
        c.G_v += cube_hinge(s.v.head<3>().norm() - w.v_max);
        c.G_a += cube_hinge(s.a.head<3>().norm() - w.a_max);
        c.G_j += cube_hinge(s.j.head<3>().norm() - w.j_max);
        c.G_phi += std::abs(wrapPeriod(s.p(3) - ctx.yaw_star, ctx.yaw_period));
        if (ctx.env)
        {
            const Eigen::Rotation2Dd rot(s.p(3));
            const Vec2 xy = s.p.head<2>();
            for (const Vec2 &q : ctx.footprint)
                c.G_o += cube_hinge(w.margin - ctx.env->sdf(xy + rot * q));
        }
    }
    c.total = w.lambda_m * c.J_m + w.lambda_t * c.J_t + w.lambda_o * c.G_o +
              w.lambda_d * (w.lambda_v * c.G_v + w.lambda_a * c.G_a + w.lambda_j * c.G_j + w.lambda_phi * c.G_phi);
    return c;
}

namespace
{

struct Packing
{
    std::vector<Vec4> base; // waypoints of the initial trajectory
    bool yaw = true;
    int interior() const { return static_cast<int>(base.size()) - 2; }
    int per_point() const { return yaw ? 3 : 2; }
    int size() const { return interior() * per_point() + static_cast<int>(base.size()) - 1; }

    VecX pack(const PiecewiseTrajectory &tr) const
    {
        VecX x(size());
        int i = 0;
        for (int k = 1; k <= interior(); ++k)
        {
            x(i++) = tr.waypoints()[k](0);
            x(i++) = tr.waypoints()[k](1);
            if (yaw)
                x(i++) = tr.waypoints()[k](3);
        }
        for (double T : tr.durations())
            x(i++) = std::log(T);
        return x;
    }

    // Returns false when the durations leave the admissible range.
    bool unpack(const VecX &x, PiecewiseTrajectory &out) const
    {
        std::vector<Vec4> pts = base;
        int i = 0;
        for (int k = 1; k <= interior(); ++k)
        {
            pts[k](0) = x(i++);
            pts[k](1) = x(i++);
            if (yaw)
                pts[k](3) = x(i++);
        }
        std::vector<double> T;
        for (std::size_t k = 0; k + 1 < base.size(); ++k)
        {
            const double lt = x(i++);
            if (!(lt > std::log(1e-2) && lt < std::log(1e3)))
                return false;
            T.push_back(std::exp(lt));
        }
        out = PiecewiseTrajectory(std::move(pts), std::move(T));
        return true;
    }
};

} // namespace

OptimizeResult optimize(const PiecewiseTrajectory &init, const CostContext &ctx, const CostWeights &w,
                        const OptimizeOptions &opt)
{
    w.validate();
    Packing pk{init.waypoints(), opt.optimize_yaw};

    auto cost_of = [&](const VecX &x) {
        PiecewiseTrajectory tr;
        if (!pk.unpack(x, tr))
            return std::numeric_limits<double>::infinity();
        const double c = total_cost(tr, ctx, w).total;
        return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
    };
    auto gradient = [&](const VecX &x) {
        VecX g(x.size());
        VecX xp = x;
        for (Eigen::Index i = 0; i < x.size(); ++i)
        {
            const double h = opt.fd_step * std::max(1.0, std::abs(x(i)));
            xp(i) = x(i) + h;
            const double fp = cost_of(xp);
            xp(i) = x(i) - h;
            const double fm = cost_of(xp);
            xp(i) = x(i);
            g(i) = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * h) : 0.0;
        }
        return g;
    };

    OptimizeResult res;
    res.traj = init;
    res.initial = total_cost(init, ctx, w);
    res.final = res.initial;
    res.history.push_back(res.initial.total);

    VecX x = pk.pack(init);
    double c = res.initial.total;
    VecX g_prev, x_prev;
    double alpha = 0.0;

    for (int it = 0; it < opt.max_iterations; ++it)
    {
        const VecX g = gradient(x);
        const double gg = g.squaredNorm();
        if (gg == 0.0 || !std::isfinite(gg))
            break;

        // Barzilai-Borwein guess, bounded so no coordinate moves more than 0.5.
        const double cap = 0.5 / g.lpNorm<Eigen::Infinity>();
        if (it == 0)
            alpha = 0.05 / g.lpNorm<Eigen::Infinity>();
        else
        {
            const VecX s = x - x_prev;
            const VecX y = g - g_prev;
            const double sy = s.dot(y);
            alpha = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * alpha;
        }
        alpha = std::min(alpha, cap);

        bool accepted = false;
        VecX x_new;
        double c_new = c;
        for (int tries = 0; tries < 60; ++tries)
        {
            x_new = x - alpha * g;
            c_new = cost_of(x_new);
            if (c_new <= c - 1e-4 * alpha * gg)
            {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted)
        {
            res.line_search_failed = true;
            break;
        }

        const double rel = (c - c_new) / std::max(std::abs(c), 1e-12);
        x_prev = x;
        g_prev = g;
        x = x_new;
        c = c_new;
        res.history.push_back(c);
        res.iterations = it + 1;
        if (rel < opt.rel_tol)
            break;
    }

    pk.unpack(x, res.traj);
    res.final = total_cost(res.traj, ctx, w);
    return res;
}

double continuity_error(const PiecewiseTrajectory &traj)
{
    double err = 0.0;
    for (int k = 0; k + 1 < traj.segments(); ++k)
    {
        const TrajectorySample left = traj.evaluate_segment(k, traj.durations()[k]);
        const TrajectorySample right = traj.evaluate_segment(k + 1, 0.0);
        err = std::max({err, (left.p - right.p).lpNorm<Eigen::Infinity>(), (left.v - right.v).lpNorm<Eigen::Infinity>(),
                        (left.a - right.a).lpNorm<Eigen::Infinity>()});
    }
    return err;
}

double audit_clearance(const PiecewiseTrajectory &traj, const Environment &env, const std::vector<Vec2> &footprint,
                       double dt)
{
    double best = std::numeric_limits<double>::infinity();
    const int steps = static_cast<int>(std::ceil(traj.duration() / dt));
    for (int i = 0; i <= steps; ++i)
    {
        const TrajectorySample s = traj.evaluate(std::min(i * dt, traj.duration()));
        best = std::min(best, footprint_clearance(env, footprint, s.p.head<2>(), s.p(3)));
    }
    return best;
}

void write_trajectory_csv(const PiecewiseTrajectory &traj, double dt, const std::filesystem::path &path)
{
    std::ofstream f(path);
    if (!f)
        throw Error("cannot write " + path.string());
    f << "t,x,y,z,psi,vx,vy,vz,psi_dot\n";
    f.precision(9);
    const int steps = static_cast<int>(std::floor(traj.duration() / dt + 1e-9));
    for (int i = 0; i <= steps; ++i)
    {
        const double t = i * dt;
        const TrajectorySample s = traj.evaluate(t);
        f << t << ',' << s.p(0) << ',' << s.p(1) << ',' << s.p(2) << ',' << s.p(3) << ',' << s.v(0) << ',' << s.v(1)
          << ',' << s.v(2) << ',' << s.v(3) << '\n';
    }
}

} // namespace mars
