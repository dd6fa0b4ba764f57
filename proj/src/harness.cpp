#include "mars/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace mars
{

namespace
{

std::ofstream open_out(const std::filesystem::path &path)
{
    std::ofstream f(path);
    if (!f)
        throw Error("cannot write " + path.string());
    f.precision(10);
    return f;
}

ReferenceFn trajectory_reference(const PiecewiseTrajectory &traj)
{
    return [traj](double t) {
        const TrajectorySample s = traj.evaluate(t);
        ReferenceState r;
        r.p = s.p.head<3>();
        r.v = s.v.head<3>();
        r.a = s.a.head<3>();
        r.yaw = s.p(3);
        r.yaw_rate = s.v(3);
        if (s.clamped)
        {
            r.v.setZero();
            r.a.setZero();
            r.yaw_rate = 0.0;
        }
        return r;
    };
}

void log(const RunOptions &opt, int level, const std::string &msg)
{
    if (opt.verbosity >= level)
        std::fprintf(stderr, "%s\n", msg.c_str());
}

} // namespace

PlanInfo plan_scenario(const Scenario &s)
{
    if (s.reference != "planner")
        throw InvalidArgument("scenario '" + s.name + "' has no planner reference");
    const Environment env = load_environment(s.base_dir / s.planner.map);
    const AssemblyLayout layout = scenario_layout(s);
    const FaultState faults = scenario_faults(s);
    const AttitudeObjectiveSpec spec = scenario_attitude_spec(s);
    const PlannerOptions popt = scenario_planner_options(s);

    auto node = [&](const Triple &xyy) {
        SE3Node n;
        n.position = Vec3(xyy[0], xyy[1], s.planner.altitude);
        n.attitude = Vec3(0.0, 0.0, wrapAngle(deg2rad(xyy[2])));
        return n;
    };

    PlanInfo info;
    info.sequence = astar_plan(env, node(s.planner.start), node(s.planner.goal), layout, faults, spec, popt);
    for (const auto &n : info.sequence.nodes)
        info.audit_collisions += !footprint_collision_check(n, layout, env, popt.margin);
    info.thinned = thin_sequence(info.sequence, s.planner.max_stride, s.planner.max_nodes);

    const PiecewiseTrajectory init = init_from_sequence(info.thinned, s.planner.v_nominal);
    const CostContext ctx = make_cost_context(&env, layout, faults, spec);
    info.yaw_star = ctx.yaw_star;
    OptimizeOptions oopt;
    oopt.max_iterations = s.trajopt.max_iterations;
    info.opt = optimize(init, ctx, scenario_weights(s), oopt);
    info.trajectory = info.opt.traj;
    info.audit_clearance = audit_clearance(info.trajectory, env, ctx.footprint, 0.01);
    info.yaw_deviation = info.opt.final.G_phi;
    return info;
}

ScenarioOutcome run_scenario(const Scenario &s, const RunOptions &opt)
{
    ScenarioOutcome out;
    out.name = s.name;
    out.pair = s.pair;
    out.planner_mode = s.planner_mode;

    const AssemblyLayout layout = scenario_layout(s);
    SimConfig cfg = scenario_sim_config(s, layout);
    if (opt.dt_override)
    {
        cfg.dt = *opt.dt_override;
        cfg.control_dt = std::max(cfg.control_dt, cfg.dt);
    }

    std::optional<Environment> env;
    if (s.reference == "spiral")
    {
        SpiralParams sp;
        sp.radius = s.spiral.radius;
        sp.climb_rate = s.spiral.climb_rate;
        sp.angular_rate = s.spiral.angular_rate;
        sp.center = Vec3(s.spiral.center.data());
        sp.yaw = deg2rad(s.spiral.yaw_deg);
        cfg.reference = [sp](double t) { return spiral_reference(t, sp); };
    }
    else if (s.reference == "hover")
    {
        ReferenceState r;
        r.p = Vec3(s.spiral.center.data());
        r.yaw = deg2rad(s.spiral.yaw_deg);
        cfg.reference = [r](double) { return r; };
    }
    else
    {
        try
        {
            out.plan = plan_scenario(s);
        }
        catch (const Infeasible &e)
        {
            out.planner_failed = true;
            out.message = e.what();
            return out;
        }
        env = load_environment(s.base_dir / s.planner.map);
        cfg.env = &*env;
        cfg.reference = trajectory_reference(out.plan->trajectory);
        cfg.duration = out.plan->trajectory.duration() + s.planner.settle_time;
        log(opt, 1,
            s.name + ": planned " + std::to_string(out.plan->sequence.nodes.size()) + " nodes, trajectory " +
                std::to_string(out.plan->trajectory.duration()) + " s, cost " +
                std::to_string(out.plan->opt.initial.total) + " -> " + std::to_string(out.plan->opt.final.total));
    }

    const std::filesystem::path dir = opt.output_dir.empty() ? std::filesystem::path() : opt.output_dir / s.name;
    if (!dir.empty())
    {
        std::filesystem::create_directories(dir);
        if (out.plan)
            write_trajectory_csv(out.plan->trajectory, 0.01, dir / "trajectory.csv");
    }

    for (int k = 0; k < s.trial_count; ++k)
    {
        SimConfig trial = cfg;
        if (s.trial_count > 1)
        {
            std::mt19937_64 rng(static_cast<std::uint64_t>(s.seed) + static_cast<std::uint64_t>(k));
            std::uniform_real_distribution<double> jitter(-s.jitter, s.jitter);
            trial.initial_offset = Vec3(jitter(rng), jitter(rng), jitter(rng));
        }
        const SimResult r = run_closed_loop(trial);
        out.trials.push_back(r.metrics);
        log(opt, 1,
            s.name + " trial " + std::to_string(k) + ": rms " + std::to_string(r.metrics.rms_error) + " m, max " +
                std::to_string(r.metrics.max_error) + " m" + (r.metrics.diverged ? " (diverged)" : ""));
        if (!dir.empty())
        {
            const std::filesystem::path tdir =
                s.trial_count > 1 ? dir / ("trial_" + std::to_string(k)) : dir;
            std::filesystem::create_directories(tdir / "plots");
            write_trace_csv(r.trace, tdir / "trace.csv");
            emit_plot_data(r.trace, trial.duration, s.plot_dt, tdir / "plots");
        }
    }

    double sum = 0.0, sq = 0.0;
    for (const auto &m : out.trials)
    {
        sum += m.rms_error;
        sq += m.rms_error * m.rms_error;
        out.mean_max += m.max_error;
        out.max_max = std::max(out.max_max, m.max_error);
        out.collisions += m.collision_count;
        if (m.diverged)
        {
            out.diverged = true;
            out.message = m.divergence_reason;
        }
    }
    const double n = static_cast<double>(out.trials.size());
    out.mean_rms = sum / n;
    out.std_rms = std::sqrt(std::max(0.0, sq / n - out.mean_rms * out.mean_rms));
    out.mean_max /= n;

    if (!dir.empty())
    {
        auto f = open_out(dir / "metrics.json");
        f << metrics_json(out) << "\n";
    }
    return out;
}

double improvement_percent(double baseline, double ours)
{
    if (!(baseline > 0.0))
        return 0.0;
    return (baseline - ours) / baseline * 100.0;
}

ComparisonReport compare(const ScenarioOutcome &a, const ScenarioOutcome &b)
{
    ComparisonRow row;
    row.configuration = !a.pair.empty() && a.pair == b.pair ? a.pair : a.name + " vs " + b.name;
    row.baseline = a.mean_rms;
    row.ours = b.mean_rms;
    row.baseline_max = a.mean_max;
    row.ours_max = b.mean_max;
    row.baseline_collisions = a.collisions;
    row.ours_collisions = b.collisions;
    row.improvement = improvement_percent(a.mean_rms, b.mean_rms);
    ComparisonReport rep;
    rep.rows.push_back(row);
    rep.mean_improvement = row.improvement;
    return rep;
}

std::string ComparisonReport::format() const
{
    std::ostringstream os;
    os << std::left << std::setw(24) << "Configuration" << std::right << std::setw(14) << "Baseline (m)"
       << std::setw(12) << "Ours (m)" << std::setw(14) << "Improvement" << std::setw(14) << "Collisions"
       << "\n";
    os << std::fixed;
    for (const auto &r : rows)
    {
        std::ostringstream coll;
        coll << r.baseline_collisions << "/" << r.ours_collisions;
        os << std::left << std::setw(24) << r.configuration << std::right << std::setw(14) << std::setprecision(4)
           << r.baseline << std::setw(12) << r.ours << std::setw(13) << std::setprecision(1) << r.improvement << "%"
           << std::setw(14) << coll.str() << "\n";
    }
    os << std::left << std::setw(50) << "Average" << std::right << std::setw(13) << std::setprecision(1)
       << mean_improvement << "%\n";
    return os.str();
}

BatchResult run_batch(const std::filesystem::path &dir, const RunOptions &opt)
{
    if (!std::filesystem::is_directory(dir))
        throw InvalidArgument("batch: not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto &e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && (e.path().extension() == ".yaml" || e.path().extension() == ".yml"))
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    // Parse everything first so configuration errors surface before any run.
    std::vector<Scenario> scenarios;
    for (const auto &f : files)
        scenarios.push_back(load_scenario(f));

    BatchResult res;
    res.outcomes.resize(scenarios.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::string first_error;
    auto worker = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++)
        {
            try
            {
                res.outcomes[i] = run_scenario(scenarios[i], opt);
            }
            catch (const std::exception &e)
            {
                std::lock_guard lock(err_mutex);
                if (first_error.empty())
                    first_error = scenarios[i].name + ": " + e.what();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                             static_cast<unsigned>(scenarios.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back(worker);
    for (auto &t : pool)
        t.join();
    if (!first_error.empty())
        throw Error(first_error);

    std::map<std::string, std::pair<const ScenarioOutcome *, const ScenarioOutcome *>> pairs;
    std::vector<std::string> order;
    for (const auto &o : res.outcomes)
    {
        if (o.pair.empty())
            continue;
        if (!pairs.count(o.pair))
            order.push_back(o.pair);
        auto &slot = pairs[o.pair];
        (o.planner_mode == PlannerMode::kinematic_only ? slot.first : slot.second) = &o;
    }
    double total = 0.0;
    for (const auto &key : order)
    {
        const auto &[base, ours] = pairs[key];
        if (!base || !ours)
            continue;
        ComparisonRow row = compare(*base, *ours).rows.front();
        row.configuration = key;
        total += row.improvement;
        res.report.rows.push_back(row);
    }
    if (!res.report.rows.empty())
        res.report.mean_improvement = total / static_cast<double>(res.report.rows.size());

    if (!opt.output_dir.empty())
    {
        std::filesystem::create_directories(opt.output_dir);
        auto f = open_out(opt.output_dir / "comparison.txt");
        f << res.report.format();
    }
    return res;
}

void write_trace_csv(const Trace &trace, const std::filesystem::path &path)
{
    auto f = open_out(path);
    f << "# mars trace schema " << kTraceSchemaVersion << "\n";
    f << "t,x,y,z,vx,vy,vz,roll,pitch,yaw,wx,wy,wz,x_ref,y_ref,z_ref,yaw_ref,error,"
         "F_cmd,Mx_cmd,My_cmd,Mz_cmd,F_applied,Mx_applied,My_applied,Mz_applied,saturated,units\n";
    for (const auto &r : trace.rows)
    {
        const Vec3 e = r.state.euler();
        f << r.t << ',' << r.state.p.x() << ',' << r.state.p.y() << ',' << r.state.p.z() << ',' << r.state.v.x()
          << ',' << r.state.v.y() << ',' << r.state.v.z() << ',' << e.x() << ',' << e.y() << ',' << e.z() << ','
          << r.state.w.x() << ',' << r.state.w.y() << ',' << r.state.w.z() << ',' << r.ref.p.x() << ','
          << r.ref.p.y() << ',' << r.ref.p.z() << ',' << r.ref.yaw << ',' << (r.state.p - r.ref.p).norm() << ','
          << r.cmd.F << ',' << r.cmd.M.x() << ',' << r.cmd.M.y() << ',' << r.cmd.M.z() << ',' << r.applied(0) << ','
          << r.applied(1) << ',' << r.applied(2) << ',' << r.applied(3) << ',' << int(r.saturated) << ',' << r.units
          << '\n';
    }
}

std::string metrics_json(const ScenarioOutcome &o)
{
    using nlohmann::json;
    json j;
    j["schema"] = kMetricsSchemaVersion;
    j["scenario"] = o.name;
    j["pair"] = o.pair;
    j["planner_mode"] = to_string(o.planner_mode);
    j["diverged"] = o.diverged;
    j["planner_failed"] = o.planner_failed;
    j["message"] = o.message;
    j["rms_error"] = o.mean_rms;
    j["rms_error_std"] = o.std_rms;
    j["max_error"] = o.max_max;
    j["mean_max_error"] = o.mean_max;
    j["collision_count"] = o.collisions;
    json trials = json::array();
    for (const auto &m : o.trials)
    {
        trials.push_back({{"rms_error", m.rms_error},
                          {"max_error", m.max_error},
                          {"yaw_transient_deg", m.yaw_transient},
                          {"accel_transient", m.accel_transient},
                          {"collision_count", m.collision_count},
                          {"diverged", m.diverged},
                          {"divergence_reason", m.divergence_reason},
                          {"final_time", m.final_time},
                          {"saturated_ticks", m.saturated_ticks}});
    }
    j["trials"] = trials;
    if (o.plan)
    {
        j["plan"] = {{"nodes", o.plan->sequence.nodes.size()},
                     {"thinned_nodes", o.plan->thinned.nodes.size()},
                     {"path_cost", o.plan->sequence.cost},
                     {"expansions", o.plan->sequence.expansions},
                     {"yaw_star_deg", rad2deg(o.plan->yaw_star)},
                     {"trajectory_duration", o.plan->trajectory.duration()},
                     {"cost_initial", o.plan->opt.initial.total},
                     {"cost_final", o.plan->opt.final.total},
                     {"optimizer_iterations", o.plan->opt.iterations},
                     {"yaw_deviation", o.plan->yaw_deviation},
                     {"audit_clearance", o.plan->audit_clearance},
                     {"audit_collisions", o.plan->audit_collisions}};
    }
    return j.dump(2);
}

void emit_plot_data(const Trace &trace, double duration, double plot_dt, const std::filesystem::path &dir)
{
    if (!(plot_dt > 0.0))
        throw InvalidArgument("emit_plot_data: plot_dt must be positive");
    std::filesystem::create_directories(dir);
    auto xy = open_out(dir / "path_xy.csv");
    auto xz = open_out(dir / "path_xz.csv");
    auto err = open_out(dir / "error_vs_time.csv");
    auto yaw = open_out(dir / "yaw_vs_time.csv");
    auto ev = open_out(dir / "events.csv");
    xy << "t,x,y,x_ref,y_ref\n";
    xz << "t,x,z,x_ref,z_ref\n";
    err << "t,error\n";
    yaw << "t,yaw_deg,yaw_ref_deg\n";
    ev << "t,event\n";
    for (const auto &e : trace.events)
        ev << e.t << ",\"" << e.what << "\"\n";
    if (trace.rows.empty())
        return;

    const long n = std::lround(duration / plot_dt);
    std::size_t idx = 0;
    for (long k = 0; k < n; ++k)
    {
        const double t = k * plot_dt;
        if (t > trace.rows.back().t + 1e-9)
            break;
        while (idx + 1 < trace.rows.size() &&
               std::abs(trace.rows[idx + 1].t - t) <= std::abs(trace.rows[idx].t - t))
            ++idx;
        const TraceRow &r = trace.rows[idx];
        xy << r.t << ',' << r.state.p.x() << ',' << r.state.p.y() << ',' << r.ref.p.x() << ',' << r.ref.p.y() << '\n';
        xz << r.t << ',' << r.state.p.x() << ',' << r.state.p.z() << ',' << r.ref.p.x() << ',' << r.ref.p.z() << '\n';
        err << r.t << ',' << (r.state.p - r.ref.p).norm() << '\n';
        yaw << r.t << ',' << rad2deg(r.state.euler().z()) << ',' << rad2deg(r.ref.yaw) << '\n';
    }
}

} // namespace mars
