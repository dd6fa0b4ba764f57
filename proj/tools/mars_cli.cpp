// Command-line front end: run, compare, plan and batch scenario files.

#include "mars/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace
{

enum ExitCode
{
    kOk = 0,
    kDivergence = 2,
    kPlannerFailure = 3,
    kConfigError = 4,
};

int outcome_code(const mars::ScenarioOutcome &o)
{
    if (o.planner_failed)
        return kPlannerFailure;
    if (o.diverged)
        return kDivergence;
    return kOk;
}

void print_outcome(const mars::ScenarioOutcome &o)
{
    if (o.planner_failed)
    {
        std::printf("%s: planner failure: %s\n", o.name.c_str(), o.message.c_str());
        return;
    }
    std::printf("%s: rms %.4f m (std %.4f), max %.4f m, collisions %d%s\n", o.name.c_str(), o.mean_rms, o.std_rms,
                o.max_max, o.collisions, o.diverged ? ", DIVERGED" : "");
    for (const auto &m : o.trials)
        if (m.yaw_transient > 0.0 || m.accel_transient > 0.0)
            std::printf("  yaw transient %.3f deg, accel transient %.3f m/s^2\n", m.yaw_transient, m.accel_transient);
    if (o.diverged)
        std::printf("  %s\n", o.message.c_str());
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Fault-tolerant allocation and attitude-aware planning simulator for modular multirotor assemblies"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string output_dir;
    double dt = 0.0;
    int verbosity = 0;
    app.add_option("-o,--output", output_dir, "Directory for traces, metrics and plot data");
    app.add_option("--dt", dt, "Override the plant integration step, s")->check(CLI::Range(1e-6, 1e-2));
    app.add_flag("-v,--verbose", verbosity, "Increase log output (repeatable)");

    std::string scenario_path;
    auto *run = app.add_subcommand("run", "Simulate one scenario");
    run->add_option("scenario", scenario_path, "Scenario file")->required();

    std::string path_a, path_b;
    auto *cmp = app.add_subcommand("compare", "Run a baseline scenario A and a candidate B and report improvement");
    cmp->add_option("A", path_a, "Baseline scenario")->required();
    cmp->add_option("B", path_b, "Candidate scenario")->required();

    auto *plan = app.add_subcommand("plan", "Run the planner pipeline only");
    plan->add_option("scenario", scenario_path, "Scenario file")->required();

    std::string batch_dir;
    auto *batch = app.add_subcommand("batch", "Run every scenario in a directory");
    batch->add_option("dir", batch_dir, "Directory of scenario files")->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    mars::RunOptions opt;
    opt.output_dir = output_dir;
    opt.verbosity = verbosity;
    if (dt > 0.0)
        opt.dt_override = dt;

    try
    {
        if (*run)
        {
            const auto o = mars::run_scenario(mars::load_scenario(scenario_path), opt);
            print_outcome(o);
            return outcome_code(o);
        }
        if (*cmp)
        {
            const auto a = mars::run_scenario(mars::load_scenario(path_a), opt);
            const auto b = mars::run_scenario(mars::load_scenario(path_b), opt);
            print_outcome(a);
            print_outcome(b);
            if (a.planner_failed || b.planner_failed)
                return kPlannerFailure;
            std::printf("\n%s", mars::compare(a, b).format().c_str());
            return (a.diverged || b.diverged) ? kDivergence : kOk;
        }
        if (*plan)
        {
            const auto s = mars::load_scenario(scenario_path);
            try
            {
                const auto info = mars::plan_scenario(s);
                std::printf("%s: %zu lattice nodes (%zu kept), path cost %.4f, %d expansions\n", s.name.c_str(),
                            info.sequence.nodes.size(), info.thinned.nodes.size(), info.sequence.cost,
                            info.sequence.expansions);
                std::printf("  yaw* %.1f deg, trajectory %.2f s, cost %.4f -> %.4f in %d iterations\n",
                            mars::rad2deg(info.yaw_star), info.trajectory.duration(), info.opt.initial.total,
                            info.opt.final.total, info.opt.iterations);
                std::printf("  clearance %.4f m, audited node collisions %d\n", info.audit_clearance,
                            info.audit_collisions);
                if (!output_dir.empty())
                {
                    std::filesystem::create_directories(std::filesystem::path(output_dir) / s.name);
                    mars::write_trajectory_csv(info.trajectory, 0.01,
                                               std::filesystem::path(output_dir) / s.name / "trajectory.csv");
                }
                return kOk;
            }
            catch (const mars::Infeasible &e)
            {
                std::printf("%s: planner failure: %s\n", s.name.c_str(), e.what());
                return kPlannerFailure;
            }
        }
        if (*batch)
        {
            const auto res = mars::run_batch(batch_dir, opt);
            int code = kOk;
            for (const auto &o : res.outcomes)
            {
                print_outcome(o);
                code = std::max(code, outcome_code(o));
            }
            if (!res.report.rows.empty())
                std::printf("\n%s", res.report.format().c_str());
            return code;
        }
    }
    catch (const mars::InvalidArgument &e)
    {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfigError;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    }
    return kOk;
}
