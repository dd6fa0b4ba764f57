#pragma once

#include "mars/scenario.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mars
{

constexpr int kTraceSchemaVersion = 1;
constexpr int kMetricsSchemaVersion = 1;

struct RunOptions
{
    std::filesystem::path output_dir; // empty: nothing is written
    std::optional<double> dt_override;
    int verbosity = 0;
};

/// Planner pipeline products of a run.
struct PlanInfo
{
    DiscreteSequence sequence; // raw lattice path
    DiscreteSequence thinned;
    PiecewiseTrajectory trajectory;
    OptimizeResult opt;
    double yaw_star = 0.0;
    double audit_clearance = 0.0; // smallest clearance of the reference footprint
    int audit_collisions = 0;     // lattice nodes failing an independent audit
    double yaw_deviation = 0.0;   // summed |yaw* - yaw(t_i)| of the optimized trajectory
};

struct ScenarioOutcome
{
    std::string name;
    std::string pair;
    PlannerMode planner_mode = PlannerMode::attitude_aware;
    std::vector<Metrics> trials;
    double mean_rms = 0.0;
    double std_rms = 0.0;
    double mean_max = 0.0;
    double max_max = 0.0;
    int collisions = 0; // summed over trials
    bool diverged = false;
    bool planner_failed = false;
    std::string message;
    std::optional<PlanInfo> plan;
};

/// Plans the reference trajectory of a planner scenario. Throws Infeasible
/// on planner failure.
PlanInfo plan_scenario(const Scenario &s);

/// Runs all trials of a scenario and writes artifacts when an output
/// directory is given.
ScenarioOutcome run_scenario(const Scenario &s, const RunOptions &opt = {});

struct ComparisonRow
{
    std::string configuration;
    double baseline = 0.0; // mean rms error
    double ours = 0.0;
    double baseline_max = 0.0;
    double ours_max = 0.0;
    double improvement = 0.0; // percent
    int baseline_collisions = 0;
    int ours_collisions = 0;
};

struct ComparisonReport
{
    std::vector<ComparisonRow> rows;
    double mean_improvement = 0.0;
    std::string format() const;
};

/// (baseline - ours) / baseline * 100; zero when the baseline error is zero.
double improvement_percent(double baseline, double ours);

/// A is the baseline, B the candidate.
ComparisonReport compare(const ScenarioOutcome &a, const ScenarioOutcome &b);

/// Runs every *.yaml scenario in `dir` in parallel. Runs sharing a `pair`
/// key are compared with the kinematic_only run as baseline.
struct BatchResult
{
    std::vector<ScenarioOutcome> outcomes;
    ComparisonReport report;
};
BatchResult run_batch(const std::filesystem::path &dir, const RunOptions &opt = {});

/// Trace CSV: one row per control tick, preceded by a schema comment.
void write_trace_csv(const Trace &trace, const std::filesystem::path &path);
std::string metrics_json(const ScenarioOutcome &o);

/// Writes path_xy.csv, path_xz.csv, error_vs_time.csv, yaw_vs_time.csv and
/// events.csv, downsampled to rows at t = k * plot_dt for k < duration / plot_dt.
void emit_plot_data(const Trace &trace, double duration, double plot_dt, const std::filesystem::path &dir);

} // namespace mars
