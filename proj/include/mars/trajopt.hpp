#pragma once

#include "mars/environment.hpp"
#include "mars/fault.hpp"
#include "mars/planner.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mars
{

/// Axis order of every 4-vector below: x, y, z, yaw.
using Coeffs = Eigen::Matrix<double, 6, 4>;

struct TrajectorySample
{
    Vec4 p = Vec4::Zero();
    Vec4 v = Vec4::Zero();
    Vec4 a = Vec4::Zero();
    Vec4 j = Vec4::Zero();
    bool clamped = false; // requested time was outside [0, duration]
};

/// Piecewise quintic through fixed waypoints. Interior knot velocities and
/// accelerations minimize the total squared jerk with rest conditions at
/// both ends, so the curve is C2 by construction.
class PiecewiseTrajectory
{
public:
    PiecewiseTrajectory() = default;
    PiecewiseTrajectory(std::vector<Vec4> waypoints, std::vector<double> durations);

    int segments() const { return static_cast<int>(durations_.size()); }
    double duration() const { return total_; }
    const std::vector<Vec4> &waypoints() const { return waypoints_; }
    const std::vector<double> &durations() const { return durations_; }
    const Vec4 &knot_velocity(int k) const { return vel_.at(k); }
    const Vec4 &knot_acceleration(int k) const { return acc_.at(k); }
    /// Coefficients of segment k in local time, rows = powers 0..5.
    const Coeffs &coefficients(int k) const { return coeffs_.at(k); }
    /// Segment start time.
    double start_time(int k) const { return starts_.at(k); }

    TrajectorySample evaluate(double t) const;
    /// Evaluates segment k at local time tau without clamping.
    TrajectorySample evaluate_segment(int k, double tau) const;
    /// Exact integral of the squared jerk over all axes.
    double jerk_cost() const;

private:
    void solve();

    std::vector<Vec4> waypoints_;
    std::vector<double> durations_;
    std::vector<double> starts_;
    std::vector<Vec4> vel_;
    std::vector<Vec4> acc_;
    std::vector<Coeffs> coeffs_;
    double total_ = 0.0;
};

TrajectorySample evaluate(const PiecewiseTrajectory &traj, double t);

/// One segment per consecutive node pair with T = length / v_nominal.
/// Segment length combines position distance and yaw change (0.3 m per
/// rad); segments with no motion at all are merged into a neighbor.
/// Yaw is unwrapped along the sequence.
PiecewiseTrajectory init_from_sequence(const DiscreteSequence &seq, double v_nominal);

struct CostWeights
{
    double lambda_m = 1.0;
    double lambda_t = 10.0;
    double lambda_o = 1e4;
    double lambda_d = 1.0;
    double lambda_v = 1.0;
    double lambda_a = 1.0;
    double lambda_j = 1.0;
    double lambda_phi = 1.0;
    double v_max = 1.0;  // m/s
    double a_max = 2.0;  // m/s^2
    double j_max = 10.0; // m/s^3
    double margin = 0.05; // obstacle clearance target, m
    int samples_per_segment = 16;

    void validate() const;
};

struct CostBreakdown
{
    double J_m = 0.0;
    double J_t = 0.0;
    double G_o = 0.0;
    double G_v = 0.0;
    double G_a = 0.0;
    double G_j = 0.0;
    double G_phi = 0.0;
    double total = 0.0;
};

/// Everything the cost needs besides the trajectory and the weights.
struct CostContext
{
    const Environment *env = nullptr; // no obstacle term when null
    std::vector<Vec2> footprint;      // body-frame outline samples
    double yaw_star = 0.0;
    double yaw_period = 2.0 * kPi;
};

CostContext make_cost_context(const Environment *env, const AssemblyLayout &layout, const FaultState &faults,
                              const AttitudeObjectiveSpec &spec);

/// Sample times used by every sampled penalty: samples_per_segment points per
/// segment at tau = T (i + 1/2) / samples.
std::vector<double> cost_sample_times(const PiecewiseTrajectory &traj, int samples_per_segment);

CostBreakdown total_cost(const PiecewiseTrajectory &traj, const CostContext &ctx, const CostWeights &w);

struct OptimizeResult
{
    PiecewiseTrajectory traj;
    CostBreakdown initial;
    CostBreakdown final;
    std::vector<double> history; // cost of every accepted iterate, starting with the initial
    int iterations = 0;
    bool line_search_failed = false;
};

struct OptimizeOptions
{
    int max_iterations = 300;
    double rel_tol = 1e-6;
    double fd_step = 1e-5;
    bool optimize_yaw = true;
};

/// Gradient descent with central-difference gradients and backtracking over
/// interior waypoints (x, y, yaw) and log segment durations.
OptimizeResult optimize(const PiecewiseTrajectory &init, const CostContext &ctx, const CostWeights &w,
                        const OptimizeOptions &opt = {});

/// Largest position/velocity/acceleration mismatch between the two sides of
/// every interior joint.
double continuity_error(const PiecewiseTrajectory &traj);

/// Smallest footprint clearance over time samples at `dt` spacing.
double audit_clearance(const PiecewiseTrajectory &traj, const Environment &env, const std::vector<Vec2> &footprint,
                       double dt);

/// Columns t,x,y,z,psi,vx,vy,vz,psi_dot sampled every dt.
void write_trajectory_csv(const PiecewiseTrajectory &traj, double dt, const std::filesystem::path &path);

} // namespace mars
