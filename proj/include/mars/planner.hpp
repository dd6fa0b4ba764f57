#pragma once

#include "mars/environment.hpp"
#include "mars/fault.hpp"

#include <optional>
#include <vector>

namespace mars
{

/// A lattice node. On the planar lattice z is fixed and roll/pitch are zero.
struct SE3Node
{
    Vec3 position = Vec3::Zero();
    Vec3 attitude = Vec3::Zero(); // roll, pitch, yaw
    std::optional<int> parent;
    double g = 0.0;
    double f = 0.0;

    double yaw() const { return attitude.z(); }
};

struct DiscreteSequence
{
    std::vector<SE3Node> nodes;
    double cost = 0.0; // accumulated path cost G of the goal node
    int expansions = 0;
};

struct AttitudeObjectiveSpec
{
    Vec4 C_tau = Vec4(1.0, 1.0, -1.0, -1.0);
    VecX u_max;         // per-rotor max thrust (4n); empty means each rotor's f_max
    double L_phi = 5.0; // weight of the attitude deviation cost

    void validate(const AssemblyLayout &layout) const;
};

/// Signed torque capacity at attitude (roll, pitch, yaw): rotor levers are
/// rotated by Rz(yaw) Ry(pitch) Rx(roll) and weighted by eta * u_max.
TauPM tau_pm_max(const AssemblyLayout &layout, const FaultState &faults, const Vec3 &attitude,
                 const AttitudeObjectiveSpec &spec);

/// tau_pm_max . C_tau, i.e. minus the summed torque authority.
double attitude_objective(const AssemblyLayout &layout, const FaultState &faults, double yaw,
                          const AttitudeObjectiveSpec &spec);

/// Yaw minimizing the attitude objective on a 1 degree grid over
/// [-90, 90) degrees. Ties go to the smallest |yaw|, then to positive yaw.
Vec3 optimal_attitude(const AssemblyLayout &layout, const FaultState &faults, const AttitudeObjectiveSpec &spec);

/// Body-frame footprint samples at the given environment's resolution.
std::vector<Vec2> planner_footprint(const AssemblyLayout &layout, const Environment &env);

/// True when no unit square of the footprint at `node`, grown by `margin`,
/// overlaps an occupied or out-of-map cell.
bool footprint_collision_check(const SE3Node &node, const AssemblyLayout &layout, const Environment &env,
                               double margin);

struct PlannerOptions
{
    double yaw_step = deg2rad(15.0);
    double yaw_weight = 0.2; // path cost per radian of yaw change, m/rad
    double margin = 0.0;     // required clearance of the footprint, m
    int max_expansions = 2'000'000;
};

/// Dynamically feasible A* over (x, y, yaw). Node priority is
/// F = G + H + J with H the Euclidean distance to the goal and
/// J = L_phi * |yaw* - yaw| wrapped by the layout's yaw symmetry period.
/// Throws Infeasible when the open set is exhausted and InvalidArgument
/// when start or goal collide.
DiscreteSequence astar_plan(const Environment &env, const SE3Node &start, const SE3Node &goal,
                            const AssemblyLayout &layout, const FaultState &faults, const AttitudeObjectiveSpec &spec,
                            const PlannerOptions &opt = {});

/// Keeps the endpoints and the nodes where the motion direction or the yaw
/// rate changes, then re-inserts nodes so that no kept segment spans more
/// than `max_stride` original steps. At most `max_nodes` nodes are kept when
/// possible.
DiscreteSequence thin_sequence(const DiscreteSequence &seq, int max_stride = 8, int max_nodes = 16);

} // namespace mars
