#pragma once

#include "mars/common.hpp"

#include <array>
#include <span>
#include <vector>

namespace mars
{

constexpr int kRotorsPerUnit = 4;

struct RotorSpec
{
    Vec2 offset = Vec2::Zero(); // rotor position in the unit frame, m
    int spin = 1;               // sign of the reaction yaw torque
    double f_max = 6.0;         // N
    double k_tau = 0.016;       // yaw torque per newton of thrust, m
};

struct UnitSpec
{
    double mass = 1.0;
    Mat3 J_unit = Eigen::Vector3d(0.01, 0.01, 0.018).asDiagonal();
    double arm = 0.15;
    std::array<RotorSpec, kRotorsPerUnit> rotors;

    /// Throws InvalidArgument when the invariants do not hold.
    void validate() const;
};

/// A quadrotor unit with rotors on the body axes ("+" layout), spins
/// alternating so that adjacent rotors counter-rotate.
UnitSpec make_unit(double mass, const Mat3 &J_unit, double arm, double f_max, double k_tau);
UnitSpec default_unit();

struct Cell
{
    int row = 0;
    int col = 0;
    auto operator<=>(const Cell &) const = default;
};

struct AssemblyLayout
{
    std::vector<Cell> cells; // row-major order
    double pitch = 0.5;
    std::vector<Vec2> positions; // relative to the geometric centroid
    UnitSpec unit;

    int n() const { return static_cast<int>(cells.size()); }
    /// Rotor position in the assembly frame.
    Vec2 rotor_position(int unit_index, int rotor) const
    {
        return positions[unit_index] + unit.rotors[rotor].offset;
    }
    /// Centroid of the cells in grid coordinates (x = col, y = row).
    Vec2 grid_centroid() const;
};

struct InertialModel
{
    double total_mass = 0.0;
    Mat3 J_assembly = Mat3::Zero();
    Vec2 com = Vec2::Zero();
};

/// Signed x/y torque capacities, ordered [tau_y-, tau_x+, tau_y+, tau_x-].
/// The first two entries gather the negative lever contributions of the
/// x and y coordinates, the last two the positive ones.
struct TauPM
{
    Vec4 v = Vec4::Zero();
    double sum_abs() const { return v.cwiseAbs().sum(); }
};

/// Lays out units on a square grid. Cells must be unique and 4-connected.
AssemblyLayout build_assembly(std::vector<Cell> cells, double pitch, const UnitSpec &unit);

/// Parallel-axis aggregation of unit inertias about the assembly origin.
InertialModel assembly_inertia(const AssemblyLayout &layout);

/// Element-wise min/max split of the lever matrix applied to per-unit thrust.
TauPM tau_pm(std::span<const double> u_a, const AssemblyLayout &layout);

/// Same split for an arbitrary list of lever arms (2 x k) and weights.
TauPM tau_pm_from_levers(const Eigen::Matrix2Xd &levers, const VecX &weights);

/// Per-unit share of the assembly wrench, diag([1/n, e_roll, e_pitch, 1/n]).
///
/// The roll and pitch entries scale the unit-normalized moment
/// (J_unit / J_assembly) * M so that the shares sum back to the commanded
/// assembly moment. Roll weight uses |y_i + mu|, pitch weight |x_i + mu|.
/// `participating` restricts the share computation to a subset of units;
/// an empty span means all units.
Mat4 efficiency_matrix(const AssemblyLayout &layout, int unit_index, double mu,
                       std::span<const char> participating = {});

/// Per-rotor thrusts, one row per unit.
using RotorThrusts = Eigen::MatrixX4d;

/// Collective [F, Mx, My, Mz] produced by the given actual rotor thrusts.
Vec4 rotor_wrench(const AssemblyLayout &layout, const RotorThrusts &thrusts);

/// Smallest yaw rotation (90, 180 or 360 deg, in radians) that maps the
/// rotor cloud of the layout onto itself.
double yaw_symmetry_period(const AssemblyLayout &layout);

} // namespace mars
