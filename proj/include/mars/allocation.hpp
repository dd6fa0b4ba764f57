#pragma once

#include "mars/assembly.hpp"
#include "mars/fault.hpp"

#include <optional>
#include <string>

namespace mars
{

/// Desired collective thrust and body moments of the assembly.
struct WrenchCommand
{
    double F = 0.0;
    Vec3 M = Vec3::Zero();
    /// Optional signed-torque targets [Mx+, Mx-, My+, My-].
    std::optional<Vec4> M_pm;

    Vec4 as_vector() const { return Vec4(F, M.x(), M.y(), M.z()); }
};

struct AllocationResult
{
    VecX u_a;                  // commanded thrust per unit, N
    RotorThrusts thrust_cmd;   // commanded thrust per rotor, N
    Eigen::MatrixX4d omega_sq; // per-rotor squared speed, rad^2/s^2
    bool saturated = false;
    bool degraded = false; // a faulty unit had to be switched off
    std::string note;
};

/// Per-unit map from [F, Mx, My, Mz] about the unit center to rotor omega^2.
struct MixingMatrix
{
    Mat4 P_nr;       // wrench -> omega^2
    Mat4 wrench_map; // omega^2 -> wrench
    double k_f = 1e-5;
};

MixingMatrix make_mixing_matrix(const UnitSpec &unit, double k_f);

struct RotorMix
{
    Vec4 omega_sq = Vec4::Zero();
    bool saturated = false;
};

/// omega^2 = P_nr * wrench, clamped to [0, omega_sq_max] per rotor.
RotorMix rotor_mix(const MixingMatrix &mix, const Vec4 &unit_wrench,
                   double omega_sq_max = std::numeric_limits<double>::infinity());

enum class FtcMode
{
    none,
    partial,
    full
};

const char *to_string(FtcMode mode);
FtcMode ftc_mode_from_string(const std::string &s);

struct AllocationOptions
{
    double mu = 1e-6;  // offset in the efficiency-matrix lever weights
    double k_f = 1e-5; // thrust per omega^2, N s^2
    bool cap_unit_thrust = true;
};

/// Fault-unaware allocation: equal thrust split and moment shares from the
/// efficiency matrices of all units.
AllocationResult nominal_allocation(const AssemblyLayout &layout, const WrenchCommand &cmd,
                                    const AllocationOptions &opt = {});

/// Minimum-variance thrust split over the non-failed units with zero net
/// lever moment and the requested collective thrust; with M_pm supplied the
/// signed lever torques must match it as well. Failed units get zero.
/// Throws Infeasible when the constraint set has no nonnegative solution.
AllocationResult solve_unit_failure(const AssemblyLayout &layout, const FaultState &faults, const WrenchCommand &cmd,
                                    const AllocationOptions &opt = {});

/// Faulty units keep their nominal commands; healthy units absorb the
/// resulting thrust and torque loss. An empty `nominal_thrusts` means the
/// nominal allocation of `cmd`.
AllocationResult partial_realloc(const AssemblyLayout &layout, const FaultState &faults, const WrenchCommand &cmd,
                                 const RotorThrusts &nominal_thrusts = {}, const AllocationOptions &opt = {});

struct UnitBalance
{
    Vec4 actual = Vec4::Zero();    // produced rotor thrusts, N
    Vec4 commanded = Vec4::Zero(); // actual / eta
    double thrust = 0.0;
    bool degraded = false;
};

/// Internal balance of a degraded unit: minimum-variance rotor thrusts with
/// zero roll/pitch moment about the unit center and matching signed torque
/// partitions, each rotor capped at eta * f_max. The thrust target is
/// lowered to the largest balanced value when it cannot be met.
UnitBalance balance_faulty_unit(const UnitSpec &unit, const std::array<double, kRotorsPerUnit> &eta,
                                double target_thrust);

/// Two-stage scheme: degraded units are balanced internally, then healthy
/// units absorb the residual wrench as in partial_realloc.
AllocationResult full_realloc(const AssemblyLayout &layout, const FaultState &faults, const WrenchCommand &cmd,
                              const AllocationOptions &opt = {});

AllocationResult allocate(FtcMode mode, const AssemblyLayout &layout, const FaultState &faults,
                          const WrenchCommand &cmd, const AllocationOptions &opt = {});

/// Wrench the plant receives for an allocation under the given faults.
Vec4 produced_wrench(const AssemblyLayout &layout, const FaultState &faults, const AllocationResult &alloc);

} // namespace mars
