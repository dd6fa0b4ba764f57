#pragma once

#include "mars/assembly.hpp"

#include <array>
#include <vector>

namespace mars
{

enum class UnitStatus
{
    healthy,
    failed
};

/// Per-unit status and per-rotor efficiency. Transitions return new states.
class FaultState
{
public:
    FaultState() = default;
    explicit FaultState(int units);

    int n() const { return static_cast<int>(status_.size()); }
    UnitStatus status(int unit) const { return status_.at(unit); }
    double eta(int unit, int rotor) const { return eta_.at(unit).at(rotor); }
    const std::array<double, kRotorsPerUnit> &etas(int unit) const { return eta_.at(unit); }

    /// Any rotor below nominal efficiency, including failed units.
    bool is_faulty(int unit) const;
    bool any_fault() const;
    int healthy_count() const;

    /// Rows selected (and reordered) by `order`; used when a layout changes.
    FaultState select(const std::vector<int> &order) const;

    bool operator==(const FaultState &) const = default;

private:
    friend FaultState mark_unit_failed(const FaultState &, int);
    friend FaultState set_rotor_eta(const FaultState &, int, int, double);
    friend FaultState append_unit(const FaultState &, const std::array<double, kRotorsPerUnit> &, UnitStatus);

    std::vector<UnitStatus> status_;
    std::vector<std::array<double, kRotorsPerUnit>> eta_;
};

FaultState healthy_faults(const AssemblyLayout &layout);
FaultState mark_unit_failed(const FaultState &faults, int unit);
FaultState set_rotor_eta(const FaultState &faults, int unit, int rotor, double eta);
FaultState append_unit(const FaultState &faults, const std::array<double, kRotorsPerUnit> &eta,
                       UnitStatus status = UnitStatus::healthy);

struct WrenchLoss
{
    double dF = 0.0;
    Vec3 dM = Vec3::Zero();
};

/// Thrust and torque lost relative to the commanded per-rotor thrusts,
/// each degraded rotor contributing (eta - 1) * f at its absolute position.
WrenchLoss wrench_loss(const AssemblyLayout &layout, const FaultState &faults, const RotorThrusts &nominal);

/// Thrusts actually produced when `commanded` is sent to the rotors.
RotorThrusts apply_faults(const FaultState &faults, const RotorThrusts &commanded);

} // namespace mars
