#include "mars/fault.hpp"

#include <algorithm>
#include <sstream>

namespace mars
{

FaultState::FaultState(int units)
    : status_(units, UnitStatus::healthy)
    , eta_(units, {1.0, 1.0, 1.0, 1.0})
{
}

bool FaultState::is_faulty(int unit) const
{
    if (status_.at(unit) == UnitStatus::failed)
        return true;
    const auto &e = eta_.at(unit);
    return std::any_of(e.begin(), e.end(), [](double v) { return v < 1.0; });
}

bool FaultState::any_fault() const
{
    for (int i = 0; i < n(); ++i)
        if (is_faulty(i))
            return true;
    return false;
}

int FaultState::healthy_count() const
{
    int c = 0;
    for (int i = 0; i < n(); ++i)
        c += is_faulty(i) ? 0 : 1;
    return c;
}

FaultState FaultState::select(const std::vector<int> &order) const
{
    FaultState out;
    for (int idx : order)
    {
        out.status_.push_back(status_.at(idx));
        out.eta_.push_back(eta_.at(idx));
    }
    return out;
}

FaultState healthy_faults(const AssemblyLayout &layout) { return FaultState(layout.n()); }

FaultState mark_unit_failed(const FaultState &faults, int unit)
{
    if (unit < 0 || unit >= faults.n())
        throw InvalidArgument("mark_unit_failed: unit index " + std::to_string(unit) + " out of range");
    FaultState out = faults;
    out.status_[unit] = UnitStatus::failed;
    out.eta_[unit].fill(0.0);
    return out;
}

FaultState set_rotor_eta(const FaultState &faults, int unit, int rotor, double eta)
{
    if (unit < 0 || unit >= faults.n())
        throw InvalidArgument("set_rotor_eta: unit index " + std::to_string(unit) + " out of range");
    if (rotor < 0 || rotor >= kRotorsPerUnit)
        throw InvalidArgument("set_rotor_eta: rotor index " + std::to_string(rotor) + " out of range");
    if (!(eta >= 0.0 && eta <= 1.0))
    {
        std::ostringstream msg;
        msg << "set_rotor_eta: eta " << eta << " outside [0, 1]";
        throw InvalidArgument(msg.str());
    }
    FaultState out = faults;
    out.eta_[unit][rotor] = eta;
    return out;
}

FaultState append_unit(const FaultState &faults, const std::array<double, kRotorsPerUnit> &eta, UnitStatus status)
{
    FaultState out = faults;
    out.status_.push_back(status);
    out.eta_.push_back(eta);
    return out;
}

WrenchLoss wrench_loss(const AssemblyLayout &layout, const FaultState &faults, const RotorThrusts &nominal)
{
    if (faults.n() != layout.n() || nominal.rows() != layout.n())
        throw InvalidArgument("wrench_loss: dimension mismatch between layout, faults and thrusts");
    if ((nominal.array() < 0.0).any())
        throw InvalidArgument("wrench_loss: nominal thrusts must be nonnegative");

    WrenchLoss loss;
    for (int i = 0; i < layout.n(); ++i)
    {
        for (int j = 0; j < kRotorsPerUnit; ++j)
        {
            const double df = (faults.eta(i, j) - 1.0) * nominal(i, j);
            if (df == 0.0)
                continue;
            const Vec2 r = layout.rotor_position(i, j);
            const auto &rotor = layout.unit.rotors[j];
            loss.dF += df;
            loss.dM += Vec3(r.y() * df, -r.x() * df, rotor.spin * rotor.k_tau * df);
        }
    }
    return loss;
}

RotorThrusts apply_faults(const FaultState &faults, const RotorThrusts &commanded)
{
    if (faults.n() != commanded.rows())
        throw InvalidArgument("apply_faults: dimension mismatch");
    RotorThrusts out = commanded;
    for (int i = 0; i < faults.n(); ++i)
        for (int j = 0; j < kRotorsPerUnit; ++j)
            out(i, j) *= faults.eta(i, j);
    return out;
}

} // namespace mars
