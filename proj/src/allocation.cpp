#include "mars/allocation.hpp"

#include "mars/eqp.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace mars
{

namespace
{

using Mask = std::vector<char>;

AllocationResult empty_result(int n)
{
    AllocationResult r;
    r.u_a = VecX::Zero(n);
    r.thrust_cmd = RotorThrusts::Zero(n, kRotorsPerUnit);
    r.omega_sq = Eigen::MatrixX4d::Zero(n, kRotorsPerUnit);
    return r;
}

// Largest s in [0, 1] keeping base + s * delta inside [0, hi] rotor-wise.
double feasible_scale(const Vec4 &base, const Vec4 &delta, double hi)
{
    double scale = 1.0;
    for (int j = 0; j < kRotorsPerUnit; ++j)
    {
        if (base(j) + delta(j) > hi && delta(j) > 0.0)
            scale = std::min(scale, (hi - base(j)) / delta(j));
        else if (base(j) + delta(j) < 0.0 && delta(j) < 0.0)
            scale = std::min(scale, -base(j) / delta(j));
    }
    return std::max(scale, 0.0);
}

// Writes rotor commands for one unit from its wrench about the unit center.
// When a rotor would leave [0, f_max] the unit keeps its thrust first, then
// its roll/pitch couple, and gives up yaw last. A thrust error acts on the
// lever arm of the unit inside the assembly and would outweigh the couple
// it was meant to make.
void mix_unit(const AssemblyLayout &layout, const MixingMatrix &mix, int i, const Vec4 &unit_wrench,
              AllocationResult &out)
{
    const double omega_sq_max = layout.unit.rotors[0].f_max / mix.k_f;
    const double u_max = kRotorsPerUnit * layout.unit.rotors[0].f_max;
    const double u = std::clamp(unit_wrench(0), 0.0, u_max);

    Vec4 omega_sq = mix.P_nr * Vec4(u, 0.0, 0.0, 0.0);
    const Vec4 d_tilt = mix.P_nr * Vec4(0.0, unit_wrench(1), unit_wrench(2), 0.0);
    const double s_tilt = feasible_scale(omega_sq, d_tilt, omega_sq_max);
    omega_sq += s_tilt * d_tilt;
    const Vec4 d_yaw = mix.P_nr * Vec4(0.0, 0.0, 0.0, unit_wrench(3));
    const double s_yaw = feasible_scale(omega_sq, d_yaw, omega_sq_max);
    omega_sq += s_yaw * d_yaw;
    omega_sq = omega_sq.cwiseMax(0.0).cwiseMin(omega_sq_max);

    out.omega_sq.row(i) = omega_sq.transpose();
    out.thrust_cmd.row(i) = (mix.k_f * omega_sq).transpose();
    out.u_a(i) = out.thrust_cmd.row(i).sum();
    out.saturated = out.saturated || u != unit_wrench(0) || s_tilt < 1.0 || s_yaw < 1.0;
}

// Thrust u_i on each participating unit plus a share of `couple` realized by
// the unit's own rotors, using the efficiency matrices over the mask.
void distribute(const AssemblyLayout &layout, const Mask &mask, const VecX &u, const Vec3 &couple,
                const AllocationOptions &opt, AllocationResult &out)
{
    const MixingMatrix mix = make_mixing_matrix(layout.unit, opt.k_f);
    const Mat3 J_asm = assembly_inertia(layout).J_assembly;
    const Mat3 &J_unit = layout.unit.J_unit;
    // Unit-normalized moment, the quantity the efficiency matrix scales.
    const Vec4 normalized(0.0, couple.x() * J_unit(0, 0) / J_asm(0, 0), couple.y() * J_unit(1, 1) / J_asm(1, 1),
                          couple.z());
    const std::span<const char> span(mask.data(), mask.size());
    for (int i = 0; i < layout.n(); ++i)
    {
        if (!mask[i])
            continue;
        const Mat4 E = efficiency_matrix(layout, i, opt.mu, span);
        Vec4 w = E * normalized;
        w(0) = u(i);
        mix_unit(layout, mix, i, w, out);
    }
}

// Minimum-variance thrust over the masked units with a prescribed collective
// thrust and lever moment (Mx, My), optionally with signed torque targets.
VecX variance_qp(const AssemblyLayout &layout, const Mask &mask, double F, const Vec2 &lever_moment,
                 const std::optional<Vec4> &M_pm, const AllocationOptions &opt)
{
    std::vector<int> idx;
    for (int i = 0; i < layout.n(); ++i)
        if (mask[i])
            idx.push_back(i);
    const int k = static_cast<int>(idx.size());

    BoundedQp qp;
    qp.H = (2.0 / k) * (MatX::Identity(k, k) - MatX::Constant(k, k, 1.0 / k));
    qp.g = VecX::Zero(k);
    const int rows = 3 + (M_pm ? 4 : 0);
    qp.A = MatX::Zero(rows, k);
    qp.b = VecX::Zero(rows);
    for (int c = 0; c < k; ++c)
    {
        const Vec2 &p = layout.positions[idx[c]];
        qp.A(0, c) = 1.0;
        qp.A(1, c) = p.y();  // Mx = sum y u
        qp.A(2, c) = -p.x(); // My = -sum x u
        if (M_pm)
        {
            qp.A(3, c) = std::max(p.y(), 0.0);
            qp.A(4, c) = std::min(p.y(), 0.0);
            qp.A(5, c) = -std::min(p.x(), 0.0);
            qp.A(6, c) = -std::max(p.x(), 0.0);
        }
    }
    qp.b(0) = F;
    qp.b(1) = lever_moment.x();
    qp.b(2) = lever_moment.y();
    if (M_pm)
        qp.b.tail<4>() = *M_pm;
    qp.lb = VecX::Zero(k);
    qp.ub = VecX::Constant(k, opt.cap_unit_thrust ? kRotorsPerUnit * layout.unit.rotors[0].f_max
                                                  : std::numeric_limits<double>::infinity());

    const QpResult res = solve_bounded_qp(qp);
    VecX u = VecX::Zero(layout.n());
    for (int c = 0; c < k; ++c)
        u(idx[c]) = res.x(c);
    return u;
}

// Healthy units produce `cmd` minus the wrench `fixed` already delivered by
// the faulty units: their lever moments cancel the faulty units' x/y torque
// and their rotor couples deliver the commanded moment.
void redistribute(const AssemblyLayout &layout, const Mask &healthy, const WrenchCommand &cmd, const Vec4 &fixed,
                  const AllocationOptions &opt, AllocationResult &out)
{
    const double F_need = cmd.F - fixed(0);
    const Vec2 lever_target(-fixed(1), -fixed(2));
    int k = 0;
    for (char h : healthy)
        k += h ? 1 : 0;

    VecX u;
    Vec3 couple(cmd.M.x(), cmd.M.y(), cmd.M.z() - fixed(3));
    try
    {
        u = variance_qp(layout, healthy, std::max(F_need, 0.0), lever_target, std::nullopt, opt);
    }
    catch (const Error &e)
    {
        // Equal split; the couples then carry the uncancelled lever torque.
        u = VecX::Zero(layout.n());
        Vec2 lever = Vec2::Zero();
        for (int i = 0; i < layout.n(); ++i)
        {
            if (!healthy[i])
                continue;
            u(i) = std::max(F_need, 0.0) / k;
            lever += Vec2(layout.positions[i].y(), -layout.positions[i].x()) * u(i);
        }
        couple.x() += -fixed(1) - lever.x();
        couple.y() += -fixed(2) - lever.y();
        out.note = std::string("lever redistribution infeasible, equal split: ") + e.what();
    }
    distribute(layout, healthy, u, couple, opt, out);
}

Mask healthy_mask(const FaultState &faults)
{
    Mask m(faults.n());
    for (int i = 0; i < faults.n(); ++i)
        m[i] = faults.is_faulty(i) ? 0 : 1;
    return m;
}

void require_matching(const AssemblyLayout &layout, const FaultState &faults)
{
    if (faults.n() != layout.n())
        throw InvalidArgument("fault state does not match the layout unit count");
}

} // namespace

MixingMatrix make_mixing_matrix(const UnitSpec &unit, double k_f)
{
    if (!(k_f > 0.0))
        throw InvalidArgument("mixing matrix: k_f must be positive");
    MixingMatrix m;
    m.k_f = k_f;
    for (int j = 0; j < kRotorsPerUnit; ++j)
    {
        const auto &r = unit.rotors[j];
        m.wrench_map.col(j) = k_f * Vec4(1.0, r.offset.y(), -r.offset.x(), r.spin * r.k_tau);
    }
    Eigen::FullPivLU<Mat4> lu(m.wrench_map);
    if (!lu.isInvertible())
        throw InvalidArgument("mixing matrix: rotor geometry is not invertible");
    m.P_nr = lu.inverse();
    return m;
}

RotorMix rotor_mix(const MixingMatrix &mix, const Vec4 &unit_wrench, double omega_sq_max)
{
    RotorMix out;
    const Vec4 raw = mix.P_nr * unit_wrench;
    out.omega_sq = raw.cwiseMax(0.0).cwiseMin(omega_sq_max);
    out.saturated = (raw.array() < 0.0).any() || (raw.array() > omega_sq_max).any();
    return out;
}

const char *to_string(FtcMode mode)
{
    switch (mode)
    {
    case FtcMode::none:
        return "none";
    case FtcMode::partial:
        return "partial";
    case FtcMode::full:
        return "full";
    }
    return "none";
}

FtcMode ftc_mode_from_string(const std::string &s)
{
    if (s == "none")
        return FtcMode::none;
    if (s == "partial")
        return FtcMode::partial;
    if (s == "full")
        return FtcMode::full;
    throw InvalidArgument("unknown ftc_mode '" + s + "' (expected none, partial or full)");
}

AllocationResult nominal_allocation(const AssemblyLayout &layout, const WrenchCommand &cmd,
                                    const AllocationOptions &opt)
{
    if (cmd.F < 0.0)
        throw InvalidArgument("allocation: collective thrust must be nonnegative");
    AllocationResult out = empty_result(layout.n());
    const Mask all(layout.n(), 1);
    const VecX u = VecX::Constant(layout.n(), cmd.F / layout.n());
    distribute(layout, all, u, cmd.M, opt, out);
    return out;
}

AllocationResult solve_unit_failure(const AssemblyLayout &layout, const FaultState &faults, const WrenchCommand &cmd,
                                    const AllocationOptions &opt)
{
    require_matching(layout, faults);
    if (cmd.F < 0.0)
        throw InvalidArgument("allocation: collective thrust must be nonnegative");
    Mask alive(layout.n());
    int k = 0;
    for (int i = 0; i < layout.n(); ++i)
    {
        alive[i] = faults.status(i) == UnitStatus::healthy ? 1 : 0;
        k += alive[i];
    }
    if (k == 0)
        throw Infeasible("solve_unit_failure: no healthy unit left");

    const VecX u = variance_qp(layout, alive, cmd.F, Vec2::Zero(), cmd.M_pm, opt);
    AllocationResult out = empty_result(layout.n());
    distribute(layout, alive, u, cmd.M, opt, out);
    return out;
}

AllocationResult partial_realloc(const AssemblyLayout &layout, const FaultState &faults, const WrenchCommand &cmd,
                                 const RotorThrusts &nominal_thrusts, const AllocationOptions &opt)
{
    require_matching(layout, faults);
    const Mask healthy = healthy_mask(faults);
    if (std::count(healthy.begin(), healthy.end(), 1) == 0)
        throw Infeasible("partial_realloc: no healthy unit left");

    const RotorThrusts nominal =
        nominal_thrusts.rows() ? nominal_thrusts : nominal_allocation(layout, cmd, opt).thrust_cmd;
    if (nominal.rows() != layout.n())
        throw InvalidArgument("partial_realloc: nominal thrusts have wrong unit count");

    // Faulty units keep their nominal commands; their contribution is the
    // nominal wrench plus the loss caused by the degraded rotors.
    RotorThrusts faulty_only = RotorThrusts::Zero(layout.n(), kRotorsPerUnit);
    for (int i = 0; i < layout.n(); ++i)
        if (!healthy[i])
            faulty_only.row(i) = nominal.row(i);
    const WrenchLoss loss = wrench_loss(layout, faults, faulty_only);
    Vec4 fixed = rotor_wrench(layout, faulty_only);
    fixed(0) += loss.dF;
    fixed.tail<3>() += loss.dM;

    AllocationResult out = empty_result(layout.n());
    for (int i = 0; i < layout.n(); ++i)
    {
        if (healthy[i])
            continue;
        out.thrust_cmd.row(i) = faulty_only.row(i);
        out.omega_sq.row(i) = faulty_only.row(i) / opt.k_f;
        out.u_a(i) = faulty_only.row(i).sum();
    }
    redistribute(layout, healthy, cmd, fixed, opt, out);
    return out;
}

UnitBalance balance_faulty_unit(const UnitSpec &unit, const std::array<double, kRotorsPerUnit> &eta,
                                double target_thrust)
{
    UnitBalance out;
    Vec4 cap;
    for (int j = 0; j < kRotorsPerUnit; ++j)
        cap(j) = std::clamp(eta[j], 0.0, 1.0) * unit.rotors[j].f_max;

    // Opposite rotors share a line through the unit center, so a balanced
    // unit runs each opposite pair at equal thrust.
    for (int j = 0; j < 2; ++j)
    {
        if ((unit.rotors[j].offset + unit.rotors[j + 2].offset).norm() > 1e-12)
            throw InvalidArgument("balance_faulty_unit: rotors must come in opposite pairs");
    }
    const double max_balanced = 2.0 * std::min(cap(0), cap(2)) + 2.0 * std::min(cap(1), cap(3));
    const double thrust = std::min(std::max(target_thrust, 0.0), max_balanced);
    if (max_balanced <= 1e-9)
    {
        out.degraded = true;
        return out;
    }

    BoundedQp qp;
    qp.H = (2.0 / kRotorsPerUnit) * (Mat4::Identity() - Mat4::Constant(1.0 / kRotorsPerUnit));
    qp.g = Vec4::Zero();
    qp.A = MatX::Zero(5, kRotorsPerUnit);
    qp.b = VecX::Zero(5);
    for (int j = 0; j < kRotorsPerUnit; ++j)
    {
        const Vec2 &r = unit.rotors[j].offset;
        qp.A(0, j) = 1.0;
        // Zero lever moment about the unit center.
        qp.A(1, j) = r.x();
        qp.A(2, j) = r.y();
        // Signed partitions recompose the (zero) unit torque on each axis.
        qp.A(3, j) = std::min(r.x(), 0.0) + std::max(r.x(), 0.0);
        qp.A(4, j) = std::max(r.y(), 0.0) + std::min(r.y(), 0.0);
    }
    qp.b(0) = thrust;
    qp.lb = Vec4::Zero();
    qp.ub = cap;
    const QpResult res = solve_bounded_qp(qp);

    out.actual = res.x;
    out.thrust = thrust;
    for (int j = 0; j < kRotorsPerUnit; ++j)
        out.commanded(j) = eta[j] > 0.0 ? out.actual(j) / eta[j] : 0.0;
    return out;
}

AllocationResult full_realloc(const AssemblyLayout &layout, const FaultState &faults, const WrenchCommand &cmd,
                              const AllocationOptions &opt)
{
    require_matching(layout, faults);
    if (cmd.F < 0.0)
        throw InvalidArgument("allocation: collective thrust must be nonnegative");
    const Mask healthy = healthy_mask(faults);
    if (std::count(healthy.begin(), healthy.end(), 1) == 0)
        throw Infeasible("full_realloc: no healthy unit left");

    AllocationResult out = empty_result(layout.n());
    RotorThrusts actual = RotorThrusts::Zero(layout.n(), kRotorsPerUnit);
    for (int i = 0; i < layout.n(); ++i)
    {
        if (healthy[i] || faults.status(i) == UnitStatus::failed)
            continue;
        const UnitBalance bal = balance_faulty_unit(layout.unit, faults.etas(i), cmd.F / layout.n());
        if (bal.degraded)
        {
            out.degraded = true;
            out.note = "unit " + std::to_string(i) + " cannot be balanced and is switched off";
            continue;
        }
        actual.row(i) = bal.actual.transpose();
        out.thrust_cmd.row(i) = bal.commanded.transpose();
        out.omega_sq.row(i) = bal.commanded.transpose() / opt.k_f;
        out.u_a(i) = bal.commanded.sum();
    }
    const Vec4 fixed = rotor_wrench(layout, actual);
    redistribute(layout, healthy, cmd, fixed, opt, out);
    return out;
}

AllocationResult allocate(FtcMode mode, const AssemblyLayout &layout, const FaultState &faults,
                          const WrenchCommand &cmd, const AllocationOptions &opt)
{
    switch (mode)
    {
    case FtcMode::none:
        return nominal_allocation(layout, cmd, opt);
    case FtcMode::partial:
        return partial_realloc(layout, faults, cmd, {}, opt);
    case FtcMode::full:
        return full_realloc(layout, faults, cmd, opt);
    }
    return nominal_allocation(layout, cmd, opt);
}

Vec4 produced_wrench(const AssemblyLayout &layout, const FaultState &faults, const AllocationResult &alloc)
{
    return rotor_wrench(layout, apply_faults(faults, alloc.thrust_cmd));
}

} // namespace mars
