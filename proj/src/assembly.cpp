#include "mars/assembly.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

namespace mars
{

void UnitSpec::validate() const
{
    if (!(mass > 0.0))
        throw InvalidArgument("unit mass must be positive");
    if (!J_unit.isApprox(J_unit.transpose(), 1e-12))
        throw InvalidArgument("unit inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> eig(J_unit);
    if (eig.eigenvalues().minCoeff() <= 0.0)
        throw InvalidArgument("unit inertia must be positive definite");
    int spin_sum = 0;
    for (std::size_t j = 0; j < rotors.size(); ++j)
    {
        const auto &r = rotors[j];
        if (!(r.f_max > 0.0) || !(r.k_tau > 0.0))
            throw InvalidArgument("rotor f_max and k_tau must be positive");
        if (r.spin != 1 && r.spin != -1)
            throw InvalidArgument("rotor spin must be +1 or -1");
        if (r.spin == rotors[(j + 1) % rotors.size()].spin)
            throw InvalidArgument("adjacent rotors must counter-rotate");
        spin_sum += r.spin;
    }
    if (spin_sum != 0)
        throw InvalidArgument("rotor spins must sum to zero");
}

UnitSpec make_unit(double mass, const Mat3 &J_unit, double arm, double f_max, double k_tau)
{
    UnitSpec u;
    u.mass = mass;
    u.J_unit = J_unit;
    u.arm = arm;
    const std::array<Vec2, kRotorsPerUnit> offsets = {Vec2(arm, 0.0), Vec2(0.0, arm), Vec2(-arm, 0.0),
                                                      Vec2(0.0, -arm)};
    for (int j = 0; j < kRotorsPerUnit; ++j)
        u.rotors[j] = RotorSpec{offsets[j], (j % 2 == 0) ? 1 : -1, f_max, k_tau};
    u.validate();
    return u;
}

UnitSpec default_unit()
{
    return make_unit(1.0, Eigen::Vector3d(0.01, 0.01, 0.018).asDiagonal(), 0.15, 6.0, 0.016);
}

Vec2 AssemblyLayout::grid_centroid() const
{
    Vec2 c = Vec2::Zero();
    for (const auto &cell : cells)
        c += Vec2(cell.col, cell.row);
    return c / static_cast<double>(cells.size());
}

AssemblyLayout build_assembly(std::vector<Cell> cells, double pitch, const UnitSpec &unit)
{
    if (cells.empty())
        throw InvalidArgument("assembly needs at least one cell");
    if (!(pitch > 0.0))
        throw InvalidArgument("assembly pitch must be positive");
    unit.validate();

    std::sort(cells.begin(), cells.end());
    if (std::adjacent_find(cells.begin(), cells.end()) != cells.end())
        throw InvalidArgument("assembly cells contain duplicates");

    // 4-connectivity flood fill from the first cell.
    std::set<Cell> remaining(cells.begin(), cells.end());
    std::queue<Cell> frontier;
    frontier.push(cells.front());
    remaining.erase(cells.front());
    while (!frontier.empty())
    {
        Cell c = frontier.front();
        frontier.pop();
        for (Cell nb : {Cell{c.row + 1, c.col}, Cell{c.row - 1, c.col}, Cell{c.row, c.col + 1},
                        Cell{c.row, c.col - 1}})
        {
            if (remaining.erase(nb))
                frontier.push(nb);
        }
    }
    if (!remaining.empty())
    {
        std::ostringstream msg;
        msg << "assembly cells are not 4-connected: cell [" << remaining.begin()->row << ", "
            << remaining.begin()->col << "] is detached";
        throw InvalidArgument(msg.str());
    }

    AssemblyLayout layout;
    layout.cells = std::move(cells);
    layout.pitch = pitch;
    layout.unit = unit;
    const Vec2 centroid = layout.grid_centroid();
    layout.positions.reserve(layout.cells.size());
    for (const auto &cell : layout.cells)
        layout.positions.push_back(pitch * (Vec2(cell.col, cell.row) - centroid));
    return layout;
}

InertialModel assembly_inertia(const AssemblyLayout &layout)
{
    InertialModel im;
    const double m = layout.unit.mass;
    im.total_mass = m * layout.n();
    for (const auto &p : layout.positions)
    {
        const Vec3 r(p.x(), p.y(), 0.0);
        im.J_assembly += layout.unit.J_unit + m * (r.squaredNorm() * Mat3::Identity() - r * r.transpose());
        im.com += p;
    }
    im.com /= static_cast<double>(layout.n());
    return im;
}

TauPM tau_pm_from_levers(const Eigen::Matrix2Xd &levers, const VecX &weights)
{
    if (levers.cols() != weights.size())
        throw InvalidArgument("tau_pm: lever and weight counts differ");
    if ((weights.array() < 0.0).any())
        throw InvalidArgument("tau_pm: thrust entries must be nonnegative");
    TauPM t;
    const Eigen::Matrix2Xd neg = levers.cwiseMin(0.0);
    const Eigen::Matrix2Xd pos = levers.cwiseMax(0.0);
    t.v.head<2>() = neg * weights;
    t.v.tail<2>() = pos * weights;
    return t;
}

TauPM tau_pm(std::span<const double> u_a, const AssemblyLayout &layout)
{
    if (static_cast<int>(u_a.size()) != layout.n())
        throw InvalidArgument("tau_pm: thrust vector length must match unit count");
    Eigen::Matrix2Xd levers(2, layout.n());
    for (int i = 0; i < layout.n(); ++i)
        levers.col(i) = layout.positions[i];
    return tau_pm_from_levers(levers, Eigen::Map<const VecX>(u_a.data(), layout.n()));
}

Mat4 efficiency_matrix(const AssemblyLayout &layout, int unit_index, double mu, std::span<const char> participating)
{
    if (unit_index < 0 || unit_index >= layout.n())
        throw InvalidArgument("efficiency_matrix: unit index out of range");
    if (!(mu > 0.0))
        throw InvalidArgument("efficiency_matrix: mu must be positive");
    if (!participating.empty() && static_cast<int>(participating.size()) != layout.n())
        throw InvalidArgument("efficiency_matrix: participation mask has wrong length");

    auto takes_part = [&](int i) { return participating.empty() || participating[i]; };
    if (!takes_part(unit_index))
        return Mat4::Zero();

    int count = 0;
    double sum_roll = 0.0;
    double sum_pitch = 0.0;
    for (int j = 0; j < layout.n(); ++j)
    {
        if (!takes_part(j))
            continue;
        ++count;
        sum_roll += std::abs(layout.positions[j].y() + mu);
        sum_pitch += std::abs(layout.positions[j].x() + mu);
    }

    const Mat3 J_asm = assembly_inertia(layout).J_assembly;
    const Mat3 &J_unit = layout.unit.J_unit;
    const Vec2 &p = layout.positions[unit_index];

    Vec4 d;
    d(0) = 1.0 / count;
    d(1) = std::abs(p.y() + mu) * J_asm(0, 0) / (sum_roll * J_unit(0, 0));
    d(2) = std::abs(p.x() + mu) * J_asm(1, 1) / (sum_pitch * J_unit(1, 1));
    d(3) = 1.0 / count;
    return d.asDiagonal();
}

Vec4 rotor_wrench(const AssemblyLayout &layout, const RotorThrusts &thrusts)
{
    if (thrusts.rows() != layout.n())
        throw InvalidArgument("rotor_wrench: thrust rows must match unit count");
    Vec4 w = Vec4::Zero();
    for (int i = 0; i < layout.n(); ++i)
    {
        for (int j = 0; j < kRotorsPerUnit; ++j)
        {
            const double f = thrusts(i, j);
            const Vec2 r = layout.rotor_position(i, j);
            const auto &rotor = layout.unit.rotors[j];
            w(0) += f;
            w(1) += r.y() * f;
            w(2) -= r.x() * f;
            w(3) += rotor.spin * rotor.k_tau * f;
        }
    }
    return w;
}

double yaw_symmetry_period(const AssemblyLayout &layout)
{
    std::vector<Vec2> pts;
    for (int i = 0; i < layout.n(); ++i)
        for (int j = 0; j < kRotorsPerUnit; ++j)
            pts.push_back(layout.rotor_position(i, j));

    auto invariant_under = [&](double angle) {
        const Eigen::Rotation2Dd rot(angle);
        for (const auto &p : pts)
        {
            const Vec2 q = rot * p;
            const bool hit = std::any_of(pts.begin(), pts.end(), [&](const Vec2 &r) { return (r - q).norm() < 1e-9; });
            if (!hit)
                return false;
        }
        return true;
    };
    if (invariant_under(0.5 * kPi))
        return 0.5 * kPi;
    if (invariant_under(kPi))
        return kPi;
    return 2.0 * kPi;
}

} // namespace mars
