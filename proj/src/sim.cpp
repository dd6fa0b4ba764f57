#include "mars/sim.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace mars
{

Vec3 RigidState::euler() const
{
    const Eigen::Quaterniond &Q = q;
    const double roll = std::atan2(2.0 * (Q.w() * Q.x() + Q.y() * Q.z()), 1.0 - 2.0 * (Q.x() * Q.x() + Q.y() * Q.y()));
    const double pitch = std::asin(std::clamp(2.0 * (Q.w() * Q.y() - Q.z() * Q.x()), -1.0, 1.0));
    const double yaw = std::atan2(2.0 * (Q.w() * Q.z() + Q.x() * Q.y()), 1.0 - 2.0 * (Q.y() * Q.y() + Q.z() * Q.z()));
    return Vec3(roll, pitch, yaw);
}

PlantModel plant_model(const AssemblyLayout &layout)
{
    const InertialModel im = assembly_inertia(layout);
    return PlantModel{im.total_mass, im.J_assembly};
}

RigidState integrate_wrench(const RigidState &s, const Vec4 &wrench, const PlantModel &model, double dt)
{
    if (!(dt > 0.0 && dt <= 0.01))
        throw InvalidArgument("plant_step: dt must lie in (0, 0.01]");
    RigidState n = s;
    const Mat3 R = s.q.toRotationMatrix();
    const Vec3 acc = R.col(2) * (wrench(0) / model.mass) - Vec3(0.0, 0.0, kGravity);
    // Exact for constant acceleration over the step, which keeps ballistic
    // motion on its analytic parabola.
    n.p = s.p + s.v * dt + 0.5 * acc * dt * dt;
    n.v = s.v + acc * dt;

    const Vec3 M = wrench.tail<3>();
    const Vec3 w_dot = model.J.ldlt().solve(M - s.w.cross(model.J * s.w));
    n.w = s.w + w_dot * dt;
    const Vec3 rot = n.w * dt;
    const double angle = rot.norm();
    Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
    if (angle > 0.0)
        dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, rot / angle));
    n.q = (s.q * dq).normalized();
    return n;
}

RigidState plant_step(const RigidState &state, const RotorThrusts &commanded, const FaultState &faults,
                      const AssemblyLayout &layout, const PlantModel &model, double dt)
{
    if ((commanded.array() < 0.0).any())
        throw InvalidArgument("plant_step: rotor thrusts must be nonnegative");
    const Vec4 wrench = rotor_wrench(layout, apply_faults(faults, commanded));
    RigidState next = integrate_wrench(state, wrench, model, dt);
    if (!next.finite())
        throw Error("plant_step: state became non-finite");
    return next;
}

void ControllerGains::validate() const
{
    if ((kp_pos.array() < 0).any() || (kd_pos.array() < 0).any() || (kp_att.array() < 0).any() ||
        (kd_att.array() < 0).any())
        throw InvalidArgument("controller gains must be nonnegative");
    if (!(gravity > 0.0))
        throw InvalidArgument("gravity must be positive");
    if (!(max_tilt > 0.0 && max_tilt < kPi / 2))
        throw InvalidArgument("max_tilt must lie in (0, 90) degrees");
}

WrenchCommand tracking_controller(const RigidState &state, const ReferenceState &ref, const ControllerGains &gains,
                                  const PlantModel &model)
{
    Vec3 a = ref.a + gains.kp_pos.cwiseProduct(ref.p - state.p) + gains.kd_pos.cwiseProduct(ref.v - state.v);
    a.z() += gains.gravity;

    // Keep the demanded thrust direction inside the tilt cone.
    a.z() = std::max(a.z(), 0.1 * gains.gravity);
    const double horiz = a.head<2>().norm();
    const double horiz_max = a.z() * std::tan(gains.max_tilt);
    if (horiz > horiz_max)
        a.head<2>() *= horiz_max / horiz;

    const double an = a.norm();
    const double yaw_d = ref.yaw;
    const double c = std::cos(yaw_d), s = std::sin(yaw_d);
    const double pitch_d = std::atan2(a.x() * c + a.y() * s, a.z());
    const double roll_d = std::asin(std::clamp((a.x() * s - a.y() * c) / an, -1.0, 1.0));

    const Vec3 eul = state.euler();
    const Vec3 e(roll_d - eul.x(), pitch_d - eul.y(), wrapAngle(yaw_d - eul.z()));
    const Vec3 rate_err = Vec3(0.0, 0.0, ref.yaw_rate) - state.w;

    WrenchCommand cmd;
    cmd.F = model.mass * an;
    cmd.M = model.J * (gains.kp_att.cwiseProduct(e) + gains.kd_att.cwiseProduct(rate_err)) +
            state.w.cross(model.J * state.w);
    return cmd;
}

ReferenceState spiral_reference(double t, const SpiralParams &sp)
{
    const double w = sp.angular_rate;
    const double c = std::cos(w * t), s = std::sin(w * t);
    ReferenceState r;
    r.p = sp.center + Vec3(sp.radius * c, sp.radius * s, sp.climb_rate * t);
    r.v = Vec3(-sp.radius * w * s, sp.radius * w * c, sp.climb_rate);
    r.a = Vec3(-sp.radius * w * w * c, -sp.radius * w * w * s, 0.0);
    r.yaw = sp.yaw;
    return r;
}

const char *to_string(SimEvent::Kind kind)
{
    switch (kind)
    {
    case SimEvent::Kind::rotor_eta:
        return "rotor_eta";
    case SimEvent::Kind::unit_failed:
        return "unit_failed";
    case SimEvent::Kind::separate:
        return "separate";
    case SimEvent::Kind::dock:
        return "dock";
    case SimEvent::Kind::reconfigure:
        return "reconfigure";
    }
    return "unknown";
}

LayoutChange apply_layout_event(const AssemblyLayout &layout, const std::vector<int> &ids, const SimEvent &event)
{
    if (static_cast<int>(ids.size()) != layout.n())
        throw InvalidArgument("layout event: id list does not match the layout");

    std::vector<std::pair<Cell, int>> units;
    for (int i = 0; i < layout.n(); ++i)
        units.emplace_back(layout.cells[i], ids[i]);

    auto find = [&](int id) {
        return std::find_if(units.begin(), units.end(), [id](const auto &u) { return u.second == id; });
    };

    switch (event.kind)
    {
    case SimEvent::Kind::separate: {
        const auto it = find(event.unit_id);
        if (it == units.end())
            throw InvalidArgument("separate: unit " + std::to_string(event.unit_id) + " is not in the assembly");
        units.erase(it);
        if (units.empty())
            throw InvalidArgument("separate: the assembly would be empty");
        break;
    }
    case SimEvent::Kind::dock:
        if (find(event.unit_id) != units.end())
            throw InvalidArgument("dock: unit " + std::to_string(event.unit_id) + " is already docked");
        units.emplace_back(event.cell, event.unit_id);
        break;
    case SimEvent::Kind::reconfigure: {
        if (event.cells.size() != event.ids.size() || event.cells.empty())
            throw InvalidArgument("reconfigure: cells and ids must be non-empty and of equal length");
        if (std::set<int>(event.ids.begin(), event.ids.end()).size() != event.ids.size())
            throw InvalidArgument("reconfigure: duplicate unit id");
        units.clear();
        for (std::size_t k = 0; k < event.cells.size(); ++k)
            units.emplace_back(event.cells[k], event.ids[k]);
        break;
    }
    default:
        throw InvalidArgument("apply_layout_event: not a layout event");
    }

    std::sort(units.begin(), units.end());
    std::vector<Cell> cells;
    LayoutChange out;
    for (const auto &[cell, id] : units)
    {
        cells.push_back(cell);
        out.ids.push_back(id);
    }
    out.layout = build_assembly(cells, layout.pitch, layout.unit);
    out.shift = layout.pitch * (out.layout.grid_centroid() - layout.grid_centroid());
    return out;
}

namespace
{

using EtaMap = std::map<int, std::array<double, kRotorsPerUnit>>;

struct FaultBook
{
    EtaMap eta;
    std::set<int> failed;

    FaultState for_layout(const std::vector<int> &ids) const
    {
        FaultState f(static_cast<int>(ids.size()));
        for (std::size_t i = 0; i < ids.size(); ++i)
        {
            const int u = static_cast<int>(i);
            if (failed.count(ids[i]))
            {
                f = mark_unit_failed(f, u);
                continue;
            }
            const auto it = eta.find(ids[i]);
            if (it == eta.end())
                continue;
            for (int j = 0; j < kRotorsPerUnit; ++j)
                if (it->second[j] != 1.0)
                    f = set_rotor_eta(f, u, j, it->second[j]);
        }
        return f;
    }

    void apply(const SimEvent &e)
    {
        if (e.kind == SimEvent::Kind::unit_failed)
        {
            failed.insert(e.unit_id);
            eta[e.unit_id].fill(0.0);
        }
        else if (e.kind == SimEvent::Kind::rotor_eta)
        {
            if (!eta.count(e.unit_id))
                eta[e.unit_id].fill(1.0);
            eta[e.unit_id].at(e.rotor - 1) = e.eta;
        }
    }
};

bool is_layout_event(const SimEvent &e)
{
    return e.kind == SimEvent::Kind::separate || e.kind == SimEvent::Kind::dock ||
           e.kind == SimEvent::Kind::reconfigure;
}

std::string describe(const SimEvent &e)
{
    std::string s = to_string(e.kind);
    switch (e.kind)
    {
    case SimEvent::Kind::rotor_eta:
        return s + " unit " + std::to_string(e.unit_id) + " rotor " + std::to_string(e.rotor) + " eta " +
               std::to_string(e.eta);
    case SimEvent::Kind::unit_failed:
    case SimEvent::Kind::separate:
        return s + " unit " + std::to_string(e.unit_id);
    case SimEvent::Kind::dock:
        return s + " unit " + std::to_string(e.unit_id) + " at (" + std::to_string(e.cell.row) + "," +
               std::to_string(e.cell.col) + ")";
    case SimEvent::Kind::reconfigure:
        return s + " (" + std::to_string(e.cells.size()) + " units)";
    }
    return s;
}

void compute_metrics(const SimConfig &cfg, const std::vector<double> &layout_event_times, SimResult &res)
{
    Metrics &m = res.metrics;
    const auto &rows = res.trace.rows;
    double sq = 0.0;
    for (const auto &r : rows)
    {
        const double e = (r.state.p - r.ref.p).norm();
        sq += e * e;
        m.max_error = std::max(m.max_error, e);
        m.saturated_ticks += r.saturated;
    }
    m.rms_error = rows.empty() ? 0.0 : std::sqrt(sq / rows.size());
    m.final_time = rows.empty() ? 0.0 : rows.back().t;

    for (double te : layout_event_times)
    {
        // Yaw error just before the event is the baseline of the window.
        double base = 0.0;
        bool have_base = false;
        for (const auto &r : rows)
        {
            if (r.t > te)
                break;
            base = wrapAngle(r.state.euler().z() - r.ref.yaw);
            have_base = true;
        }
        if (!have_base)
            continue;
        for (std::size_t k = 0; k < rows.size(); ++k)
        {
            const auto &r = rows[k];
            if (std::abs(r.t - te) > cfg.transient_window)
                continue;
            const double dyaw = wrapAngle(wrapAngle(r.state.euler().z() - r.ref.yaw) - base);
            m.yaw_transient = std::max(m.yaw_transient, rad2deg(std::abs(dyaw)));
            if (k > 0)
            {
                const double h = r.t - rows[k - 1].t;
                const Vec3 acc = (r.state.v - rows[k - 1].state.v) / h;
                m.accel_transient = std::max(m.accel_transient, (acc - r.ref.a).norm());
            }
        }
    }
}

} // namespace

SimResult run_closed_loop(const SimConfig &cfg)
{
    if (!cfg.reference)
        throw InvalidArgument("run_closed_loop: no reference");
    if (!(cfg.dt > 0.0 && cfg.dt <= 0.01))
        throw InvalidArgument("run_closed_loop: dt must lie in (0, 0.01]");
    if (!(cfg.control_dt >= cfg.dt))
        throw InvalidArgument("run_closed_loop: control_dt must be at least dt");
    if (!(cfg.duration > 0.0))
        throw InvalidArgument("run_closed_loop: duration must be positive");
    cfg.gains.validate();

    AssemblyLayout layout = cfg.layout;
    std::vector<int> ids = cfg.unit_ids;
    if (ids.empty())
        for (int i = 0; i < layout.n(); ++i)
            ids.push_back(i + 1);
    if (static_cast<int>(ids.size()) != layout.n())
        throw InvalidArgument("run_closed_loop: unit_ids does not match the layout");

    FaultState initial = cfg.faults.n() ? cfg.faults : healthy_faults(layout);
    if (initial.n() != layout.n())
        throw InvalidArgument("run_closed_loop: fault state does not match the layout");
    FaultBook truth;
    for (int i = 0; i < layout.n(); ++i)
    {
        truth.eta[ids[i]] = initial.etas(i);
        if (initial.status(i) == UnitStatus::failed)
            truth.failed.insert(ids[i]);
    }
    FaultBook known = truth;

    std::vector<SimEvent> events = cfg.events;
    std::stable_sort(events.begin(), events.end(), [](const auto &a, const auto &b) { return a.t < b.t; });
    struct Pending
    {
        double t;
        SimEvent e;
    };
    std::vector<Pending> to_learn;

    PlantModel model = plant_model(layout);
    std::vector<Vec2> footprint;
    if (cfg.env)
        footprint = footprint_samples(layout, 0.5 * cfg.env->resolution());

    SimResult res;
    const ReferenceState ref0 = cfg.reference(0.0);
    RigidState state;
    state.p = ref0.p + cfg.initial_offset;
    state.v = ref0.v;
    state.q = Eigen::Quaterniond(Eigen::AngleAxisd(ref0.yaw, Vec3::UnitZ()));
    Vec3 anchor = Vec3::Zero(); // reference offset accumulated by layout changes

    const int ratio = std::max(1, static_cast<int>(std::lround(cfg.control_dt / cfg.dt)));
    const long steps = static_cast<long>(std::floor(cfg.duration / cfg.dt + 1e-9));
    std::size_t next_event = 0;
    std::vector<double> layout_event_times;
    bool in_collision = false;

    RotorThrusts thrust_cmd = RotorThrusts::Zero(layout.n(), kRotorsPerUnit);
    FaultState true_faults = truth.for_layout(ids);

    for (long step = 0; step <= steps; ++step)
    {
        const double t = step * cfg.dt;

        bool layout_changed = false;
        while (next_event < events.size() && events[next_event].t <= t + 1e-12)
        {
            const SimEvent &e = events[next_event++];
            res.trace.events.push_back({t, describe(e)});
            if (is_layout_event(e))
            {
                const LayoutChange ch = apply_layout_event(layout, ids, e);
                const Mat3 R = state.q.toRotationMatrix();
                const Vec3 r_body(ch.shift.x(), ch.shift.y(), 0.0);
                const Vec3 delta = R * r_body;
                state.p += delta;
                state.v += R * state.w.cross(r_body);
                anchor += delta;
                layout = ch.layout;
                ids = ch.ids;
                model = plant_model(layout);
                if (cfg.env)
                    footprint = footprint_samples(layout, 0.5 * cfg.env->resolution());
                layout_event_times.push_back(t);
                layout_changed = true;
            }
            else
            {
                truth.apply(e);
                to_learn.push_back({t + cfg.fault_detection_delay, e});
            }
        }
        for (auto it = to_learn.begin(); it != to_learn.end();)
        {
            if (it->t <= t + 1e-12)
            {
                known.apply(it->e);
                it = to_learn.erase(it);
            }
            else
                ++it;
        }
        true_faults = truth.for_layout(ids);

        if (step % ratio == 0 || layout_changed)
        {
            ReferenceState ref = cfg.reference(t);
            ref.p += anchor;

            const Vec3 tilt_axis = state.q.toRotationMatrix().col(2);
            const double err = (state.p - ref.p).norm();
            std::string why;
            if (!state.finite())
                why = "non-finite state";
            else if (err > cfg.divergence_error)
                why = "position error above " + std::to_string(cfg.divergence_error) + " m";
            else if (tilt_axis.z() < 0.0)
                why = "tilt beyond 90 degrees";
            if (!why.empty())
            {
                res.metrics.diverged = true;
                res.metrics.divergence_reason = why + " at t = " + std::to_string(t);
                break;
            }

            const WrenchCommand cmd = tracking_controller(state, ref, cfg.gains, model);
            AllocationResult alloc;
            try
            {
                alloc = allocate(cfg.ftc, layout, known.for_layout(ids), cmd, cfg.alloc);
            }
            catch (const Infeasible &ex)
            {
                res.metrics.diverged = true;
                res.metrics.divergence_reason = std::string("allocation infeasible: ") + ex.what();
                break;
            }
            thrust_cmd = alloc.thrust_cmd;

            if (step % ratio == 0)
            {
                TraceRow row;
                row.t = t;
                row.state = state;
                row.ref = ref;
                row.cmd = cmd;
                row.applied = rotor_wrench(layout, apply_faults(true_faults, thrust_cmd));
                row.saturated = alloc.saturated;
                row.units = layout.n();
                res.trace.rows.push_back(row);

                if (cfg.env)
                {
                    const bool hit =
                        footprint_clearance(*cfg.env, footprint, state.p.head<2>(), state.euler().z()) <= 0.0;
                    if (hit && !in_collision)
                        ++res.metrics.collision_count;
                    in_collision = hit;
                }
            }
        }

        if (step == steps)
            break;
        state = integrate_wrench(state, rotor_wrench(layout, apply_faults(true_faults, thrust_cmd)), model, cfg.dt);
    }

    compute_metrics(cfg, layout_event_times, res);
    if (!res.metrics.diverged && !state.finite())
    {
        res.metrics.diverged = true;
        res.metrics.divergence_reason = "non-finite state";
    }
    return res;
}

} // namespace mars
