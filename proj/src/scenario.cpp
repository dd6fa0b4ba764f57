#include "mars/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace mars
{

const char *to_string(PlannerMode mode)
{
    return mode == PlannerMode::attitude_aware ? "attitude_aware" : "kinematic_only";
}

PlannerMode planner_mode_from_string(const std::string &s)
{
    if (s == "attitude_aware")
        return PlannerMode::attitude_aware;
    if (s == "kinematic_only")
        return PlannerMode::kinematic_only;
    throw InvalidArgument("unknown planner mode '" + s + "' (expected attitude_aware or kinematic_only)");
}

bool Scenario::operator==(const Scenario &o) const
{
    return name == o.name && cells == o.cells && pitch == o.pitch && unit == o.unit && faults == o.faults &&
           events == o.events && reference == o.reference && spiral == o.spiral && planner == o.planner &&
           trajopt == o.trajopt && gains == o.gains && ftc == o.ftc && planner_mode == o.planner_mode &&
           duration == o.duration && dt == o.dt && control_dt == o.control_dt &&
           detection_delay == o.detection_delay && transient_window == o.transient_window &&
           divergence_error == o.divergence_error && trial_count == o.trial_count && seed == o.seed &&
           jitter == o.jitter && plot_dt == o.plot_dt && pair == o.pair;
}

namespace
{

// Reading -------------------------------------------------------------------

[[noreturn]] void fail(const YAML::Node &n, const std::string &field, const std::string &msg)
{
    std::ostringstream os;
    os << "scenario field '" << field << "'";
    if (n.IsDefined() && n.Mark().line >= 0)
        os << " (line " << n.Mark().line + 1 << ")";
    os << ": " << msg;
    throw InvalidArgument(os.str());
}

std::string join(const std::string &prefix, const std::string &key)
{
    return prefix.empty() ? key : prefix + "." + key;
}

void check_keys(const YAML::Node &n, const std::string &field, std::initializer_list<const char *> allowed)
{
    if (!n.IsMap())
        fail(n, field, "expected a mapping");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto &kv : n)
    {
        const auto key = kv.first.as<std::string>();
        if (!ok.count(key))
            fail(kv.first, join(field, key), "unknown key");
    }
}

template <class T> T as(const YAML::Node &n, const std::string &field)
{
    try
    {
        return n.as<T>();
    }
    catch (const YAML::Exception &)
    {
        fail(n, field, "has the wrong type");
    }
}

template <class T> void read(const YAML::Node &parent, const char *key, const std::string &prefix, T &out)
{
    const YAML::Node n = parent[key];
    if (n.IsDefined() && !n.IsNull())
        out = as<T>(n, join(prefix, key));
}

void read_triple(const YAML::Node &parent, const char *key, const std::string &prefix, Triple &out)
{
    const YAML::Node n = parent[key];
    if (!n.IsDefined() || n.IsNull())
        return;
    const std::string field = join(prefix, key);
    if (!n.IsSequence() || n.size() != 3)
        fail(n, field, "expected a list of three numbers");
    for (std::size_t i = 0; i < 3; ++i)
        out[i] = as<double>(n[i], field);
}

std::array<int, 2> read_cell(const YAML::Node &n, const std::string &field)
{
    if (!n.IsSequence() || n.size() != 2)
        fail(n, field, "expected [row, col]");
    return {as<int>(n[0], field), as<int>(n[1], field)};
}

void require(bool ok, const YAML::Node &n, const std::string &field, const std::string &msg)
{
    if (!ok)
        fail(n, field, msg);
}

void require_positive(double v, const YAML::Node &parent, const char *key, const std::string &prefix)
{
    require(v > 0.0, parent[key], join(prefix, key), "must be positive");
}

void require_nonnegative(double v, const YAML::Node &parent, const char *key, const std::string &prefix)
{
    require(v >= 0.0, parent[key], join(prefix, key), "must be nonnegative");
}

// Writing -------------------------------------------------------------------

void emit_triple(YAML::Emitter &e, const char *key, const Triple &t)
{
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << t[0] << t[1] << t[2] << YAML::EndSeq;
}

void emit_cell(YAML::Emitter &e, const std::array<int, 2> &c)
{
    e << YAML::Flow << YAML::BeginSeq << c[0] << c[1] << YAML::EndSeq;
}

} // namespace

Scenario parse_scenario(const std::string &text, const std::filesystem::path &base_dir, bool check_files)
{
    YAML::Node root;
    try
    {
        root = YAML::Load(text);
    }
    catch (const YAML::ParserException &e)
    {
        throw InvalidArgument("scenario parse error (line " + std::to_string(e.mark.line + 1) + "): " + e.msg);
    }
    check_keys(root, "",
               {"name", "layout", "unit", "faults", "events", "reference", "planner", "trajopt", "gains", "ftc_mode",
                "sim", "trials", "plot_dt", "pair"});

    Scenario s;
    s.base_dir = base_dir;
    read(root, "name", "", s.name);
    require(!s.name.empty(), root["name"], "name", "is required");
    read(root, "pair", "", s.pair);
    read(root, "plot_dt", "", s.plot_dt);
    require_positive(s.plot_dt, root, "plot_dt", "");

    // Layout
    const YAML::Node layout = root["layout"];
    require(layout.IsDefined(), root, "layout", "is required");
    check_keys(layout, "layout", {"cells", "pitch"});
    const YAML::Node cells = layout["cells"];
    require(cells.IsSequence() && cells.size() > 0, cells.IsDefined() ? cells : layout, "layout.cells",
            "expected a non-empty list of [row, col]");
    for (std::size_t i = 0; i < cells.size(); ++i)
        s.cells.push_back(read_cell(cells[i], "layout.cells[" + std::to_string(i) + "]"));
    read(layout, "pitch", "layout", s.pitch);
    require_positive(s.pitch, layout, "pitch", "layout");
    try
    {
        (void)scenario_layout(s);
    }
    catch (const InvalidArgument &e)
    {
        fail(cells, "layout.cells", e.what());
    }

    // Unit
    if (const YAML::Node u = root["unit"]; u.IsDefined())
    {
        check_keys(u, "unit", {"mass", "inertia", "arm", "f_max", "k_tau"});
        read(u, "mass", "unit", s.unit.mass);
        read_triple(u, "inertia", "unit", s.unit.inertia);
        read(u, "arm", "unit", s.unit.arm);
        read(u, "f_max", "unit", s.unit.f_max);
        read(u, "k_tau", "unit", s.unit.k_tau);
        require_positive(s.unit.mass, u, "mass", "unit");
        require_positive(s.unit.arm, u, "arm", "unit");
        require_positive(s.unit.f_max, u, "f_max", "unit");
        require_nonnegative(s.unit.k_tau, u, "k_tau", "unit");
        for (double j : s.unit.inertia)
            require(j > 0.0, u["inertia"], "unit.inertia", "entries must be positive");
    }

    const int n_units = static_cast<int>(s.cells.size());

    // Faults
    if (const YAML::Node f = root["faults"]; f.IsDefined() && !f.IsNull())
    {
        check_keys(f, "faults", {"onset", "rotors", "failed_units"});
        read(f, "onset", "faults", s.faults.onset);
        require_nonnegative(s.faults.onset, f, "onset", "faults");
        if (const YAML::Node r = f["rotors"]; r.IsDefined() && !r.IsNull())
        {
            require(r.IsSequence(), r, "faults.rotors", "expected a list");
            for (std::size_t i = 0; i < r.size(); ++i)
            {
                const std::string p = "faults.rotors[" + std::to_string(i) + "]";
                check_keys(r[i], p, {"unit", "rotor", "eta"});
                RotorFault rf;
                read(r[i], "unit", p, rf.unit);
                read(r[i], "rotor", p, rf.rotor);
                read(r[i], "eta", p, rf.eta);
                require(rf.unit >= 1 && rf.unit <= n_units, r[i]["unit"], p + ".unit",
                        "must name a unit between 1 and " + std::to_string(n_units));
                require(rf.rotor >= 1 && rf.rotor <= kRotorsPerUnit, r[i]["rotor"], p + ".rotor",
                        "must lie between 1 and 4");
                std::ostringstream got;
                got << "must lie in [0, 1] (got " << rf.eta << ")";
                require(rf.eta >= 0.0 && rf.eta <= 1.0, r[i]["eta"], p + ".eta", got.str());
                s.faults.rotors.push_back(rf);
            }
        }
        if (const YAML::Node u = f["failed_units"]; u.IsDefined() && !u.IsNull())
        {
            require(u.IsSequence(), u, "faults.failed_units", "expected a list of unit numbers");
            for (std::size_t i = 0; i < u.size(); ++i)
            {
                const int id = as<int>(u[i], "faults.failed_units");
                require(id >= 1 && id <= n_units, u[i], "faults.failed_units",
                        "must name a unit between 1 and " + std::to_string(n_units));
                s.faults.failed_units.push_back(id);
            }
        }
    }

    // Events
    if (const YAML::Node ev = root["events"]; ev.IsDefined() && !ev.IsNull())
    {
        require(ev.IsSequence(), ev, "events", "expected a list");
        for (std::size_t i = 0; i < ev.size(); ++i)
        {
            const std::string p = "events[" + std::to_string(i) + "]";
            check_keys(ev[i], p, {"t", "type", "unit", "cell", "cells", "ids"});
            EventSpec e;
            read(ev[i], "t", p, e.t);
            read(ev[i], "type", p, e.type);
            read(ev[i], "unit", p, e.unit);
            require_nonnegative(e.t, ev[i], "t", p);
            require(e.type == "separate" || e.type == "dock" || e.type == "reconfigure", ev[i]["type"], p + ".type",
                    "must be separate, dock or reconfigure");
            if (e.type == "dock")
                e.cell = read_cell(ev[i]["cell"], p + ".cell");
            if (e.type == "reconfigure")
            {
                const YAML::Node c = ev[i]["cells"];
                const YAML::Node ids = ev[i]["ids"];
                require(c.IsSequence() && ids.IsSequence() && c.size() == ids.size() && c.size() > 0, ev[i],
                        p + ".cells", "reconfigure needs equally long 'cells' and 'ids' lists");
                for (std::size_t k = 0; k < c.size(); ++k)
                {
                    e.cells.push_back(read_cell(c[k], p + ".cells"));
                    e.ids.push_back(as<int>(ids[k], p + ".ids"));
                }
            }
            else
                require(e.unit >= 1, ev[i]["unit"], p + ".unit", "must name a unit (1-based)");
            s.events.push_back(e);
        }
    }

    // Reference
    const YAML::Node ref = root["reference"];
    require(ref.IsDefined(), root, "reference", "is required");
    check_keys(ref, "reference",
               {"type", "radius", "climb_rate", "angular_rate", "center", "yaw_deg", "map", "start", "goal",
                "altitude", "v_nominal"});
    read(ref, "type", "reference", s.reference);
    require(s.reference == "spiral" || s.reference == "planner" || s.reference == "hover", ref["type"],
            "reference.type", "must be spiral, planner or hover");
    read(ref, "radius", "reference", s.spiral.radius);
    read(ref, "climb_rate", "reference", s.spiral.climb_rate);
    read(ref, "angular_rate", "reference", s.spiral.angular_rate);
    read_triple(ref, "center", "reference", s.spiral.center);
    read(ref, "yaw_deg", "reference", s.spiral.yaw_deg);
    read(ref, "map", "reference", s.planner.map);
    read_triple(ref, "start", "reference", s.planner.start);
    read_triple(ref, "goal", "reference", s.planner.goal);
    read(ref, "altitude", "reference", s.planner.altitude);
    read(ref, "v_nominal", "reference", s.planner.v_nominal);
    require_nonnegative(s.spiral.radius, ref, "radius", "reference");
    require_positive(s.planner.v_nominal, ref, "v_nominal", "reference");
    if (s.reference == "planner")
    {
        require(!s.planner.map.empty(), ref, "reference.map", "is required for a planner reference");
        if (check_files && !std::filesystem::exists(base_dir / s.planner.map))
            fail(ref["map"], "reference.map", "file not found: " + (base_dir / s.planner.map).string());
    }

    if (const YAML::Node p = root["planner"]; p.IsDefined())
    {
        check_keys(p, "planner",
                   {"mode", "yaw_step_deg", "yaw_weight", "margin", "L_phi", "max_stride", "max_nodes", "settle_time"});
        if (p["mode"].IsDefined())
        {
            try
            {
                s.planner_mode = planner_mode_from_string(as<std::string>(p["mode"], "planner.mode"));
            }
            catch (const InvalidArgument &e)
            {
                fail(p["mode"], "planner.mode", e.what());
            }
        }
        read(p, "yaw_step_deg", "planner", s.planner.yaw_step_deg);
        read(p, "yaw_weight", "planner", s.planner.yaw_weight);
        read(p, "margin", "planner", s.planner.margin);
        read(p, "L_phi", "planner", s.planner.L_phi);
        read(p, "max_stride", "planner", s.planner.max_stride);
        read(p, "max_nodes", "planner", s.planner.max_nodes);
        read(p, "settle_time", "planner", s.planner.settle_time);
        require_positive(s.planner.yaw_step_deg, p, "yaw_step_deg", "planner");
        require_nonnegative(s.planner.yaw_weight, p, "yaw_weight", "planner");
        require_nonnegative(s.planner.L_phi, p, "L_phi", "planner");
        require_nonnegative(s.planner.settle_time, p, "settle_time", "planner");
        require(s.planner.max_stride >= 1, p["max_stride"], "planner.max_stride", "must be at least 1");
        require(s.planner.max_nodes >= 2, p["max_nodes"], "planner.max_nodes", "must be at least 2");
    }

    if (const YAML::Node t = root["trajopt"]; t.IsDefined())
    {
        check_keys(t, "trajopt",
                   {"lambda_m", "lambda_t", "lambda_o", "lambda_d", "lambda_v", "lambda_a", "lambda_j", "lambda_phi",
                    "v_max", "a_max", "j_max", "margin", "samples_per_segment", "max_iterations"});
        auto &w = s.trajopt;
        read(t, "lambda_m", "trajopt", w.lambda_m);
        read(t, "lambda_t", "trajopt", w.lambda_t);
        read(t, "lambda_o", "trajopt", w.lambda_o);
        read(t, "lambda_d", "trajopt", w.lambda_d);
        read(t, "lambda_v", "trajopt", w.lambda_v);
        read(t, "lambda_a", "trajopt", w.lambda_a);
        read(t, "lambda_j", "trajopt", w.lambda_j);
        read(t, "lambda_phi", "trajopt", w.lambda_phi);
        read(t, "v_max", "trajopt", w.v_max);
        read(t, "a_max", "trajopt", w.a_max);
        read(t, "j_max", "trajopt", w.j_max);
        read(t, "margin", "trajopt", w.margin);
        read(t, "samples_per_segment", "trajopt", w.samples_per_segment);
        read(t, "max_iterations", "trajopt", w.max_iterations);
        for (const char *k : {"lambda_m", "lambda_t", "lambda_o", "lambda_d", "lambda_v", "lambda_a", "lambda_j",
                              "lambda_phi", "margin"})
        {
            if (t[k].IsDefined())
                require_nonnegative(t[k].as<double>(), t, k, "trajopt");
        }
        require_positive(w.v_max, t, "v_max", "trajopt");
        require_positive(w.a_max, t, "a_max", "trajopt");
        require_positive(w.j_max, t, "j_max", "trajopt");
        require(w.samples_per_segment >= 1, t["samples_per_segment"], "trajopt.samples_per_segment",
                "must be at least 1");
        require(w.max_iterations >= 0, t["max_iterations"], "trajopt.max_iterations", "must be nonnegative");
    }

    if (const YAML::Node g = root["gains"]; g.IsDefined())
    {
        check_keys(g, "gains", {"kp_pos", "kd_pos", "kp_att", "kd_att", "max_tilt_deg"});
        read_triple(g, "kp_pos", "gains", s.gains.kp_pos);
        read_triple(g, "kd_pos", "gains", s.gains.kd_pos);
        read_triple(g, "kp_att", "gains", s.gains.kp_att);
        read_triple(g, "kd_att", "gains", s.gains.kd_att);
        read(g, "max_tilt_deg", "gains", s.gains.max_tilt_deg);
        for (const Triple *t : {&s.gains.kp_pos, &s.gains.kd_pos, &s.gains.kp_att, &s.gains.kd_att})
            for (double v : *t)
                require(v >= 0.0, g, "gains", "gains must be nonnegative");
        require(s.gains.max_tilt_deg > 0.0 && s.gains.max_tilt_deg < 90.0, g["max_tilt_deg"], "gains.max_tilt_deg",
                "must lie in (0, 90)");
    }

    if (const YAML::Node m = root["ftc_mode"]; m.IsDefined())
    {
        try
        {
            s.ftc = ftc_mode_from_string(as<std::string>(m, "ftc_mode"));
        }
        catch (const InvalidArgument &e)
        {
            fail(m, "ftc_mode", e.what());
        }
    }

    if (const YAML::Node sim = root["sim"]; sim.IsDefined())
    {
        check_keys(sim, "sim",
                   {"duration", "dt", "control_dt", "detection_delay", "transient_window", "divergence_error"});
        read(sim, "duration", "sim", s.duration);
        read(sim, "dt", "sim", s.dt);
        read(sim, "control_dt", "sim", s.control_dt);
        read(sim, "detection_delay", "sim", s.detection_delay);
        read(sim, "transient_window", "sim", s.transient_window);
        read(sim, "divergence_error", "sim", s.divergence_error);
        require_positive(s.duration, sim, "duration", "sim");
        require(s.dt > 0.0 && s.dt <= 0.01, sim["dt"], "sim.dt", "must lie in (0, 0.01]");
        require(s.control_dt >= s.dt, sim["control_dt"], "sim.control_dt", "must be at least dt");
        require_nonnegative(s.detection_delay, sim, "detection_delay", "sim");
        require_nonnegative(s.transient_window, sim, "transient_window", "sim");
        require_positive(s.divergence_error, sim, "divergence_error", "sim");
    }

    if (const YAML::Node tr = root["trials"]; tr.IsDefined())
    {
        check_keys(tr, "trials", {"count", "seed", "jitter"});
        read(tr, "count", "trials", s.trial_count);
        read(tr, "seed", "trials", s.seed);
        read(tr, "jitter", "trials", s.jitter);
        require(s.trial_count >= 1, tr["count"], "trials.count", "must be at least 1");
        require_nonnegative(s.jitter, tr, "jitter", "trials");
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path &path)
{
    std::ifstream f(path);
    if (!f)
        throw InvalidArgument("cannot open scenario file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    try
    {
        return parse_scenario(ss.str(), path.parent_path());
    }
    catch (const InvalidArgument &e)
    {
        throw InvalidArgument(path.string() + ": " + e.what());
    }
}

std::string serialize_scenario(const Scenario &s)
{
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << s.name;
    if (!s.pair.empty())
        e << YAML::Key << "pair" << YAML::Value << s.pair;
    e << YAML::Key << "plot_dt" << YAML::Value << s.plot_dt;

    e << YAML::Key << "layout" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "pitch" << YAML::Value << s.pitch;
    e << YAML::Key << "cells" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto &c : s.cells)
        emit_cell(e, c);
    e << YAML::EndSeq << YAML::EndMap;

    e << YAML::Key << "unit" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "mass" << YAML::Value << s.unit.mass;
    emit_triple(e, "inertia", s.unit.inertia);
    e << YAML::Key << "arm" << YAML::Value << s.unit.arm;
    e << YAML::Key << "f_max" << YAML::Value << s.unit.f_max;
    e << YAML::Key << "k_tau" << YAML::Value << s.unit.k_tau;
    e << YAML::EndMap;

    e << YAML::Key << "faults" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "onset" << YAML::Value << s.faults.onset;
    e << YAML::Key << "rotors" << YAML::Value << YAML::BeginSeq;
    for (const auto &r : s.faults.rotors)
        e << YAML::Flow << YAML::BeginMap << YAML::Key << "unit" << YAML::Value << r.unit << YAML::Key << "rotor"
          << YAML::Value << r.rotor << YAML::Key << "eta" << YAML::Value << r.eta << YAML::EndMap;
    e << YAML::EndSeq;
    e << YAML::Key << "failed_units" << YAML::Value << YAML::Flow << s.faults.failed_units;
    e << YAML::EndMap;

    e << YAML::Key << "events" << YAML::Value << YAML::BeginSeq;
    for (const auto &ev : s.events)
    {
        e << YAML::BeginMap;
        e << YAML::Key << "t" << YAML::Value << ev.t;
        e << YAML::Key << "type" << YAML::Value << ev.type;
        e << YAML::Key << "unit" << YAML::Value << ev.unit;
        if (ev.type == "dock")
        {
            e << YAML::Key << "cell" << YAML::Value;
            emit_cell(e, ev.cell);
        }
        if (ev.type == "reconfigure")
        {
            e << YAML::Key << "cells" << YAML::Value << YAML::Flow << YAML::BeginSeq;
            for (const auto &c : ev.cells)
                emit_cell(e, c);
            e << YAML::EndSeq;
            e << YAML::Key << "ids" << YAML::Value << YAML::Flow << ev.ids;
        }
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;

    e << YAML::Key << "reference" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "type" << YAML::Value << s.reference;
    e << YAML::Key << "radius" << YAML::Value << s.spiral.radius;
    e << YAML::Key << "climb_rate" << YAML::Value << s.spiral.climb_rate;
    e << YAML::Key << "angular_rate" << YAML::Value << s.spiral.angular_rate;
    emit_triple(e, "center", s.spiral.center);
    e << YAML::Key << "yaw_deg" << YAML::Value << s.spiral.yaw_deg;
    e << YAML::Key << "map" << YAML::Value << s.planner.map;
    emit_triple(e, "start", s.planner.start);
    emit_triple(e, "goal", s.planner.goal);
    e << YAML::Key << "altitude" << YAML::Value << s.planner.altitude;
    e << YAML::Key << "v_nominal" << YAML::Value << s.planner.v_nominal;
    e << YAML::EndMap;

    e << YAML::Key << "planner" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "mode" << YAML::Value << to_string(s.planner_mode);
    e << YAML::Key << "yaw_step_deg" << YAML::Value << s.planner.yaw_step_deg;
    e << YAML::Key << "yaw_weight" << YAML::Value << s.planner.yaw_weight;
    e << YAML::Key << "margin" << YAML::Value << s.planner.margin;
    e << YAML::Key << "L_phi" << YAML::Value << s.planner.L_phi;
    e << YAML::Key << "max_stride" << YAML::Value << s.planner.max_stride;
    e << YAML::Key << "max_nodes" << YAML::Value << s.planner.max_nodes;
    e << YAML::Key << "settle_time" << YAML::Value << s.planner.settle_time;
    e << YAML::EndMap;

    const auto &w = s.trajopt;
    e << YAML::Key << "trajopt" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "lambda_m" << YAML::Value << w.lambda_m;
    e << YAML::Key << "lambda_t" << YAML::Value << w.lambda_t;
    e << YAML::Key << "lambda_o" << YAML::Value << w.lambda_o;
    e << YAML::Key << "lambda_d" << YAML::Value << w.lambda_d;
    e << YAML::Key << "lambda_v" << YAML::Value << w.lambda_v;
    e << YAML::Key << "lambda_a" << YAML::Value << w.lambda_a;
    e << YAML::Key << "lambda_j" << YAML::Value << w.lambda_j;
    e << YAML::Key << "lambda_phi" << YAML::Value << w.lambda_phi;
    e << YAML::Key << "v_max" << YAML::Value << w.v_max;
    e << YAML::Key << "a_max" << YAML::Value << w.a_max;
    e << YAML::Key << "j_max" << YAML::Value << w.j_max;
    e << YAML::Key << "margin" << YAML::Value << w.margin;
    e << YAML::Key << "samples_per_segment" << YAML::Value << w.samples_per_segment;
    e << YAML::Key << "max_iterations" << YAML::Value << w.max_iterations;
    e << YAML::EndMap;

    e << YAML::Key << "gains" << YAML::Value << YAML::BeginMap;
    emit_triple(e, "kp_pos", s.gains.kp_pos);
    emit_triple(e, "kd_pos", s.gains.kd_pos);
    emit_triple(e, "kp_att", s.gains.kp_att);
    emit_triple(e, "kd_att", s.gains.kd_att);
    e << YAML::Key << "max_tilt_deg" << YAML::Value << s.gains.max_tilt_deg;
    e << YAML::EndMap;

    e << YAML::Key << "ftc_mode" << YAML::Value << to_string(s.ftc);

    e << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "duration" << YAML::Value << s.duration;
    e << YAML::Key << "dt" << YAML::Value << s.dt;
    e << YAML::Key << "control_dt" << YAML::Value << s.control_dt;
    e << YAML::Key << "detection_delay" << YAML::Value << s.detection_delay;
    e << YAML::Key << "transient_window" << YAML::Value << s.transient_window;
    e << YAML::Key << "divergence_error" << YAML::Value << s.divergence_error;
    e << YAML::EndMap;

    e << YAML::Key << "trials" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "count" << YAML::Value << s.trial_count;
    e << YAML::Key << "seed" << YAML::Value << s.seed;
    e << YAML::Key << "jitter" << YAML::Value << s.jitter;
    e << YAML::EndMap;

    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

AssemblyLayout scenario_layout(const Scenario &s)
{
    std::vector<Cell> cells;
    for (const auto &c : s.cells)
        cells.push_back({c[0], c[1]});
    const Mat3 J = Vec3(s.unit.inertia[0], s.unit.inertia[1], s.unit.inertia[2]).asDiagonal();
    const UnitSpec unit = make_unit(s.unit.mass, J, s.unit.arm, s.unit.f_max, s.unit.k_tau);
    return build_assembly(cells, s.pitch, unit);
}

namespace
{

// Scenario unit numbers follow the order of `cells` in the file; the layout
// sorts cells row-major.
std::vector<int> layout_ids(const Scenario &s, const AssemblyLayout &layout)
{
    std::vector<int> ids(layout.n(), 0);
    for (int i = 0; i < layout.n(); ++i)
        for (std::size_t k = 0; k < s.cells.size(); ++k)
            if (s.cells[k][0] == layout.cells[i].row && s.cells[k][1] == layout.cells[i].col)
                ids[i] = static_cast<int>(k) + 1;
    return ids;
}

int index_of(const std::vector<int> &ids, int id)
{
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end())
        throw InvalidArgument("scenario names unknown unit " + std::to_string(id));
    return static_cast<int>(it - ids.begin());
}

} // namespace

FaultState scenario_faults(const Scenario &s)
{
    const AssemblyLayout layout = scenario_layout(s);
    const std::vector<int> ids = layout_ids(s, layout);
    FaultState f = healthy_faults(layout);
    for (const auto &r : s.faults.rotors)
        f = set_rotor_eta(f, index_of(ids, r.unit), r.rotor - 1, r.eta);
    for (int u : s.faults.failed_units)
        f = mark_unit_failed(f, index_of(ids, u));
    return f;
}

SimConfig scenario_sim_config(const Scenario &s, const AssemblyLayout &layout)
{
    SimConfig c;
    c.layout = layout;
    c.unit_ids = layout_ids(s, layout);
    c.ftc = s.ftc;
    c.gains.kp_pos = Vec3(s.gains.kp_pos.data());
    c.gains.kd_pos = Vec3(s.gains.kd_pos.data());
    c.gains.kp_att = Vec3(s.gains.kp_att.data());
    c.gains.kd_att = Vec3(s.gains.kd_att.data());
    c.gains.max_tilt = deg2rad(s.gains.max_tilt_deg);
    c.duration = s.duration;
    c.dt = s.dt;
    c.control_dt = s.control_dt;
    c.fault_detection_delay = s.detection_delay;
    c.transient_window = s.transient_window;
    c.divergence_error = s.divergence_error;

    if (s.faults.onset <= 0.0)
        c.faults = scenario_faults(s);
    else
    {
        c.faults = healthy_faults(layout);
        for (const auto &r : s.faults.rotors)
        {
            SimEvent e;
            e.kind = SimEvent::Kind::rotor_eta;
            e.t = s.faults.onset;
            e.unit_id = r.unit;
            e.rotor = r.rotor;
            e.eta = r.eta;
            c.events.push_back(e);
        }
        for (int u : s.faults.failed_units)
        {
            SimEvent e;
            e.kind = SimEvent::Kind::unit_failed;
            e.t = s.faults.onset;
            e.unit_id = u;
            c.events.push_back(e);
        }
    }
    for (const auto &ev : s.events)
    {
        SimEvent e;
        e.t = ev.t;
        e.unit_id = ev.unit;
        if (ev.type == "separate")
            e.kind = SimEvent::Kind::separate;
        else if (ev.type == "dock")
        {
            e.kind = SimEvent::Kind::dock;
            e.cell = {ev.cell[0], ev.cell[1]};
        }
        else
        {
            e.kind = SimEvent::Kind::reconfigure;
            for (const auto &cell : ev.cells)
                e.cells.push_back({cell[0], cell[1]});
            e.ids = ev.ids;
        }
        c.events.push_back(e);
    }
    return c;
}

CostWeights scenario_weights(const Scenario &s)
{
    const auto &t = s.trajopt;
    CostWeights w;
    w.lambda_m = t.lambda_m;
    w.lambda_t = t.lambda_t;
    w.lambda_o = t.lambda_o;
    w.lambda_d = t.lambda_d;
    w.lambda_v = t.lambda_v;
    w.lambda_a = t.lambda_a;
    w.lambda_j = t.lambda_j;
    w.lambda_phi = s.planner_mode == PlannerMode::kinematic_only ? 0.0 : t.lambda_phi;
    w.v_max = t.v_max;
    w.a_max = t.a_max;
    w.j_max = t.j_max;
    w.margin = t.margin;
    w.samples_per_segment = t.samples_per_segment;
    return w;
}

AttitudeObjectiveSpec scenario_attitude_spec(const Scenario &s)
{
    AttitudeObjectiveSpec spec;
    spec.L_phi = s.planner_mode == PlannerMode::kinematic_only ? 0.0 : s.planner.L_phi;
    return spec;
}

PlannerOptions scenario_planner_options(const Scenario &s)
{
    PlannerOptions o;
    o.yaw_step = deg2rad(s.planner.yaw_step_deg);
    o.yaw_weight = s.planner.yaw_weight;
    o.margin = s.planner.margin;
    return o;
}

} // namespace mars
