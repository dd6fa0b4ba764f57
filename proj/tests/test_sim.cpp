#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mars/sim.hpp"

using namespace mars;

namespace
{

AssemblyLayout line3()
{
    return build_assembly({{0, 0}, {0, 1}, {0, 2}}, 0.5, default_unit());
}

ReferenceFn hover_at(const Vec3 &p, double yaw = 0.0)
{
    return [p, yaw](double) {
        ReferenceState r;
        r.p = p;
        r.yaw = yaw;
        return r;
    };
}

} // namespace

TEST_CASE("ballistic flight follows the analytic parabola")
{
    const AssemblyLayout l = line3();
    const PlantModel m = plant_model(l);
    RigidState s;
    s.p = Vec3(0.0, 0.0, 10.0);
    s.v = Vec3(1.0, -2.0, 3.0);
    // Constant tilted thrust with no rotation is also a constant acceleration.
    s.q = Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Vec3(1, 1, 0).normalized()));
    const double F = 12.0, dt = 1e-3;
    const Vec3 acc = s.q.toRotationMatrix().col(2) * F / m.mass - Vec3(0, 0, kGravity);
    RigidState t = s;
    for (int i = 0; i < 2000; ++i)
        t = integrate_wrench(t, Vec4(F, 0, 0, 0), m, dt);
    const double T = 2.0;
    CHECK((t.p - (s.p + s.v * T + 0.5 * acc * T * T)).norm() < 1e-4);
    CHECK((t.v - (s.v + acc * T)).norm() < 1e-9);

    RigidState z = s;
    z.q = Eigen::Quaterniond::Identity();
    const RotorThrusts off = RotorThrusts::Zero(l.n(), 4);
    for (int i = 0; i < 1000; ++i)
        z = plant_step(z, off, healthy_faults(l), l, m, dt);
    CHECK((z.p - (s.p + s.v - Vec3(0, 0, 0.5 * kGravity))).norm() < 1e-4);
}

TEST_CASE("torque-free spin keeps the quaternion normalized and momentum bounded")
{
    const PlantModel m = plant_model(line3());
    RigidState s;
    s.w = Vec3(0.0, 0.0, 2.0);
    for (int i = 0; i < 5000; ++i)
        s = integrate_wrench(s, Vec4(0, 0, 0, 0), m, 1e-3);
    CHECK(std::abs(s.q.norm() - 1.0) < 1e-12);
    CHECK(s.w.z() == doctest::Approx(2.0));
    CHECK(s.euler().z() == doctest::Approx(wrapAngle(10.0)).epsilon(1e-6));
}

TEST_CASE("plant rejects bad inputs")
{
    const AssemblyLayout l = line3();
    const PlantModel m = plant_model(l);
    CHECK_THROWS_AS(integrate_wrench(RigidState{}, Vec4::Zero(), m, 0.0), InvalidArgument);
    CHECK_THROWS_AS(integrate_wrench(RigidState{}, Vec4::Zero(), m, 0.05), InvalidArgument);
    RotorThrusts bad = RotorThrusts::Zero(l.n(), 4);
    bad(0, 0) = -1.0;
    CHECK_THROWS_AS(plant_step(RigidState{}, bad, healthy_faults(l), l, m, 1e-3), InvalidArgument);
}

TEST_CASE("controller at the reference commands a level hover")
{
    const PlantModel m = plant_model(line3());
    RigidState s;
    s.p = Vec3(1, 2, 3);
    ReferenceState r;
    r.p = s.p;
    const WrenchCommand c = tracking_controller(s, r, ControllerGains{}, m);
    CHECK(c.F == doctest::Approx(m.mass * kGravity));
    CHECK(c.M.norm() < 1e-12);

    // A sideways error tilts toward the reference, bounded by the cone.
    r.p = s.p + Vec3(100.0, 0.0, 0.0);
    const WrenchCommand tilt = tracking_controller(s, r, ControllerGains{}, m);
    CHECK(tilt.M.y() > 0.0);
    ControllerGains g;
    g.max_tilt = deg2rad(95.0);
    CHECK_THROWS_AS(g.validate(), InvalidArgument);
}

TEST_CASE("spiral reference derivatives agree with finite differences")
{
    SpiralParams p;
    p.radius = 1.5;
    p.angular_rate = 0.7;
    const double t = 3.3, h = 1e-5;
    const ReferenceState r = spiral_reference(t, p), a = spiral_reference(t - h, p), b = spiral_reference(t + h, p);
    CHECK(((b.p - a.p) / (2 * h) - r.v).norm() < 1e-6);
    CHECK(((b.v - a.v) / (2 * h) - r.a).norm() < 1e-6);
    CHECK(r.v.z() == doctest::Approx(p.climb_rate));
    CHECK((spiral_reference(0.0, p).p - p.center).norm() == doctest::Approx(p.radius));
}

TEST_CASE("hover with a known unit failure stays on the reference")
{
    SimConfig cfg;
    cfg.layout = build_assembly({{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}}, 0.5, default_unit());
    cfg.faults = mark_unit_failed(healthy_faults(cfg.layout), 0);
    cfg.reference = hover_at(Vec3(0, 0, 1));
    cfg.duration = 3.0;
    const SimResult r = run_closed_loop(cfg);
    CHECK_FALSE(r.metrics.diverged);
    CHECK(r.metrics.max_error < 1e-9);
    CHECK(r.trace.rows.size() == 301); // control ticks including both ends

    cfg.ftc = FtcMode::none;
    CHECK(run_closed_loop(cfg).metrics.max_error > 0.1);
}

TEST_CASE("fault detection delay produces a transient")
{
    SimConfig cfg;
    cfg.layout = build_assembly({{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}}, 0.5, default_unit());
    cfg.reference = hover_at(Vec3(0, 0, 1));
    cfg.duration = 4.0;
    SimEvent e;
    e.kind = SimEvent::Kind::rotor_eta;
    e.t = 1.0;
    e.unit_id = 2;
    e.rotor = 1;
    e.eta = 0.5;
    cfg.events = {e};
    cfg.fault_detection_delay = 0.0;
    const double instant = run_closed_loop(cfg).metrics.max_error;
    cfg.fault_detection_delay = 0.2;
    const SimResult delayed = run_closed_loop(cfg);
    CHECK(instant < 1e-9);
    CHECK(delayed.metrics.max_error > 1e-4);
    CHECK_FALSE(delayed.metrics.diverged);
    CHECK(delayed.trace.events.size() >= 1);
}

TEST_CASE("divergence is flagged")
{
    SimConfig cfg;
    cfg.layout = build_assembly({{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}}, 0.5, default_unit());
    cfg.reference = hover_at(Vec3(0, 0, 1));
    cfg.duration = 8.0;
    cfg.ftc = FtcMode::none;
    cfg.faults = mark_unit_failed(healthy_faults(cfg.layout), 0);
    cfg.faults = mark_unit_failed(cfg.faults, 3);
    const SimResult r = run_closed_loop(cfg);
    CHECK(r.metrics.diverged);
    CHECK_FALSE(r.metrics.divergence_reason.empty());
    CHECK(r.metrics.final_time < cfg.duration);
}

TEST_CASE("layout events move units and shift the body origin")
{
    const AssemblyLayout l = line3();
    SimEvent sep;
    sep.kind = SimEvent::Kind::separate;
    sep.unit_id = 3;
    const LayoutChange a = apply_layout_event(l, {1, 2, 3}, sep);
    CHECK(a.layout.n() == 2);
    CHECK(a.ids == std::vector<int>{1, 2});
    CHECK(a.shift.x() == doctest::Approx(-0.25));

    SimEvent dock;
    dock.kind = SimEvent::Kind::dock;
    dock.unit_id = 3;
    dock.cell = {0, 2};
    const LayoutChange b = apply_layout_event(a.layout, a.ids, dock);
    CHECK(b.layout.n() == 3);
    CHECK(b.shift.x() == doctest::Approx(0.25));

    CHECK_THROWS_AS(apply_layout_event(l, {1, 2, 3}, dock), InvalidArgument);
    sep.unit_id = 9;
    CHECK_THROWS_AS(apply_layout_event(l, {1, 2, 3}, sep), InvalidArgument);
    SimEvent rc;
    rc.kind = SimEvent::Kind::reconfigure;
    rc.cells = {{0, 0}, {0, 1}};
    rc.ids = {1, 1};
    CHECK_THROWS_AS(apply_layout_event(l, {1, 2, 3}, rc), InvalidArgument);
}

TEST_CASE("identity reconfiguration leaves no transient")
{
    SimConfig cfg;
    cfg.layout = line3();
    cfg.reference = [](double t) { return spiral_reference(t, SpiralParams{}); };
    cfg.duration = 6.0;
    SimEvent rc;
    rc.kind = SimEvent::Kind::reconfigure;
    rc.t = 3.0;
    rc.cells = {{0, 0}, {0, 1}, {0, 2}};
    rc.ids = {1, 2, 3};
    cfg.events = {rc};
    const SimResult r = run_closed_loop(cfg);
    CHECK_FALSE(r.metrics.diverged);
    CHECK(r.metrics.yaw_transient <= 0.1);
}

TEST_CASE("separation and docking stay stable")
{
    SimConfig cfg;
    cfg.layout = line3();
    cfg.reference = [](double t) { return spiral_reference(t, SpiralParams{}); };
    cfg.duration = 10.0;
    SimEvent sep, dock;
    sep.kind = SimEvent::Kind::separate;
    sep.t = 3.0;
    sep.unit_id = 3;
    dock.kind = SimEvent::Kind::dock;
    dock.t = 6.0;
    dock.unit_id = 3;
    dock.cell = {0, 2};
    cfg.events = {sep, dock};
    const SimResult r = run_closed_loop(cfg);
    CHECK_FALSE(r.metrics.diverged);
    CHECK(r.metrics.yaw_transient <= 5.0);
    CHECK(r.trace.rows.back().units == 3);
}
