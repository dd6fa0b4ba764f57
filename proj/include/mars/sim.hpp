#pragma once

#include "mars/allocation.hpp"
#include "mars/environment.hpp"
#include "mars/fault.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mars
{

struct RigidState
{
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Eigen::Quaterniond q = Eigen::Quaterniond::Identity(); // body -> world
    Vec3 w = Vec3::Zero();                                  // body rates

    bool finite() const { return p.allFinite() && v.allFinite() && q.coeffs().allFinite() && w.allFinite(); }
    /// Roll, pitch, yaw (Z-Y-X convention).
    Vec3 euler() const;
};

/// Mass properties the plant and controller use, about the assembly center.
struct PlantModel
{
    double mass = 0.0;
    Mat3 J = Mat3::Identity();
};

PlantModel plant_model(const AssemblyLayout &layout);

/// Integrates the rigid body over dt under the given commanded rotor thrusts;
/// the faults scale every rotor by its efficiency before the wrench is formed.
RigidState plant_step(const RigidState &state, const RotorThrusts &commanded, const FaultState &faults,
                      const AssemblyLayout &layout, const PlantModel &model, double dt);

/// Plant integration from an already formed body wrench [F, Mx, My, Mz].
RigidState integrate_wrench(const RigidState &state, const Vec4 &wrench, const PlantModel &model, double dt);

struct ControllerGains
{
    Vec3 kp_pos = Vec3(4.0, 4.0, 6.0);
    Vec3 kd_pos = Vec3(4.0, 4.0, 5.0);
    Vec3 kp_att = Vec3(60.0, 60.0, 20.0);
    Vec3 kd_att = Vec3(14.0, 14.0, 8.0);
    double gravity = kGravity;
    double max_tilt = deg2rad(35.0);

    void validate() const;
};

struct ReferenceState
{
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Vec3 a = Vec3::Zero();
    double yaw = 0.0;
    double yaw_rate = 0.0;
};

/// Cascaded PD: position error to desired acceleration, thrust magnitude and
/// tilt; attitude PD in Z-Y-X angles to body moments.
WrenchCommand tracking_controller(const RigidState &state, const ReferenceState &ref, const ControllerGains &gains,
                                  const PlantModel &model);

struct SpiralParams
{
    double radius = 1.0;
    double climb_rate = 0.1;    // m/s
    double angular_rate = 0.5;  // rad/s
    Vec3 center = Vec3(0.0, 0.0, 1.0);
    double yaw = 0.0;
};

ReferenceState spiral_reference(double t, const SpiralParams &params);

using ReferenceFn = std::function<ReferenceState(double)>;

/// Timed change of the fault state or of the layout.
struct SimEvent
{
    enum class Kind
    {
        rotor_eta,   // unit_id/rotor/eta
        unit_failed, // unit_id
        separate,    // unit_id leaves the assembly
        dock,        // unit_id joins at `cell`
        reconfigure  // the assembly takes `cells`, listed in unit-id order of `ids`
    };
    Kind kind = Kind::rotor_eta;
    double t = 0.0;
    int unit_id = 0; // 1-based identity
    int rotor = 0;   // 1-based
    double eta = 1.0;
    Cell cell;
    std::vector<Cell> cells;
    std::vector<int> ids;
};

const char *to_string(SimEvent::Kind kind);

struct SimConfig
{
    AssemblyLayout layout;
    std::vector<int> unit_ids; // identity of each layout unit; empty means 1..n
    FaultState faults;         // active from t = 0
    std::vector<SimEvent> events;
    FtcMode ftc = FtcMode::full;
    AllocationOptions alloc;
    ControllerGains gains;
    ReferenceFn reference;
    double duration = 10.0;
    double dt = 1e-3;
    double control_dt = 1e-2;
    double fault_detection_delay = 0.1; // s before the allocator learns a fault
    double transient_window = 1.0;      // +- s around layout events
    double divergence_error = 5.0;      // m
    Vec3 initial_offset = Vec3::Zero();
    const Environment *env = nullptr; // for the flown-footprint collision count
};

struct TraceRow
{
    double t = 0.0;
    RigidState state;
    ReferenceState ref;
    WrenchCommand cmd;
    Vec4 applied = Vec4::Zero(); // wrench actually produced
    bool saturated = false;
    int units = 0;
};

struct EventRecord
{
    double t = 0.0;
    std::string what;
};

struct Trace
{
    std::vector<TraceRow> rows;
    std::vector<EventRecord> events;
};

struct Metrics
{
    double rms_error = 0.0;
    double max_error = 0.0;
    double yaw_transient = 0.0;   // deg
    double accel_transient = 0.0; // m/s^2
    int collision_count = 0;
    bool diverged = false;
    std::string divergence_reason;
    double final_time = 0.0;
    int saturated_ticks = 0;
};

struct SimResult
{
    Trace trace;
    Metrics metrics;
};

SimResult run_closed_loop(const SimConfig &config);

/// Result of applying a layout event to a running assembly.
struct LayoutChange
{
    AssemblyLayout layout;
    std::vector<int> ids;      // unit identity per layout index
    Vec2 shift = Vec2::Zero(); // new origin expressed in the old body frame
};

/// Applies a separate, dock or reconfigure event. Throws InvalidArgument
/// when the resulting layout is invalid or the unit ids do not fit.
LayoutChange apply_layout_event(const AssemblyLayout &layout, const std::vector<int> &ids, const SimEvent &event);

} // namespace mars
