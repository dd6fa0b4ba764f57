#pragma once

#include "mars/allocation.hpp"
#include "mars/planner.hpp"
#include "mars/sim.hpp"
#include "mars/trajopt.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace mars
{

using Triple = std::array<double, 3>;

enum class PlannerMode
{
    attitude_aware,
    kinematic_only
};

const char *to_string(PlannerMode mode);
PlannerMode planner_mode_from_string(const std::string &s);

struct UnitParams
{
    double mass = 1.0;
    Triple inertia{0.01, 0.01, 0.018};
    double arm = 0.15;
    double f_max = 6.0;
    double k_tau = 0.016;
    bool operator==(const UnitParams &) const = default;
};

struct RotorFault
{
    int unit = 1;  // 1-based
    int rotor = 1; // 1-based
    double eta = 1.0;
    bool operator==(const RotorFault &) const = default;
};

struct FaultSpec
{
    double onset = 0.0; // s; faults with onset 0 are known from the start
    std::vector<RotorFault> rotors;
    std::vector<int> failed_units; // 1-based
    bool operator==(const FaultSpec &) const = default;
};

struct EventSpec
{
    double t = 0.0;
    std::string type; // separate | dock | reconfigure
    int unit = 0;
    std::array<int, 2> cell{0, 0};
    std::vector<std::array<int, 2>> cells;
    std::vector<int> ids;
    bool operator==(const EventSpec &) const = default;
};

struct SpiralSpec
{
    double radius = 1.0;
    double climb_rate = 0.1;
    double angular_rate = 0.5;
    Triple center{0.0, 0.0, 1.0};
    double yaw_deg = 0.0;
    bool operator==(const SpiralSpec &) const = default;
};

struct PlannerSpec
{
    std::string map; // relative to the scenario file
    Triple start{0.0, 0.0, 0.0}; // x, y, yaw (deg)
    Triple goal{0.0, 0.0, 0.0};
    double altitude = 1.0;
    double v_nominal = 0.5;
    double yaw_step_deg = 15.0;
    double yaw_weight = 0.2;
    double margin = 0.0;
    double L_phi = 5.0;
    int max_stride = 8;
    int max_nodes = 12;
    double settle_time = 2.0; // hover at the goal after the trajectory ends
    bool operator==(const PlannerSpec &) const = default;
};

struct TrajoptSpec
{
    double lambda_m = 1.0;
    double lambda_t = 10.0;
    double lambda_o = 1e4;
    double lambda_d = 1.0;
    double lambda_v = 1.0;
    double lambda_a = 1.0;
    double lambda_j = 1.0;
    double lambda_phi = 1.0;
    double v_max = 1.0;
    double a_max = 2.0;
    double j_max = 10.0;
    double margin = 0.05;
    int samples_per_segment = 16;
    int max_iterations = 300;
    bool operator==(const TrajoptSpec &) const = default;
};

struct GainSpec
{
    Triple kp_pos{4.0, 4.0, 6.0};
    Triple kd_pos{4.0, 4.0, 5.0};
    Triple kp_att{60.0, 60.0, 20.0};
    Triple kd_att{14.0, 14.0, 8.0};
    double max_tilt_deg = 35.0;
    bool operator==(const GainSpec &) const = default;
};

struct Scenario
{
    std::string name;
    std::vector<std::array<int, 2>> cells; // (row, col)
    double pitch = 0.5;
    UnitParams unit;
    FaultSpec faults;
    std::vector<EventSpec> events;
    std::string reference = "spiral"; // spiral | planner | hover
    SpiralSpec spiral;
    PlannerSpec planner;
    TrajoptSpec trajopt;
    GainSpec gains;
    FtcMode ftc = FtcMode::full;
    PlannerMode planner_mode = PlannerMode::attitude_aware;
    double duration = 20.0;
    double dt = 1e-3;
    double control_dt = 1e-2;
    double detection_delay = 0.1;
    double transient_window = 1.0;
    double divergence_error = 5.0;
    int trial_count = 1;
    unsigned seed = 1;
    double jitter = 0.02;
    double plot_dt = 0.05;
    std::string pair; // groups attitude-aware / kinematic-only runs in batch reports

    /// Directory relative paths are resolved against; not serialized.
    std::filesystem::path base_dir;

    bool operator==(const Scenario &o) const;
};

/// Parses YAML text. Errors name the offending field and, when known, the
/// line of the source. Referenced files are checked against `base_dir`.
Scenario parse_scenario(const std::string &text, const std::filesystem::path &base_dir = {},
                        bool check_files = true);
Scenario load_scenario(const std::filesystem::path &path);
std::string serialize_scenario(const Scenario &s);

/// Built objects.
AssemblyLayout scenario_layout(const Scenario &s);
/// All configured faults on the initial layout, regardless of onset.
FaultState scenario_faults(const Scenario &s);
SimConfig scenario_sim_config(const Scenario &s, const AssemblyLayout &layout);
CostWeights scenario_weights(const Scenario &s);
AttitudeObjectiveSpec scenario_attitude_spec(const Scenario &s);
PlannerOptions scenario_planner_options(const Scenario &s);

} // namespace mars
