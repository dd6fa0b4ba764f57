#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mars/scenario.hpp"

using namespace mars;

namespace
{

const char *kSpiral = R"(name: s
layout:
  cells: [[0,0],[0,1],[0,2],[1,0],[1,1],[1,2]]
  pitch: 0.5
reference:
  type: spiral
  radius: 1.0
faults:
  onset: 2.0
  rotors: [{unit: 2, rotor: 2, eta: 0.5}]
events:
  - {t: 3.0, type: separate, unit: 6}
ftc_mode: partial
trials: {count: 3, seed: 9, jitter: 0.01}
)";

std::string error_of(const std::string &text)
{
    try
    {
        parse_scenario(text, {}, false);
    }
    catch (const InvalidArgument &e)
    {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("parse and round-trip")
{
    const Scenario s = parse_scenario(kSpiral);
    CHECK(s.name == "s");
    CHECK(s.cells.size() == 6);
    CHECK(s.ftc == FtcMode::partial);
    CHECK(s.trial_count == 3);
    CHECK(s.faults.rotors.at(0).eta == 0.5);
    CHECK(s.events.at(0).type == "separate");
    const Scenario back = parse_scenario(serialize_scenario(s));
    CHECK(back == s);
}

TEST_CASE("errors name the field and the line")
{
    std::string bad = kSpiral;
    bad.replace(bad.find("eta: 0.5"), 8, "eta: 1.5");
    const std::string msg = error_of(bad);
    CHECK(msg.find("faults.rotors[0].eta") != std::string::npos);
    CHECK(msg.find("line 10") != std::string::npos);

    CHECK(error_of("name: x\nlayout: {cells: [[0,0]]}\nreference: {type: spiral}\nbogus: 1\n").find("bogus") !=
          std::string::npos);
    CHECK(error_of("name: x\nlayout: {cells: [[0,0]]}\nreference: {type: loop}\n").find("reference.type") !=
          std::string::npos);
    CHECK_FALSE(error_of("name: x\nlayout: {cells: [[0,0],[0,2]]}\nreference: {type: spiral}\n").empty());
    CHECK_FALSE(error_of("name: x\nlayout: {cells: [[0,0]]}\nreference: {type: spiral}\nftc_mode: maybe\n").empty());
    CHECK_FALSE(error_of("name: x\nlayout: {cells: [[0,0]]}\nreference: {type: spiral}\nsim: {dt: 0.5}\n").empty());
    CHECK_FALSE(error_of("layout: [oops\n").empty());
}

TEST_CASE("missing map file is reported")
{
    const std::string text =
        "name: p\nlayout: {cells: [[0,0]]}\nreference: {type: planner, map: nowhere.map, start: [1,1,0], goal: "
        "[2,2,0]}\n";
    CHECK_THROWS_AS(parse_scenario(text, "/tmp"), InvalidArgument);
    CHECK_NOTHROW(parse_scenario(text, "/tmp", false));
}

TEST_CASE("unit ids follow file order")
{
    const Scenario s = parse_scenario(R"(name: ids
layout: {cells: [[1,0],[0,0]]}
reference: {type: hover}
faults: {failed_units: [1]}
)");
    const AssemblyLayout l = scenario_layout(s);
    const FaultState f = scenario_faults(s);
    // File unit 1 is cell (1,0), which sorts second in the layout.
    CHECK(f.status(1) == UnitStatus::failed);
    CHECK(f.status(0) == UnitStatus::healthy);
    const SimConfig cfg = scenario_sim_config(s, l);
    CHECK(cfg.unit_ids == std::vector<int>{2, 1});
}

TEST_CASE("kinematic-only mode removes the attitude terms")
{
    Scenario s = parse_scenario(kSpiral);
    s.planner_mode = PlannerMode::kinematic_only;
    CHECK(scenario_attitude_spec(s).L_phi == 0.0);
    CHECK(scenario_weights(s).lambda_phi == 0.0);
    s.planner_mode = PlannerMode::attitude_aware;
    CHECK(scenario_attitude_spec(s).L_phi > 0.0);
    CHECK(scenario_planner_options(s).yaw_step == doctest::Approx(deg2rad(15.0)));
}

TEST_CASE("onset turns faults into timed events")
{
    const Scenario s = parse_scenario(kSpiral);
    const SimConfig cfg = scenario_sim_config(s, scenario_layout(s));
    CHECK_FALSE(cfg.faults.any_fault());
    int rotor_events = 0;
    for (const auto &e : cfg.events)
        if (e.kind == SimEvent::Kind::rotor_eta)
        {
            ++rotor_events;
            CHECK(e.t == 2.0);
        }
    CHECK(rotor_events == 1);
}

TEST_CASE("every committed scenario loads and round-trips")
{
    int count = 0;
    for (const auto &entry : std::filesystem::directory_iterator(std::string(MARS_SOURCE_DIR) + "/scenarios"))
    {
        if (entry.path().extension() != ".yaml")
            continue;
        CAPTURE(entry.path().string());
        const Scenario s = load_scenario(entry.path());
        Scenario back = parse_scenario(serialize_scenario(s), s.base_dir);
        back.base_dir = s.base_dir;
        CHECK(back == s);
        ++count;
    }
    CHECK(count >= 10);
}
