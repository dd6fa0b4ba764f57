#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mars/harness.hpp"

#include <json.hpp>

#include <fstream>

using namespace mars;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string &name)
{
    const fs::path p = fs::temp_directory_path() / ("mars_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int count_lines(const fs::path &p)
{
    std::ifstream f(p);
    std::string line;
    int n = 0;
    while (std::getline(f, line))
        ++n;
    return n;
}

Scenario short_hover(const std::string &name)
{
    return parse_scenario("name: " + name + R"(
layout: {cells: [[0,0],[0,1],[1,0],[1,1]]}
reference: {type: spiral, radius: 0.5}
faults: {onset: 1.0, rotors: [{unit: 1, rotor: 1, eta: 0.5}]}
sim: {duration: 3.0}
plot_dt: 0.1
)");
}

} // namespace

TEST_CASE("improvement percentage and comparison")
{
    CHECK(improvement_percent(2.0, 1.0) == doctest::Approx(50.0));
    CHECK(improvement_percent(1.0, 2.0) == doctest::Approx(-100.0));
    CHECK(improvement_percent(0.0, 1.0) == 0.0);

    ScenarioOutcome a, b;
    a.name = "base";
    a.mean_rms = 0.4;
    b.name = "ours";
    b.mean_rms = 0.1;
    const ComparisonReport ab = compare(a, b);
    const ComparisonReport ba = compare(b, a);
    REQUIRE(ab.rows.size() == 1);
    CHECK(ab.rows[0].improvement == doctest::Approx(75.0));
    // Swapping roles flips the sign of the improvement.
    CHECK(ba.rows[0].improvement < 0.0);
    CHECK(ab.format().find("75.0%") != std::string::npos);
}

TEST_CASE("a run writes trace, plots and metrics")
{
    const fs::path out = scratch("run");
    RunOptions opt;
    opt.output_dir = out;
    const Scenario s = short_hover("hover4");
    const ScenarioOutcome o = run_scenario(s, opt);
    CHECK_FALSE(o.diverged);
    CHECK(o.trials.size() == 1);

    const fs::path dir = out / "hover4";
    std::ifstream trace(dir / "trace.csv");
    std::string first, header;
    std::getline(trace, first);
    std::getline(trace, header);
    CHECK(first == "# mars trace schema " + std::to_string(kTraceSchemaVersion));
    CHECK(std::count(header.begin(), header.end(), ',') == 27);

    // Rows at t = k * plot_dt for k < duration / plot_dt, plus a header.
    for (const char *name : {"path_xy.csv", "path_xz.csv", "error_vs_time.csv", "yaw_vs_time.csv"})
        CHECK(count_lines(dir / "plots" / name) == 1 + 30);
    CHECK(count_lines(dir / "plots" / "events.csv") >= 2);

    std::ifstream mf(dir / "metrics.json");
    const auto j = nlohmann::json::parse(mf);
    CHECK(j.at("schema") == kMetricsSchemaVersion);
    CHECK(j.at("rms_error").get<double>() == doctest::Approx(o.mean_rms));
    CHECK(j.at("trials").size() == 1);
    fs::remove_all(out);
}

TEST_CASE("trials are jittered reproducibly")
{
    Scenario s = short_hover("jit");
    s.trial_count = 3;
    s.jitter = 0.05;
    const ScenarioOutcome a = run_scenario(s);
    const ScenarioOutcome b = run_scenario(s);
    REQUIRE(a.trials.size() == 3);
    CHECK(a.trials[0].rms_error == b.trials[0].rms_error);
    CHECK(a.trials[0].rms_error != a.trials[1].rms_error);
    CHECK(a.std_rms > 0.0);
}

TEST_CASE("dt override reaches the plant")
{
    const Scenario s = short_hover("dt");
    RunOptions opt;
    opt.dt_override = 5e-4;
    const ScenarioOutcome fine = run_scenario(s, opt);
    const ScenarioOutcome coarse = run_scenario(s);
    CHECK(fine.mean_rms != coarse.mean_rms);
    CHECK(fine.mean_rms == doctest::Approx(coarse.mean_rms).epsilon(0.05));
}

TEST_CASE("batch pairs runs and writes a comparison")
{
    const fs::path in = scratch("batch_in"), out = scratch("batch_out");
    for (const char *mode : {"attitude_aware", "kinematic_only"})
    {
        Scenario s = short_hover(std::string("pair_") + mode);
        s.pair = "p";
        s.planner_mode = planner_mode_from_string(mode);
        std::ofstream(in / (s.name + ".yaml")) << serialize_scenario(s);
    }
    std::ofstream(in / "notes.txt") << "ignored";
    RunOptions opt;
    opt.output_dir = out;
    const BatchResult r = run_batch(in, opt);
    CHECK(r.outcomes.size() == 2);
    REQUIRE(r.report.rows.size() == 1);
    CHECK(r.report.rows[0].configuration == "p");
    CHECK(fs::exists(out / "comparison.txt"));
    fs::remove_all(in);
    fs::remove_all(out);
}

TEST_CASE("planner scenarios report failure without throwing")
{
    const fs::path dir = scratch("plan");
    std::ofstream(dir / "walled.map") << "resolution 0.1\n..........\n..........\n##########\n..........\n";
    const Scenario s = parse_scenario(R"(name: walled
layout: {cells: [[0,0]], pitch: 0.1}
reference: {type: planner, map: walled.map, start: [0.15, 0.05, 0], goal: [0.15, 0.35, 0]}
)",
                                      dir);
    const ScenarioOutcome o = run_scenario(s);
    CHECK(o.planner_failed);
    CHECK_FALSE(o.message.empty());
    fs::remove_all(dir);
}
