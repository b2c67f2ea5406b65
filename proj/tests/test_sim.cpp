#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>

#include "helpers.hpp"
#include "signalis/netgen.hpp"
#include "signalis/sim.hpp"

using namespace signalis;
using namespace signalis::testing;

namespace {

SignalState all_mode(const RoadNetwork& net, int mode) {
    SignalState s;
    for (const auto& [iid, ix] : net.intersections)
        if (ix.signalized) s.set_mode(iid, std::min<int>(mode, ix.modes.size() - 1), 0);
    return s;
}

}  // namespace

TEST_CASE("fixed cycle splits 90 seconds equally") {
    CHECK(fixed_cycle_mode(0, 2) == 0);
    CHECK(fixed_cycle_mode(44, 2) == 0);
    CHECK(fixed_cycle_mode(45, 2) == 1);
    CHECK(fixed_cycle_mode(89, 2) == 1);
    CHECK(fixed_cycle_mode(90, 2) == 0);
    CHECK(fixed_cycle_mode(30, 3) == 1);
    CHECK(fixed_cycle_mode(89.9, 3) == 2);
    CHECK(fixed_cycle_mode(7, 1) == 0);
}

TEST_CASE("unobstructed vehicle arrives on schedule without waiting") {
    RoadNetwork net = one_node();
    World world(net, SimParams{}, 1);
    // 100 m approach + 100 m exit + arrival at the far end: 20 ticks at 10 m/s
    world.add_vehicle({"s_a__i", "s_i__b"});
    SignalState green = all_mode(net, 0);
    for (int t = 0; t < 19; ++t) world.step(green, t);
    CHECK(world.arrived() == 0);
    world.step(green, 19);
    CHECK(world.arrived() == 1);
    CHECK(world.total_waiting() == 0.0);
}

TEST_CASE("vehicle held at red accrues exactly the red ticks") {
    RoadNetwork net = one_node();
    World world(net, SimParams{}, 1);
    world.add_vehicle({"s_a__i", "s_i__b"});
    SignalState red = all_mode(net, 1);   // side road green, corridor red
    SignalState green = all_mode(net, 0);
    // 10 ticks to reach the line (no waiting: still rolling), then 9 red ticks
    for (int t = 0; t < 19; ++t) world.step(red, t);
    CHECK(world.total_waiting() == Catch::Approx(9.0));
    for (int t = 19; t < 40; ++t) world.step(green, t);
    CHECK(world.arrived() == 1);
    CHECK(world.total_waiting() == Catch::Approx(9.0));
}

TEST_CASE("queue discharges one vehicle per headway") {
    RoadNetwork net = one_node();
    SimParams params;
    params.headway_s = 2.0;
    World world(net, params, 1);
    world.add_vehicle({"s_a__i", "s_i__b"}, 0, 99.0);
    world.add_vehicle({"s_a__i", "s_i__b"}, 0, 90.0);
    world.add_vehicle({"s_a__i", "s_i__b"}, 0, 80.0);
    SignalState green = all_mode(net, 0);
    // front crosses at t=0, second at t=2, third at t=4
    world.step(green, 0);
    CHECK(world.vehicles()[0].route_pos == 1);
    CHECK(world.vehicles()[1].route_pos == 0);
    world.step(green, 1);
    CHECK(world.vehicles()[1].route_pos == 0);  // gate closed
    world.step(green, 2);
    CHECK(world.vehicles()[1].route_pos == 1);
    world.step(green, 3);
    CHECK(world.vehicles()[2].route_pos == 0);
    world.step(green, 4);
    CHECK(world.vehicles()[2].route_pos == 1);
}

TEST_CASE("collect_counts reflects queued vehicles per permitting mode") {
    RoadNetwork net = one_node();
    World world(net, SimParams{}, 1);
    CHECK(world.collect_counts().c.empty());

    world.add_vehicle({"s_a__i", "s_i__b"}, 0, 95.0);
    world.add_vehicle({"s_a__i", "s_i__b"}, 0, 85.0);
    world.add_vehicle({"s_a__i", "s_i__b"}, 0, 30.0);  // outside the 50 m zone
    TrafficCounts counts = world.collect_counts();
    CHECK(counts.get("i", 0) == 2.0);
    CHECK(counts.get("i", 1) == 0.0);
}

TEST_CASE("a movement permitted by several modes counts once per mode") {
    RoadNetwork net = one_node();
    // let mode 1 also pass the corridor movement
    net.intersections.at("i").modes[1].movements.insert(Movement{"s_a__i", "s_i__b"});
    World world(net, SimParams{}, 1);
    world.add_vehicle({"s_a__i", "s_i__b"}, 0, 95.0);
    TrafficCounts counts = world.collect_counts();
    CHECK(counts.get("i", 0) == 1.0);
    CHECK(counts.get("i", 1) == 1.0);
}

TEST_CASE("queued vehicles beyond the detection zone still count at red") {
    RoadNetwork net = one_node();
    World world(net, SimParams{}, 1);
    for (int k = 0; k < 10; ++k)
        world.add_vehicle({"s_a__i", "s_i__b"}, 0, 99.0 - 8.0 * k);
    SignalState red = all_mode(net, 1);
    for (int t = 0; t < 3; ++t) world.step(red, t);
    // tail of the queue sits beyond 50 m but is stopped at red
    TrafficCounts counts = world.collect_counts();
    CHECK(counts.get("i", 0) == 10.0);
}

TEST_CASE("vehicle conservation holds across a loaded run") {
    RoadNetwork net = netgen::make_corridor(3);
    CoefficientTables tables = compute_tables(net);
    Scenario sc;
    sc.initial_vehicle_count = 40;
    sc.injection_rate = 1.0;
    sc.duration_s = 120;
    sc.t_interval_s = 5;
    sc.seed = 2024;
    ControllerConfig fixed;
    fixed.type = ControllerConfig::Type::FixedCycle;
    SimMetrics m = run_simulation(net, tables, sc, fixed);
    CHECK(m.vehicles_injected == m.vehicles_on_map + m.vehicles_arrived);
    CHECK(m.vehicles_injected >= 40);
    CHECK(m.total_waiting_s > 0.0);
}

TEST_CASE("simulation runs are bit-identical for a fixed seed") {
    RoadNetwork net = netgen::make_corridor(3);
    CoefficientTables tables = compute_tables(net);
    Scenario sc;
    sc.initial_vehicle_count = 30;
    sc.duration_s = 100;
    sc.t_interval_s = 5;
    sc.seed = 77;
    ControllerConfig ctrl;
    ctrl.type = ControllerConfig::Type::Optimized;
    ctrl.solver = SolverKind::Sa;
    ctrl.sa.num_reads = 5;
    ctrl.sa.num_sweeps = 20;
    ctrl.params = {0.05, 10.0};
    SimMetrics a = run_simulation(net, tables, sc, ctrl);
    SimMetrics b = run_simulation(net, tables, sc, ctrl);
    CHECK(a.total_waiting_s == b.total_waiting_s);
    CHECK(a.vehicles_arrived == b.vehicles_arrived);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i].energy == b.steps[i].energy);
}

TEST_CASE("optimizer runs once per interval") {
    RoadNetwork net = netgen::make_corridor(2);
    CoefficientTables tables = compute_tables(net);
    Scenario sc;
    sc.initial_vehicle_count = 5;
    sc.injection_rate = 0.5;
    sc.duration_s = 400;
    sc.t_interval_s = 5;
    sc.seed = 8;
    ControllerConfig ctrl;
    ctrl.type = ControllerConfig::Type::Optimized;
    ctrl.solver = SolverKind::Exact;
    ctrl.params = {0.02, 10.0};
    SimMetrics m = run_simulation(net, tables, sc, ctrl);
    CHECK(m.optimizer_calls == 80);
    CHECK(m.steps.size() == 80);

    sc.duration_s = 90;
    sc.t_interval_s = 10;
    CHECK(run_simulation(net, tables, sc, ctrl).optimizer_calls == 9);
}

TEST_CASE("scenario rejects a duration not divisible by the interval") {
    Scenario sc;
    sc.duration_s = 101;
    sc.t_interval_s = 5;
    CHECK_THROWS(sc.check());
}

TEST_CASE("waiting time matches an independent recount of the event log") {
    RoadNetwork net = netgen::make_corridor(3);
    CoefficientTables tables = compute_tables(net);
    Scenario sc;
    sc.initial_vehicle_count = 25;
    sc.injection_rate = 1.0;
    sc.duration_s = 150;
    sc.t_interval_s = 5;
    sc.seed = 31;
    ControllerConfig fixed;
    fixed.type = ControllerConfig::Type::FixedCycle;
    std::ostringstream log;
    SimMetrics m = run_simulation(net, tables, sc, fixed, SimParams{}, &log);

    std::map<int, int> stop_tick;
    double recount = 0.0;
    std::istringstream in(log.str());
    std::string line;
    while (std::getline(in, line)) {
        auto c1 = line.find(','), c2 = line.rfind(',');
        int tick = std::stoi(line.substr(0, c1));
        int vid = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        std::string event = line.substr(c2 + 1);
        if (event == "stop") {
            stop_tick[vid] = tick;
        } else if (event == "go" || event == "arrive") {
            if (stop_tick.count(vid)) {
                recount += tick - stop_tick[vid];
                stop_tick.erase(vid);
            }
        }
    }
    for (const auto& [vid, t] : stop_tick) recount += sc.duration_s - t;
    CHECK(m.total_waiting_s == Catch::Approx(recount));
    CHECK(m.total_waiting_s > 0.0);
}

TEST_CASE("exact control never loses to the worst static mode on one intersection") {
    RoadNetwork net = one_node();
    CoefficientTables tables = compute_tables(net);
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
        Scenario sc;
        sc.initial_vehicle_count = 6;
        sc.injection_rate = 0.5;
        sc.duration_s = 100;
        sc.t_interval_s = 5;
        sc.seed = seed;

        ControllerConfig opt;
        opt.type = ControllerConfig::Type::Optimized;
        opt.solver = SolverKind::Exact;
        opt.params = {0.0, 10.0};
        double optimized = run_simulation(net, tables, sc, opt).total_waiting_s;

        double worst_static = 0.0;
        for (int mode : {0, 1}) {
            ControllerConfig st;
            st.type = ControllerConfig::Type::Static;
            st.fixed_assignment["i"] = mode;
            worst_static =
                std::max(worst_static, run_simulation(net, tables, sc, st).total_waiting_s);
        }
        CHECK(optimized <= worst_static + 1e-9);
    }
}

TEST_CASE("green wave through a static corridor stays waiting-free") {
    RoadNetwork net = two_node_corridor();
    CoefficientTables tables = compute_tables(net);
    World world(net, SimParams{}, 4);
    world.add_vehicle({"s_wi__i", "s_i__j", "s_j__eo"});
    SignalState green = all_mode(net, 0);
    for (int t = 0; t < 60; ++t) world.step(green, t);
    CHECK(world.arrived() == 1);
    CHECK(world.total_waiting() == 0.0);
}
