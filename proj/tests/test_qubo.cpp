#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "signalis/io.hpp"
#include "signalis/netgen.hpp"
#include "signalis/qubo.hpp"

using namespace signalis;
using namespace signalis::testing;

TEST_CASE("variable index is a stable bijection") {
    std::mt19937_64 rng(3);
    RoadNetwork net = netgen::random_network(rng, 14);
    VariableIndex index(net);
    REQUIRE(index.num_vars() >= 14 - 1);
    for (int k = 0; k < index.num_vars(); ++k) {
        const auto& [iid, m] = index.var(k);
        CHECK(index.id(iid, m) == k);
    }
    // intersections sorted by id, modes contiguous ascending
    for (int k = 1; k < index.num_vars(); ++k) {
        const auto& a = index.var(k - 1);
        const auto& b = index.var(k);
        CHECK(a <= b);
    }
    CHECK_THROWS_AS(index.id("nope", 0), std::out_of_range);
}

TEST_CASE("single-intersection build matches the hand expansion") {
    RoadNetwork net = one_node();
    CoefficientTables tables = compute_tables(net);
    VariableIndex index(net);
    TrafficCounts counts;
    counts.c[{"i", 0}] = 3;
    counts.c[{"i", 1}] = 1;
    Qubo q = build_qubo(net, tables, index, counts, {0.5, 10.0});

    int k0 = index.id("i", 0), k1 = index.id("i", 1);
    CHECK(q.linear.at(k0) == Catch::Approx(-1.0 - 10.0));
    CHECK(q.linear.at(k1) == Catch::Approx(-1.0 / 3.0 - 10.0));
    CHECK(q.quadratic.at({std::min(k0, k1), std::max(k0, k1)}) == Catch::Approx(20.0));
    CHECK(q.offset == Catch::Approx(10.0));

    CHECK(evaluate(q, {1, 0}) == Catch::Approx(-1.0));
    CHECK(evaluate(q, {0, 1}) == Catch::Approx(-1.0 / 3.0));
    CHECK(evaluate(q, {0, 0}) == Catch::Approx(10.0));
    CHECK(evaluate(q, {1, 1}) == Catch::Approx(10.0 - 4.0 / 3.0));
}

TEST_CASE("all-zero counts with beta 0 leave a pure one-hot penalty") {
    RoadNetwork net = two_node_corridor();
    CoefficientTables tables = compute_tables(net);
    VariableIndex index(net);
    Qubo q = build_qubo(net, tables, index, TrafficCounts{}, {0.0, 10.0});
    CHECK(evaluate(q, {0, 0, 0, 0}) == Catch::Approx(20.0));  // gamma * N
    CHECK(evaluate(q, {1, 0, 1, 0}) == Catch::Approx(0.0));
    CHECK(evaluate(q, {0, 1, 1, 0}) == Catch::Approx(0.0));
}

TEST_CASE("coupling coefficient folds the pair double count") {
    RoadNetwork net = two_node_corridor(100.0, 10.0);  // single pair, B = 1
    CoefficientTables tables = compute_tables(net);
    REQUIRE(tables.R.at(ModePairKey("i", 0, "j", 0)) == 2);
    VariableIndex index(net);
    Qubo q = build_qubo(net, tables, index, TrafficCounts{}, {0.3, 10.0});
    int a = index.id("i", 0), b = index.id("j", 0);
    // -2 * beta * B * R = -2 * 0.3 * 1 * 2
    CHECK(q.quadratic.at({std::min(a, b), std::max(a, b)}) == Catch::Approx(-1.2));
}

TEST_CASE("build rejects bad counts") {
    RoadNetwork net = one_node();
    CoefficientTables tables = compute_tables(net);
    VariableIndex index(net);
    TrafficCounts bad;
    bad.c[{"i", 7}] = 1;
    CHECK_THROWS_WITH(build_qubo(net, tables, index, bad, {0.0, 10.0}),
                      Catch::Matchers::ContainsSubstring("7"));
    TrafficCounts neg;
    neg.c[{"i", 0}] = -2;
    CHECK_THROWS(build_qubo(net, tables, index, neg, {0.0, 10.0}));
}

TEST_CASE("evaluate rejects length mismatch") {
    RoadNetwork net = one_node();
    Qubo q = build_qubo(net, compute_tables(net), VariableIndex(net), {}, {0.0, 10.0});
    CHECK_THROWS(evaluate(q, {1, 0, 0}));
}

TEST_CASE("evaluate agrees with the straight-from-formula oracle") {
    std::mt19937_64 rng(17);
    int checked = 0;
    while (checked < 100) {
        RoadNetwork net = netgen::random_network(rng, 8 + static_cast<int>(rng() % 9));
        CoefficientTables tables = compute_tables(net);
        VariableIndex index(net);
        TrafficCounts counts = netgen::random_counts(rng, index);
        std::uniform_real_distribution<double> bpick(0.0, 0.1);
        Hyperparameters params{bpick(rng), 10.0};
        Qubo q = build_qubo(net, tables, index, counts, params);
        for (int rep = 0; rep < 5; ++rep, ++checked) {
            std::vector<uint8_t> x = random_bits(rng, index.num_vars());
            double direct = direct_energy(net, tables, index, counts, params, x);
            REQUIRE_THAT(evaluate(q, x), Catch::Matchers::WithinAbs(direct, 1e-9));
        }
    }
}

TEST_CASE("doubling raw counts leaves the QUBO unchanged") {
    std::mt19937_64 rng(23);
    RoadNetwork net = netgen::random_network(rng, 12);
    CoefficientTables tables = compute_tables(net);
    VariableIndex index(net);
    TrafficCounts counts = netgen::random_counts(rng, index);
    TrafficCounts doubled = counts;
    for (auto& [key, v] : doubled.c) v *= 2.0;
    Qubo q1 = build_qubo(net, tables, index, counts, {0.05, 10.0});
    Qubo q2 = build_qubo(net, tables, index, doubled, {0.05, 10.0});
    CHECK(q1.linear == q2.linear);
    CHECK(q1.quadratic == q2.quadratic);
    CHECK(q1.offset == q2.offset);
}

TEST_CASE("decode accepts one-hot vectors and repairs violations") {
    RoadNetwork net = one_node();
    VariableIndex index(net);
    TrafficCounts counts;
    counts.c[{"i", 0}] = 3;
    counts.c[{"i", 1}] = 1;

    ModeAssignment ok = decode({1, 0}, index, counts);
    CHECK(ok.feasible);
    CHECK(ok.repaired.empty());
    CHECK(ok.selected.at("i") == 0);

    ModeAssignment both = decode({1, 1}, index, counts);
    CHECK_FALSE(both.feasible);
    CHECK(both.repaired.count("i") == 1);
    CHECK(both.selected.at("i") == 0);  // larger count wins

    TrafficCounts c2;
    c2.c[{"i", 1}] = 5;
    ModeAssignment none = decode({0, 0}, index, c2);
    CHECK_FALSE(none.feasible);
    CHECK(none.selected.at("i") == 1);

    // tie goes to the lowest mode index
    TrafficCounts tie;
    tie.c[{"i", 0}] = 2;
    tie.c[{"i", 1}] = 2;
    CHECK(decode({1, 1}, index, tie).selected.at("i") == 0);
}

TEST_CASE("dwell penalty worked example") {
    RoadNetwork net = one_node();
    VariableIndex index(net);
    Qubo base = build_qubo(net, compute_tables(net), index, {}, {0.0, 10.0});
    DwellState dwell;
    dwell.crossing_s["i"] = 10.0;
    dwell.tau[{"i", 0}] = 0.0;
    dwell.tau[{"i", 1}] = 7.0;
    Qubo q = add_dwell_penalty(base, index, dwell);
    CHECK(q.linear.at(index.id("i", 0)) - base.linear.at(index.id("i", 0)) ==
          Catch::Approx(100.0));
    CHECK(q.linear.at(index.id("i", 1)) - base.linear.at(index.id("i", 1)) ==
          Catch::Approx(9.0));
    CHECK(q.quadratic == base.quadratic);
}

TEST_CASE("dwell penalty is identity at and beyond the crossing time") {
    RoadNetwork net = one_node();
    VariableIndex index(net);
    Qubo base = build_qubo(net, compute_tables(net), index, {}, {0.0, 10.0});
    DwellState dwell;
    dwell.crossing_s["i"] = 10.0;
    dwell.tau[{"i", 0}] = 10.0;
    dwell.tau[{"i", 1}] = 25.0;
    Qubo q = add_dwell_penalty(base, index, dwell);
    CHECK(q.linear == base.linear);
    CHECK(q.quadratic == base.quadratic);
    CHECK(q.offset == base.offset);
}

TEST_CASE("dwell penalty rejects bad durations") {
    RoadNetwork net = one_node();
    VariableIndex index(net);
    Qubo base = build_qubo(net, compute_tables(net), index, {}, {0.0, 10.0});
    DwellState neg;
    neg.crossing_s["i"] = 10.0;
    neg.tau[{"i", 0}] = -1.0;
    CHECK_THROWS(add_dwell_penalty(base, index, neg));
    DwellState zero_t;
    zero_t.crossing_s["i"] = 0.0;
    CHECK_THROWS(add_dwell_penalty(base, index, zero_t));
}

TEST_CASE("first-order census counts zero and nonzero throughput terms") {
    RoadNetwork net = two_node_corridor();
    CoefficientTables tables = compute_tables(net);
    VariableIndex index(net);

    Qubo empty = build_qubo(net, tables, index, {}, {0.0, 10.0});
    CHECK(census_first_order(empty) == std::pair<int, int>{4, 0});

    TrafficCounts counts;
    counts.c[{"i", 0}] = 3;
    counts.c[{"j", 1}] = 1;
    Qubo q = build_qubo(net, tables, index, counts, {0.0, 10.0});
    auto [zero, nonzero] = census_first_order(q);
    CHECK(zero == 2);
    CHECK(nonzero == 2);
    CHECK(zero + nonzero == index.num_vars());
}

TEST_CASE("counts JSON and triplet export") {
    nlohmann::json j = nlohmann::json::array();
    j.push_back({{"intersection", "i"}, {"mode", 0}, {"count", 3}});
    j.push_back({{"intersection", "i"}, {"mode", 1}, {"count", 1}});
    TrafficCounts counts = counts_from_json(j);
    CHECK(counts.get("i", 0) == 3.0);
    CHECK(counts.get("i", 2) == 0.0);

    RoadNetwork net = one_node();
    VariableIndex index(net);
    Qubo q = build_qubo(net, compute_tables(net), index, counts, {0.0, 10.0});
    std::ostringstream out;
    write_qubo_triplets(out, q);
    std::istringstream in(out.str());
    int m;
    double offset;
    in >> m >> offset;
    CHECK(m == 2);
    CHECK(offset == Catch::Approx(10.0));
    int k, l;
    double v;
    double rebuilt_energy = offset;  // energy of x = (1, 0)
    while (in >> k >> l >> v) {
        if (k == 0 && l == 0) rebuilt_energy += v;
    }
    CHECK(rebuilt_energy == Catch::Approx(evaluate(q, {1, 0})));
}
