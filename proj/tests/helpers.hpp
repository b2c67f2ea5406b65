#pragma once

#include <random>

#include "signalis/netgen.hpp"
#include "signalis/network.hpp"
#include "signalis/qubo.hpp"

namespace signalis::testing {

/// Two signalized intersections joined by a bidirectional road, terminals on
/// the far sides. Each has two modes: mode 0 passes the corridor axis, mode 1
/// passes the side road.
inline RoadNetwork two_node_corridor(double len = 100.0, double speed = 10.0) {
    RoadNetwork net;
    for (const char* id : {"i", "j"}) netgen::add_intersection(net, id, true);
    for (const char* id : {"wi", "wo", "ej", "eo", "ni", "no", "nj", "njo"})
        netgen::add_intersection(net, id, false);

    auto seg = [&](const std::string& a, const std::string& b, double l, double v) {
        return netgen::add_segment(net, a, b, l, v);
    };
    // corridor: wi -> i <-> j -> eo  (and the reverse through wo / ej)
    SegmentId in_i = seg("wi", "i", 200, speed);
    SegmentId out_i = seg("i", "wo", 200, speed);
    SegmentId ij = seg("i", "j", len, speed);
    SegmentId ji = seg("j", "i", len, speed);
    SegmentId out_j = seg("j", "eo", 200, speed);
    SegmentId in_j = seg("ej", "j", 200, speed);
    // side roads
    SegmentId n_in_i = seg("ni", "i", 150, speed);
    SegmentId n_out_i = seg("i", "no", 150, speed);
    SegmentId n_in_j = seg("nj", "j", 150, speed);
    SegmentId n_out_j = seg("j", "njo", 150, speed);

    Intersection& i = net.intersections.at("i");
    Mode i0, i1;
    i0.movements = {{in_i, ij}, {ji, out_i}};
    i1.movements = {{n_in_i, n_out_i}, {n_in_i, ij}};
    i.modes = {i0, i1};

    Intersection& jx = net.intersections.at("j");
    Mode j0, j1;
    j0.movements = {{ij, out_j}, {in_j, ji}};
    j1.movements = {{n_in_j, n_out_j}, {n_in_j, ji}};
    jx.modes = {j0, j1};

    net.rebuild_adjacency();
    return net;
}

/// Single signalized intersection with two modes (through / side road).
inline RoadNetwork one_node() {
    RoadNetwork net;
    netgen::add_intersection(net, "i", true);
    for (const char* id : {"a", "b", "c", "d"}) netgen::add_intersection(net, id, false);
    SegmentId in0 = netgen::add_segment(net, "a", "i", 100, 10);
    SegmentId out0 = netgen::add_segment(net, "i", "b", 100, 10);
    SegmentId in1 = netgen::add_segment(net, "c", "i", 100, 10);
    SegmentId out1 = netgen::add_segment(net, "i", "d", 100, 10);
    Mode m0, m1;
    m0.movements = {{in0, out0}};
    m1.movements = {{in1, out1}};
    net.intersections.at("i").modes = {m0, m1};
    net.rebuild_adjacency();
    return net;
}

/// Straight-from-the-formulas energy: throughput + continuity + one-hot
/// terms computed literally, independent of build_qubo's accumulation.
inline double direct_energy(const RoadNetwork& net, const CoefficientTables& tables,
                            const VariableIndex& index, const TrafficCounts& counts,
                            const Hyperparameters& params, const std::vector<uint8_t>& x) {
    auto sel = [&](const IntersectionId& i, int m) {
        return x[index.id(i, m)] ? 1.0 : 0.0;
    };
    double h1 = 0.0;
    double cmax = counts.max_count();
    if (cmax > 0.0)
        for (const auto& [iid, ix] : net.intersections) {
            if (!ix.signalized) continue;
            for (size_t m = 0; m < ix.modes.size(); ++m)
                h1 -= counts.get(iid, static_cast<int>(m)) / cmax * sel(iid, static_cast<int>(m));
        }

    double h2 = 0.0;
    for (const auto& [iid, ix] : net.intersections) {
        if (!ix.signalized) continue;
        auto adj = net.adjacency.find(iid);
        if (adj == net.adjacency.end()) continue;
        for (const IntersectionId& jid : adj->second) {
            const Intersection* jx = net.find_intersection(jid);
            if (!jx || !jx->signalized) continue;
            auto b_it = tables.B.find(IntersectionPair(iid, jid));
            if (b_it == tables.B.end()) continue;
            for (size_t m = 0; m < ix.modes.size(); ++m)
                for (size_t n = 0; n < jx->modes.size(); ++n) {
                    auto r_it = tables.R.find(
                        ModePairKey(iid, static_cast<int>(m), jid, static_cast<int>(n)));
                    if (r_it == tables.R.end()) continue;
                    h2 -= params.beta * b_it->second * r_it->second *
                          sel(iid, static_cast<int>(m)) * sel(jid, static_cast<int>(n));
                }
        }
    }

    double h3 = 0.0;
    for (const auto& [iid, ix] : net.intersections) {
        if (!ix.signalized) continue;
        double s = -1.0;
        for (size_t m = 0; m < ix.modes.size(); ++m) s += sel(iid, static_cast<int>(m));
        h3 += params.gamma * s * s;
    }
    return h1 + h2 + h3;
}

inline std::vector<uint8_t> random_bits(std::mt19937_64& rng, int n) {
    std::vector<uint8_t> x(n);
    for (int k = 0; k < n; ++k) x[k] = rng() & 1u;
    return x;
}

}  // namespace signalis::testing
