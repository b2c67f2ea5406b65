#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "signalis/network.hpp"
#include "signalis/qubo.hpp"

namespace signalis {
namespace netgen {

// Synthetic benchmark networks: grids of signalized intersections whose
// missing arms end in boundary terminals, districts joined through
// unsignalized relay nodes, plus a T-junction and a five-way star.

struct DirLink {
    SegmentId in_seg;   // ends at the intersection
    SegmentId out_seg;  // starts at the intersection
};

inline double pick_length(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(100, 300);
    return static_cast<double>(d(rng));
}

inline double pick_speed(std::mt19937_64& rng) {
    static const double speeds[] = {10.0, 12.5, 15.0};
    std::uniform_int_distribution<int> d(0, 2);
    return speeds[d(rng)];
}

inline void add_intersection(RoadNetwork& net, const IntersectionId& id, bool signalized) {
    Intersection ix;
    ix.id = id;
    ix.signalized = signalized;
    net.intersections.emplace(id, std::move(ix));
}

inline SegmentId add_segment(RoadNetwork& net, const IntersectionId& from,
                             const IntersectionId& to, double length, double speed) {
    SegmentId id = "s_" + from + "__" + to;
    Segment seg{id, from, to, length, speed};
    net.segments.emplace(id, seg);
    return id;
}

/// Modes from directional arms: mode k gives green to every approach whose
/// direction index is congruent to k mod n_modes, towards any other arm.
inline void assign_modes(RoadNetwork& net, const IntersectionId& id,
                         const std::vector<DirLink>& arms, int n_modes) {
    Intersection& ix = net.intersections.at(id);
    int d = static_cast<int>(arms.size());
    for (int k = 0; k < n_modes; ++k) {
        Mode mode;
        for (int i = 0; i < d; ++i) {
            if (i % n_modes != k) continue;
            for (int j = 0; j < d; ++j) {
                if (j == i) continue;
                mode.movements.insert(Movement{arms[i].in_seg, arms[j].out_seg});
            }
        }
        if (!mode.movements.empty()) ix.modes.push_back(std::move(mode));
    }
}

/// A boundary terminal: a source node feeding the arm and a sink node
/// draining it.
inline DirLink add_terminal(RoadNetwork& net, const IntersectionId& ix,
                            const std::string& tag, std::mt19937_64& rng) {
    IntersectionId src = "t_in_" + ix + "_" + tag;
    IntersectionId dst = "t_out_" + ix + "_" + tag;
    add_intersection(net, src, false);
    add_intersection(net, dst, false);
    double len = pick_length(rng) + 150.0;  // generous injection capacity
    double spd = pick_speed(rng);
    return DirLink{add_segment(net, src, ix, len, spd), add_segment(net, ix, dst, len, spd)};
}

struct GridOptions {
    int rows = 3;
    int cols = 3;
    std::string prefix = "g";
    // Mode count per cell, row-major; empty draws 2 or 3 at random.
    std::vector<int> mode_counts;
};

/// Rectangular grid of signalized 4-way intersections. Outer arms end in
/// terminals unless an attachment overrides them.
struct Attachment {
    int row = 0, col = 0, dir = 0;         // dir: 0=N 1=E 2=S 3=W
    IntersectionId in_node, out_node;      // pre-existing unsignalized nodes
};

inline std::vector<IntersectionId> build_grid(RoadNetwork& net, const GridOptions& opt,
                                              std::mt19937_64& rng,
                                              const std::vector<Attachment>& attachments = {}) {
    auto name = [&opt](int r, int c) {
        return opt.prefix + "_" + std::to_string(r) + "_" + std::to_string(c);
    };
    std::vector<IntersectionId> ids;
    for (int r = 0; r < opt.rows; ++r)
        for (int c = 0; c < opt.cols; ++c) {
            add_intersection(net, name(r, c), true);
            ids.push_back(name(r, c));
        }

    // dir deltas: N, E, S, W
    const int dr[] = {-1, 0, 1, 0};
    const int dc[] = {0, 1, 0, -1};
    std::map<std::pair<int, int>, std::vector<DirLink>> arms;

    for (int r = 0; r < opt.rows; ++r) {
        for (int c = 0; c < opt.cols; ++c) {
            IntersectionId me = name(r, c);
            for (int dir = 0; dir < 4; ++dir) {
                int nr = r + dr[dir], nc = c + dc[dir];
                bool internal = nr >= 0 && nr < opt.rows && nc >= 0 && nc < opt.cols;
                if (internal) {
                    // Canonical creation from the E/S side only.
                    if (dir == 1 || dir == 2) {
                        IntersectionId nb = name(nr, nc);
                        double len = pick_length(rng);
                        double spd = pick_speed(rng);
                        SegmentId fwd = add_segment(net, me, nb, len, spd);
                        SegmentId bwd = add_segment(net, nb, me, len, spd);
                        arms[{r, c}].push_back(DirLink{bwd, fwd});
                        arms[{nr, nc}].push_back(DirLink{fwd, bwd});
                    } else {
                        // created by the neighbor's pass; placeholder keeps
                        // direction order, fixed below
                        arms[{r, c}];
                    }
                    continue;
                }
                const Attachment* att = nullptr;
                for (const Attachment& a : attachments)
                    if (a.row == r && a.col == c && a.dir == dir) att = &a;
                if (att) {
                    double len = pick_length(rng);
                    double spd = pick_speed(rng);
                    arms[{r, c}].push_back(
                        DirLink{add_segment(net, att->in_node, me, len, spd),
                                add_segment(net, me, att->out_node, len, spd)});
                } else {
                    arms[{r, c}].push_back(add_terminal(net, me, "d" + std::to_string(dir), rng));
                }
            }
        }
    }
    // The loop above appends arms out of direction order for internal N/W
    // links; rebuild each cell's arm list from the segment table instead.
    for (int r = 0; r < opt.rows; ++r) {
        for (int c = 0; c < opt.cols; ++c) {
            IntersectionId me = name(r, c);
            std::vector<DirLink> ordered;
            for (int dir = 0; dir < 4; ++dir) {
                int nr = r + dr[dir], nc = c + dc[dir];
                bool internal = nr >= 0 && nr < opt.rows && nc >= 0 && nc < opt.cols;
                IntersectionId in_from, out_to;
                if (internal) {
                    in_from = name(nr, nc);
                    out_to = name(nr, nc);
                } else {
                    const Attachment* att = nullptr;
                    for (const Attachment& a : attachments)
                        if (a.row == r && a.col == c && a.dir == dir) att = &a;
                    if (att) {
                        in_from = att->in_node;
                        out_to = att->out_node;
                    } else {
                        in_from = "t_in_" + me + "_d" + std::to_string(dir);
                        out_to = "t_out_" + me + "_d" + std::to_string(dir);
                    }
                }
                ordered.push_back(
                    DirLink{"s_" + in_from + "__" + me, "s_" + me + "__" + out_to});
            }
            int k;
            if (!opt.mode_counts.empty()) {
                k = opt.mode_counts[static_cast<size_t>(r) * opt.cols + c];
            } else {
                std::uniform_int_distribution<int> pick(2, 3);
                k = pick(rng);
            }
            assign_modes(net, me, ordered, k);
        }
    }
    return ids;
}

/// Star intersection with `n_arms` arms ending in terminals (or attachments
/// for the listed arm indices).
inline IntersectionId build_star(RoadNetwork& net, const std::string& id, int n_arms,
                                 int n_modes, std::mt19937_64& rng,
                                 const std::map<int, std::pair<IntersectionId, IntersectionId>>&
                                     attach = {}) {
    add_intersection(net, id, true);
    std::vector<DirLink> arms;
    for (int dir = 0; dir < n_arms; ++dir) {
        auto it = attach.find(dir);
        if (it != attach.end()) {
            double len = pick_length(rng);
            double spd = pick_speed(rng);
            arms.push_back(DirLink{add_segment(net, it->second.first, id, len, spd),
                                   add_segment(net, id, it->second.second, len, spd)});
        } else {
            arms.push_back(add_terminal(net, id, "d" + std::to_string(dir), rng));
        }
    }
    assign_modes(net, id, arms, n_modes);
    return id;
}

/// Unsignalized relay pair decoupling two signalized nodes: traffic flows
/// a -> u1 -> b and b -> u2 -> a, so a and b never become direct neighbors.
inline std::pair<IntersectionId, IntersectionId> add_relay_pair(RoadNetwork& net,
                                                               const std::string& tag) {
    IntersectionId u1 = "u_" + tag + "_fwd";
    IntersectionId u2 = "u_" + tag + "_bwd";
    add_intersection(net, u1, false);
    add_intersection(net, u2, false);
    return {u1, u2};
}

/// Simple corridor: `n` signalized 4-way intersections in a row, two modes
/// each.
inline RoadNetwork make_corridor(int n, uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    RoadNetwork net;
    GridOptions opt;
    opt.rows = 1;
    opt.cols = n;
    opt.prefix = "c";
    opt.mode_counts.assign(n, 2);
    build_grid(net, opt, rng);
    net.rebuild_adjacency();
    return net;
}

/// The benchmark city: four 3x3 districts joined through unsignalized
/// relays, plus a T-junction and a five-way star hanging off two of them.
/// Roughly one hundred binary variables; the signal-coupling graph splits
/// into one component per district.
inline RoadNetwork make_city(uint64_t seed = 42) {
    std::mt19937_64 rng(seed);
    RoadNetwork net;

    // Pre-create relay nodes for the district ring A-B-C-D and the two
    // appendages.
    auto [ab1, ab2] = add_relay_pair(net, "AB");
    auto [bc1, bc2] = add_relay_pair(net, "BC");
    auto [cd1, cd2] = add_relay_pair(net, "CD");
    auto [da1, da2] = add_relay_pair(net, "DA");
    auto [at1, at2] = add_relay_pair(net, "AT");  // district A <-> T-junction
    auto [cf1, cf2] = add_relay_pair(net, "CF");  // district C <-> five-way

    auto district = [&](const std::string& prefix, const std::vector<Attachment>& att) {
        GridOptions opt;
        opt.prefix = prefix;
        // Fixed mixed mode counts per district: five 3-mode, four 2-mode.
        opt.mode_counts = {3, 2, 3, 2, 3, 2, 3, 2, 3};
        build_grid(net, opt, rng, att);
    };

    // A: east edge to AB relays, south edge to DA relays, north arm to the
    // T-junction relays.
    district("dA", {{1, 2, 1, ab2, ab1}, {2, 1, 2, da2, da1}, {0, 1, 0, at2, at1}});
    // B: west edge from AB relays, south edge to BC relays.
    district("dB", {{1, 0, 3, ab1, ab2}, {2, 1, 2, bc2, bc1}});
    // C: north edge from BC relays, west edge to CD relays, east arm to the
    // five-way relays.
    district("dC", {{0, 1, 0, bc1, bc2}, {1, 0, 3, cd2, cd1}, {1, 2, 1, cf2, cf1}});
    // D: east edge from CD relays, north edge to DA relays.
    district("dD", {{1, 2, 1, cd1, cd2}, {0, 1, 0, da1, da2}});

    build_star(net, "tjunction", 3, 2, rng, {{1, {at1, at2}}});
    build_star(net, "fiveway", 5, 3, rng, {{3, {cf1, cf2}}});

    net.rebuild_adjacency();
    return net;
}

/// Random connected grid network with about `target_vars` binary variables
/// in a single coupling component (kept small enough to enumerate).
inline RoadNetwork random_network(std::mt19937_64& rng, int target_vars) {
    RoadNetwork net;
    std::vector<int> counts;
    int total = 0;
    std::uniform_int_distribution<int> pick(2, 3);
    while (total + 2 <= target_vars) {
        int k = pick(rng);
        if (total + k > target_vars) k = 2;
        if (total + k > target_vars) break;
        counts.push_back(k);
        total += k;
    }
    if (counts.empty()) counts.push_back(2);
    int n = static_cast<int>(counts.size());
    GridOptions opt;
    opt.cols = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
    opt.rows = (n + opt.cols - 1) / opt.cols;
    counts.resize(static_cast<size_t>(opt.rows) * opt.cols, 2);
    opt.mode_counts = counts;
    opt.prefix = "r";
    build_grid(net, opt, rng);
    net.rebuild_adjacency();
    return net;
}

/// Random multi-district network at roughly `target_vars` variables whose
/// coupling graph decomposes into enumerable components.
inline RoadNetwork random_city(std::mt19937_64& rng, int target_vars,
                               int district_vars = 24) {
    RoadNetwork net;
    int n_districts = std::max(1, (target_vars + district_vars / 2) / district_vars);
    std::uniform_int_distribution<int> pick(2, 3);
    IntersectionId prev_in, prev_out;
    for (int d = 0; d < n_districts; ++d) {
        std::vector<int> counts;
        int total = 0;
        while (total + 2 <= district_vars) {
            int k = pick(rng);
            if (total + k > district_vars) k = 2;
            counts.push_back(k);
            total += k;
        }
        int n = static_cast<int>(counts.size());
        GridOptions opt;
        opt.cols = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
        opt.rows = (n + opt.cols - 1) / opt.cols;
        counts.resize(static_cast<size_t>(opt.rows) * opt.cols, 2);
        opt.mode_counts = counts;
        opt.prefix = "rc" + std::to_string(d);
        std::vector<Attachment> att;
        if (d > 0) att.push_back({0, 0, 3, prev_in, prev_out});
        if (d + 1 < n_districts) {
            auto [u1, u2] = add_relay_pair(net, "link" + std::to_string(d));
            att.push_back({0, opt.cols - 1, 1, u2, u1});
            prev_in = u1;
            prev_out = u2;
        }
        build_grid(net, opt, rng, att);
    }
    net.rebuild_adjacency();
    return net;
}

/// Random integer counts; `zero_prob` entries are omitted (implicit zero).
inline TrafficCounts random_counts(std::mt19937_64& rng, const VariableIndex& index,
                                   double zero_prob = 0.4, int max_count = 30) {
    TrafficCounts counts;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::uniform_int_distribution<int> val(1, max_count);
    for (int k = 0; k < index.num_vars(); ++k) {
        if (uni(rng) < zero_prob) continue;
        const auto& [iid, mode] = index.var(k);
        counts.c[{iid, mode}] = static_cast<double>(val(rng));
    }
    return counts;
}

}  // namespace netgen
}  // namespace signalis
