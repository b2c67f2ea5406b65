#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace signalis {

using IntersectionId = std::string;
using SegmentId = std::string;

/// Directed road segment between two intersections.
struct Segment {
    SegmentId id;
    IntersectionId from;
    IntersectionId to;
    double length_m = 0.0;
    double speed_limit_mps = 0.0;
};

/// One permitted approach->exit passage through an intersection.
struct Movement {
    SegmentId approach;  // must end at the owning intersection
    SegmentId exit;      // must start at the owning intersection

    friend bool operator<(const Movement& a, const Movement& b) {
        return std::tie(a.approach, a.exit) < std::tie(b.approach, b.exit);
    }
    friend bool operator==(const Movement& a, const Movement& b) {
        return a.approach == b.approach && a.exit == b.exit;
    }
};

/// A signal phase pattern: the set of movements that are green simultaneously.
struct Mode {
    std::set<Movement> movements;
};

struct Intersection {
    IntersectionId id;
    bool signalized = false;
    std::vector<Mode> modes;  // mode index is position in this list
};

/// Unordered intersection pair, canonically ordered.
struct IntersectionPair {
    IntersectionId a, b;

    IntersectionPair(IntersectionId x, IntersectionId y) {
        if (y < x) std::swap(x, y);
        a = std::move(x);
        b = std::move(y);
    }
    friend bool operator<(const IntersectionPair& p, const IntersectionPair& q) {
        return std::tie(p.a, p.b) < std::tie(q.a, q.b);
    }
    friend bool operator==(const IntersectionPair& p, const IntersectionPair& q) {
        return p.a == q.a && p.b == q.b;
    }
};

/// Key for the compatibility table: ((i, m), (j, n)) stored with i < j.
struct ModePairKey {
    IntersectionId i, j;
    int mode_i = 0, mode_j = 0;

    ModePairKey(IntersectionId ii, int mi, IntersectionId jj, int mj) {
        if (jj < ii) {
            std::swap(ii, jj);
            std::swap(mi, mj);
        }
        i = std::move(ii);
        j = std::move(jj);
        mode_i = mi;
        mode_j = mj;
    }
    friend bool operator<(const ModePairKey& p, const ModePairKey& q) {
        return std::tie(p.i, p.j, p.mode_i, p.mode_j) <
               std::tie(q.i, q.j, q.mode_i, q.mode_j);
    }
};

struct RoadNetwork {
    std::map<IntersectionId, Intersection> intersections;
    std::map<SegmentId, Segment> segments;
    // Undirected neighbor relation: j in neighbors(i) iff a segment joins i
    // and j in either direction.
    std::map<IntersectionId, std::set<IntersectionId>> adjacency;

    void rebuild_adjacency() {
        adjacency.clear();
        for (auto& [id, ix] : intersections) adjacency[id];
        for (const auto& [sid, seg] : segments) {
            adjacency[seg.from].insert(seg.to);
            adjacency[seg.to].insert(seg.from);
        }
    }

    const Intersection* find_intersection(const IntersectionId& id) const {
        auto it = intersections.find(id);
        return it == intersections.end() ? nullptr : &it->second;
    }
    const Segment* find_segment(const SegmentId& id) const {
        auto it = segments.find(id);
        return it == segments.end() ? nullptr : &it->second;
    }

    std::vector<IntersectionId> signalized_ids() const {
        std::vector<IntersectionId> out;
        for (const auto& [id, ix] : intersections)
            if (ix.signalized) out.push_back(id);
        return out;  // map order: already sorted by id
    }
};

/// Map-dependent structural coefficients, computed once per network.
struct CoefficientTables {
    // Connectivity weight per adjacent signalized pair, max-scaled to (0, 1].
    std::map<IntersectionPair, double> B;
    // Compatibility in {0, 1, 2} per adjacent signalized mode pair.
    std::map<ModePairKey, int> R;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

inline ValidationReport validate(const RoadNetwork& net) {
    ValidationReport rep;
    auto bad = [&rep](std::string msg) { rep.violations.push_back(std::move(msg)); };

    for (const auto& [sid, seg] : net.segments) {
        if (seg.id != sid) bad("segment map key '" + sid + "' does not match id");
        if (seg.length_m <= 0.0)
            bad("segment '" + sid + "': length must be positive");
        if (seg.speed_limit_mps <= 0.0)
            bad("segment '" + sid + "': speed limit must be positive");
        if (seg.from == seg.to)
            bad("segment '" + sid + "': from and to must differ");
        if (!net.find_intersection(seg.from))
            bad("segment '" + sid + "': unknown from-intersection '" + seg.from + "'");
        if (!net.find_intersection(seg.to))
            bad("segment '" + sid + "': unknown to-intersection '" + seg.to + "'");
    }

    for (const auto& [iid, ix] : net.intersections) {
        if (ix.id != iid) bad("intersection map key '" + iid + "' does not match id");
        if (ix.modes.empty() && ix.signalized)
            bad("intersection '" + iid + "': signalized but has no modes");
        std::set<std::set<Movement>> seen;
        for (size_t m = 0; m < ix.modes.size(); ++m) {
            const Mode& mode = ix.modes[m];
            if (mode.movements.empty())
                bad("intersection '" + iid + "': mode " + std::to_string(m) +
                    " has no movements");
            if (!seen.insert(mode.movements).second)
                bad("intersection '" + iid + "': duplicate movement set at mode " +
                    std::to_string(m));
            for (const Movement& mv : mode.movements) {
                const Segment* ap = net.find_segment(mv.approach);
                const Segment* ex = net.find_segment(mv.exit);
                if (!ap) {
                    bad("intersection '" + iid + "': movement references unknown approach '" +
                        mv.approach + "'");
                } else if (ap->to != iid) {
                    bad("intersection '" + iid + "': approach '" + mv.approach +
                        "' does not end at the intersection");
                }
                if (!ex) {
                    bad("intersection '" + iid + "': movement references unknown exit '" +
                        mv.exit + "'");
                } else if (ex->from != iid) {
                    bad("intersection '" + iid + "': exit '" + mv.exit +
                        "' does not start at the intersection");
                }
            }
        }
    }
    return rep;
}

/// Connectivity weights B over adjacent signalized pairs (Hz-like inverse
/// travel time), scaled so the largest entry is exactly 1.
inline std::map<IntersectionPair, double> compute_B(const RoadNetwork& net) {
    // Fastest connecting segment per direction, then mean of the two
    // directional raw values when both directions exist.
    std::map<std::pair<IntersectionId, IntersectionId>, double> directional;
    for (const auto& [sid, seg] : net.segments) {
        const Intersection* a = net.find_intersection(seg.from);
        const Intersection* b = net.find_intersection(seg.to);
        if (!a || !b || !a->signalized || !b->signalized) continue;
        double raw = seg.speed_limit_mps / seg.length_m;
        auto key = std::make_pair(seg.from, seg.to);
        auto it = directional.find(key);
        if (it == directional.end() || raw > it->second) directional[key] = raw;
    }

    std::map<IntersectionPair, double> out;
    std::map<IntersectionPair, std::pair<double, int>> acc;
    for (const auto& [dir, raw] : directional) {
        auto& [sum, n] = acc[IntersectionPair(dir.first, dir.second)];
        sum += raw;
        n += 1;
    }
    double max_raw = 0.0;
    for (auto& [pair, sn] : acc) {
        out[pair] = sn.first / sn.second;
        max_raw = std::max(max_raw, out[pair]);
    }
    if (max_raw > 0.0)
        for (auto& [pair, v] : out) v /= max_raw;
    return out;
}

namespace detail {

// True iff a vehicle can pass consecutively from `src` through `dst`:
// some movement of src's mode exits onto a segment ending at dst, and some
// movement of dst's mode approaches on a segment coming from src.
inline bool movable(const RoadNetwork& net, const Intersection& src, const Mode& src_mode,
                    const Intersection& dst, const Mode& dst_mode) {
    bool exits_towards = false;
    for (const Movement& mv : src_mode.movements) {
        const Segment* ex = net.find_segment(mv.exit);
        if (ex && ex->to == dst.id) {
            exits_towards = true;
            break;
        }
    }
    if (!exits_towards) return false;
    for (const Movement& mv : dst_mode.movements) {
        const Segment* ap = net.find_segment(mv.approach);
        if (ap && ap->from == src.id) return true;
    }
    return false;
}

}  // namespace detail

/// Compatibility R over adjacent signalized mode pairs: the number of
/// directions (i->j, j->i) a vehicle can traverse consecutively.
inline std::map<ModePairKey, int> compute_R(const RoadNetwork& net) {
    std::map<ModePairKey, int> out;
    for (const auto& [iid, ix] : net.intersections) {
        if (!ix.signalized) continue;
        auto adj_it = net.adjacency.find(iid);
        if (adj_it == net.adjacency.end()) continue;
        for (const IntersectionId& jid : adj_it->second) {
            if (jid <= iid) continue;  // each unordered pair once
            const Intersection* jx = net.find_intersection(jid);
            if (!jx || !jx->signalized) continue;
            for (size_t m = 0; m < ix.modes.size(); ++m) {
                for (size_t n = 0; n < jx->modes.size(); ++n) {
                    int r = 0;
                    if (detail::movable(net, ix, ix.modes[m], *jx, jx->modes[n])) ++r;
                    if (detail::movable(net, *jx, jx->modes[n], ix, ix.modes[m])) ++r;
                    out[ModePairKey(iid, static_cast<int>(m), jid, static_cast<int>(n))] = r;
                }
            }
        }
    }
    return out;
}

inline CoefficientTables compute_tables(const RoadNetwork& net) {
    return CoefficientTables{compute_B(net), compute_R(net)};
}

}  // namespace signalis
