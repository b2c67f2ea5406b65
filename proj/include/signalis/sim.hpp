#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <set>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "signalis/network.hpp"
#include "signalis/qubo.hpp"
#include "signalis/solvers.hpp"

namespace signalis {

struct SimParams {
    double detection_distance_m = 50.0;  // counts sensor range upstream of the stop line
    double gap_m = 7.0;                  // stopped single-file spacing
    double headway_s = 2.0;              // per-vehicle crossing headway at the stop line
    int dt_s = 1;
};

struct Vehicle {
    int id = 0;
    std::vector<SegmentId> route;
    int route_pos = 0;
    double offset_m = 0.0;
    double waiting_s = 0.0;
    bool arrived = false;
    bool red_waiting = false;  // accruing waiting time this tick

    const SegmentId& current_segment() const { return route[route_pos]; }
    bool on_last_segment() const { return route_pos + 1 == static_cast<int>(route.size()); }
};

struct SignalState {
    std::map<IntersectionId, int> current_mode;
    std::map<IntersectionId, int> held_since;  // tick the current mode was entered

    void set_mode(const IntersectionId& id, int mode, int tick) {
        auto it = current_mode.find(id);
        if (it == current_mode.end() || it->second != mode) {
            current_mode[id] = mode;
            held_since[id] = tick;
        }
    }
};

enum class SolverKind { Sa, Exact, Local };

struct ControllerConfig {
    enum class Type { FixedCycle, Optimized, Static } type = Type::FixedCycle;
    // FixedCycle
    double cycle_s = 90.0;
    // Optimized
    SolverKind solver = SolverKind::Exact;
    Hyperparameters params;
    SaConfig sa;
    bool compare_exact = false;  // also run the exact oracle per step for the energy gap
    // Static
    std::map<IntersectionId, int> fixed_assignment;
};

struct Scenario {
    int initial_vehicle_count = 200;
    double injection_rate = 2.0;  // vehicles per second
    int duration_s = 400;
    int t_interval_s = 5;
    uint64_t seed = 0;

    void check() const {
        if (t_interval_s <= 0 || duration_s <= 0)
            throw std::invalid_argument("duration and t_interval must be positive");
        if (duration_s % t_interval_s != 0)
            throw std::invalid_argument("duration must be a multiple of t_interval");
    }
};

struct StepRecord {
    int tick = 0;
    double energy = 0.0;        // energy of the applied assignment
    double exact_energy = 0.0;  // oracle energy when compare_exact is on
    double rel_energy_err = 0.0;
    double solver_ms = 0.0;
    int zero_terms = 0;
    int nonzero_terms = 0;
};

struct SimMetrics {
    double total_waiting_s = 0.0;
    int vehicles_arrived = 0;
    int vehicles_injected = 0;  // includes the initial placement
    int vehicles_on_map = 0;
    int optimizer_calls = 0;
    std::vector<StepRecord> steps;
};

inline int fixed_cycle_mode(double t, int n_modes, double cycle_s = 90.0) {
    if (n_modes <= 1) return 0;
    double phase = std::fmod(t, cycle_s);
    int mode = static_cast<int>(phase / (cycle_s / n_modes));
    return std::min(mode, n_modes - 1);
}

/// Deterministic discrete-time microsimulation world.
class World {
public:
    World(const RoadNetwork& net, const SimParams& params, uint64_t seed)
        : net_(net), params_(params), rng_(seed) {
        for (const auto& [sid, seg] : net_.segments) order_[sid];
        build_turn_graph();
        find_boundaries();
    }

    const RoadNetwork& network() const { return net_; }
    const std::vector<Vehicle>& vehicles() const { return vehicles_; }
    const SimParams& params() const { return params_; }
    int injected() const { return injected_; }
    int arrived() const { return arrived_; }
    double total_waiting() const {
        double sum = 0.0;
        for (const auto& v : vehicles_)
            if (!v.arrived) sum += v.waiting_s;
        return sum + waiting_of_arrived_;
    }
    int on_map() const {
        int n = 0;
        for (const auto& v : vehicles_) n += !v.arrived;
        return n;
    }

    void set_event_log(std::ostream* log) { event_log_ = log; }

    /// Place the initial fleet at seeded random positions along random routes.
    void populate(int count) {
        for (int n = 0; n < count; ++n) {
            std::vector<SegmentId> route = random_route();
            if (route.empty()) continue;
            std::uniform_int_distribution<int> seg_pick(0, static_cast<int>(route.size()) - 1);
            int pos = seg_pick(rng_);
            const Segment& seg = net_.segments.at(route[pos]);
            std::uniform_real_distribution<double> off_pick(0.0, seg.length_m * 0.95);
            spawn(std::move(route), pos, off_pick(rng_), 0);
        }
    }

    /// Place one vehicle with an explicit route (tests and tools).
    int add_vehicle(std::vector<SegmentId> route, int pos = 0, double offset = 0.0) {
        int id = next_id_;
        spawn(std::move(route), pos, offset, 0);
        return id;
    }

    /// Advance one tick under the given signal state.
    void step(const SignalState& signals, int tick) {
        const double dt = params_.dt_s;

        // Move front-to-back per segment so gaps are computed against
        // already-updated leaders. Segments processed in id order; a vehicle
        // crossing into a not-yet-processed segment is marked and skipped
        // there this tick.
        std::set<int> moved;
        for (auto& [sid, q] : order_) {
            const Segment& seg = net_.segments.at(sid);
            double leader_tail = std::numeric_limits<double>::infinity();
            // Snapshot: cross() erases from q mid-iteration, which would
            // otherwise shift the follower out of this tick's update.
            const std::vector<int> ids(q.begin(), q.end());
            for (size_t qi = 0; qi < ids.size(); ++qi) {
                int vid = ids[qi];
                Vehicle& v = vehicles_[vid];
                if (moved.count(vid)) {
                    leader_tail = v.offset_m - params_.gap_m;
                    continue;
                }
                moved.insert(vid);
                double advance = seg.speed_limit_mps * dt;
                double limit = std::min(leader_tail, seg.length_m);
                double target = std::min(v.offset_m + advance, limit);

                bool at_line = v.offset_m + advance >= seg.length_m - 1e-9 &&
                               target >= seg.length_m - 1e-9;
                if (at_line && qi == 0) {
                    if (v.on_last_segment()) {
                        v.offset_m = seg.length_m;
                        finish(v, tick);
                        continue;
                    }
                    const SegmentId& next_id = v.route[v.route_pos + 1];
                    bool green = movement_permitted(signals, sid, next_id);
                    bool gate_open = tick >= next_release(sid);
                    double leftover = v.offset_m + advance - seg.length_m;
                    double entry = entry_room(next_id, leftover);
                    if (green && gate_open && entry >= 0.0) {
                        next_release_[sid] = tick + params_.headway_s;
                        cross(vid, next_id, entry);
                        note_motion(v, true, signals, tick, dt);
                        leader_tail = std::numeric_limits<double>::infinity();
                        continue;
                    }
                    target = seg.length_m;
                }
                target = std::max(target, v.offset_m);  // initial overlaps never reverse
                bool did_move = target > v.offset_m + 1e-9;
                v.offset_m = target;
                leader_tail = v.offset_m - params_.gap_m;
                note_motion(v, did_move, signals, tick, dt);
            }
            // Arrived vehicles drop out of the queue.
            q.erase(std::remove_if(q.begin(), q.end(),
                                   [this](int id) { return vehicles_[id].arrived; }),
                    q.end());
        }

        inject(tick);
    }

    /// Vehicles releasable per mode: front within the detection zone and the
    /// vehicle's next movement permitted by that mode. A vehicle counts once
    /// per permitting mode.
    TrafficCounts collect_counts() const {
        TrafficCounts counts;
        for (const Vehicle& v : vehicles_) {
            if (v.arrived || v.on_last_segment()) continue;
            const Segment& seg = net_.segments.at(v.current_segment());
            // Queued-at-red vehicles count regardless of distance; otherwise
            // the front must be within the detection zone.
            if (!v.red_waiting && seg.length_m - v.offset_m > params_.detection_distance_m)
                continue;
            const Intersection* ix = net_.find_intersection(seg.to);
            if (!ix || !ix->signalized) continue;
            Movement want{v.current_segment(), v.route[v.route_pos + 1]};
            for (size_t m = 0; m < ix->modes.size(); ++m)
                if (ix->modes[m].movements.count(want))
                    counts.c[{ix->id, static_cast<int>(m)}] += 1.0;
        }
        return counts;
    }

    /// Shortest-time route between seeded random boundary segments.
    std::vector<SegmentId> random_route() {
        if (entries_.empty() || exits_.empty()) return {};
        std::uniform_int_distribution<int> epick(0, static_cast<int>(entries_.size()) - 1);
        std::uniform_int_distribution<int> xpick(0, static_cast<int>(exits_.size()) - 1);
        for (int attempt = 0; attempt < 8; ++attempt) {
            std::vector<SegmentId> r =
                shortest_route(entries_[epick(rng_)], exits_[xpick(rng_)]);
            if (!r.empty()) return r;
        }
        return {};
    }

    bool movement_permitted(const SignalState& signals, const SegmentId& approach,
                            const SegmentId& exit) const {
        const Segment& ap = net_.segments.at(approach);
        const Intersection* ix = net_.find_intersection(ap.to);
        if (!ix || !ix->signalized) return net_.segments.at(exit).from == ap.to;
        auto it = signals.current_mode.find(ix->id);
        if (it == signals.current_mode.end()) return false;
        return ix->modes[it->second].movements.count(Movement{approach, exit}) > 0;
    }

private:
    void build_turn_graph() {
        for (const auto& [sid, seg] : net_.segments) {
            const Intersection* ix = net_.find_intersection(seg.to);
            std::vector<SegmentId>& outs = turn_graph_[sid];
            for (const auto& [oid, other] : net_.segments) {
                if (other.from != seg.to || oid == sid) continue;
                if (!ix || !ix->signalized) {
                    outs.push_back(oid);
                    continue;
                }
                Movement mv{sid, oid};
                for (const Mode& mode : ix->modes) {
                    if (mode.movements.count(mv)) {
                        outs.push_back(oid);
                        break;
                    }
                }
            }
        }
    }

    void find_boundaries() {
        std::map<IntersectionId, int> indeg, outdeg;
        for (const auto& [sid, seg] : net_.segments) {
            outdeg[seg.from]++;
            indeg[seg.to]++;
        }
        for (const auto& [sid, seg] : net_.segments) {
            if (indeg[seg.from] == 0) entries_.push_back(sid);
            if (outdeg[seg.to] == 0) exits_.push_back(sid);
        }
        if (entries_.empty())
            for (const auto& [sid, seg] : net_.segments) entries_.push_back(sid);
        if (exits_.empty())
            for (const auto& [sid, seg] : net_.segments) exits_.push_back(sid);
    }

    std::vector<SegmentId> shortest_route(const SegmentId& from, const SegmentId& to) {
        std::map<SegmentId, double> dist;
        std::map<SegmentId, SegmentId> prev;
        using Entry = std::pair<double, SegmentId>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
        auto cost = [this](const SegmentId& sid) {
            const Segment& s = net_.segments.at(sid);
            return s.length_m / s.speed_limit_mps;
        };
        dist[from] = cost(from);
        heap.push({dist[from], from});
        while (!heap.empty()) {
            auto [d, sid] = heap.top();
            heap.pop();
            if (d > dist[sid] + 1e-12) continue;
            if (sid == to) break;
            for (const SegmentId& nxt : turn_graph_[sid]) {
                double nd = d + cost(nxt);
                auto it = dist.find(nxt);
                if (it == dist.end() || nd < it->second - 1e-12) {
                    dist[nxt] = nd;
                    prev[nxt] = sid;
                    heap.push({nd, nxt});
                }
            }
        }
        if (!dist.count(to)) return {};
        std::vector<SegmentId> route{to};
        while (route.back() != from) route.push_back(prev.at(route.back()));
        std::reverse(route.begin(), route.end());
        return route;
    }

    void spawn(std::vector<SegmentId> route, int pos, double offset, int tick) {
        Vehicle v;
        v.id = next_id_++;
        v.route = std::move(route);
        v.route_pos = pos;
        v.offset_m = offset;
        int vid = static_cast<int>(vehicles_.size());
        vehicles_.push_back(std::move(v));
        insert_ordered(vehicles_[vid].current_segment(), vid);
        ++injected_;
        log_event(tick, vehicles_[vid].id, "inject");
    }

    void insert_ordered(const SegmentId& sid, int vid) {
        auto& q = order_[sid];
        double off = vehicles_[vid].offset_m;
        auto it = q.begin();
        while (it != q.end() && vehicles_[*it].offset_m >= off) ++it;
        q.insert(it, vid);
    }

    double entry_room(const SegmentId& sid, double wanted_offset) const {
        auto it = order_.find(sid);
        double rear = std::numeric_limits<double>::infinity();
        if (it != order_.end() && !it->second.empty())
            rear = vehicles_[it->second.back()].offset_m;
        if (rear < params_.gap_m) return -1.0;  // no room
        return std::min(wanted_offset, std::max(0.0, rear - params_.gap_m));
    }

    void cross(int vid, const SegmentId& next_id, double entry_offset) {
        Vehicle& v = vehicles_[vid];
        auto& q = order_[v.current_segment()];
        q.erase(std::find(q.begin(), q.end(), vid));
        v.route_pos += 1;
        v.offset_m = entry_offset;
        insert_ordered(next_id, vid);
    }

    void finish(Vehicle& v, int tick) {
        v.arrived = true;
        waiting_of_arrived_ += v.waiting_s;
        ++arrived_;
        log_event(tick, v.id, "arrive");
    }

    // Waiting accrues while the vehicle is stopped and its next movement is
    // not permitted by the active signals.
    void note_motion(Vehicle& v, bool did_move, const SignalState& signals, int tick,
                     double dt) {
        if (v.arrived) return;
        bool red = false;
        if (!did_move && !v.on_last_segment())
            red = !movement_permitted(signals, v.current_segment(), v.route[v.route_pos + 1]);
        if (red) {
            v.waiting_s += dt;
            if (!v.red_waiting) log_event(tick, v.id, "stop");
            v.red_waiting = true;
        } else {
            if (v.red_waiting) log_event(tick, v.id, "go");
            v.red_waiting = false;
        }
    }

    void inject(int tick) {
        pending_injection_ += injection_rate_dt_;
        while (pending_injection_ >= 1.0) {
            pending_injection_ -= 1.0;
            std::vector<SegmentId> route = random_route();
            if (route.empty()) continue;
            double entry = entry_room(route.front(), 0.0);
            if (entry < 0.0) continue;  // entry blocked; vehicle not created
            spawn(std::move(route), 0, 0.0, tick);
        }
    }

    void log_event(int tick, int vid, const char* event) {
        if (event_log_) (*event_log_) << tick << ',' << vid << ',' << event << '\n';
    }

    const RoadNetwork& net_;
    SimParams params_;
    std::mt19937_64 rng_;
    std::vector<Vehicle> vehicles_;
    std::map<SegmentId, std::deque<int>> order_;  // per segment, front first
    std::map<SegmentId, std::vector<SegmentId>> turn_graph_;
    double next_release(const SegmentId& sid) const {
        auto it = next_release_.find(sid);
        return it == next_release_.end() ? 0.0 : it->second;
    }

    std::vector<SegmentId> entries_, exits_;
    std::map<SegmentId, double> next_release_;
    int next_id_ = 0;
    int injected_ = 0;
    int arrived_ = 0;
    double waiting_of_arrived_ = 0.0;
    double pending_injection_ = 0.0;
    std::ostream* event_log_ = nullptr;

public:
    double injection_rate_dt_ = 0.0;  // set by run_simulation
};

/// Closed loop: counts are gathered and the cost function re-optimized every
/// t_interval; fixed-cycle control rotates modes on the wall clock.
inline SimMetrics run_simulation(const RoadNetwork& net, const CoefficientTables& tables,
                                 const Scenario& scenario, const ControllerConfig& controller,
                                 const SimParams& params = {},
                                 std::ostream* event_log = nullptr) {
    scenario.check();
    World world(net, params, scenario.seed);
    world.injection_rate_dt_ = scenario.injection_rate * params.dt_s;
    world.set_event_log(event_log);
    world.populate(scenario.initial_vehicle_count);

    VariableIndex index(net);
    SignalState signals;
    // Everything starts at mode 0.
    for (const auto& [iid, ix] : net.intersections)
        if (ix.signalized) signals.set_mode(iid, 0, 0);
    if (controller.type == ControllerConfig::Type::Static)
        for (const auto& [iid, m] : controller.fixed_assignment) signals.set_mode(iid, m, 0);

    SimMetrics metrics;
    for (int tick = 0; tick < scenario.duration_s; tick += params.dt_s) {
        if (controller.type == ControllerConfig::Type::FixedCycle) {
            for (const auto& [iid, ix] : net.intersections)
                if (ix.signalized)
                    signals.set_mode(
                        iid,
                        fixed_cycle_mode(tick, static_cast<int>(ix.modes.size()),
                                         controller.cycle_s),
                        tick);
        } else if (controller.type == ControllerConfig::Type::Optimized &&
                   tick % scenario.t_interval_s == 0) {
            ++metrics.optimizer_calls;
            StepRecord rec;
            rec.tick = tick;
            TrafficCounts counts = world.collect_counts();
            auto t0 = std::chrono::steady_clock::now();

            Qubo q = build_qubo(net, tables, index, counts, controller.params);
            std::tie(rec.zero_terms, rec.nonzero_terms) = census_first_order(q);

            ModeAssignment chosen;
            double energy = 0.0;
            if (controller.solver == SolverKind::Local) {
                chosen = solve_local(counts, net, &signals.current_mode);
                std::vector<uint8_t> x(q.num_vars, 0);
                for (const auto& [iid, m] : chosen.selected) x[index.id(iid, m)] = 1;
                energy = evaluate(q, x);
            } else if (controller.solver == SolverKind::Exact) {
                SolveResult r = solve_exact(q, index, counts);
                chosen = r.assignment;
                energy = r.best_energy;
            } else {
                SaConfig sa = controller.sa;
                sa.rng_seed = scenario.seed ^ static_cast<uint64_t>(metrics.optimizer_calls - 1);
                SolveResult r = solve_sa(q, index, counts, sa);
                chosen = r.assignment;
                energy = r.best_energy;
            }
            rec.solver_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            rec.energy = energy;
            if (controller.compare_exact) {
                SolveResult opt = solve_exact(q, index, counts);
                rec.exact_energy = opt.best_energy;
                rec.rel_energy_err = std::abs(opt.best_energy) > 0.0
                                         ? (energy - opt.best_energy) / std::abs(opt.best_energy)
                                         : 0.0;
            }
            for (const auto& [iid, m] : chosen.selected) signals.set_mode(iid, m, tick);
            metrics.steps.push_back(rec);
        }
        world.step(signals, tick);
    }

    metrics.total_waiting_s = world.total_waiting();
    metrics.vehicles_arrived = world.arrived();
    metrics.vehicles_injected = world.injected();
    metrics.vehicles_on_map = world.on_map();
    return metrics;
}

}  // namespace signalis
