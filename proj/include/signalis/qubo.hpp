#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "signalis/network.hpp"

namespace signalis {

/// Bijection between (intersection, mode) and flat variable ids.
/// Intersections sorted by id, modes by index; only signalized intersections
/// contribute variables.
class VariableIndex {
public:
    VariableIndex() = default;

    explicit VariableIndex(const RoadNetwork& net) {
        for (const auto& [iid, ix] : net.intersections) {
            if (!ix.signalized) continue;
            first_var_.emplace_back(iid, static_cast<int>(vars_.size()));
            for (size_t m = 0; m < ix.modes.size(); ++m)
                vars_.emplace_back(iid, static_cast<int>(m));
        }
        for (size_t k = 0; k < vars_.size(); ++k) lookup_[vars_[k]] = static_cast<int>(k);
    }

    int num_vars() const { return static_cast<int>(vars_.size()); }
    int num_intersections() const { return static_cast<int>(first_var_.size()); }

    const std::pair<IntersectionId, int>& var(int k) const { return vars_.at(k); }

    int id(const IntersectionId& i, int mode) const {
        auto it = lookup_.find({i, mode});
        if (it == lookup_.end())
            throw std::out_of_range("no variable for (" + i + ", " + std::to_string(mode) + ")");
        return it->second;
    }

    bool contains(const IntersectionId& i, int mode) const {
        return lookup_.count({i, mode}) > 0;
    }

    /// (intersection id, first variable id) in variable order; modes of one
    /// intersection occupy a contiguous block.
    const std::vector<std::pair<IntersectionId, int>>& blocks() const { return first_var_; }

    int modes_of(size_t block) const {
        int begin = first_var_[block].second;
        int end = block + 1 < first_var_.size() ? first_var_[block + 1].second : num_vars();
        return end - begin;
    }

private:
    std::vector<std::pair<IntersectionId, int>> vars_;
    std::vector<std::pair<IntersectionId, int>> first_var_;
    std::map<std::pair<IntersectionId, int>, int> lookup_;
};

/// Vehicles releasable per (intersection, mode) at the optimization instant.
/// Missing entry means zero.
struct TrafficCounts {
    std::map<std::pair<IntersectionId, int>, double> c;

    double get(const IntersectionId& i, int mode) const {
        auto it = c.find({i, mode});
        return it == c.end() ? 0.0 : it->second;
    }
    double max_count() const {
        double mx = 0.0;
        for (const auto& [k, v] : c) mx = std::max(mx, v);
        return mx;
    }
};

struct Hyperparameters {
    double beta = 0.0;   // continuity reward weight; 0 reproduces the local objective
    double gamma = 10.0; // one-hot penalty weight

    void check() const {
        if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
        if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");
    }
};

/// Sparse QUBO: offset + sum h[k] x_k + sum q[(k,l)] x_k x_l, keys k < l.
struct Qubo {
    int num_vars = 0;
    std::map<int, double> linear;
    std::map<std::pair<int, int>, double> quadratic;
    double offset = 0.0;

    // Scaled throughput coefficient per variable (the traffic-derived part of
    // the linear term, before the one-hot shift); kept for the census.
    std::vector<double> throughput_linear;

    void add_linear(int k, double v) {
        if (v == 0.0) return;
        double& slot = linear[k];
        slot += v;
        if (slot == 0.0) linear.erase(k);
    }
    void add_quadratic(int k, int l, double v) {
        if (v == 0.0) return;
        if (k == l) {
            add_linear(k, v);
            return;
        }
        if (l < k) std::swap(k, l);
        double& slot = quadratic[{k, l}];
        slot += v;
        if (slot == 0.0) quadratic.erase({k, l});
    }
};

inline double evaluate(const Qubo& q, const std::vector<uint8_t>& x) {
    if (static_cast<int>(x.size()) != q.num_vars)
        throw std::invalid_argument("assignment length does not match num_vars");
    double e = q.offset;
    for (const auto& [k, v] : q.linear)
        if (x[k]) e += v;
    for (const auto& [kl, v] : q.quadratic)
        if (x[kl.first] && x[kl.second]) e += v;
    return e;
}

struct ModeAssignment {
    std::map<IntersectionId, int> selected;
    bool feasible = false;                 // one-hot satisfied before repair
    std::set<IntersectionId> repaired;
};

/// Build the signal-control cost function: throughput term + continuity
/// reward over adjacent intersections + one-hot penalty.
inline Qubo build_qubo(const RoadNetwork& net, const CoefficientTables& tables,
                       const VariableIndex& index, const TrafficCounts& counts,
                       const Hyperparameters& params) {
    params.check();
    for (const auto& [key, v] : counts.c) {
        if (v < 0.0)
            throw std::invalid_argument("negative count for (" + key.first + ", " +
                                        std::to_string(key.second) + ")");
        if (!index.contains(key.first, key.second))
            throw std::invalid_argument("count references unknown (" + key.first + ", " +
                                        std::to_string(key.second) + ")");
    }

    Qubo q;
    q.num_vars = index.num_vars();
    q.throughput_linear.assign(q.num_vars, 0.0);

    // Throughput term: -C_hat per selected mode, C max-scaled. All-zero
    // counts contribute nothing (no 0/0).
    double cmax = counts.max_count();
    if (cmax > 0.0) {
        for (int k = 0; k < q.num_vars; ++k) {
            const auto& [iid, mode] = index.var(k);
            double chat = counts.get(iid, mode) / cmax;
            q.throughput_linear[k] = chat;
            q.add_linear(k, -chat);
        }
    }

    // Continuity reward: the formulation's double sum visits each unordered
    // adjacent pair twice, hence the factor 2.
    if (params.beta > 0.0) {
        for (const auto& [key, r] : tables.R) {
            if (r == 0) continue;
            auto b_it = tables.B.find(IntersectionPair(key.i, key.j));
            if (b_it == tables.B.end()) continue;
            double coeff = -2.0 * params.beta * b_it->second * static_cast<double>(r);
            q.add_quadratic(index.id(key.i, key.mode_i), index.id(key.j, key.mode_j), coeff);
        }
    }

    // One-hot penalty, expanded with x^2 = x: -gamma per variable,
    // +2 gamma per intra-intersection pair, +gamma per intersection.
    const auto& blocks = index.blocks();
    for (size_t b = 0; b < blocks.size(); ++b) {
        int begin = blocks[b].second;
        int count = index.modes_of(b);
        for (int k = begin; k < begin + count; ++k) {
            q.add_linear(k, -params.gamma);
            for (int l = k + 1; l < begin + count; ++l)
                q.add_quadratic(k, l, 2.0 * params.gamma);
        }
        q.offset += params.gamma;
    }
    return q;
}

/// Decode a binary sample into one mode per intersection, repairing one-hot
/// violations by largest count (ties to the lowest mode index).
inline ModeAssignment decode(const std::vector<uint8_t>& x, const VariableIndex& index,
                             const TrafficCounts& counts) {
    if (static_cast<int>(x.size()) != index.num_vars())
        throw std::invalid_argument("assignment length does not match num_vars");
    ModeAssignment out;
    out.feasible = true;
    const auto& blocks = index.blocks();
    for (size_t b = 0; b < blocks.size(); ++b) {
        const IntersectionId& iid = blocks[b].first;
        int begin = blocks[b].second;
        int count = index.modes_of(b);

        std::vector<int> on;
        for (int m = 0; m < count; ++m)
            if (x[begin + m]) on.push_back(m);

        if (on.size() == 1) {
            out.selected[iid] = on[0];
            continue;
        }
        out.feasible = false;
        out.repaired.insert(iid);
        int best = -1;
        double best_c = -1.0;
        if (!on.empty()) {
            for (int m : on) {
                double c = counts.get(iid, m);
                if (c > best_c) {
                    best_c = c;
                    best = m;
                }
            }
        } else {
            for (int m = 0; m < count; ++m) {
                double c = counts.get(iid, m);
                if (c > best_c) {
                    best_c = c;
                    best = m;
                }
            }
        }
        out.selected[iid] = best;
    }
    return out;
}

/// Continuous mode-hold durations and pedestrian crossing times.
struct DwellState {
    std::map<std::pair<IntersectionId, int>, double> tau;  // seconds held
    std::map<IntersectionId, double> crossing_s;           // pedestrian time T_i
};

/// Add the pedestrian dwell penalty: (tau - T)^2 on each mode held shorter
/// than the crossing time. Purely linear.
inline Qubo add_dwell_penalty(Qubo q, const VariableIndex& index, const DwellState& dwell) {
    for (const auto& [key, t] : dwell.tau)
        if (t < 0.0) throw std::invalid_argument("negative dwell time");
    for (const auto& [iid, t] : dwell.crossing_s)
        if (t <= 0.0) throw std::invalid_argument("nonpositive crossing time");

    for (int k = 0; k < index.num_vars(); ++k) {
        const auto& [iid, mode] = index.var(k);
        auto t_it = dwell.crossing_s.find(iid);
        if (t_it == dwell.crossing_s.end())
            throw std::invalid_argument("dwell state missing intersection '" + iid + "'");
        auto tau_it = dwell.tau.find({iid, mode});
        double tau = tau_it == dwell.tau.end() ? 0.0 : tau_it->second;
        double T = t_it->second;
        if (tau < T) q.add_linear(k, (tau - T) * (tau - T));
    }
    return q;
}

/// Zero vs nonzero scaled throughput coefficients (the traffic part of the
/// linear term only).
inline std::pair<int, int> census_first_order(const Qubo& q) {
    int zero = 0, nonzero = 0;
    for (double v : q.throughput_linear)
        (v == 0.0 ? zero : nonzero)++;
    return {zero, nonzero};
}

}  // namespace signalis
