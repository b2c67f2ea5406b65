#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "signalis/qubo.hpp"

namespace signalis {

struct SaConfig {
    int num_reads = 1000;
    int num_sweeps = 1000;
    std::optional<double> beta_min;  // derived from delta energies when absent
    std::optional<double> beta_max;
    uint64_t rng_seed = 0;

    void check() const {
        if (num_reads < 1 || num_sweeps < 1)
            throw std::invalid_argument("num_reads and num_sweeps must be positive");
        if (beta_min && beta_max && !(*beta_min < *beta_max))
            throw std::invalid_argument("beta_min must be below beta_max");
    }
};

struct Sample {
    std::vector<uint8_t> x;
    double energy = 0.0;
    int multiplicity = 1;
};

struct SolveResult {
    std::vector<uint8_t> best_x;
    double best_energy = std::numeric_limits<double>::infinity();
    std::vector<Sample> samples;
    std::chrono::duration<double> elapsed{0.0};
    ModeAssignment assignment;
};

struct IsingModel {
    std::vector<double> h;
    std::map<std::pair<int, int>, double> j;  // keys k < l
    double offset = 0.0;
};

/// QUBO -> Ising via x = (1 + s) / 2; energies coincide on corresponding
/// vectors.
inline IsingModel qubo_to_ising(const Qubo& q) {
    IsingModel m;
    m.h.assign(q.num_vars, 0.0);
    m.offset = q.offset;
    for (const auto& [k, v] : q.linear) {
        m.h[k] += v / 2.0;
        m.offset += v / 2.0;
    }
    for (const auto& [kl, v] : q.quadratic) {
        m.j[kl] += v / 4.0;
        m.h[kl.first] += v / 4.0;
        m.h[kl.second] += v / 4.0;
        m.offset += v / 4.0;
    }
    return m;
}

struct DeltaBounds {
    double delta_min = 0.0;
    double delta_max = 0.0;

    double beta_min() const { return std::log(2.0) / delta_max; }
    double beta_max() const { return std::log(100.0) / delta_min; }
};

/// Single-flip energy scales of the Ising model: delta_max bounds the largest
/// flip, delta_min is twice the smallest nonzero coefficient magnitude.
inline DeltaBounds compute_delta_bounds(const IsingModel& m) {
    std::vector<double> coupling_sum(m.h.size(), 0.0);
    double min_coeff = std::numeric_limits<double>::infinity();
    for (const auto& [kl, v] : m.j) {
        double a = std::abs(v);
        if (a > 0.0) {
            coupling_sum[kl.first] += a;
            coupling_sum[kl.second] += a;
            min_coeff = std::min(min_coeff, a);
        }
    }
    double delta_max = 0.0;
    for (size_t k = 0; k < m.h.size(); ++k) {
        double a = std::abs(m.h[k]);
        if (a > 0.0) min_coeff = std::min(min_coeff, a);
        delta_max = std::max(delta_max, 2.0 * (a + coupling_sum[k]));
    }
    if (!(delta_max > 0.0) || !std::isfinite(min_coeff))
        throw std::invalid_argument("all-zero model: no temperature scale derivable");
    return DeltaBounds{2.0 * min_coeff, delta_max};
}

namespace detail {

// Compressed-row view of the QUBO for fast single-flip updates.
struct FlipGraph {
    std::vector<double> linear;
    std::vector<int> row_start;
    std::vector<int> col;
    std::vector<double> val;

    explicit FlipGraph(const Qubo& q) {
        int n = q.num_vars;
        linear.assign(n, 0.0);
        for (const auto& [k, v] : q.linear) linear[k] = v;
        std::vector<std::vector<std::pair<int, double>>> adj(n);
        for (const auto& [kl, v] : q.quadratic) {
            adj[kl.first].emplace_back(kl.second, v);
            adj[kl.second].emplace_back(kl.first, v);
        }
        row_start.assign(n + 1, 0);
        for (int k = 0; k < n; ++k) row_start[k + 1] = row_start[k] + static_cast<int>(adj[k].size());
        col.resize(row_start[n]);
        val.resize(row_start[n]);
        for (int k = 0; k < n; ++k) {
            int p = row_start[k];
            for (const auto& [c, v] : adj[k]) {
                col[p] = c;
                val[p] = v;
                ++p;
            }
        }
    }
};

}  // namespace detail

/// Simulated annealing: independent reads from random states, geometric
/// inverse-temperature schedule, one Metropolis attempt per variable per
/// sweep in fixed index order. Deterministic for a fixed seed.
inline SolveResult solve_sa(const Qubo& q, const VariableIndex& index,
                            const TrafficCounts& counts, const SaConfig& cfg) {
    cfg.check();
    if (q.num_vars == 0) throw std::invalid_argument("empty QUBO");
    auto t0 = std::chrono::steady_clock::now();

    double bmin, bmax;
    if (cfg.beta_min && cfg.beta_max) {
        bmin = *cfg.beta_min;
        bmax = *cfg.beta_max;
    } else {
        DeltaBounds db = compute_delta_bounds(qubo_to_ising(q));
        bmin = cfg.beta_min.value_or(db.beta_min());
        bmax = cfg.beta_max.value_or(db.beta_max());
        if (!(bmin < bmax)) bmax = bmin * 2.0;  // degenerate scales
    }

    const int n = q.num_vars;
    const detail::FlipGraph g(q);

    // Schedule includes both endpoints.
    std::vector<double> betas(cfg.num_sweeps);
    if (cfg.num_sweeps == 1) {
        betas[0] = bmin;
    } else {
        double ratio = bmax / bmin;
        for (int s = 0; s < cfg.num_sweeps; ++s)
            betas[s] = bmin * std::pow(ratio, static_cast<double>(s) / (cfg.num_sweeps - 1));
    }

    SolveResult res;
    std::vector<uint8_t> x(n);
    std::vector<double> field(n);  // field[k] = linear[k] + sum q[k][l] x_l
    int best_read = -1;

    for (int read = 0; read < cfg.num_reads; ++read) {
        std::mt19937_64 rng(cfg.rng_seed ^ static_cast<uint64_t>(read));
        std::uniform_real_distribution<double> uni(0.0, 1.0);

        for (int k = 0; k < n; ++k) x[k] = (rng() >> 40) & 1u;
        for (int k = 0; k < n; ++k) {
            double f = g.linear[k];
            for (int p = g.row_start[k]; p < g.row_start[k + 1]; ++p)
                if (x[g.col[p]]) f += g.val[p];
            field[k] = f;
        }

        for (int s = 0; s < cfg.num_sweeps; ++s) {
            double beta = betas[s];
            for (int k = 0; k < n; ++k) {
                double delta = x[k] ? -field[k] : field[k];
                if (delta <= 0.0 || uni(rng) < std::exp(-beta * delta)) {
                    double sign = x[k] ? -1.0 : 1.0;
                    x[k] ^= 1u;
                    for (int p = g.row_start[k]; p < g.row_start[k + 1]; ++p)
                        field[g.col[p]] += sign * g.val[p];
                }
            }
        }

        double e = evaluate(q, x);
        res.samples.push_back(Sample{x, e, 1});
        if (e < res.best_energy || (e == res.best_energy && best_read < 0)) {
            res.best_energy = e;
            res.best_x = x;
            best_read = read;
        }
    }

    res.assignment = decode(res.best_x, index, counts);
    res.elapsed = std::chrono::steady_clock::now() - t0;
    return res;
}

namespace detail {

// Connected components of the coupling graph over intersection blocks.
inline std::vector<std::vector<int>> coupling_components(const Qubo& q,
                                                         const VariableIndex& index) {
    int nb = index.num_intersections();
    std::vector<int> block_of(q.num_vars);
    for (int b = 0; b < nb; ++b) {
        int begin = index.blocks()[b].second;
        for (int m = 0; m < index.modes_of(b); ++m) block_of[begin + m] = b;
    }
    // Union-find over blocks.
    std::vector<int> parent(nb);
    for (int b = 0; b < nb; ++b) parent[b] = b;
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const auto& [kl, v] : q.quadratic) {
        int a = find(block_of[kl.first]);
        int b = find(block_of[kl.second]);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::map<int, std::vector<int>> groups;
    for (int b = 0; b < nb; ++b) groups[find(b)].push_back(b);
    std::vector<std::vector<int>> out;
    for (auto& [root, blocks] : groups) out.push_back(std::move(blocks));
    return out;
}

}  // namespace detail

/// Exact one-hot optimum by enumeration. The coupling graph splits into
/// independent components (blocks joined by quadratic terms); each component
/// is enumerated over the product of its mode counts, lexicographically, so
/// ties resolve to the lowest mode indices.
inline SolveResult solve_exact(const Qubo& q, const VariableIndex& index,
                               const TrafficCounts& counts,
                               double enumeration_budget = 1e8) {
    if (q.num_vars == 0) throw std::invalid_argument("empty QUBO");
    auto t0 = std::chrono::steady_clock::now();

    auto components = detail::coupling_components(q, index);
    for (const auto& comp : components) {
        double prod = 1.0;
        for (int b : comp) prod *= static_cast<double>(index.modes_of(b));
        if (prod > enumeration_budget)
            throw std::runtime_error("one-hot enumeration budget exceeded: component size " +
                                     std::to_string(prod) + " > " +
                                     std::to_string(enumeration_budget));
    }

    const detail::FlipGraph g(q);
    std::vector<uint8_t> best(q.num_vars, 0);

    for (const auto& comp : components) {
        int nc = static_cast<int>(comp.size());
        std::vector<int> choice(nc, 0);
        std::vector<int> best_choice;
        double best_e = std::numeric_limits<double>::infinity();

        std::vector<uint8_t> on(q.num_vars, 0);
        std::function<void(int, double)> descend = [&](int depth, double partial) {
            if (depth == nc) {
                if (partial < best_e) {
                    best_e = partial;
                    best_choice = choice;
                }
                return;
            }
            int begin = index.blocks()[comp[depth]].second;
            for (int m = 0; m < index.modes_of(comp[depth]); ++m) {
                int k = begin + m;
                double e = partial + g.linear[k];
                for (int p = g.row_start[k]; p < g.row_start[k + 1]; ++p)
                    if (on[g.col[p]]) e += g.val[p];
                choice[depth] = m;
                on[k] = 1;
                descend(depth + 1, e);
                on[k] = 0;
            }
        };
        descend(0, 0.0);

        for (int d = 0; d < nc; ++d)
            best[index.blocks()[comp[d]].second + best_choice[d]] = 1;
    }

    SolveResult res;
    res.best_x = best;
    res.best_energy = evaluate(q, best);
    res.samples.push_back(Sample{best, res.best_energy, 1});
    res.assignment = decode(best, index, counts);
    res.elapsed = std::chrono::steady_clock::now() - t0;
    return res;
}

/// Exhaustive minimum over all 2^M binary vectors; cross-check only.
inline std::pair<std::vector<uint8_t>, double> solve_exhaustive(const Qubo& q,
                                                                int max_vars = 24) {
    if (q.num_vars > max_vars)
        throw std::runtime_error("exhaustive search limited to " + std::to_string(max_vars) +
                                 " variables");
    std::vector<uint8_t> x(q.num_vars, 0), best(q.num_vars, 0);
    double best_e = evaluate(q, x);
    for (uint64_t bits = 1; bits < (uint64_t{1} << q.num_vars); ++bits) {
        for (int k = 0; k < q.num_vars; ++k) x[k] = (bits >> k) & 1u;
        double e = evaluate(q, x);
        if (e < best_e) {
            best_e = e;
            best = x;
        }
    }
    return {best, best_e};
}

/// Greedy per-intersection baseline: pick the mode releasing the most
/// vehicles; ties to the lowest index. All-zero counts keep the current mode
/// when one is given.
inline ModeAssignment solve_local(const TrafficCounts& counts, const RoadNetwork& net,
                                  const std::map<IntersectionId, int>* current = nullptr) {
    ModeAssignment out;
    out.feasible = true;
    for (const auto& [iid, ix] : net.intersections) {
        if (!ix.signalized) continue;
        int best = 0;
        double best_c = -1.0;
        bool any = false;
        for (size_t m = 0; m < ix.modes.size(); ++m) {
            double c = counts.get(iid, static_cast<int>(m));
            if (c > 0.0) any = true;
            if (c > best_c) {
                best_c = c;
                best = static_cast<int>(m);
            }
        }
        if (!any && current) {
            auto it = current->find(iid);
            if (it != current->end()) best = it->second;
        }
        out.selected[iid] = best;
    }
    return out;
}

}  // namespace signalis
