#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "signalis/network.hpp"
#include "signalis/qubo.hpp"

namespace signalis {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                std::initializer_list<const char*> allowed,
                                const std::string& context) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* key : allowed)
            if (it.key() == key) ok = true;
        if (!ok) throw std::runtime_error("unknown key '" + it.key() + "' in " + context);
    }
}

}  // namespace detail

inline RoadNetwork network_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"intersections", "segments"}, "network file");
    RoadNetwork net;
    for (const auto& s : j.at("segments")) {
        detail::reject_unknown_keys(s, {"id", "from", "to", "length_m", "speed_limit_mps"},
                                    "segment");
        Segment seg;
        seg.id = s.at("id").get<std::string>();
        seg.from = s.at("from").get<std::string>();
        seg.to = s.at("to").get<std::string>();
        seg.length_m = s.at("length_m").get<double>();
        seg.speed_limit_mps = s.at("speed_limit_mps").get<double>();
        if (!net.segments.emplace(seg.id, seg).second)
            throw std::runtime_error("duplicate segment id '" + seg.id + "'");
    }
    for (const auto& i : j.at("intersections")) {
        detail::reject_unknown_keys(i, {"id", "signalized", "modes"}, "intersection");
        Intersection ix;
        ix.id = i.at("id").get<std::string>();
        ix.signalized = i.at("signalized").get<bool>();
        if (i.contains("modes")) {
            for (const auto& mode_json : i.at("modes")) {
                Mode mode;
                for (const auto& mv : mode_json) {
                    detail::reject_unknown_keys(mv, {"approach", "exit"}, "movement");
                    mode.movements.insert(Movement{mv.at("approach").get<std::string>(),
                                                   mv.at("exit").get<std::string>()});
                }
                ix.modes.push_back(std::move(mode));
            }
        }
        if (!net.intersections.emplace(ix.id, ix).second)
            throw std::runtime_error("duplicate intersection id '" + ix.id + "'");
    }
    net.rebuild_adjacency();
    return net;
}

inline nlohmann::json network_to_json(const RoadNetwork& net) {
    nlohmann::json j;
    j["intersections"] = nlohmann::json::array();
    j["segments"] = nlohmann::json::array();
    for (const auto& [iid, ix] : net.intersections) {
        nlohmann::json modes = nlohmann::json::array();
        for (const Mode& mode : ix.modes) {
            nlohmann::json mvs = nlohmann::json::array();
            for (const Movement& mv : mode.movements)
                mvs.push_back({{"approach", mv.approach}, {"exit", mv.exit}});
            modes.push_back(mvs);
        }
        j["intersections"].push_back(
            {{"id", iid}, {"signalized", ix.signalized}, {"modes", modes}});
    }
    for (const auto& [sid, seg] : net.segments)
        j["segments"].push_back({{"id", sid},
                                 {"from", seg.from},
                                 {"to", seg.to},
                                 {"length_m", seg.length_m},
                                 {"speed_limit_mps", seg.speed_limit_mps}});
    return j;
}

inline RoadNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file '" + path + "'");
    nlohmann::json j;
    in >> j;
    RoadNetwork net = network_from_json(j);
    ValidationReport rep = validate(net);
    if (!rep.ok()) {
        std::ostringstream oss;
        oss << "invalid network '" << path << "':";
        for (const auto& v : rep.violations) oss << "\n  " << v;
        throw std::runtime_error(oss.str());
    }
    return net;
}

/// Counts file: array of {intersection, mode, count}.
inline TrafficCounts counts_from_json(const nlohmann::json& j) {
    TrafficCounts counts;
    for (const auto& entry : j) {
        detail::reject_unknown_keys(entry, {"intersection", "mode", "count"}, "counts entry");
        counts.c[{entry.at("intersection").get<std::string>(), entry.at("mode").get<int>()}] =
            entry.at("count").get<double>();
    }
    return counts;
}

inline TrafficCounts load_counts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open counts file '" + path + "'");
    nlohmann::json j;
    in >> j;
    return counts_from_json(j);
}

/// Sparse triplet dump: header `M offset`, then one `k l value` line per
/// term (linear terms as k == l).
inline void write_qubo_triplets(std::ostream& out, const Qubo& q) {
    out << q.num_vars << ' ' << q.offset << '\n';
    for (const auto& [k, v] : q.linear) out << k << ' ' << k << ' ' << v << '\n';
    for (const auto& [kl, v] : q.quadratic)
        out << kl.first << ' ' << kl.second << ' ' << v << '\n';
}

}  // namespace signalis
