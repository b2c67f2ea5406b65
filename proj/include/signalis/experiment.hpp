#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "signalis/io.hpp"
#include "signalis/netgen.hpp"
#include "signalis/sim.hpp"

namespace signalis {

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

inline double standard_error(const std::vector<double>& xs) {
    return xs.empty() ? 0.0 : sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
}

/// Relative change of the fixed-cycle result against the optimized one, in
/// percent.
inline double relative_error(double optimal_hours, double fixed_hours) {
    if (optimal_hours <= 0.0) throw std::invalid_argument("optimal must be positive");
    return 100.0 * (fixed_hours - optimal_hours) / optimal_hours;
}

inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t instance_seed(uint64_t base, int flow, int index) {
    return mix64(base ^ mix64(static_cast<uint64_t>(flow) * 0x100000001b3ull ^
                              static_cast<uint64_t>(index)));
}

struct ExperimentPlan {
    std::string network_path;  // empty: use the built-in benchmark city
    std::vector<int> flows = {200, 300, 400, 500, 600};
    int instances_per_flow = 10;
    std::vector<std::string> controllers = {"fixed", "local", "exact", "sa"};
    std::vector<double> beta_grid;  // default 0.00 .. 0.10 step 0.01
    double gamma = 10.0;
    uint64_t base_seed = 1;
    double injection_rate = 2.0;
    int duration_s = 400;
    int t_interval_s = 5;
    int sa_num_reads = 1000;
    int sa_num_sweeps = 1000;
    std::map<int, double> betas;  // per flow; empty entries resolved by grid search

    ExperimentPlan() {
        for (int i = 0; i <= 10; ++i) beta_grid.push_back(i * 0.01);
    }
};

inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j,
        {"network_path", "flows", "instances_per_flow", "controllers", "beta_grid", "gamma",
         "base_seed", "injection_rate", "duration_s", "t_interval_s", "sa_num_reads",
         "sa_num_sweeps", "betas"},
        "experiment plan");
    ExperimentPlan p;
    if (j.contains("network_path")) p.network_path = j.at("network_path").get<std::string>();
    if (j.contains("flows")) p.flows = j.at("flows").get<std::vector<int>>();
    if (j.contains("instances_per_flow")) p.instances_per_flow = j.at("instances_per_flow").get<int>();
    if (j.contains("controllers"))
        p.controllers = j.at("controllers").get<std::vector<std::string>>();
    if (j.contains("beta_grid")) p.beta_grid = j.at("beta_grid").get<std::vector<double>>();
    if (j.contains("gamma")) p.gamma = j.at("gamma").get<double>();
    if (j.contains("base_seed")) p.base_seed = j.at("base_seed").get<uint64_t>();
    if (j.contains("injection_rate")) p.injection_rate = j.at("injection_rate").get<double>();
    if (j.contains("duration_s")) p.duration_s = j.at("duration_s").get<int>();
    if (j.contains("t_interval_s")) p.t_interval_s = j.at("t_interval_s").get<int>();
    if (j.contains("sa_num_reads")) p.sa_num_reads = j.at("sa_num_reads").get<int>();
    if (j.contains("sa_num_sweeps")) p.sa_num_sweeps = j.at("sa_num_sweeps").get<int>();
    if (j.contains("betas"))
        for (auto it = j.at("betas").begin(); it != j.at("betas").end(); ++it)
            p.betas[std::stoi(it.key())] = it.value().get<double>();
    for (size_t i = 1; i < p.beta_grid.size(); ++i)
        if (!(p.beta_grid[i - 1] < p.beta_grid[i]))
            throw std::runtime_error("beta_grid must be strictly increasing");
    return p;
}

inline ExperimentPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open plan file '" + path + "'");
    nlohmann::json j;
    in >> j;
    return plan_from_json(j);
}

inline RoadNetwork plan_network(const ExperimentPlan& plan) {
    if (plan.network_path.empty()) return netgen::make_city();
    return load_network(plan.network_path);
}

inline Scenario make_scenario(const ExperimentPlan& plan, int flow, int index) {
    Scenario sc;
    sc.initial_vehicle_count = flow;
    sc.injection_rate = plan.injection_rate;
    sc.duration_s = plan.duration_s;
    sc.t_interval_s = plan.t_interval_s;
    sc.seed = instance_seed(plan.base_seed, flow, index);
    return sc;
}

inline std::vector<Scenario> generate_instances(const ExperimentPlan& plan) {
    std::vector<Scenario> out;
    for (int flow : plan.flows)
        for (int i = 0; i < plan.instances_per_flow; ++i)
            out.push_back(make_scenario(plan, flow, i));
    return out;
}

/// Beta minimizing the mean total waiting time over the flow's instances
/// under exact-solver control; ties go to the smallest beta.
inline double grid_search_beta(const ExperimentPlan& plan, int flow, const RoadNetwork& net,
                               const CoefficientTables& tables) {
    double best_beta = plan.beta_grid.front();
    double best_mean = std::numeric_limits<double>::infinity();
    for (double beta : plan.beta_grid) {
        ControllerConfig ctrl;
        ctrl.type = ControllerConfig::Type::Optimized;
        ctrl.solver = SolverKind::Exact;
        ctrl.params = Hyperparameters{beta, plan.gamma};
        std::vector<double> waits;
        for (int i = 0; i < plan.instances_per_flow; ++i) {
            SimMetrics m = run_simulation(net, tables, make_scenario(plan, flow, i), ctrl);
            waits.push_back(m.total_waiting_s);
        }
        double m = mean(waits);
        if (m < best_mean - 1e-12) {
            best_mean = m;
            best_beta = beta;
        }
    }
    return best_beta;
}

struct ScenarioFile {
    std::string network_path;
    Scenario scenario;
    ControllerConfig controller;
    bool has_controller = false;
};

inline ControllerConfig controller_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(
        j, {"type", "beta", "gamma", "cycle_s", "num_reads", "num_sweeps", "assignment"},
        "controller");
    ControllerConfig ctrl;
    std::string type = j.at("type").get<std::string>();
    if (type == "fixed") {
        ctrl.type = ControllerConfig::Type::FixedCycle;
        if (j.contains("cycle_s")) ctrl.cycle_s = j.at("cycle_s").get<double>();
    } else if (type == "static") {
        ctrl.type = ControllerConfig::Type::Static;
        if (j.contains("assignment"))
            for (auto it = j.at("assignment").begin(); it != j.at("assignment").end(); ++it)
                ctrl.fixed_assignment[it.key()] = it.value().get<int>();
    } else {
        ctrl.type = ControllerConfig::Type::Optimized;
        if (type == "local")
            ctrl.solver = SolverKind::Local;
        else if (type == "exact")
            ctrl.solver = SolverKind::Exact;
        else if (type == "sa")
            ctrl.solver = SolverKind::Sa;
        else
            throw std::runtime_error("unknown controller type '" + type + "'");
        if (j.contains("beta")) ctrl.params.beta = j.at("beta").get<double>();
        if (j.contains("gamma")) ctrl.params.gamma = j.at("gamma").get<double>();
        if (j.contains("num_reads")) ctrl.sa.num_reads = j.at("num_reads").get<int>();
        if (j.contains("num_sweeps")) ctrl.sa.num_sweeps = j.at("num_sweeps").get<int>();
    }
    return ctrl;
}

inline ScenarioFile load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
    nlohmann::json j;
    in >> j;
    detail::reject_unknown_keys(j,
                                {"network_path", "initial_vehicle_count", "injection_rate",
                                 "duration_s", "t_interval_s", "seed", "controller"},
                                "scenario file");
    ScenarioFile sf;
    sf.network_path = j.at("network_path").get<std::string>();
    if (j.contains("initial_vehicle_count"))
        sf.scenario.initial_vehicle_count = j.at("initial_vehicle_count").get<int>();
    if (j.contains("injection_rate"))
        sf.scenario.injection_rate = j.at("injection_rate").get<double>();
    if (j.contains("duration_s")) sf.scenario.duration_s = j.at("duration_s").get<int>();
    if (j.contains("t_interval_s")) sf.scenario.t_interval_s = j.at("t_interval_s").get<int>();
    if (j.contains("seed")) sf.scenario.seed = j.at("seed").get<uint64_t>();
    if (j.contains("controller")) {
        sf.controller = controller_from_json(j.at("controller"));
        sf.has_controller = true;
    }
    return sf;
}

struct RunRow {
    int flow = 0;
    int instance = 0;
    std::string controller;
    double beta = 0.0;
    double total_waiting_s = 0.0;
    double mean_energy = 0.0;
    double mean_rel_energy_err = 0.0;
    double mean_solver_ms = 0.0;
    double zero_terms_mean = 0.0;
    double nonzero_terms_mean = 0.0;
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
};

struct AggregateResult {
    // (flow, controller) -> mean and standard error of total waiting time
    std::map<std::pair<int, std::string>, std::pair<double, double>> waiting;
    std::map<int, double> sa_rel_energy_err;  // per flow
    std::map<int, double> chosen_beta;
    std::vector<RunRow> rows;
};

inline ControllerConfig make_controller(const std::string& kind, double beta, double gamma,
                                        int sa_reads, int sa_sweeps) {
    ControllerConfig ctrl;
    if (kind == "fixed") {
        ctrl.type = ControllerConfig::Type::FixedCycle;
        return ctrl;
    }
    ctrl.type = ControllerConfig::Type::Optimized;
    ctrl.params = Hyperparameters{beta, gamma};
    if (kind == "local") {
        ctrl.solver = SolverKind::Local;
        ctrl.compare_exact = true;
    } else if (kind == "exact") {
        ctrl.solver = SolverKind::Exact;
    } else if (kind == "sa") {
        ctrl.solver = SolverKind::Sa;
        ctrl.sa.num_reads = sa_reads;
        ctrl.sa.num_sweeps = sa_sweeps;
        ctrl.compare_exact = true;
    } else {
        throw std::invalid_argument("unknown controller '" + kind + "'");
    }
    return ctrl;
}

inline RunRow run_one(const ExperimentPlan& plan, const RoadNetwork& net,
                      const CoefficientTables& tables, int flow, int instance,
                      const std::string& controller, double beta) {
    RunRow row;
    row.flow = flow;
    row.instance = instance;
    row.controller = controller;
    row.beta = controller == "fixed" ? 0.0 : beta;
    Scenario sc = make_scenario(plan, flow, instance);
    row.seed = sc.seed;
    try {
        ControllerConfig ctrl =
            make_controller(controller, row.beta, plan.gamma, plan.sa_num_reads, plan.sa_num_sweeps);
        SimMetrics m = run_simulation(net, tables, sc, ctrl);
        row.total_waiting_s = m.total_waiting_s;
        std::vector<double> e, rel, ms, zero, nonzero;
        for (const StepRecord& s : m.steps) {
            e.push_back(s.energy);
            rel.push_back(s.rel_energy_err);
            ms.push_back(s.solver_ms);
            zero.push_back(s.zero_terms);
            nonzero.push_back(s.nonzero_terms);
        }
        row.mean_energy = mean(e);
        row.mean_rel_energy_err = mean(rel);
        row.mean_solver_ms = mean(ms);
        row.zero_terms_mean = mean(zero);
        row.nonzero_terms_mean = mean(nonzero);
    } catch (const std::exception& ex) {
        row.failed = true;
        row.error = ex.what();
    }
    return row;
}

inline std::string format_double(double v) {
    std::ostringstream oss;
    oss << std::setprecision(12) << v;
    return oss.str();
}

inline void write_results_csv(std::ostream& out, const std::vector<RunRow>& rows) {
    out << "flow,instance,controller,beta,total_waiting_s,total_waiting_h,mean_energy,"
           "mean_rel_energy_err,mean_solver_ms,zero_terms_mean,nonzero_terms_mean,seed\n";
    for (const RunRow& r : rows) {
        if (r.failed) continue;
        out << r.flow << ',' << r.instance << ',' << r.controller << ','
            << format_double(r.beta) << ',' << format_double(r.total_waiting_s) << ','
            << format_double(r.total_waiting_s / 3600.0) << ',' << format_double(r.mean_energy)
            << ',' << format_double(r.mean_rel_energy_err) << ','
            << format_double(r.mean_solver_ms) << ',' << format_double(r.zero_terms_mean) << ','
            << format_double(r.nonzero_terms_mean) << ',' << r.seed << '\n';
    }
}

inline int worker_count(int requested) {
    if (const char* env = std::getenv("SIGNALIS_WORKERS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs every (flow, instance, controller) combination, resolving beta per
/// flow by grid search when the plan does not pin it.
inline AggregateResult run_experiment(const ExperimentPlan& plan, int workers = 0,
                                      std::ostream* progress = nullptr) {
    RoadNetwork net = plan_network(plan);
    CoefficientTables tables = compute_tables(net);

    AggregateResult agg;
    for (int flow : plan.flows) {
        auto it = plan.betas.find(flow);
        if (it != plan.betas.end()) {
            agg.chosen_beta[flow] = it->second;
        } else {
            if (progress) (*progress) << "grid search, flow " << flow << "...\n";
            agg.chosen_beta[flow] = grid_search_beta(plan, flow, net, tables);
        }
        if (progress)
            (*progress) << "flow " << flow << ": beta = " << agg.chosen_beta[flow] << "\n";
    }

    struct Job {
        int flow, instance;
        std::string controller;
    };
    std::vector<Job> jobs;
    for (int flow : plan.flows)
        for (int i = 0; i < plan.instances_per_flow; ++i)
            for (const std::string& ctrl : plan.controllers) jobs.push_back({flow, i, ctrl});

    std::vector<RunRow> rows(jobs.size());
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (;;) {
            size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            rows[j] = run_one(plan, net, tables, jobs[j].flow, jobs[j].instance,
                              jobs[j].controller, agg.chosen_beta[jobs[j].flow]);
        }
    };
    int n_workers = worker_count(workers);
    if (n_workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    std::map<std::pair<int, std::string>, std::vector<double>> waits;
    std::map<int, std::vector<double>> sa_rel;
    for (const RunRow& r : rows) {
        if (r.failed) {
            if (progress)
                (*progress) << "warning: run failed (flow " << r.flow << ", instance "
                            << r.instance << ", " << r.controller << "): " << r.error << "\n";
            continue;
        }
        waits[{r.flow, r.controller}].push_back(r.total_waiting_s);
        if (r.controller == "sa") sa_rel[r.flow].push_back(r.mean_rel_energy_err);
    }
    for (const auto& [key, xs] : waits)
        agg.waiting[key] = {mean(xs), standard_error(xs)};
    for (const auto& [flow, xs] : sa_rel) agg.sa_rel_energy_err[flow] = mean(xs);
    agg.rows = std::move(rows);
    return agg;
}

// ---------------------------------------------------------------------------
// SVG bar charts (means with standard-error whiskers, grouped by flow).

struct BarSeries {
    std::string label;
    std::vector<double> mean;  // one per group
    std::vector<double> se;
};

inline void write_bar_chart_svg(std::ostream& out, const std::string& title,
                                const std::vector<std::string>& groups,
                                const std::vector<BarSeries>& series,
                                const std::string& y_label) {
    const double w = 760, h = 460, ml = 70, mr = 20, mt = 50, mb = 60;
    double vmax = 1e-12;
    for (const auto& s : series)
        for (size_t g = 0; g < s.mean.size(); ++g)
            vmax = std::max(vmax, s.mean[g] + (g < s.se.size() ? s.se[g] : 0.0));
    vmax *= 1.1;
    double plot_w = w - ml - mr, plot_h = h - mt - mb;
    auto y_of = [&](double v) { return mt + plot_h * (1.0 - v / vmax); };

    static const char* palette[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4"};
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
        << "' font-family='sans-serif' font-size='12'>\n";
    out << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + plot_h
        << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt + plot_h << "' x2='" << ml + plot_w << "' y2='"
        << mt + plot_h << "' stroke='black'/>\n";
    for (int tickn = 0; tickn <= 5; ++tickn) {
        double v = vmax * tickn / 5.0;
        out << "<text x='" << ml - 6 << "' y='" << y_of(v) + 4
            << "' text-anchor='end'>" << std::setprecision(3) << v << "</text>\n";
    }
    out << "<text x='16' y='" << mt + plot_h / 2 << "' transform='rotate(-90 16 "
        << mt + plot_h / 2 << ")' text-anchor='middle'>" << y_label << "</text>\n";

    size_t ng = groups.size(), ns = series.size();
    double group_w = plot_w / std::max<size_t>(1, ng);
    double bar_w = group_w * 0.8 / std::max<size_t>(1, ns);
    for (size_t g = 0; g < ng; ++g) {
        double gx = ml + g * group_w;
        out << "<text x='" << gx + group_w / 2 << "' y='" << mt + plot_h + 18
            << "' text-anchor='middle'>" << groups[g] << "</text>\n";
        for (size_t s = 0; s < ns; ++s) {
            if (g >= series[s].mean.size()) continue;
            double v = series[s].mean[g];
            double e = g < series[s].se.size() ? series[s].se[g] : 0.0;
            double x = gx + group_w * 0.1 + s * bar_w;
            out << "<rect x='" << x << "' y='" << y_of(v) << "' width='" << bar_w * 0.92
                << "' height='" << std::max(0.0, mt + plot_h - y_of(v)) << "' fill='"
                << palette[s % 5] << "'/>\n";
            if (e > 0.0) {
                double cx = x + bar_w * 0.46;
                out << "<line x1='" << cx << "' y1='" << y_of(v - e) << "' x2='" << cx
                    << "' y2='" << y_of(v + e) << "' stroke='black'/>\n";
            }
        }
    }
    for (size_t s = 0; s < ns; ++s) {
        double lx = ml + 10 + s * 120, ly = mt - 12;
        out << "<rect x='" << lx << "' y='" << ly - 10 << "' width='12' height='12' fill='"
            << palette[s % 5] << "'/>\n";
        out << "<text x='" << lx + 16 << "' y='" << ly << "'>" << series[s].label
            << "</text>\n";
    }
    out << "</svg>\n";
}

/// Read a results CSV back (used by the plot command).
inline std::vector<RunRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open results file '" + path + "'");
    std::string line;
    std::getline(in, line);  // header
    std::vector<RunRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f;
        RunRow r;
        std::getline(ls, f, ',');
        r.flow = std::stoi(f);
        std::getline(ls, f, ',');
        r.instance = std::stoi(f);
        std::getline(ls, r.controller, ',');
        std::getline(ls, f, ',');
        r.beta = std::stod(f);
        std::getline(ls, f, ',');
        r.total_waiting_s = std::stod(f);
        std::getline(ls, f, ',');  // hours, derived
        std::getline(ls, f, ',');
        r.mean_energy = std::stod(f);
        std::getline(ls, f, ',');
        r.mean_rel_energy_err = std::stod(f);
        std::getline(ls, f, ',');
        r.mean_solver_ms = std::stod(f);
        std::getline(ls, f, ',');
        r.zero_terms_mean = std::stod(f);
        std::getline(ls, f, ',');
        r.nonzero_terms_mean = std::stod(f);
        std::getline(ls, f, ',');
        r.seed = std::stoull(f);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_plots(const std::vector<RunRow>& rows, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::vector<int> flows;
    std::vector<std::string> controllers;
    for (const RunRow& r : rows) {
        if (std::find(flows.begin(), flows.end(), r.flow) == flows.end()) flows.push_back(r.flow);
        if (std::find(controllers.begin(), controllers.end(), r.controller) == controllers.end())
            controllers.push_back(r.controller);
    }
    std::sort(flows.begin(), flows.end());
    std::vector<std::string> groups;
    for (int f : flows) groups.push_back(std::to_string(f));

    auto collect = [&](const std::string& ctrl, auto getter) {
        BarSeries s;
        s.label = ctrl;
        for (int f : flows) {
            std::vector<double> xs;
            for (const RunRow& r : rows)
                if (r.flow == f && r.controller == ctrl) xs.push_back(getter(r));
            s.mean.push_back(mean(xs));
            s.se.push_back(standard_error(xs));
        }
        return s;
    };

    {
        std::ofstream out(fs::path(out_dir) / "total_waiting_time.svg");
        std::vector<BarSeries> series;
        for (const auto& c : controllers)
            series.push_back(collect(c, [](const RunRow& r) { return r.total_waiting_s; }));
        write_bar_chart_svg(out, "Total waiting time by initial vehicle count", groups, series,
                            "mean total waiting time [s]");
    }
    {
        std::ofstream out(fs::path(out_dir) / "relative_energy_error.svg");
        std::vector<BarSeries> series;
        for (const auto& c : controllers) {
            if (c != "sa" && c != "local") continue;
            series.push_back(collect(c, [](const RunRow& r) { return r.mean_rel_energy_err; }));
        }
        write_bar_chart_svg(out, "Relative energy error vs exact optimum", groups, series,
                            "mean relative energy error");
    }
    {
        std::ofstream out(fs::path(out_dir) / "first_order_census.svg");
        std::vector<BarSeries> series;
        for (const auto& c : controllers) {
            if (c == "fixed") continue;
            BarSeries z = collect(c, [](const RunRow& r) { return r.zero_terms_mean; });
            BarSeries nz = collect(c, [](const RunRow& r) { return r.nonzero_terms_mean; });
            z.label = c + " zero";
            nz.label = c + " nonzero";
            series.push_back(z);
            series.push_back(nz);
            break;  // one optimizing controller suffices
        }
        write_bar_chart_svg(out, "First-order term census", groups, series, "mean count");
    }
    {
        std::ofstream out(fs::path(out_dir) / "solver_time.svg");
        std::vector<BarSeries> series;
        for (const auto& c : controllers) {
            if (c == "fixed") continue;
            series.push_back(collect(c, [](const RunRow& r) { return r.mean_solver_ms; }));
        }
        write_bar_chart_svg(out, "Solver wall-clock per optimization step", groups, series,
                            "mean solver time [ms]");
    }
}

}  // namespace signalis
