#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "signalis/experiment.hpp"
#include "signalis/io.hpp"
#include "signalis/netgen.hpp"
#include "signalis/sim.hpp"
#include "signalis/solvers.hpp"

namespace fs = std::filesystem;
using namespace signalis;

namespace {

int cmd_validate(const std::string& network_path) {
    std::ifstream in(network_path);
    if (!in) {
        std::cerr << "cannot open '" << network_path << "'\n";
        return 2;
    }
    nlohmann::json j;
    in >> j;
    RoadNetwork net = network_from_json(j);
    ValidationReport rep = validate(net);
    if (rep.ok()) {
        std::cout << "OK: " << net.intersections.size() << " intersections, "
                  << net.segments.size() << " segments, " << VariableIndex(net).num_vars()
                  << " variables\n";
        return 0;
    }
    for (const auto& v : rep.violations) std::cout << "violation: " << v << "\n";
    return 1;
}

int cmd_solve(const std::string& network_path, const std::string& counts_path, double beta,
              double gamma, const std::string& solver, uint64_t seed, int num_reads,
              int num_sweeps, const std::string& dump_qubo, const std::string& dump_samples) {
    RoadNetwork net = load_network(network_path);
    CoefficientTables tables = compute_tables(net);
    VariableIndex index(net);
    TrafficCounts counts = load_counts(counts_path);
    Qubo q = build_qubo(net, tables, index, counts, Hyperparameters{beta, gamma});

    if (!dump_qubo.empty()) {
        std::ofstream out(dump_qubo);
        write_qubo_triplets(out, q);
    }

    ModeAssignment assignment;
    double energy = 0.0;
    if (solver == "local") {
        assignment = solve_local(counts, net);
        std::vector<uint8_t> x(q.num_vars, 0);
        for (const auto& [iid, m] : assignment.selected) x[index.id(iid, m)] = 1;
        energy = evaluate(q, x);
    } else if (solver == "exact") {
        SolveResult r = solve_exact(q, index, counts);
        assignment = r.assignment;
        energy = r.best_energy;
        std::cout << "elapsed_ms " << r.elapsed.count() * 1e3 << "\n";
    } else {
        SaConfig cfg;
        cfg.num_reads = num_reads;
        cfg.num_sweeps = num_sweeps;
        cfg.rng_seed = seed;
        SolveResult r = solve_sa(q, index, counts, cfg);
        assignment = r.assignment;
        energy = r.best_energy;
        std::cout << "elapsed_ms " << r.elapsed.count() * 1e3 << "\n";
        if (!dump_samples.empty()) {
            std::ofstream out(dump_samples);
            out << "read,energy,x_bits\n";
            for (size_t i = 0; i < r.samples.size(); ++i) {
                out << i << ',' << format_double(r.samples[i].energy) << ',';
                for (uint8_t b : r.samples[i].x) out << int(b);
                out << '\n';
            }
        }
    }
    std::cout << "energy " << format_double(energy) << "\n";
    std::cout << "feasible " << (assignment.feasible ? "yes" : "no") << "\n";
    if (!assignment.repaired.empty()) {
        std::cout << "repaired";
        for (const auto& iid : assignment.repaired) std::cout << ' ' << iid;
        std::cout << "\n";
    }
    for (const auto& [iid, m] : assignment.selected)
        std::cout << "mode " << iid << ' ' << m << "\n";
    return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& controller_kind,
                 const std::string& event_log_path) {
    ScenarioFile sf = load_scenario(scenario_path);
    RoadNetwork net = load_network(sf.network_path);
    CoefficientTables tables = compute_tables(net);

    ControllerConfig ctrl = sf.controller;
    if (!controller_kind.empty())
        ctrl = make_controller(controller_kind, ctrl.params.beta, ctrl.params.gamma,
                               ctrl.sa.num_reads, ctrl.sa.num_sweeps);
    else if (!sf.has_controller)
        throw std::runtime_error("no controller in scenario file and none given");

    std::ofstream event_log;
    std::ostream* log = nullptr;
    if (!event_log_path.empty()) {
        event_log.open(event_log_path);
        log = &event_log;
    }

    SimMetrics m = run_simulation(net, tables, sf.scenario, ctrl, SimParams{}, log);
    std::cout << "total_waiting_s " << format_double(m.total_waiting_s) << "\n"
              << "total_waiting_h " << format_double(m.total_waiting_s / 3600.0) << "\n"
              << "vehicles_injected " << m.vehicles_injected << "\n"
              << "vehicles_arrived " << m.vehicles_arrived << "\n"
              << "vehicles_on_map " << m.vehicles_on_map << "\n"
              << "optimizer_calls " << m.optimizer_calls << "\n";
    return 0;
}

int cmd_gridsearch(const std::string& plan_path, int flow) {
    ExperimentPlan plan = load_plan(plan_path);
    RoadNetwork net = plan_network(plan);
    CoefficientTables tables = compute_tables(net);
    double beta = grid_search_beta(plan, flow, net, tables);
    std::cout << "flow " << flow << " beta " << format_double(beta) << "\n";
    return 0;
}

int cmd_experiment(const std::string& plan_path, const std::string& out_dir, int workers) {
    ExperimentPlan plan = load_plan(plan_path);
    fs::create_directories(out_dir);
    AggregateResult agg = run_experiment(plan, workers, &std::cerr);

    std::ofstream csv(fs::path(out_dir) / "results.csv");
    write_results_csv(csv, agg.rows);
    csv.close();

    std::ofstream summary(fs::path(out_dir) / "summary.csv");
    summary << "flow,controller,mean_waiting_s,se_waiting_s,mean_waiting_h,beta\n";
    for (const auto& [key, ms] : agg.waiting)
        summary << key.first << ',' << key.second << ',' << format_double(ms.first) << ','
                << format_double(ms.second) << ',' << format_double(ms.first / 3600.0) << ','
                << format_double(agg.chosen_beta.at(key.first)) << '\n';
    summary.close();

    write_plots(agg.rows, (fs::path(out_dir) / "plots").string());
    std::cout << "wrote " << (fs::path(out_dir) / "results.csv").string() << "\n";
    return 0;
}

int cmd_plot(const std::string& results_path, const std::string& out_dir) {
    write_plots(read_results_csv(results_path), out_dir);
    std::cout << "wrote plots to " << out_dir << "\n";
    return 0;
}

int cmd_gen(const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto dump = [&](const std::string& name, const RoadNetwork& net) {
        std::ofstream out(fs::path(out_dir) / name);
        out << network_to_json(net).dump(2) << "\n";
        std::cout << name << ": " << VariableIndex(net).num_vars() << " variables\n";
    };
    dump("corridor.json", netgen::make_corridor(3));
    dump("city.json", netgen::make_city());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"traffic-signal QUBO optimization toolkit"};
    app.require_subcommand(1);

    std::string network_path, counts_path, scenario_path, plan_path, results_path;
    std::string out_dir = "out", solver = "sa", controller_kind, event_log_path;
    std::string dump_qubo, dump_samples;
    double beta = 0.0, gamma = 10.0;
    uint64_t seed = 0;
    int num_reads = 1000, num_sweeps = 1000, flow = 200, workers = 0;

    auto* validate_cmd = app.add_subcommand("validate", "check a network file");
    validate_cmd->add_option("network", network_path)->required();

    auto* solve_cmd = app.add_subcommand("solve", "build and solve one QUBO");
    solve_cmd->add_option("--network", network_path)->required();
    solve_cmd->add_option("--counts", counts_path)->required();
    solve_cmd->add_option("--beta", beta);
    solve_cmd->add_option("--gamma", gamma);
    solve_cmd->add_option("--solver", solver)->check(CLI::IsMember({"sa", "exact", "local"}));
    solve_cmd->add_option("--seed", seed);
    solve_cmd->add_option("--num-reads", num_reads);
    solve_cmd->add_option("--num-sweeps", num_sweeps);
    solve_cmd->add_option("--dump-qubo", dump_qubo);
    solve_cmd->add_option("--dump-samples", dump_samples);

    auto* sim_cmd = app.add_subcommand("simulate", "run one closed-loop simulation");
    sim_cmd->add_option("--scenario", scenario_path)->required();
    sim_cmd->add_option("--controller", controller_kind)
        ->check(CLI::IsMember({"fixed", "local", "exact", "sa"}));
    sim_cmd->add_option("--event-log", event_log_path);

    auto* grid_cmd = app.add_subcommand("gridsearch", "pick beta for one flow level");
    grid_cmd->add_option("--plan", plan_path)->required();
    grid_cmd->add_option("--flow", flow)->required();

    auto* exp_cmd = app.add_subcommand("experiment", "run the full experiment plan");
    exp_cmd->add_option("--plan", plan_path)->required();
    exp_cmd->add_option("--out", out_dir);
    exp_cmd->add_option("--workers", workers);

    auto* plot_cmd = app.add_subcommand("plot", "render SVG charts from a results CSV");
    plot_cmd->add_option("--results", results_path)->required();
    plot_cmd->add_option("--out", out_dir);

    auto* gen_cmd = app.add_subcommand("gen", "write the built-in benchmark networks");
    gen_cmd->add_option("--out", out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) return cmd_validate(network_path);
        if (solve_cmd->parsed())
            return cmd_solve(network_path, counts_path, beta, gamma, solver, seed, num_reads,
                             num_sweeps, dump_qubo, dump_samples);
        if (sim_cmd->parsed()) return cmd_simulate(scenario_path, controller_kind, event_log_path);
        if (grid_cmd->parsed()) return cmd_gridsearch(plan_path, flow);
        if (exp_cmd->parsed()) return cmd_experiment(plan_path, out_dir, workers);
        if (plot_cmd->parsed()) return cmd_plot(results_path, out_dir);
        if (gen_cmd->parsed()) return cmd_gen(out_dir);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
