/*
Copyright 2026 The vtl-qubo Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

// vtl: phase catalogue, QUBO building, standalone solving, single scenario
// runs, experiment grids and reports.
//
// Exit codes: 0 ok, 1 cell/run failures, 2 bad input or configuration.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtl/delay_matrix.hpp"
#include "vtl/experiment.hpp"
#include "vtl/phase_model.hpp"
#include "vtl/qubo.hpp"
#include "vtl/sim.hpp"
#include "vtl/solvers.hpp"

namespace {

struct BadInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BadInput("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw BadInput("cannot write " + out_path);
    out << text;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// "csv" | "json" | "qubo"; guessed from the extension and then the content.
std::string detect_format(const std::string& path, const std::string& text) {
    if (ends_with(path, ".csv")) return "csv";
    if (ends_with(path, ".json")) return "json";
    if (ends_with(path, ".qubo") || ends_with(path, ".txt")) return "qubo";
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return "json";
    if (text.rfind("phase", first == std::string::npos ? 0 : first) == first) return "csv";
    return "qubo";
}

vtl::DelayMatrix load_matrix(const std::string& format, const std::string& text) {
    if (format == "csv") {
        std::istringstream in(text);
        return vtl::delay_matrix_from_csv(in);
    }
    return nlohmann::json::parse(text).get<vtl::DelayMatrix>();
}

vtl::GammaPolicy parse_gamma(const std::string& g) {
    if (g == "auto") return vtl::GammaPolicy::Auto;
    if (g == "paper") return vtl::GammaPolicy::Paper;
    throw BadInput("--gamma must be auto or paper");
}

// Accepts "1,2,5" and ranges such as "1-10".
std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& tokens) {
    std::vector<std::uint64_t> seeds;
    for (const auto& t : tokens) {
        const auto dash = t.find('-');
        try {
            if (dash == std::string::npos) {
                seeds.push_back(std::stoull(t));
            } else {
                const auto lo = std::stoull(t.substr(0, dash)), hi = std::stoull(t.substr(dash + 1));
                if (hi < lo) throw BadInput("bad seed range " + t);
                for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw BadInput("bad seed '" + t + "'");
        }
    }
    return seeds;
}

vtl::ArrivalMode parse_arrivals(const std::string& a) {
    if (a == "deterministic") return vtl::ArrivalMode::Deterministic;
    if (a == "exponential") return vtl::ArrivalMode::Exponential;
    throw BadInput("--arrivals must be deterministic or exponential");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Virtual traffic light phase sequencing testbed"};
    app.require_subcommand(1);

    // phases
    auto* phases = app.add_subcommand("phases", "Print the phase catalogue as JSON");

    // qubo
    auto* qubo_cmd = app.add_subcommand("qubo", "Build the penalized QUBO of a delay matrix");
    std::string qubo_in, qubo_out, qubo_gamma = "auto";
    bool qubo_ising = false;
    qubo_cmd->add_option("input", qubo_in, "Delay matrix (CSV or JSON, '-' for stdin)")->required();
    qubo_cmd->add_option("--gamma", qubo_gamma, "auto or paper, or a number")->capture_default_str();
    qubo_cmd->add_flag("--ising", qubo_ising, "Emit the Ising form as JSON instead");
    qubo_cmd->add_option("-o,--out", qubo_out, "Output file (default stdout)");

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "Solve one instance and print SolverResult JSON");
    std::string solve_in, solve_out, solve_solver = "sa", solve_gamma = "auto", solve_format, solve_space = "permutation";
    std::uint64_t solve_seed = 0, solve_budget = 0;
    solve_cmd->add_option("input", solve_in, "QUBO text, delay CSV or delay JSON ('-' for stdin)")->required();
    solve_cmd->add_option("--solver", solve_solver, "exact|sa|hc|gd|adam|bnb")
        ->check(CLI::IsMember({"exact", "sa", "hc", "gd", "adam", "bnb"}))
        ->capture_default_str();
    solve_cmd->add_option("--seed", solve_seed)->capture_default_str();
    solve_cmd->add_option("--budget", solve_budget, "Max objective evaluations (0: solver default)");
    solve_cmd->add_option("--gamma", solve_gamma, "auto or paper (delay-matrix input)")->capture_default_str();
    solve_cmd->add_option("--format", solve_format, "qubo|csv|json (default: guess)")
        ->check(CLI::IsMember({"qubo", "csv", "json"}));
    solve_cmd->add_option("--bnb-space", solve_space, "permutation or qubo")
        ->check(CLI::IsMember({"permutation", "qubo"}))
        ->capture_default_str();
    solve_cmd->add_option("-o,--out", solve_out, "Output file (default stdout)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Run one scenario");
    std::string sim_config, sim_solver = "sa", sim_trips, sim_metrics, sim_decisions, sim_latency;
    sim_cmd->add_option("--config", sim_config, "Scenario JSON");
    sim_cmd->add_option("--solver", sim_solver, "exact|sa|hc|gd|adam|bnb|fixed")
        ->check(CLI::IsMember({"exact", "sa", "hc", "gd", "adam", "bnb", "fixed"}))
        ->capture_default_str();
    sim_cmd->add_option("--latency", sim_latency, "none|paper|custom:<a>,<b>");
    sim_cmd->add_option("--trips", sim_trips, "Trip CSV output");
    sim_cmd->add_option("--metrics", sim_metrics, "RunMetrics JSON output (default stdout)");
    sim_cmd->add_option("--decisions", sim_decisions, "Decision log JSON output");

    // run
    auto* run_cmd = app.add_subcommand("run", "Run a scenario grid");
    std::string run_config, run_latency, run_out, run_arrivals, run_gamma;
    std::vector<double> run_volumes, run_zones;
    std::vector<std::string> run_solvers, run_seed_tokens;
    double run_duration = 0.0;
    std::size_t run_workers = 0;
    bool run_force = false;
    run_cmd->add_option("--config", run_config, "Plan JSON; flags given on the command line take precedence");
    run_cmd->add_option("--volumes", run_volumes, "Volume fractions")->delimiter(',');
    run_cmd->add_option("--zones", run_zones, "VTL zone lengths in m")->delimiter(',');
    run_cmd->add_option("--solvers", run_solvers, "Solver names")->delimiter(',');
    run_cmd->add_option("--seeds", run_seed_tokens, "Seeds, e.g. 1-10 or 1,2,3")->delimiter(',');
    run_cmd->add_option("--duration", run_duration, "Simulated seconds per run");
    run_cmd->add_option("--latency", run_latency, "none|paper|custom:<a>,<b>");
    run_cmd->add_option("--arrivals", run_arrivals, "deterministic|exponential");
    run_cmd->add_option("--gamma", run_gamma, "auto|paper");
    run_cmd->add_option("--workers", run_workers, "Worker threads (0: all cores)");
    run_cmd->add_option("--out", run_out, "Output directory");
    run_cmd->add_flag("--force", run_force, "Re-run completed cells");

    // report
    auto* rep_cmd = app.add_subcommand("report", "Summarize a results directory");
    std::string rep_in, rep_out, rep_reference = "sa", rep_unit = "vehicle";
    rep_cmd->add_option("results", rep_in, "Results directory")->required();
    rep_cmd->add_option("--out", rep_out, "Report directory (default <results>/report)");
    rep_cmd->add_option("--reference", rep_reference, "Reference solver")->capture_default_str();
    rep_cmd->add_option("--unit", rep_unit, "vehicle (pooled) or seed (per-seed means)")
        ->check(CLI::IsMember({"vehicle", "seed"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*phases) {
            std::cout << vtl::catalogue_json().dump(2) << "\n";
            return 0;
        }

        if (*qubo_cmd) {
            const std::string text = slurp(qubo_in);
            const auto d = load_matrix(detect_format(qubo_in, text) == "csv" ? "csv" : "json", text);
            double gamma = 0.0;
            if (qubo_gamma == "auto" || qubo_gamma == "paper") {
                gamma = vtl::resolve_gamma(parse_gamma(qubo_gamma), d);
            } else {
                try {
                    gamma = std::stod(qubo_gamma);
                } catch (const std::logic_error&) {
                    throw BadInput("--gamma must be auto, paper or a number");
                }
            }
            const auto m = vtl::build_qubo(d, gamma);
            if (qubo_ising) {
                const auto ising = vtl::to_ising(m);
                nlohmann::json j{{"offset", ising.offset()}, {"h", ising.h()}, {"J", nlohmann::json::array()}};
                for (const auto& t : ising.couplings()) j["J"].push_back({t.i, t.j, t.w});
                emit(qubo_out, j.dump(2) + "\n");
            } else {
                emit(qubo_out, vtl::to_text(m));
            }
            return 0;
        }

        if (*solve_cmd) {
            const std::string text = slurp(solve_in);
            const std::string format = solve_format.empty() ? detect_format(solve_in, text) : solve_format;
            vtl::SolverConfig cfg;
            cfg.seed = solve_seed;
            if (solve_budget > 0) cfg.budget = solve_budget;
            cfg.gamma = parse_gamma(solve_gamma);
            cfg.bnb_space = solve_space == "qubo" ? vtl::BnbSpace::Qubo : vtl::BnbSpace::Permutation;
            cfg.validate();
            const auto kind = vtl::parse_solver(solve_solver);
            vtl::SolverResult r;
            if (format == "qubo") {
                std::istringstream in(text);
                const auto m = vtl::qubo_from_text(in);
                r = vtl::solve(kind, m, cfg);
            } else {
                r = vtl::solve(kind, load_matrix(format, text), cfg);
            }
            emit(solve_out, nlohmann::json(r).dump(2) + "\n");
            return 0;
        }

        if (*sim_cmd) {
            vtl::ScenarioConfig cfg;
            if (!sim_config.empty()) nlohmann::json::parse(slurp(sim_config)).get_to(cfg);
            if (!sim_latency.empty()) cfg.latency = vtl::LatencyModel::parse(sim_latency);
            cfg.validate();
            vtl::RunResult run;
            if (sim_solver == "fixed") {
                run = vtl::run_fixed_cycle(cfg);
            } else {
                vtl::SolverSelection sel;
                sel.kind = vtl::parse_solver(sim_solver);
                sel.config.seed = cfg.seed;
                run = vtl::run_scenario(cfg, sel);
            }
            if (!sim_trips.empty()) emit(sim_trips, vtl::trips_csv(run.trips));
            if (!sim_decisions.empty()) emit(sim_decisions, nlohmann::json(run.decisions).dump(1) + "\n");
            emit(sim_metrics, nlohmann::json(run.metrics).dump(1) + "\n");
            std::cerr << "trips " << run.metrics.per_vehicle.size() << "  mean delay " << run.metrics.mean_delay_s
                      << " s  mean travel " << run.metrics.mean_travel_s << " s  conflicts "
                      << run.safety.conflict_ticks() << "  conservation violations "
                      << run.safety.conservation_violations << "\n";
            return run.safety.conflict_ticks() + run.safety.conservation_violations == 0 ? 0 : 1;
        }

        if (*run_cmd) {
            vtl::ExperimentPlan plan;
            if (!run_config.empty()) vtl::apply_plan_json(nlohmann::json::parse(slurp(run_config)), plan);
            if (!run_volumes.empty()) plan.volumes = run_volumes;
            if (!run_zones.empty()) plan.zones_m = run_zones;
            if (!run_solvers.empty()) {
                plan.solvers.clear();
                for (const auto& s : run_solvers) plan.solvers.push_back(vtl::parse_solver(s));
            }
            if (!run_seed_tokens.empty()) plan.seeds = parse_seeds(run_seed_tokens);
            if (run_duration > 0.0) plan.base.sim_duration_s = run_duration;
            else if (run_cmd->count("--duration")) throw BadInput("--duration must be > 0");
            if (!run_latency.empty()) plan.base.latency = vtl::LatencyModel::parse(run_latency);
            if (!run_arrivals.empty()) plan.base.arrivals = parse_arrivals(run_arrivals);
            if (!run_gamma.empty()) plan.solver.gamma = parse_gamma(run_gamma);
            if (run_cmd->count("--workers")) plan.workers = run_workers;
            if (!run_out.empty()) plan.out_dir = run_out;
            plan.force = run_force;
            try {
                plan.validate();
            } catch (const std::exception& e) {
                throw BadInput(e.what());
            }

            const auto outcome = vtl::run_experiment(plan);
            std::cerr << "executed " << outcome.executed << ", skipped " << outcome.skipped << ", failed "
                      << outcome.failures.size() << "\n";
            for (const auto& f : outcome.failures) std::cerr << "  FAILED " << f.cell << ": " << f.message << "\n";
            return outcome.exit_code();
        }

        if (*rep_cmd) {
            const std::string out = rep_out.empty() ? (std::filesystem::path(rep_in) / "report").string() : rep_out;
            const auto unit = rep_unit == "seed" ? vtl::SampleUnit::PerSeedMean : vtl::SampleUnit::PerVehicle;
            const auto rep = vtl::report(rep_in, out, rep_reference, unit);
            std::cout << vtl::summary_text(rep);
            return 0;
        }
    } catch (const BadInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
