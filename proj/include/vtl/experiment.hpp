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

/*
   Scenario grid execution and reporting.

   Layout of an output directory:

     cells/<cell>/cell.json        condition, solver metadata, safety counters
     cells/<cell>/trips.csv        every completed trip
     cells/<cell>/metrics.json     RunMetrics over post-warm-up trips
     cells/<cell>/decisions.json   one record per controller decision
     manifest.json                 every file above with its SHA-256

   A cell directory is assembled under a temporary name and renamed into
   place, so a cell either exists completely or not at all.
*/

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "vtl/hash.hpp"
#include "vtl/metrics.hpp"
#include "vtl/sim.hpp"
#include "vtl/solvers.hpp"

namespace vtl {

namespace fs = std::filesystem;

struct ExperimentPlan {
    std::vector<double> volumes{0.35, 0.70, 1.05};
    std::vector<double> zones_m{50.0, 75.0, 100.0};
    std::vector<SolverKind> solvers{SolverKind::SimulatedAnnealing, SolverKind::HillClimbing,
                                    SolverKind::GradientDescent, SolverKind::Adam, SolverKind::BranchAndBound};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    ScenarioConfig base{};
    SolverConfig solver{};
    fs::path out_dir = "results";
    bool force = false;
    std::size_t workers = 0;  // 0: hardware concurrency

    void validate() const {
        if (volumes.empty() || zones_m.empty() || solvers.empty() || seeds.empty())
            throw std::invalid_argument("plan: volumes, zones, solvers and seeds must be non-empty");
        if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
            throw std::invalid_argument("plan: seeds must be unique");
        if (std::set<SolverKind>(solvers.begin(), solvers.end()).size() != solvers.size())
            throw std::invalid_argument("plan: solvers must be unique");
        for (double v : volumes)
            if (!(v > 0.0)) throw std::invalid_argument("plan: volumes must be > 0");
        for (double z : zones_m)
            if (!(z > 0.0)) throw std::invalid_argument("plan: zones must be > 0");
        solver.validate();
        ScenarioConfig probe = base;
        probe.volume_fraction = volumes.front();
        probe.vtl_zone_m = zones_m.front();
        probe.validate();
    }
};

// Plan file: any subset of {volumes, zones_m, solvers, seeds, scenario,
// solver, out, workers}. Unknown keys are rejected.
inline void apply_plan_json(const nlohmann::json& j, ExperimentPlan& plan) {
    static const std::set<std::string> kKnown{"volumes", "zones_m", "solvers", "seeds",
                                              "scenario", "solver", "out", "workers"};
    for (const auto& [key, _] : j.items())
        if (!kKnown.contains(key)) throw std::invalid_argument("unknown plan key '" + key + "'");
    if (j.contains("volumes")) plan.volumes = j.at("volumes").get<std::vector<double>>();
    if (j.contains("zones_m")) plan.zones_m = j.at("zones_m").get<std::vector<double>>();
    if (j.contains("seeds")) plan.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("solvers")) {
        plan.solvers.clear();
        for (const auto& s : j.at("solvers")) plan.solvers.push_back(parse_solver(s.get<std::string>()));
    }
    if (j.contains("scenario")) j.at("scenario").get_to(plan.base);
    if (j.contains("out")) plan.out_dir = j.at("out").get<std::string>();
    if (j.contains("workers")) plan.workers = j.at("workers").get<std::size_t>();
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        static const std::set<std::string> kSolverKeys{"gamma", "budget", "bnb_space", "annealing", "gradient", "adam"};
        for (const auto& [key, _] : s.items())
            if (!kSolverKeys.contains(key)) throw std::invalid_argument("unknown solver key '" + key + "'");
        auto& c = plan.solver;
        if (s.contains("gamma")) {
            const auto g = s.at("gamma").get<std::string>();
            if (g == "auto") c.gamma = GammaPolicy::Auto;
            else if (g == "paper") c.gamma = GammaPolicy::Paper;
            else throw std::invalid_argument("gamma must be auto or paper");
        }
        if (s.contains("budget")) c.budget = s.at("budget").get<std::uint64_t>();
        if (s.contains("bnb_space")) {
            const auto b = s.at("bnb_space").get<std::string>();
            if (b == "permutation") c.bnb_space = BnbSpace::Permutation;
            else if (b == "qubo") c.bnb_space = BnbSpace::Qubo;
            else throw std::invalid_argument("bnb_space must be permutation or qubo");
        }
        if (s.contains("annealing")) {
            const auto& a = s.at("annealing");
            c.annealing.sweeps = a.value("sweeps", c.annealing.sweeps);
            c.annealing.decay = a.value("decay", c.annealing.decay);
            c.annealing.exchange_fraction = a.value("exchange_fraction", c.annealing.exchange_fraction);
            if (a.contains("initial_temperature")) c.annealing.initial_temperature = a.at("initial_temperature").get<double>();
        }
        if (s.contains("gradient")) {
            const auto& g = s.at("gradient");
            c.gradient.step = g.value("step", c.gradient.step);
            c.gradient.iterations = g.value("iterations", c.gradient.iterations);
        }
        if (s.contains("adam")) {
            const auto& a = s.at("adam");
            c.adam.step = a.value("step", c.adam.step);
            c.adam.beta1 = a.value("beta1", c.adam.beta1);
            c.adam.beta2 = a.value("beta2", c.adam.beta2);
            c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
            c.adam.iterations = a.value("iterations", c.adam.iterations);
        }
    }
}

struct CellSpec {
    double volume = 0.0;
    double zone_m = 0.0;
    SolverKind solver = SolverKind::SimulatedAnnealing;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << data;
    out.close();
    if (!out) throw std::runtime_error("write failed: " + p.string());
}

// Write to a sibling temp file, then rename over the target.
inline void write_atomic(const fs::path& p, const std::string& data) {
    fs::path tmp = p;
    tmp += ".tmp";
    write_file(tmp, data);
    fs::rename(tmp, p);
}

}  // namespace detail

[[nodiscard]] inline std::string cell_name(const CellSpec& c) {
    return "v" + detail::num(c.volume) + "_z" + detail::num(c.zone_m) + "_" + std::string(solver_name(c.solver)) +
           "_s" + std::to_string(c.seed);
}

[[nodiscard]] inline std::vector<CellSpec> expand(const ExperimentPlan& plan) {
    std::vector<CellSpec> cells;
    for (double v : plan.volumes)
        for (double z : plan.zones_m)
            for (SolverKind s : plan.solvers)
                for (std::uint64_t seed : plan.seeds) cells.push_back({v, z, s, seed});
    return cells;
}

[[nodiscard]] inline ScenarioConfig cell_scenario(const ExperimentPlan& plan, const CellSpec& c) {
    ScenarioConfig cfg = plan.base;
    cfg.volume_fraction = c.volume;
    cfg.vtl_zone_m = c.zone_m;
    cfg.seed = c.seed;
    return cfg;
}

[[nodiscard]] inline nlohmann::json solver_metadata(SolverKind kind, const SolverConfig& cfg) {
    nlohmann::json j{{"name", solver_name(kind)}, {"gamma_policy", to_string(cfg.gamma)}};
    if (kind == SolverKind::Exact)
        j["space"] = "permutation";
    else if (kind == SolverKind::BranchAndBound)
        j["space"] = cfg.bnb_space == BnbSpace::Permutation ? "permutation" : "qubo";
    else
        j["space"] = "qubo";
    j["budget"] = cfg.budget ? nlohmann::json(*cfg.budget) : nlohmann::json(nullptr);
    if (kind == SolverKind::SimulatedAnnealing)
        j["annealing"] = {{"sweeps", cfg.annealing.sweeps},
                          {"decay", cfg.annealing.decay},
                          {"exchange_fraction", cfg.annealing.exchange_fraction}};
    if (kind == SolverKind::GradientDescent)
        j["gradient"] = {{"step", cfg.gradient.step}, {"iterations", cfg.gradient.iterations}};
    if (kind == SolverKind::Adam)
        j["adam"] = {{"step", cfg.adam.step},
                     {"beta1", cfg.adam.beta1},
                     {"beta2", cfg.adam.beta2},
                     {"epsilon", cfg.adam.epsilon},
                     {"iterations", cfg.adam.iterations}};
    return j;
}

// Identifies everything that determines a cell's output.
[[nodiscard]] inline std::string cell_fingerprint(const ScenarioConfig& cfg, const nlohmann::json& solver_meta) {
    nlohmann::json j{{"scenario", cfg}, {"solver", solver_meta}};
    return sha256_hex(j.dump());
}

struct CellFailure {
    std::string cell;
    std::string message;
};

struct ExperimentOutcome {
    std::size_t executed = 0;
    std::size_t skipped = 0;
    std::vector<CellFailure> failures;
    SafetyCounters safety;  // summed over executed cells

    [[nodiscard]] int exit_code() const { return failures.empty() ? 0 : 1; }
};

// Runs one cell and writes its directory. Returns the run's safety counters.
inline SafetyCounters run_cell(const ExperimentPlan& plan, const CellSpec& c) {
    const ScenarioConfig cfg = cell_scenario(plan, c);
    SolverConfig scfg = plan.solver;
    scfg.seed = c.seed;
    const nlohmann::json meta = solver_metadata(c.solver, scfg);
    const RunResult run = run_scenario(cfg, {c.solver, scfg});

    const fs::path cells = plan.out_dir / "cells";
    const fs::path final_dir = cells / cell_name(c);
    const fs::path tmp_dir = cells / ("." + cell_name(c) + ".tmp");
    fs::remove_all(tmp_dir);
    fs::create_directories(tmp_dir);

    nlohmann::json cell{{"volume", c.volume},
                        {"zone_m", c.zone_m},
                        {"seed", c.seed},
                        {"solver", meta},
                        {"scenario", cfg},
                        {"fingerprint", cell_fingerprint(cfg, meta)},
                        {"solver_calls", run.solver_calls},
                        {"safety",
                         {{"ticks", run.safety.ticks},
                          {"conflicting_display_ticks", run.safety.conflicting_display_ticks},
                          {"conflicting_box_ticks", run.safety.conflicting_box_ticks},
                          {"conservation_violations", run.safety.conservation_violations},
                          {"spawned", run.safety.spawned},
                          {"exited", run.safety.exited},
                          {"in_network_end", run.safety.in_network_end},
                          {"backlog_end", run.safety.backlog_end}}}};
    detail::write_file(tmp_dir / "trips.csv", trips_csv(run.trips));
    detail::write_file(tmp_dir / "metrics.json", nlohmann::json(run.metrics).dump(1));
    detail::write_file(tmp_dir / "decisions.json", nlohmann::json(run.decisions).dump(1));
    detail::write_file(tmp_dir / "cell.json", cell.dump(2));

    fs::remove_all(final_dir);
    fs::rename(tmp_dir, final_dir);
    return run.safety;
}

[[nodiscard]] inline bool cell_complete(const ExperimentPlan& plan, const CellSpec& c) {
    const fs::path dir = plan.out_dir / "cells" / cell_name(c);
    if (!fs::exists(dir / "cell.json") || !fs::exists(dir / "metrics.json")) return false;
    try {
        const auto j = nlohmann::json::parse(detail::read_file(dir / "cell.json"));
        SolverConfig scfg = plan.solver;
        scfg.seed = c.seed;
        return j.at("fingerprint").get<std::string>() ==
               cell_fingerprint(cell_scenario(plan, c), solver_metadata(c.solver, scfg));
    } catch (const std::exception&) {
        return false;
    }
}

// Lists every file under cells/ in path order with its hash.
[[nodiscard]] inline nlohmann::json build_manifest(const fs::path& out_dir) {
    std::vector<fs::path> files;
    const fs::path cells = out_dir / "cells";
    if (fs::exists(cells))
        for (const auto& e : fs::recursive_directory_iterator(cells)) {
            if (!e.is_regular_file()) continue;
            const auto rel = fs::relative(e.path(), out_dir);
            if (rel.begin()->string() == "cells" && std::next(rel.begin())->string().starts_with(".")) continue;
            files.push_back(rel);
        }
    std::sort(files.begin(), files.end());
    nlohmann::json list = nlohmann::json::array();
    for (const auto& rel : files) {
        const std::string data = detail::read_file(out_dir / rel);
        list.push_back({{"path", rel.generic_string()}, {"sha256", sha256_hex(data)}, {"bytes", data.size()}});
    }
    return nlohmann::json{{"files", std::move(list)}};
}

inline ExperimentOutcome run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    fs::create_directories(plan.out_dir / "cells");

    const auto cells = expand(plan);
    std::vector<CellSpec> todo;
    ExperimentOutcome outcome;
    for (const auto& c : cells) {
        if (!plan.force && cell_complete(plan, c))
            ++outcome.skipped;
        else
            todo.push_back(c);
    }

    std::size_t workers = plan.workers ? plan.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(todo.size(), 1));
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < todo.size(); i = next++) {
            try {
                const SafetyCounters s = run_cell(plan, todo[i]);
                std::lock_guard lock(mu);
                ++outcome.executed;
                outcome.safety.ticks += s.ticks;
                outcome.safety.conflicting_display_ticks += s.conflicting_display_ticks;
                outcome.safety.conflicting_box_ticks += s.conflicting_box_ticks;
                outcome.safety.conservation_violations += s.conservation_violations;
                outcome.safety.spawned += s.spawned;
                outcome.safety.exited += s.exited;
                outcome.safety.in_network_end += s.in_network_end;
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                outcome.failures.push_back({cell_name(todo[i]), e.what()});
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    std::sort(outcome.failures.begin(), outcome.failures.end(),
              [](const CellFailure& a, const CellFailure& b) { return a.cell < b.cell; });

    const std::string manifest = build_manifest(plan.out_dir).dump(2) + "\n";
    const fs::path mpath = plan.out_dir / "manifest.json";
    if (!fs::exists(mpath) || detail::read_file(mpath) != manifest) detail::write_atomic(mpath, manifest);
    return outcome;
}

// ---- report -------------------------------------------------------------------

struct LoadedCell {
    ConditionRun run;
    LatencyModel latency;
    std::vector<DecisionRecord> decisions;
};

struct AggregateRow {
    double volume = 0.0;
    double zone_m = 0.0;
    std::string solver;
    std::size_t runs = 0;
    RunMetrics pooled;  // all post-warm-up vehicles of all seeds
};

struct CostRow {
    std::string solver;
    std::size_t optimizations = 0;  // decisions that invoked the solver
    double mean_cost_s = 0.0;
    double mean_raw_energy = 0.0;
    double feasible_at_readout_rate = 0.0;
    double repaired_rate = 0.0;
    double mean_evaluations = 0.0;
};

struct LatencyRow {
    double volume = 0.0;
    double zone_m = 0.0;
    std::string solver;
    double fixed_overhead_s = 0.0;
    double processing_s = 0.0;
    double total_s = 0.0;
    std::size_t decisions = 0;       // summed over seeds
    double waiting_time_s = 0.0;     // decisions × total latency
};

struct ExperimentReport {
    std::vector<AggregateRow> aggregates;
    std::optional<ComparisonReport> comparison;  // when the reference solver and a baseline are present
    std::vector<CostRow> costs;
    std::vector<LatencyRow> latency;  // empty unless some run injected latency
};

[[nodiscard]] inline std::vector<LoadedCell> load_cells(const fs::path& dir) {
    const fs::path cells = dir / "cells";
    std::vector<fs::path> dirs;
    if (fs::exists(cells))
        for (const auto& e : fs::directory_iterator(cells))
            if (e.is_directory() && !e.path().filename().string().starts_with(".")) dirs.push_back(e.path());
    if (dirs.empty()) throw std::runtime_error("no results in " + dir.string());
    std::sort(dirs.begin(), dirs.end());

    std::vector<LoadedCell> out;
    for (const auto& d : dirs) {
        try {
            const auto cell = nlohmann::json::parse(detail::read_file(d / "cell.json"));
            LoadedCell lc;
            lc.run.volume = cell.at("volume").get<double>();
            lc.run.zone_m = cell.at("zone_m").get<double>();
            lc.run.seed = cell.at("seed").get<std::uint64_t>();
            lc.run.solver = cell.at("solver").at("name").get<std::string>();
            lc.run.metrics = nlohmann::json::parse(detail::read_file(d / "metrics.json")).get<RunMetrics>();
            lc.latency = cell.at("scenario").get<ScenarioConfig>().latency;
            lc.decisions = nlohmann::json::parse(detail::read_file(d / "decisions.json")).get<std::vector<DecisionRecord>>();
            out.push_back(std::move(lc));
        } catch (const std::exception& e) {
            throw std::runtime_error("corrupt result cell " + d.filename().string() + ": " + e.what());
        }
    }
    return out;
}

[[nodiscard]] inline ExperimentReport build_report(const std::vector<LoadedCell>& cells,
                                                   const std::string& reference = "sa",
                                                   SampleUnit unit = SampleUnit::PerVehicle) {
    ExperimentReport rep;
    using Key = std::tuple<double, double, std::string>;
    std::map<Key, std::pair<std::size_t, std::vector<TripOutcome>>> groups;
    std::map<std::string, std::vector<const DecisionRecord*>> by_solver;
    std::map<Key, LatencyRow> lat;
    std::vector<ConditionRun> runs;
    std::set<std::string> solvers;
    for (const auto& c : cells) {
        const Key k{c.run.volume, c.run.zone_m, c.run.solver};
        auto& [n, trips] = groups[k];
        ++n;
        trips.insert(trips.end(), c.run.metrics.per_vehicle.begin(), c.run.metrics.per_vehicle.end());
        for (const auto& d : c.decisions)
            if (d.solved) by_solver[c.run.solver].push_back(&d);
        if (c.latency.total_s() > 0.0) {
            auto& row = lat[k];
            row = {c.run.volume, c.run.zone_m, c.run.solver, c.latency.fixed_overhead_s, c.latency.processing_s,
                   c.latency.total_s(), row.decisions + c.decisions.size(), 0.0};
            row.waiting_time_s = static_cast<double>(row.decisions) * row.total_s;
        }
        runs.push_back(c.run);
        solvers.insert(c.run.solver);
    }
    for (auto& [k, g] : groups) {
        AggregateRow row{std::get<0>(k), std::get<1>(k), std::get<2>(k), g.first, {}};
        row.pooled = summarize(std::span<const TripOutcome>(g.second), row.solver);
        rep.aggregates.push_back(std::move(row));
    }
    if (solvers.contains(reference) && solvers.size() > 1) rep.comparison = experiment_table(runs, reference, unit);

    for (const auto& s : solvers) {
        CostRow row;
        row.solver = s;
        const auto it = by_solver.find(s);
        if (it != by_solver.end() && !it->second.empty()) {
            std::vector<double> cost, energy, evals;
            std::size_t feasible = 0, repaired = 0;
            for (const auto* d : it->second) {
                cost.push_back(d->cost_s);
                energy.push_back(d->raw_energy);
                evals.push_back(static_cast<double>(d->evaluations));
                feasible += d->feasible_at_readout ? 1 : 0;
                repaired += d->repaired ? 1 : 0;
            }
            const double n = static_cast<double>(cost.size());
            row.optimizations = cost.size();
            row.mean_cost_s = detail::sorted_sum(cost) / n;
            row.mean_raw_energy = detail::sorted_sum(energy) / n;
            row.mean_evaluations = detail::sorted_sum(evals) / n;
            row.feasible_at_readout_rate = static_cast<double>(feasible) / n;
            row.repaired_rate = static_cast<double>(repaired) / n;
        }
        rep.costs.push_back(row);
    }
    for (auto& [k, row] : lat) rep.latency.push_back(row);
    return rep;
}

[[nodiscard]] inline std::string aggregates_csv(const ExperimentReport& r) {
    std::string out = "volume,zone_m,solver,runs,vehicles,mean_delay_s,se_delay_s,mean_travel_s,se_travel_s\n";
    for (const auto& a : r.aggregates)
        out += detail::fmt("%.17g", a.volume) + "," + detail::fmt("%.17g", a.zone_m) + "," + a.solver + "," +
               std::to_string(a.runs) + "," + std::to_string(a.pooled.per_vehicle.size()) + "," +
               detail::fmt("%.17g", a.pooled.mean_delay_s) + "," + detail::fmt("%.17g", a.pooled.se_delay_s) + "," +
               detail::fmt("%.17g", a.pooled.mean_travel_s) + "," + detail::fmt("%.17g", a.pooled.se_travel_s) +
               "\n";
    return out;
}

[[nodiscard]] inline std::string costs_csv(const ExperimentReport& r) {
    std::string out =
        "solver,optimizations,mean_cost_s,mean_raw_energy,feasible_at_readout_rate,repaired_rate,mean_evaluations\n";
    for (const auto& c : r.costs)
        out += c.solver + "," + std::to_string(c.optimizations) + "," + detail::fmt("%.17g", c.mean_cost_s) + "," +
               detail::fmt("%.17g", c.mean_raw_energy) + "," + detail::fmt("%.17g", c.feasible_at_readout_rate) +
               "," + detail::fmt("%.17g", c.repaired_rate) + "," + detail::fmt("%.17g", c.mean_evaluations) + "\n";
    return out;
}

[[nodiscard]] inline std::string latency_csv(const ExperimentReport& r) {
    std::string out = "volume,zone_m,solver,fixed_overhead_s,processing_s,total_s,decisions,waiting_time_s\n";
    for (const auto& l : r.latency)
        out += detail::fmt("%.17g", l.volume) + "," + detail::fmt("%.17g", l.zone_m) + "," + l.solver + "," +
               detail::fmt("%.17g", l.fixed_overhead_s) + "," + detail::fmt("%.17g", l.processing_s) + "," +
               detail::fmt("%.17g", l.total_s) + "," + std::to_string(l.decisions) + "," +
               detail::fmt("%.17g", l.waiting_time_s) + "\n";
    return out;
}

[[nodiscard]] inline std::string summary_text(const ExperimentReport& r) {
    std::string out = "Mean stopped delay / travel time per condition (s)\n";
    char buf[256];
    for (const auto& a : r.aggregates) {
        std::snprintf(buf, sizeof buf, "  volume %-5g zone %-4g %-5s  delay %9.3f  travel %9.3f  (n=%zu, runs=%zu)\n",
                      a.volume, a.zone_m, a.solver.c_str(), a.pooled.mean_delay_s, a.pooled.mean_travel_s,
                      a.pooled.per_vehicle.size(), a.runs);
        out += buf;
    }
    out += "\nMean sequence cost per optimization\n";
    for (const auto& c : r.costs) {
        std::snprintf(buf, sizeof buf, "  %-5s  cost %10.3f s  raw energy %12.3f  feasible %.3f  (%zu runs)\n",
                      c.solver.c_str(), c.mean_cost_s, c.mean_raw_energy, c.feasible_at_readout_rate, c.optimizations);
        out += buf;
    }
    if (r.comparison) out += "\n" + to_text(*r.comparison);
    if (!r.latency.empty()) {
        out += "\nLatency per decision\n";
        for (const auto& l : r.latency) {
            std::snprintf(buf, sizeof buf,
                          "  volume %-5g zone %-4g %-5s  %.3f + %.3f = %.3f s  x %zu decisions = %.1f s\n", l.volume,
                          l.zone_m, l.solver.c_str(), l.fixed_overhead_s, l.processing_s, l.total_s, l.decisions,
                          l.waiting_time_s);
            out += buf;
        }
    }
    return out;
}

// Reads a results directory and writes the report files into `report_dir`.
inline ExperimentReport report(const fs::path& results_dir, const fs::path& report_dir,
                               const std::string& reference = "sa", SampleUnit unit = SampleUnit::PerVehicle) {
    const auto rep = build_report(load_cells(results_dir), reference, unit);
    fs::create_directories(report_dir);
    detail::write_atomic(report_dir / "aggregates.csv", aggregates_csv(rep));
    detail::write_atomic(report_dir / "costs.csv", costs_csv(rep));
    if (rep.comparison) {
        detail::write_atomic(report_dir / "pvalues.csv", to_csv(*rep.comparison));
        detail::write_atomic(report_dir / "pvalues.txt", to_text(*rep.comparison));
    }
    if (!rep.latency.empty()) detail::write_atomic(report_dir / "latency.csv", latency_csv(rep));
    detail::write_atomic(report_dir / "summary.txt", summary_text(rep));
    return rep;
}

}  // namespace vtl
