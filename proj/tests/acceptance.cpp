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

// Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Usage: acceptance [results_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fixtures/welch_reference.hpp"
#include "oracles.hpp"
#include "vtl/experiment.hpp"

using namespace vtl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& detail) {
    verdicts.push_back({id, pass, detail});
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

DelayMatrix random_delays(std::size_t p, double hi, std::mt19937_64& rng) {
    return DelayMatrix::from_rows(oracle::random_matrix(p, hi, rng));
}

oracle::Matrix rows_of(const DelayMatrix& d) {
    oracle::Matrix m(d.size(), std::vector<double>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j) m[i][j] = d(i, j);
    return m;
}

void branch_and_bound_equals_exact() {
    std::mt19937_64 rng(101);
    const auto t0 = Clock::now();
    std::size_t mismatches = 0, total = 0;
    for (std::size_t p = 2; p <= 8; ++p)
        for (int k = 0; k < 200; ++k) {
            const auto d = random_delays(p, 100.0, rng);
            const auto bnb = solve_branch_and_bound(d, {});
            const auto ex = solve_exact(d);
            mismatches += bnb.cost_s == ex.cost_s && !bnb.budget_exhausted ? 0 : 1;
            ++total;
        }
    const double t = seconds_since(t0);
    report(1, mismatches == 0 && t < 60.0, fmt("%zu/%zu equal, %.2f s", total - mismatches, total, t));
}

void encoding_sound() {
    std::mt19937_64 rng(202);
    double worst = 0.0, worst_feasible = 0.0;
    std::size_t feasible = 0;
    for (std::size_t p = 2; p <= 5; ++p) {
        const auto d = random_delays(p, 100.0, rng);
        const double gamma = gamma_auto(d);
        const auto m = build_qubo(d, gamma);
        const auto rows = rows_of(d);
        auto check = [&](const std::vector<std::uint8_t>& x) {
            const double e = evaluate(m, x);
            worst = std::max(worst, std::abs(e - oracle::unexpanded_objective(rows, gamma, x)));
            const auto dec = decode(x, d);
            if (dec.feasible()) {
                ++feasible;
                worst_feasible = std::max(worst_feasible, std::abs(e - sequence_cost(*dec.sequence, d)));
            }
        };
        for (int k = 0; k < 1000; ++k) check(oracle::random_bits(p * p, rng));
        // Random draws are rarely feasible beyond p = 2, so permutations are added.
        std::vector<std::size_t> order(p);
        std::iota(order.begin(), order.end(), 0);
        for (int k = 0; k < 200; ++k) {
            std::shuffle(order.begin(), order.end(), rng);
            check(oracle::permutation_bits(order));
        }
    }
    report(2, worst <= 1e-9 && worst_feasible <= 1e-9 && feasible > 0,
           fmt("max |expanded - direct| = %.3g, max |feasible - sequence_cost| = %.3g over %zu feasible", worst,
               worst_feasible, feasible));
}

void ising_fidelity() {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    std::size_t states = 0;
    for (std::size_t p : {2u, 3u})
        for (int k = 0; k < 5; ++k) {
            const auto d = random_delays(p, 100.0, rng);
            const auto m = build_qubo(d, gamma_auto(d));
            const auto ising = to_ising(m);
            oracle::for_each_state(p * p, [&](const std::vector<std::uint8_t>& x) {
                worst = std::max(worst, std::abs(evaluate(m, x) - ising_energy(ising, to_spins(x))));
                ++states;
            });
        }
    report(3, worst <= 1e-9, fmt("max |QUBO - Ising| = %.3g over %zu states", worst, states));
}

void penalty_feasible() {
    std::mt19937_64 rng(404);
    std::size_t ok = 0, total = 0;
    double tightest = std::numeric_limits<double>::infinity();
    for (std::size_t p = 2; p <= 4; ++p)
        for (int k = 0; k < 500; ++k) {
            const auto d = random_delays(p, 1e4, rng);
            const auto m = build_qubo(d, gamma_auto(d));
            double best_feasible = std::numeric_limits<double>::infinity();
            double best_infeasible = std::numeric_limits<double>::infinity();
            oracle::for_each_state(p * p, [&](const std::vector<std::uint8_t>& x) {
                const double e = evaluate(m, x);
                if (decode(x, d).feasible()) best_feasible = std::min(best_feasible, e);
                else best_infeasible = std::min(best_infeasible, e);
            });
            const double best_path = oracle::best_path_cost(rows_of(d));
            ok += best_feasible < best_infeasible && std::abs(best_feasible - best_path) <= 1e-6 ? 1 : 0;
            tightest = std::min(tightest, best_infeasible - best_feasible);
            ++total;
        }
    report(4, ok == total,
           fmt("%zu/%zu matrices (p = 2..4, 500 each) have a feasible minimizer equal to the best path; smallest margin %.1f", ok,
               total, tightest));
}

void annealing_quality() {
    std::mt19937_64 rng(505);
    std::size_t hits = 0;
    double slowest = 0.0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const auto d = random_delays(8, 100.0, rng);
        SolverConfig cfg;
        cfg.seed = k;
        const auto t0 = Clock::now();
        const auto sa = solve(SolverKind::SimulatedAnnealing, d, cfg);
        slowest = std::max(slowest, seconds_since(t0));
        const double exact = solve_exact(d).cost_s;
        hits += std::abs(sa.cost_s - exact) <= 1e-9 * std::max(1.0, exact) ? 1 : 0;
    }
    report(5, hits >= 90 && slowest < 2.0, fmt("%zu/100 optimal, slowest %.3f s", hits, slowest));
}

void gradient_correct() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size(2, 6);
    double worst = 0.0;
    for (int model = 0; model < 20; ++model) {
        const auto d = random_delays(size(rng), 100.0, rng);
        const auto m = build_qubo(d, gamma_auto(d));
        const std::size_t n = m.num_vars();
        std::vector<double> y(n), g(n);
        for (int point = 0; point < 10; ++point) {
            for (auto& v : y) v = unit(rng);
            relaxed_gradient(m, y, g);
            for (std::size_t i = 0; i < n; ++i) {
                auto yp = y, ym = y;
                yp[i] += 1e-5;
                ym[i] -= 1e-5;
                const double fd = (relaxed_value(m, yp) - relaxed_value(m, ym)) / 2e-5;
                worst = std::max(worst, std::abs(fd - g[i]));
            }
        }
    }
    report(6, worst < 1e-6, fmt("max |analytic - central difference| = %.3g", worst));
}

void welch_correct() {
    double wt = 0.0, wd = 0.0, wp = 0.0;
    for (const auto& c : fixtures::welch_cases()) {
        const auto r = welch_one_tailed(c.a, c.b);
        wt = std::max(wt, std::abs(r.t_statistic - c.t));
        wd = std::max(wd, std::abs(r.welch_dof - c.dof));
        wp = std::max(wp, std::abs(r.p_value - c.p));
    }
    const std::vector<double> same{3.0, 4.5, 2.0, 7.25, 5.5};
    const double p_same = welch_one_tailed(same, same).p_value;
    report(9, fixtures::welch_cases().size() == 25 && wt <= 1e-9 && wd <= 1e-9 && wp <= 1e-9 && p_same == 0.5,
           fmt("25 fixtures: max error t %.2g, dof %.2g, p %.2g; identical samples p = %g", wt, wd, wp, p_same));
}

struct GridRun {
    ExperimentOutcome outcome;
    ExperimentReport report;
    double seconds = 0.0;
};

GridRun run_grid(const fs::path& out, const LatencyModel& latency) {
    ExperimentPlan plan;  // 3 volumes x 3 zones x 5 solvers x seeds 1..10
    plan.base.arrivals = ArrivalMode::Exponential;
    plan.base.latency = latency;
    plan.out_dir = out;
    plan.force = true;
    GridRun g;
    const auto t0 = Clock::now();
    g.outcome = run_experiment(plan);
    g.seconds = seconds_since(t0);
    g.report = build_report(load_cells(out));
    return g;
}

// Mean over every post-warm-up vehicle of a solver across the whole grid.
std::map<std::string, std::pair<double, double>> grid_means(const ExperimentReport& r) {
    std::map<std::string, std::vector<TripOutcome>> pooled;
    for (const auto& a : r.aggregates)
        pooled[a.solver].insert(pooled[a.solver].end(), a.pooled.per_vehicle.begin(), a.pooled.per_vehicle.end());
    std::map<std::string, std::pair<double, double>> out;
    for (const auto& [s, trips] : pooled) {
        const auto m = summarize(std::span<const TripOutcome>(trips), s);
        out[s] = {m.mean_delay_s, m.mean_travel_s};
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path results = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_results");

    branch_and_bound_equals_exact();
    encoding_sound();
    ising_fidelity();
    penalty_feasible();
    annealing_quality();
    gradient_correct();

    std::printf("running the no-latency grid (450 runs)...\n");
    std::fflush(stdout);
    const auto none = run_grid(results / "latency_none", LatencyModel::none());
    {
        const auto means = grid_means(none.report);
        const auto& sa = means.at("sa");
        bool lower = true;
        std::string detail;
        for (const auto& [s, m] : means) {
            detail += fmt("%s %.1f/%.1f  ", s.c_str(), m.first, m.second);
            if (s != "sa") lower = lower && sa.first < m.first && sa.second < m.second;
        }
        // A baseline counts when SA is significantly better in every zone at
        // volume 1.05, for both delay and travel time.
        std::map<std::string, bool> significant;
        for (const auto& c : none.report.comparison->cells) {
            if (c.volume != 1.05) continue;
            auto it = significant.try_emplace(c.baseline, true).first;
            it->second = it->second && c.test.p_value < 0.05;
        }
        std::size_t wins = 0;
        std::string sig;
        for (const auto& [s, ok] : significant) {
            wins += ok ? 1 : 0;
            sig += s + (ok ? "+ " : "- ");
        }
        report(7, lower && wins >= 3 && none.seconds < 1800.0 && none.outcome.exit_code() == 0,
               fmt("mean delay/travel %s| p<0.05 at 1.05: %s(%zu/4) | %.0f s", detail.c_str(), sig.c_str(), wins,
                   none.seconds));
    }

    std::printf("running the paper-latency grid (450 runs)...\n");
    std::fflush(stdout);
    const auto paper = run_grid(results / "latency_paper", LatencyModel::paper());

    {
        SafetyCounters s = none.outcome.safety;
        const auto& q = paper.outcome.safety;
        s.ticks += q.ticks;
        s.conflicting_display_ticks += q.conflicting_display_ticks;
        s.conflicting_box_ticks += q.conflicting_box_ticks;
        s.conservation_violations += q.conservation_violations;
        s.spawned += q.spawned;
        s.exited += q.exited;
        s.in_network_end += q.in_network_end;
        report(8, s.conflict_ticks() == 0 && s.conservation_violations == 0 && s.spawned == s.exited + s.in_network_end,
               fmt("%llu ticks over 900 runs: %llu conflict ticks, %llu conservation violations",
                   static_cast<unsigned long long>(s.ticks), static_cast<unsigned long long>(s.conflict_ticks()),
                   static_cast<unsigned long long>(s.conservation_violations)));
    }

    welch_correct();

    {
        const auto a = grid_means(none.report), b = grid_means(paper.report);
        bool ok = a.size() == 5;
        std::string detail;
        for (const auto& [s, m] : a) {
            const double with = b.at(s).first;
            ok = ok && with >= m.first;
            detail += fmt("%s %.1f -> %.1f  ", s.c_str(), m.first, with);
        }
        report(10, ok, "mean delay none -> paper: " + detail);
    }

    std::size_t passed = 0;
    for (const auto& v : verdicts) passed += v.pass ? 1 : 0;
    std::printf("%zu/%zu criteria passed\n", passed, verdicts.size());
    return passed == verdicts.size() ? 0 : 1;
}
