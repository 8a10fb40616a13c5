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
   Minimizers for the phase-sequencing problem.

   solve_exact            all p! open-loop orders (reference oracle)
   solve_branch_and_bound depth-first over partial orders, or over binary
                          variables of the QUBO
   solve_simulated_annealing, solve_hill_climbing,
   solve_gradient_descent, solve_adam
                          work on the penalized QUBO

   Every QUBO solver reads out a binary assignment. Infeasible readouts are
   repaired: greedy matching on the p x p reshape (largest value first among
   free rows/columns), then one pass of pairwise position swaps. The result
   is never worse than the best feasible assignment met during the search.
*/

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtl/delay_matrix.hpp"
#include "vtl/qubo.hpp"

namespace vtl {

enum class SolverKind { Exact, SimulatedAnnealing, HillClimbing, GradientDescent, Adam, BranchAndBound };
enum class BnbSpace { Permutation, Qubo };

[[nodiscard]] inline std::string_view solver_name(SolverKind k) {
    switch (k) {
        case SolverKind::Exact: return "exact";
        case SolverKind::SimulatedAnnealing: return "sa";
        case SolverKind::HillClimbing: return "hc";
        case SolverKind::GradientDescent: return "gd";
        case SolverKind::Adam: return "adam";
        case SolverKind::BranchAndBound: return "bnb";
    }
    return "?";
}

[[nodiscard]] inline SolverKind parse_solver(std::string_view s) {
    for (auto k : {SolverKind::Exact, SolverKind::SimulatedAnnealing, SolverKind::HillClimbing,
                   SolverKind::GradientDescent, SolverKind::Adam, SolverKind::BranchAndBound})
        if (solver_name(k) == s) return k;
    throw std::invalid_argument("unknown solver '" + std::string(s) + "'");
}

struct AnnealingSchedule {
    std::size_t sweeps = 2000;
    double decay = 0.997;                         // per sweep
    std::optional<double> initial_temperature;    // default: auto
    std::size_t temperature_samples = 100;
    // Share of proposals that exchange the positions of two phases (a 4-bit
    // flip that keeps row and column sums); the rest are single-bit flips.
    double exchange_fraction = 0.75;
};

struct GradientSettings {
    double step = 0.01;
    std::size_t iterations = 5000;
    double tolerance = 1e-10;  // stop when the largest coordinate move is below this
};

struct AdamSettings {
    double step = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t iterations = 5000;
    double tolerance = 1e-10;
};

struct SolverConfig {
    std::uint64_t seed = 0;
    // Max objective evaluations; unset means the solver's natural budget
    // (full schedule / iteration count, unlimited for branch and bound).
    std::optional<std::uint64_t> budget;
    GammaPolicy gamma = GammaPolicy::Auto;
    AnnealingSchedule annealing{};
    GradientSettings gradient{};
    AdamSettings adam{};
    BnbSpace bnb_space = BnbSpace::Permutation;
    // Starting point for local search (hill climbing); random when empty.
    std::vector<std::uint8_t> initial_state;

    void validate() const {
        if (budget && *budget == 0) throw std::invalid_argument("budget must be > 0");
        if (annealing.sweeps == 0 || !(annealing.decay > 0.0 && annealing.decay <= 1.0))
            throw std::invalid_argument("annealing schedule: sweeps > 0 and decay in (0, 1] required");
        if (!(annealing.exchange_fraction >= 0.0 && annealing.exchange_fraction <= 1.0))
            throw std::invalid_argument("annealing schedule: exchange_fraction must lie in [0, 1]");
        if (!(gradient.step > 0.0) || !(adam.step > 0.0)) throw std::invalid_argument("step sizes must be > 0");
    }
};

struct SolverResult {
    PhaseSequence sequence;
    IndexOrder order;
    double cost_s = 0.0;
    double raw_energy = 0.0;  // penalized objective of the raw readout
    bool feasible_at_readout = true;
    bool repaired = false;
    bool budget_exhausted = false;
    std::uint64_t evaluations = 0;
    double wall_time_s = 0.0;
    std::string solver_name;
    std::string space;  // "permutation" or "qubo"
    double gamma = 0.0;  // 0 when no QUBO was involved
};

inline void to_json(nlohmann::json& j, const SolverResult& r) {
    j = nlohmann::json{{"solver", r.solver_name},
                       {"space", r.space},
                       {"sequence", r.sequence.order},
                       {"cost_s", r.cost_s},
                       {"raw_energy", r.raw_energy},
                       {"feasible_at_readout", r.feasible_at_readout},
                       {"repaired", r.repaired},
                       {"budget_exhausted", r.budget_exhausted},
                       {"evaluations", r.evaluations},
                       {"gamma", r.gamma},
                       {"wall_time_s", r.wall_time_s}};
}

// Maps index orders to phase ids and path costs. Built from a delay matrix,
// or from a bare QUBO (ids 1..p, cost = energy of the encoded permutation).
class SequenceContext {
public:
    explicit SequenceContext(const DelayMatrix& d) : p_(d.size()), ids_(d.occupied_phases()) {
        cost_ = [&d](const IndexOrder& o) { return path_cost(o, d); };
    }
    explicit SequenceContext(const QuboModel& m) : p_(m.num_phases()) {
        if (p_ == 0) throw std::invalid_argument("QUBO variable count is not a perfect square");
        ids_.resize(p_);
        std::iota(ids_.begin(), ids_.end(), 1);
        cost_ = [&m, p = p_](const IndexOrder& o) { return evaluate(m, encode(o, p)); };
    }

    [[nodiscard]] std::size_t num_phases() const { return p_; }
    [[nodiscard]] double cost(const IndexOrder& o) const { return cost_(o); }
    [[nodiscard]] PhaseSequence sequence(const IndexOrder& o) const {
        PhaseSequence s;
        for (std::size_t i : o) s.order.push_back(ids_.at(i));
        return s;
    }

private:
    std::size_t p_ = 0;
    std::vector<int> ids_;
    std::function<double(const IndexOrder&)> cost_;
};

namespace detail {

class Stopwatch {
public:
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline bool better(double cost, const IndexOrder& order, double best_cost, const IndexOrder& best) {
    return best.empty() || cost < best_cost || (cost == best_cost && order < best);
}

struct Neighbor {
    std::size_t var;
    double w;
};

inline std::vector<std::vector<Neighbor>> adjacency(const QuboModel& m) {
    std::vector<std::vector<Neighbor>> adj(m.num_vars());
    for (const auto& t : m.quadratic()) {
        adj[t.i].push_back({t.j, t.w});
        adj[t.j].push_back({t.i, t.w});
    }
    return adj;
}

// Binary state with incrementally maintained local fields
// field_i = linear_i + sum_j Q_ij x_j, so flipping i changes the energy by
// (1 - 2 x_i) * field_i. Row/column counts track permutation feasibility.
class BinaryState {
public:
    BinaryState(const QuboModel& m, const std::vector<std::vector<Neighbor>>& adj, std::vector<std::uint8_t> x)
        : m_(&m), adj_(&adj), p_(m.num_phases()), x_(std::move(x)) {
        field_ = m.linear();
        for (const auto& t : m.quadratic()) {
            if (x_[t.j]) field_[t.i] += t.w;
            if (x_[t.i]) field_[t.j] += t.w;
        }
        energy_ = evaluate(m, x_);
        rows_.assign(p_, 0);
        cols_.assign(p_, 0);
        for (std::size_t v = 0; v < x_.size(); ++v)
            if (x_[v]) bump(v, +1);
        violated_ = 0;
        for (std::size_t i = 0; i < p_; ++i) violated_ += (rows_[i] != 1) + (cols_[i] != 1);
    }

    [[nodiscard]] double delta(std::size_t v) const { return x_[v] ? -field_[v] : field_[v]; }

    void flip(std::size_t v) {
        energy_ += delta(v);
        x_[v] ^= 1;
        const double sign = x_[v] ? 1.0 : -1.0;
        for (const auto& nb : (*adj_)[v]) field_[nb.var] += sign * nb.w;
        const std::size_t r = v / p_, c = v % p_;
        violated_ -= (rows_[r] != 1) + (cols_[c] != 1);
        bump(v, x_[v] ? +1 : -1);
        violated_ += (rows_[r] != 1) + (cols_[c] != 1);
    }

    [[nodiscard]] bool feasible() const { return violated_ == 0; }
    [[nodiscard]] double energy() const { return energy_; }

    // Column of the single set bit in `row`, if the row has exactly one.
    [[nodiscard]] std::optional<std::size_t> sole_position(std::size_t row) const {
        if (rows_[row] != 1) return std::nullopt;
        for (std::size_t c = 0; c < p_; ++c)
            if (x_[row * p_ + c]) return c;
        return std::nullopt;
    }
    [[nodiscard]] std::size_t num_phases() const { return p_; }
    [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return x_; }
    [[nodiscard]] std::size_t size() const { return x_.size(); }

    [[nodiscard]] IndexOrder order() const {
        IndexOrder o(p_);
        for (std::size_t v = 0; v < x_.size(); ++v)
            if (x_[v]) o[v % p_] = v / p_;
        return o;
    }

private:
    void bump(std::size_t v, int by) {
        rows_[v / p_] += by;
        cols_[v % p_] += by;
    }

    const QuboModel* m_;
    const std::vector<std::vector<Neighbor>>* adj_;
    std::size_t p_;
    std::vector<std::uint8_t> x_;
    std::vector<double> field_;
    std::vector<int> rows_, cols_;
    int violated_ = 0;
    double energy_ = 0.0;
};

inline std::vector<std::uint8_t> random_bits(std::size_t n, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<std::uint8_t> x(n);
    for (auto& b : x) b = coin(rng) ? 1 : 0;
    return x;
}

// Tracks the best feasible order seen during a search.
struct FeasibleBest {
    IndexOrder order;
    double cost = std::numeric_limits<double>::infinity();

    void offer(const IndexOrder& o, double c) {
        if (better(c, o, cost, order)) {
            order = o;
            cost = c;
        }
    }
};

}  // namespace detail

// Greedy matching on a p x p value grid followed by one pass of pairwise
// swap improvement. Always yields a permutation.
[[nodiscard]] inline IndexOrder repair(std::span<const double> values, const SequenceContext& ctx) {
    const std::size_t p = ctx.num_phases();
    if (values.size() != p * p) throw std::invalid_argument("repair: expected p*p values");
    IndexOrder order(p, 0);
    std::vector<bool> row_used(p, false), col_used(p, false);
    for (std::size_t step = 0; step < p; ++step) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t br = 0, bc = 0;
        for (std::size_t r = 0; r < p; ++r) {
            if (row_used[r]) continue;
            for (std::size_t c = 0; c < p; ++c) {
                if (col_used[c]) continue;
                if (values[r * p + c] > best) {
                    best = values[r * p + c];
                    br = r;
                    bc = c;
                }
            }
        }
        row_used[br] = col_used[bc] = true;
        order[bc] = br;
    }
    double cost = ctx.cost(order);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = a + 1; b < p; ++b) {
            std::swap(order[a], order[b]);
            const double c = ctx.cost(order);
            if (c < cost) {
                cost = c;
            } else {
                std::swap(order[a], order[b]);
            }
        }
    return order;
}

[[nodiscard]] inline IndexOrder repair(std::span<const std::uint8_t> bits, const SequenceContext& ctx) {
    std::vector<double> v(bits.begin(), bits.end());
    return repair(std::span<const double>(v), ctx);
}

namespace detail {

// Shared readout: decode the raw assignment, repair if needed, and never
// return worse than the best feasible state met during the search.
inline SolverResult finish(const QuboModel& m, const SequenceContext& ctx, std::span<const std::uint8_t> raw,
                           std::span<const double> repair_values, const FeasibleBest& seen) {
    SolverResult r;
    r.raw_energy = evaluate(m, raw);
    r.gamma = m.gamma();
    r.space = "qubo";
    const std::size_t p = ctx.num_phases();
    IndexOrder order;
    std::vector<std::size_t> rows(p, 0), cols(p, 0);
    for (std::size_t v = 0; v < raw.size(); ++v)
        if (raw[v]) {
            ++rows[v / p];
            ++cols[v % p];
        }
    r.feasible_at_readout = std::all_of(rows.begin(), rows.end(), [](auto c) { return c == 1; }) &&
                            std::all_of(cols.begin(), cols.end(), [](auto c) { return c == 1; });
    if (r.feasible_at_readout) {
        order.assign(p, 0);
        for (std::size_t v = 0; v < raw.size(); ++v)
            if (raw[v]) order[v % p] = v / p;
    } else {
        order = repair(repair_values, ctx);
        r.repaired = true;
    }
    double cost = ctx.cost(order);
    if (!seen.order.empty() && better(seen.cost, seen.order, cost, order)) {
        order = seen.order;
        cost = seen.cost;
    }
    r.order = order;
    r.cost_s = cost;
    r.sequence = ctx.sequence(order);
    return r;
}

inline void require_square(const QuboModel& m, const SequenceContext& ctx) {
    if (m.num_phases() == 0 || ctx.num_phases() != m.num_phases())
        throw std::invalid_argument("QUBO size does not match p*p for the sequence context");
}

}  // namespace detail

// ---- exact enumeration ----------------------------------------------------

inline constexpr std::size_t kMaxExactPhases = 10;

namespace detail {

// Lexicographic enumeration with strict improvement keeps the
// lexicographically smallest optimum.
template <typename Cost>
SolverResult enumerate_orders(std::size_t p, Cost&& cost) {
    if (p < 1) throw std::invalid_argument("solve_exact: need at least one occupied phase");
    if (p > kMaxExactPhases)
        throw std::invalid_argument("solve_exact: refusing to enumerate " + std::to_string(p) + "! orders");
    Stopwatch clock;
    IndexOrder order(p);
    std::iota(order.begin(), order.end(), 0);
    IndexOrder best = order;
    double best_cost = cost(order);
    std::uint64_t evals = 1;
    while (std::next_permutation(order.begin(), order.end())) {
        ++evals;
        const double c = cost(order);
        if (c < best_cost) {
            best_cost = c;
            best = order;
        }
    }
    SolverResult r;
    r.order = best;
    r.cost_s = best_cost;
    r.raw_energy = best_cost;
    r.evaluations = evals;
    r.solver_name = "exact";
    r.space = "permutation";
    r.wall_time_s = clock.seconds();
    return r;
}

}  // namespace detail

[[nodiscard]] inline SolverResult solve_exact(const DelayMatrix& d) {
    auto r = detail::enumerate_orders(d.size(), [&d](const IndexOrder& o) { return path_cost(o, d); });
    r.sequence = to_sequence(r.order, d);
    return r;
}

// Exhaustive search over the permutation encodings of a bare QUBO.
[[nodiscard]] inline SolverResult solve_exact(const QuboModel& m) {
    const SequenceContext ctx(m);
    auto r = detail::enumerate_orders(ctx.num_phases(), [&ctx](const IndexOrder& o) { return ctx.cost(o); });
    r.sequence = ctx.sequence(r.order);
    r.space = "qubo";
    r.gamma = m.gamma();
    return r;
}

// ---- branch and bound, permutation space ------------------------------------

[[nodiscard]] inline SolverResult solve_branch_and_bound(const DelayMatrix& d, const SolverConfig& cfg = {}) {
    cfg.validate();
    const std::size_t p = d.size();
    if (p < 1) throw std::invalid_argument("solve_branch_and_bound: need at least one occupied phase");
    detail::Stopwatch clock;
    const std::uint64_t budget = cfg.budget.value_or(std::numeric_limits<std::uint64_t>::max());

    // Each unplaced phase will be entered by exactly one edge.
    std::vector<double> min_in(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < p; ++i)
            if (i != j) m = std::min(m, d(i, j));
        min_in[j] = p > 1 ? m : 0.0;
    }

    // The identity order is the lexicographically smallest candidate, so
    // pruning on bound >= incumbent preserves lexicographic tie-breaking.
    IndexOrder incumbent(p);
    std::iota(incumbent.begin(), incumbent.end(), 0);
    double incumbent_cost = path_cost(incumbent, d);

    IndexOrder prefix;
    prefix.reserve(p);
    std::vector<bool> used(p, false);
    std::uint64_t nodes = 0;
    bool exhausted = false;

    std::function<void(double)> dfs = [&](double acc) {
        if (exhausted) return;
        if (prefix.size() == p) {
            if (acc < incumbent_cost) {
                incumbent_cost = acc;
                incumbent = prefix;
            }
            return;
        }
        for (std::size_t c = 0; c < p; ++c) {
            if (used[c]) continue;
            if (nodes >= budget) {
                exhausted = true;
                return;
            }
            ++nodes;
            const double next = acc + (prefix.empty() ? 0.0 : d(prefix.back(), c));
            // The first phase has no incoming edge; every phase placed after
            // c still needs one.
            double rest = 0.0;
            for (std::size_t u = 0; u < p; ++u)
                if (!used[u] && u != c) rest += min_in[u];
            if (next + rest >= incumbent_cost) continue;
            used[c] = true;
            prefix.push_back(c);
            dfs(next);
            prefix.pop_back();
            used[c] = false;
            if (exhausted) return;
        }
    };
    dfs(0.0);

    SolverResult r;
    r.order = incumbent;
    r.sequence = to_sequence(incumbent, d);
    r.cost_s = incumbent_cost;
    r.raw_energy = incumbent_cost;
    r.evaluations = nodes;
    r.budget_exhausted = exhausted;
    r.solver_name = "bnb";
    r.space = "permutation";
    r.wall_time_s = clock.seconds();
    return r;
}

// ---- branch and bound, QUBO space ---------------------------------------------

// Depth-first over variables in index order. Lower bound for a partial
// assignment: fixed energy, plus for each free variable the negative part of
// its effective linear weight, plus the negative part of every free pair.
[[nodiscard]] inline SolverResult solve_branch_and_bound_qubo(const QuboModel& m, const SolverConfig& cfg,
                                                              const SequenceContext& ctx) {
    cfg.validate();
    detail::require_square(m, ctx);
    detail::Stopwatch clock;
    const std::size_t n = m.num_vars();
    const std::uint64_t budget = cfg.budget.value_or(400ULL * n);
    const auto adj = detail::adjacency(m);

    std::vector<double> eff(m.linear());  // linear + couplings to fixed-on variables
    std::vector<std::uint8_t> x(n, 0);
    double free_pair_neg = 0.0;
    for (const auto& t : m.quadratic()) free_pair_neg += std::min(0.0, t.w);

    std::vector<std::uint8_t> best_x;
    double best_e = std::numeric_limits<double>::infinity();
    std::uint64_t nodes = 0;
    bool exhausted = false;

    auto bound_from = [&](std::size_t depth, double fixed) {
        double b = fixed + free_pair_neg;
        for (std::size_t u = depth; u < n; ++u) b += std::min(0.0, eff[u]);
        return b;
    };

    std::function<void(std::size_t, double)> dfs = [&](std::size_t depth, double fixed) {
        if (depth == n) {
            if (fixed < best_e) {
                best_e = fixed;
                best_x = x;
            }
            return;
        }
        // Pairs between `depth` and later free variables stop being free.
        double released = 0.0;
        for (const auto& nb : adj[depth])
            if (nb.var > depth) released += std::min(0.0, nb.w);
        free_pair_neg -= released;
        const std::uint8_t first = eff[depth] < 0.0 ? 1 : 0;
        for (std::uint8_t value : {first, static_cast<std::uint8_t>(1 - first)}) {
            if (nodes >= budget) {
                exhausted = true;
                break;
            }
            ++nodes;
            x[depth] = value;
            const double next = fixed + (value ? eff[depth] : 0.0);
            if (value)
                for (const auto& nb : adj[depth])
                    if (nb.var > depth) eff[nb.var] += nb.w;
            if (bound_from(depth + 1, next) < best_e) dfs(depth + 1, next);
            if (value)
                for (const auto& nb : adj[depth])
                    if (nb.var > depth) eff[nb.var] -= nb.w;
            x[depth] = 0;
            if (exhausted) break;
        }
        free_pair_neg += released;
    };
    dfs(0, m.offset());

    if (best_x.empty()) best_x.assign(n, 0);  // budget ran out before any leaf
    detail::FeasibleBest seen;
    auto r = detail::finish(m, ctx, best_x, std::vector<double>(best_x.begin(), best_x.end()), seen);
    r.evaluations = nodes;
    r.budget_exhausted = exhausted;
    r.solver_name = "bnb";
    r.wall_time_s = clock.seconds();
    return r;
}

// ---- simulated annealing ----------------------------------------------------

[[nodiscard]] inline SolverResult solve_simulated_annealing(const QuboModel& m, const SolverConfig& cfg,
                                                            const SequenceContext& ctx) {
    cfg.validate();
    detail::require_square(m, ctx);
    detail::Stopwatch clock;
    const std::size_t n = m.num_vars();
    const auto& sched = cfg.annealing;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto adj = detail::adjacency(m);

    detail::BinaryState state(m, adj, detail::random_bits(n, rng));
    std::uint64_t evals = 0;

    double t0 = 1.0;
    if (sched.initial_temperature) {
        t0 = *sched.initial_temperature;
    } else {
        for (std::size_t s = 0; s < sched.temperature_samples; ++s) {
            t0 = std::max(t0, std::abs(state.delta(pick(rng))));
            ++evals;
        }
    }

    const std::uint64_t scheduled = static_cast<std::uint64_t>(sched.sweeps) * n + evals;
    const std::uint64_t budget = cfg.budget.value_or(scheduled);

    std::vector<std::uint8_t> best = state.bits();
    double best_e = state.energy();
    detail::FeasibleBest seen;
    if (state.feasible()) seen.offer(state.order(), ctx.cost(state.order()));

    const std::size_t p = ctx.num_phases();
    std::uniform_int_distribution<std::size_t> pick_row(0, p - 1);
    auto accept = [&](double de, double temperature) {
        return de <= 0.0 || unit(rng) < std::exp(-de / temperature);
    };
    auto record = [&] {
        if (state.energy() < best_e) {
            best_e = state.energy();
            best = state.bits();
        }
        if (state.feasible()) seen.offer(state.order(), ctx.cost(state.order()));
    };

    double temperature = t0;
    bool exhausted = false;
    for (std::size_t sweep = 0; sweep < sched.sweeps && !exhausted; ++sweep) {
        for (std::size_t f = 0; f < n; ++f) {
            if (evals >= budget) {
                exhausted = true;
                break;
            }
            ++evals;
            if (sched.exchange_fraction > 0.0 && unit(rng) < sched.exchange_fraction) {
                // Exchange: (i,a),(j,b) -> (i,b),(j,a) for two rows holding one bit each.
                const std::size_t i = pick_row(rng), j = pick_row(rng);
                const auto a = state.sole_position(i), b = state.sole_position(j);
                if (i == j || !a || !b || *a == *b) continue;
                const std::array<std::size_t, 4> flips{i * p + *a, j * p + *b, i * p + *b, j * p + *a};
                const double before = state.energy();
                for (std::size_t v : flips) state.flip(v);
                if (accept(state.energy() - before, temperature)) {
                    record();
                } else {
                    for (std::size_t v : flips) state.flip(v);
                }
                continue;
            }
            const std::size_t v = pick(rng);
            if (accept(state.delta(v), temperature)) {
                state.flip(v);
                record();
            }
        }
        temperature *= sched.decay;
    }

    auto r = detail::finish(m, ctx, best, std::vector<double>(best.begin(), best.end()), seen);
    r.evaluations = evals;
    r.budget_exhausted = exhausted && budget < scheduled;
    r.solver_name = "sa";
    r.wall_time_s = clock.seconds();
    return r;
}

// ---- binary hill climbing -------------------------------------------------

// Steepest-descent single-bit flips from random starts; restarts until the
// evaluation budget is spent. Default budget matches the annealing schedule.
[[nodiscard]] inline SolverResult solve_hill_climbing(const QuboModel& m, const SolverConfig& cfg,
                                                      const SequenceContext& ctx) {
    cfg.validate();
    detail::require_square(m, ctx);
    detail::Stopwatch clock;
    const std::size_t n = m.num_vars();
    std::mt19937_64 rng(cfg.seed);
    const auto adj = detail::adjacency(m);
    const std::uint64_t budget = cfg.budget.value_or(static_cast<std::uint64_t>(cfg.annealing.sweeps) * n);

    std::vector<std::uint8_t> best;
    double best_e = std::numeric_limits<double>::infinity();
    detail::FeasibleBest seen;
    std::uint64_t evals = 0;
    bool first = true;

    while (first || evals + n <= budget) {
        std::vector<std::uint8_t> start;
        if (first && !cfg.initial_state.empty()) {
            if (cfg.initial_state.size() != n) throw std::invalid_argument("initial_state size != num_vars");
            start = cfg.initial_state;
        } else {
            start = detail::random_bits(n, rng);
        }
        first = false;
        detail::BinaryState state(m, adj, std::move(start));
        for (;;) {
            if (state.energy() < best_e) {
                best_e = state.energy();
                best = state.bits();
            }
            if (state.feasible()) seen.offer(state.order(), ctx.cost(state.order()));
            if (evals + n > budget) break;
            std::size_t arg = n;
            double best_delta = 0.0;
            for (std::size_t v = 0; v < n; ++v) {
                const double de = state.delta(v);
                if (de < best_delta) {
                    best_delta = de;
                    arg = v;
                }
            }
            evals += n;
            if (arg == n) break;  // local minimum
            state.flip(arg);
        }
    }

    auto r = detail::finish(m, ctx, best, std::vector<double>(best.begin(), best.end()), seen);
    r.evaluations = evals;
    r.budget_exhausted = true;
    r.solver_name = "hc";
    r.wall_time_s = clock.seconds();
    return r;
}

// ---- continuous relaxation --------------------------------------------------

// f(y) = linear.y + sum_{i<j} Q_ij y_i y_j + offset on the box [0,1]^n.
[[nodiscard]] inline double relaxed_value(const QuboModel& m, std::span<const double> y) {
    if (y.size() != m.num_vars()) throw std::invalid_argument("relaxed_value: size mismatch");
    double e = m.offset();
    for (std::size_t i = 0; i < y.size(); ++i) e += m.linear()[i] * y[i];
    for (const auto& t : m.quadratic()) e += t.w * y[t.i] * y[t.j];
    return e;
}

// grad f = linear + (Q + Q^T) y with Q the strictly upper quadratic part.
inline void relaxed_gradient(const QuboModel& m, std::span<const double> y, std::span<double> grad) {
    if (y.size() != m.num_vars() || grad.size() != m.num_vars())
        throw std::invalid_argument("relaxed_gradient: size mismatch");
    std::copy(m.linear().begin(), m.linear().end(), grad.begin());
    for (const auto& t : m.quadratic()) {
        grad[t.i] += t.w * y[t.j];
        grad[t.j] += t.w * y[t.i];
    }
}

namespace detail {

template <typename Update>
SolverResult solve_relaxed(const QuboModel& m, const SolverConfig& cfg, const SequenceContext& ctx,
                           std::size_t iterations, double tolerance, std::string name, Update&& update) {
    cfg.validate();
    require_square(m, ctx);
    Stopwatch clock;
    const std::size_t n = m.num_vars();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> y(n), grad(n);
    for (auto& v : y) v = unit(rng);

    const std::uint64_t budget = std::min<std::uint64_t>(cfg.budget.value_or(iterations), iterations);
    std::uint64_t evals = 0;
    for (std::uint64_t it = 1; it <= budget; ++it) {
        relaxed_gradient(m, y, grad);
        ++evals;
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double next = std::clamp(update(i, it, y[i], grad[i]), 0.0, 1.0);
            moved = std::max(moved, std::abs(next - y[i]));
            y[i] = next;
        }
        if (moved < tolerance) break;
    }

    std::vector<std::uint8_t> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = y[i] >= 0.5 ? 1 : 0;
    FeasibleBest seen;
    auto r = finish(m, ctx, raw, y, seen);
    r.evaluations = evals;
    r.budget_exhausted = evals >= budget && budget < iterations;
    r.solver_name = std::move(name);
    r.wall_time_s = clock.seconds();
    return r;
}

}  // namespace detail

[[nodiscard]] inline SolverResult solve_gradient_descent(const QuboModel& m, const SolverConfig& cfg,
                                                         const SequenceContext& ctx) {
    const double step = cfg.gradient.step;
    return detail::solve_relaxed(m, cfg, ctx, cfg.gradient.iterations, cfg.gradient.tolerance, "gd",
                                 [step](std::size_t, std::uint64_t, double y, double g) { return y - step * g; });
}

[[nodiscard]] inline SolverResult solve_adam(const QuboModel& m, const SolverConfig& cfg,
                                             const SequenceContext& ctx) {
    const AdamSettings a = cfg.adam;
    std::vector<double> first(m.num_vars(), 0.0), second(m.num_vars(), 0.0);
    return detail::solve_relaxed(
        m, cfg, ctx, a.iterations, a.tolerance, "adam",
        [&, a](std::size_t i, std::uint64_t t, double y, double g) {
            first[i] = a.beta1 * first[i] + (1.0 - a.beta1) * g;
            second[i] = a.beta2 * second[i] + (1.0 - a.beta2) * g * g;
            const double mhat = first[i] / (1.0 - std::pow(a.beta1, static_cast<double>(t)));
            const double vhat = second[i] / (1.0 - std::pow(a.beta2, static_cast<double>(t)));
            return y - a.step * mhat / (std::sqrt(vhat) + a.epsilon);
        });
}

// Overloads without an explicit context: phases are labelled 1..p and costs
// come from the QUBO energy of the encoded permutation.
[[nodiscard]] inline SolverResult solve_simulated_annealing(const QuboModel& m, const SolverConfig& cfg) {
    return solve_simulated_annealing(m, cfg, SequenceContext(m));
}
[[nodiscard]] inline SolverResult solve_hill_climbing(const QuboModel& m, const SolverConfig& cfg) {
    return solve_hill_climbing(m, cfg, SequenceContext(m));
}
[[nodiscard]] inline SolverResult solve_gradient_descent(const QuboModel& m, const SolverConfig& cfg) {
    return solve_gradient_descent(m, cfg, SequenceContext(m));
}
[[nodiscard]] inline SolverResult solve_adam(const QuboModel& m, const SolverConfig& cfg) {
    return solve_adam(m, cfg, SequenceContext(m));
}
[[nodiscard]] inline SolverResult solve_branch_and_bound_qubo(const QuboModel& m, const SolverConfig& cfg) {
    return solve_branch_and_bound_qubo(m, cfg, SequenceContext(m));
}

// ---- dispatch -----------------------------------------------------------------

[[nodiscard]] inline SolverResult solve(SolverKind kind, const DelayMatrix& d, const SolverConfig& cfg) {
    if (kind == SolverKind::Exact) return solve_exact(d);
    if (kind == SolverKind::BranchAndBound && cfg.bnb_space == BnbSpace::Permutation)
        return solve_branch_and_bound(d, cfg);

    const QuboModel m = build_qubo(d, resolve_gamma(cfg.gamma, d));
    const SequenceContext ctx(d);
    switch (kind) {
        case SolverKind::SimulatedAnnealing: return solve_simulated_annealing(m, cfg, ctx);
        case SolverKind::HillClimbing: return solve_hill_climbing(m, cfg, ctx);
        case SolverKind::GradientDescent: return solve_gradient_descent(m, cfg, ctx);
        case SolverKind::Adam: return solve_adam(m, cfg, ctx);
        case SolverKind::BranchAndBound: return solve_branch_and_bound_qubo(m, cfg, ctx);
        case SolverKind::Exact: break;
    }
    throw std::logic_error("unreachable solver kind");
}

// Solves a bare QUBO; phases are numbered 1..p. Branch and bound always
// searches the binary space here since no delay matrix is available.
[[nodiscard]] inline SolverResult solve(SolverKind kind, const QuboModel& m, const SolverConfig& cfg) {
    const SequenceContext ctx(m);
    switch (kind) {
        case SolverKind::Exact: return solve_exact(m);
        case SolverKind::SimulatedAnnealing: return solve_simulated_annealing(m, cfg, ctx);
        case SolverKind::HillClimbing: return solve_hill_climbing(m, cfg, ctx);
        case SolverKind::GradientDescent: return solve_gradient_descent(m, cfg, ctx);
        case SolverKind::Adam: return solve_adam(m, cfg, ctx);
        case SolverKind::BranchAndBound: return solve_branch_and_bound_qubo(m, cfg, ctx);
    }
    throw std::logic_error("unreachable solver kind");
}

}  // namespace vtl
