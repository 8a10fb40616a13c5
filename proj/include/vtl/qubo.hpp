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
   Penalized QUBO for phase sequencing as an asymmetric open-loop TSP.

   Binary x(i,k) = 1 places occupied phase i at position k. The objective is

       sum_{i != j} d_ij sum_{k < p-1} x(i,k) x(j,k+1)
         + gamma sum_i (sum_k x(i,k) - 1)^2
         + gamma sum_k (sum_i x(i,k) - 1)^2

   expanded with x^2 = x into linear weights, upper-triangular quadratic
   weights and a constant offset, so evaluation matches the unexpanded form
   exactly. Variable index of (i,k) is i*p + k (both zero-based).
*/

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vtl/delay_matrix.hpp"

namespace vtl {

inline constexpr double kPaperGamma = 100.0;

// Penalty weight large enough that every infeasible assignment is beaten by
// a feasible one: completing or trimming a partial permutation changes the
// path cost by at most two edges.
[[nodiscard]] inline double gamma_auto(const DelayMatrix& d) {
    return std::max(kPaperGamma, 2.0 * d.max_entry() + 1.0);
}

enum class GammaPolicy { Paper, Auto };

[[nodiscard]] inline const char* to_string(GammaPolicy g) { return g == GammaPolicy::Paper ? "paper" : "auto"; }

[[nodiscard]] inline double resolve_gamma(GammaPolicy policy, const DelayMatrix& d) {
    return policy == GammaPolicy::Paper ? kPaperGamma : gamma_auto(d);
}

struct QuadTerm {
    std::size_t i = 0;  // i < j
    std::size_t j = 0;
    double w = 0.0;
    bool operator==(const QuadTerm&) const = default;
};

namespace detail {
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

// Collects weights on unordered pairs; self-pairs fold into the linear part.
class QuadAccumulator {
public:
    explicit QuadAccumulator(std::size_t n) : linear_(n, 0.0) {}
    void add_linear(std::size_t i, double w) { linear_.at(i) += w; }
    void add_pair(std::size_t a, std::size_t b, double w) {
        if (a == b) {
            linear_.at(a) += w;
            return;
        }
        if (a > b) std::swap(a, b);
        pairs_[{a, b}] += w;
    }
    std::vector<double> take_linear() { return std::move(linear_); }
    std::vector<QuadTerm> take_quadratic() {
        std::vector<QuadTerm> out;
        out.reserve(pairs_.size());
        for (const auto& [key, w] : pairs_)
            if (w != 0.0) out.push_back({key.first, key.second, w});
        return out;
    }

private:
    std::vector<double> linear_;
    std::map<std::pair<std::size_t, std::size_t>, double> pairs_;
};
}  // namespace detail

class QuboModel {
public:
    QuboModel() = default;
    QuboModel(std::size_t num_vars, std::vector<double> linear, std::vector<QuadTerm> quadratic, double offset,
              double gamma = 0.0)
        : n_(num_vars), linear_(std::move(linear)), quadratic_(std::move(quadratic)), offset_(offset), gamma_(gamma) {
        if (linear_.size() != n_) throw std::invalid_argument("QuboModel: linear size != num_vars");
        for (const auto& t : quadratic_)
            if (t.i >= t.j || t.j >= n_) throw std::invalid_argument("QuboModel: quadratic term must have i < j < n");
        std::sort(quadratic_.begin(), quadratic_.end(),
                  [](const QuadTerm& a, const QuadTerm& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
        const auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n_))));
        p_ = r * r == n_ ? r : 0;
    }

    [[nodiscard]] std::size_t num_vars() const { return n_; }
    // Number of phases p when num_vars is a perfect square, else 0.
    [[nodiscard]] std::size_t num_phases() const { return p_; }
    [[nodiscard]] const std::vector<double>& linear() const { return linear_; }
    [[nodiscard]] const std::vector<QuadTerm>& quadratic() const { return quadratic_; }
    [[nodiscard]] double offset() const { return offset_; }
    [[nodiscard]] double gamma() const { return gamma_; }

    [[nodiscard]] std::size_t var_index(std::size_t phase, std::size_t position) const {
        if (phase >= p_ || position >= p_) throw std::out_of_range("var_index out of range");
        return phase * p_ + position;
    }
    [[nodiscard]] std::pair<std::size_t, std::size_t> var_position(std::size_t var) const {
        if (var >= n_ || p_ == 0) throw std::out_of_range("var_position out of range");
        return {var / p_, var % p_};
    }

    // Dense symmetric coupling matrix C with C_ij = C_ji = Q_ij, zero diagonal,
    // so f(x) = linear.x + 0.5 x^T C x + offset on binary x.
    [[nodiscard]] std::vector<double> dense_coupling() const {
        std::vector<double> c(n_ * n_, 0.0);
        for (const auto& t : quadratic_) {
            c[t.i * n_ + t.j] += t.w;
            c[t.j * n_ + t.i] += t.w;
        }
        return c;
    }

    bool operator==(const QuboModel&) const = default;

private:
    std::size_t n_ = 0;
    std::size_t p_ = 0;
    std::vector<double> linear_;
    std::vector<QuadTerm> quadratic_;
    double offset_ = 0.0;
    double gamma_ = 0.0;
};

[[nodiscard]] inline QuboModel build_qubo(const DelayMatrix& d, double gamma) {
    const std::size_t p = d.size();
    if (p < 2) throw std::invalid_argument("build_qubo: need at least 2 occupied phases");
    if (!(gamma > 0.0)) throw std::invalid_argument("build_qubo: gamma must be > 0");
    const std::size_t n = p * p;
    auto var = [p](std::size_t i, std::size_t k) { return i * p + k; };

    detail::QuadAccumulator acc(n);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            if (i == j || d(i, j) == 0.0) continue;
            for (std::size_t k = 0; k + 1 < p; ++k) acc.add_pair(var(i, k), var(j, k + 1), d(i, j));
        }

    // (sum_a x_a - 1)^2 = -sum_a x_a + 2 sum_{a<b} x_a x_b + 1 for each row and column.
    for (std::size_t line = 0; line < p; ++line)
        for (std::size_t a = 0; a < p; ++a) {
            acc.add_linear(var(line, a), -gamma);
            acc.add_linear(var(a, line), -gamma);
            for (std::size_t b = a + 1; b < p; ++b) {
                acc.add_pair(var(line, a), var(line, b), 2.0 * gamma);
                acc.add_pair(var(a, line), var(b, line), 2.0 * gamma);
            }
        }
    const double offset = 2.0 * static_cast<double>(p) * gamma;
    return QuboModel(n, acc.take_linear(), acc.take_quadratic(), offset, gamma);
}

[[nodiscard]] inline double evaluate(const QuboModel& m, std::span<const std::uint8_t> x) {
    if (x.size() != m.num_vars())
        throw std::invalid_argument("evaluate: expected " + std::to_string(m.num_vars()) + " variables, got " +
                                    std::to_string(x.size()));
    double e = m.offset();
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i]) e += m.linear()[i];
    for (const auto& t : m.quadratic())
        if (x[t.i] && x[t.j]) e += t.w;
    return e;
}

// ---- Ising form -------------------------------------------------------------

class IsingModel {
public:
    IsingModel() = default;
    IsingModel(std::vector<double> h, std::vector<QuadTerm> couplings, double offset)
        : h_(std::move(h)), j_(std::move(couplings)), offset_(offset) {}

    [[nodiscard]] std::size_t num_spins() const { return h_.size(); }
    [[nodiscard]] const std::vector<double>& h() const { return h_; }
    [[nodiscard]] const std::vector<QuadTerm>& couplings() const { return j_; }
    [[nodiscard]] double offset() const { return offset_; }

private:
    std::vector<double> h_;
    std::vector<QuadTerm> j_;
    double offset_ = 0.0;
};

// Substitutes x = (1 + s) / 2; the offset absorbs every constant so energies
// agree exactly with the QUBO on corresponding states.
[[nodiscard]] inline IsingModel to_ising(const QuboModel& m) {
    std::vector<double> h(m.num_vars(), 0.0);
    std::vector<QuadTerm> couplings;
    couplings.reserve(m.quadratic().size());
    double offset = m.offset();
    for (std::size_t i = 0; i < m.num_vars(); ++i) {
        h[i] += m.linear()[i] / 2.0;
        offset += m.linear()[i] / 2.0;
    }
    for (const auto& t : m.quadratic()) {
        const double q = t.w / 4.0;
        h[t.i] += q;
        h[t.j] += q;
        offset += q;
        couplings.push_back({t.i, t.j, q});
    }
    return IsingModel(std::move(h), std::move(couplings), offset);
}

[[nodiscard]] inline double ising_energy(const IsingModel& m, std::span<const std::int8_t> s) {
    if (s.size() != m.num_spins()) throw std::invalid_argument("ising_energy: spin count mismatch");
    double e = m.offset();
    for (std::size_t i = 0; i < s.size(); ++i) e += m.h()[i] * s[i];
    for (const auto& t : m.couplings()) e += t.w * s[t.i] * s[t.j];
    return e;
}

[[nodiscard]] inline std::vector<std::int8_t> to_spins(std::span<const std::uint8_t> x) {
    std::vector<std::int8_t> s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) s[i] = x[i] ? 1 : -1;
    return s;
}

// ---- sequences --------------------------------------------------------------

// Phase ids in service order; element 0 is granted next.
struct PhaseSequence {
    std::vector<int> order;
    bool operator==(const PhaseSequence&) const = default;
};

// Position-ordered indices into DelayMatrix::occupied_phases().
using IndexOrder = std::vector<std::size_t>;

[[nodiscard]] inline bool is_permutation_of_indices(const IndexOrder& order, std::size_t p) {
    if (order.size() != p) return false;
    std::vector<bool> seen(p, false);
    for (std::size_t i : order) {
        if (i >= p || seen[i]) return false;
        seen[i] = true;
    }
    return true;
}

[[nodiscard]] inline double path_cost(const IndexOrder& order, const DelayMatrix& d) {
    double c = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) c += d(order[k], order[k + 1]);
    return c;
}

[[nodiscard]] inline PhaseSequence to_sequence(const IndexOrder& order, const DelayMatrix& d) {
    PhaseSequence s;
    s.order.reserve(order.size());
    for (std::size_t i : order) s.order.push_back(d.occupied_phases().at(i));
    return s;
}

[[nodiscard]] inline IndexOrder to_index_order(const PhaseSequence& seq, const DelayMatrix& d) {
    const auto& ids = d.occupied_phases();
    IndexOrder out;
    out.reserve(seq.order.size());
    for (int id : seq.order) {
        auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) throw std::invalid_argument("sequence names unoccupied phase " + std::to_string(id));
        out.push_back(static_cast<std::size_t>(it - ids.begin()));
    }
    if (!is_permutation_of_indices(out, d.size()))
        throw std::invalid_argument("sequence is not a permutation of the occupied phases");
    return out;
}

// Open-loop path cost: consecutive transitions only, no return edge.
[[nodiscard]] inline double sequence_cost(const PhaseSequence& seq, const DelayMatrix& d) {
    return path_cost(to_index_order(seq, d), d);
}

[[nodiscard]] inline std::vector<std::uint8_t> encode(const IndexOrder& order, std::size_t p) {
    std::vector<std::uint8_t> x(p * p, 0);
    for (std::size_t k = 0; k < order.size(); ++k) x.at(order[k] * p + k) = 1;
    return x;
}

struct DecodeResult {
    std::optional<PhaseSequence> sequence;
    IndexOrder order;                     // filled when feasible
    std::vector<std::size_t> bad_phases;  // rows whose sum != 1
    std::vector<std::size_t> bad_positions;  // columns whose sum != 1

    [[nodiscard]] bool feasible() const { return sequence.has_value(); }
};

[[nodiscard]] inline DecodeResult decode(std::span<const std::uint8_t> x, const DelayMatrix& d) {
    const std::size_t p = d.size();
    if (x.size() != p * p) throw std::invalid_argument("decode: expected p*p variables");
    DecodeResult r;
    for (std::size_t i = 0; i < p; ++i) {
        int row = 0, col = 0;
        for (std::size_t k = 0; k < p; ++k) {
            row += x[i * p + k] ? 1 : 0;
            col += x[k * p + i] ? 1 : 0;
        }
        if (row != 1) r.bad_phases.push_back(i);
        if (col != 1) r.bad_positions.push_back(i);
    }
    if (r.bad_phases.empty() && r.bad_positions.empty()) {
        r.order.assign(p, 0);
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t k = 0; k < p; ++k)
                if (x[i * p + k]) r.order[k] = i;
        r.sequence = to_sequence(r.order, d);
    }
    return r;
}

// ---- text format --------------------------------------------------------------
//   offset <value>
//   lin <i> <w>
//   quad <i> <j> <w>
// Lines starting with '#' are comments; `# gamma <g>` is read back if present.

[[nodiscard]] inline std::string to_text(const QuboModel& m) {
    std::string out;
    if (m.gamma() > 0.0) out += "# gamma " + detail::format_double(m.gamma()) + "\n";
    out += "offset " + detail::format_double(m.offset()) + "\n";
    for (std::size_t i = 0; i < m.num_vars(); ++i)
        out += "lin " + std::to_string(i) + " " + detail::format_double(m.linear()[i]) + "\n";
    for (const auto& t : m.quadratic())
        out += "quad " + std::to_string(t.i) + " " + std::to_string(t.j) + " " + detail::format_double(t.w) + "\n";
    return out;
}

// Every variable must appear in a `lin` line (weights may be zero); the
// variable count is the largest index seen plus one.
[[nodiscard]] inline QuboModel qubo_from_text(std::istream& in) {
    std::string line;
    double offset = 0.0, gamma = 0.0;
    std::map<std::size_t, double> lin;
    std::vector<QuadTerm> quad;
    std::size_t n = 0;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        auto fail = [&] { throw std::invalid_argument("qubo text line " + std::to_string(lineno) + ": " + line); };
        if (tag[0] == '#') {
            std::string key;
            if (ls >> key && key == "gamma" && !(ls >> gamma)) fail();
        } else if (tag == "offset") {
            if (!(ls >> offset)) fail();
        } else if (tag == "lin") {
            std::size_t i;
            double w;
            if (!(ls >> i >> w)) fail();
            lin[i] += w;
            n = std::max(n, i + 1);
        } else if (tag == "quad") {
            std::size_t i, j;
            double w;
            if (!(ls >> i >> j >> w) || i == j) fail();
            if (i > j) std::swap(i, j);
            quad.push_back({i, j, w});
            n = std::max(n, j + 1);
        } else {
            fail();
        }
    }
    std::vector<double> linear(n, 0.0);
    for (const auto& [i, w] : lin) linear[i] = w;
    detail::QuadAccumulator acc(n);
    for (const auto& t : quad) acc.add_pair(t.i, t.j, t.w);
    return QuboModel(n, std::move(linear), acc.take_quadratic(), offset, gamma);
}

}  // namespace vtl
