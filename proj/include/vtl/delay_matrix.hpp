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
   Arrival-time estimates and phase-transition stopped delays.

   For an ordered pair of occupied phases (from, to), the delay imposed on the
   vehicles of `to` when `from` is served immediately before it is

       d(from, to) = sum_i max(0, t_from - t_i + Y + R)

   where t_from is the ETA of the last vehicle of `from` (the larger ETA among
   the furthest in-zone vehicle of each of its movements), t_i the ETA of the
   i-th vehicle of `to`, and Y, R the yellow and all-red intervals.
*/

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtl/phase_model.hpp"

namespace vtl {

// Below this speed a vehicle counts as stopped (delay metric and ETA rule).
inline constexpr double kStoppedSpeedMps = 0.1;
// A stopped vehicle this close to the stop line has arrived (ETA zero).
inline constexpr double kArrivalToleranceM = 2.0;

struct VehicleSnapshot {
    std::uint64_t vehicle_id = 0;
    Movement movement{};
    double distance_to_stop_line_m = 0.0;
    double speed_mps = 0.0;
};

[[nodiscard]] inline double eta(const VehicleSnapshot& v) {
    const double d = std::max(0.0, v.distance_to_stop_line_m);
    // standing still counts as arrived, wherever the queue ends
    if (d == 0.0 || v.speed_mps <= 0.0) return 0.0;
    if (v.speed_mps < kStoppedSpeedMps) {
        if (d <= kArrivalToleranceM) return 0.0;
        return d / kStoppedSpeedMps;
    }
    return d / v.speed_mps;
}

// ETA of the phase's last vehicle: per movement take the in-zone vehicle
// furthest from the stop line, then the larger of those ETAs.
[[nodiscard]] inline double last_vehicle_eta(const PhaseGroup& phase,
                                             std::span<const VehicleSnapshot> vehicles) {
    std::optional<double> best;
    for (const Movement m : phase.movements) {
        const VehicleSnapshot* furthest = nullptr;
        for (const auto& v : vehicles) {
            if (!(v.movement == m)) continue;
            if (furthest == nullptr ||
                v.distance_to_stop_line_m > furthest->distance_to_stop_line_m ||
                (v.distance_to_stop_line_m == furthest->distance_to_stop_line_m && eta(v) > eta(*furthest)))
                furthest = &v;
        }
        if (furthest != nullptr) {
            const double t = eta(*furthest);
            best = best ? std::max(*best, t) : t;
        }
    }
    if (!best) throw std::invalid_argument("phase " + std::to_string(phase.id) + " has no in-zone vehicles");
    return *best;
}

[[nodiscard]] inline bool phase_occupied(const PhaseGroup& phase, std::span<const VehicleSnapshot> vehicles) {
    return std::any_of(vehicles.begin(), vehicles.end(),
                       [&](const VehicleSnapshot& v) { return phase.contains(v.movement); });
}

[[nodiscard]] inline double transition_delay(const PhaseGroup& from_phase, const PhaseGroup& to_phase,
                                             std::span<const VehicleSnapshot> vehicles,
                                             const SignalTiming& timing) {
    if (from_phase == to_phase) throw std::invalid_argument("transition_delay: identical phases");
    if (!phase_occupied(to_phase, vehicles))
        throw std::invalid_argument("phase " + std::to_string(to_phase.id) + " has no in-zone vehicles");
    const double t_from = last_vehicle_eta(from_phase, vehicles);
    const double lost = timing.lost_time_s();
    double total = 0.0;
    for (const auto& v : vehicles)
        if (to_phase.contains(v.movement)) total += std::max(0.0, t_from - eta(v) + lost);
    return total;
}

// Asymmetric delay matrix over the occupied phases only (the reduced
// problem when some phases have no vehicles). Row = from, column = to.
class DelayMatrix {
public:
    DelayMatrix() = default;

    DelayMatrix(std::vector<int> occupied_phases, std::vector<double> entries)
        : phases_(std::move(occupied_phases)), entries_(std::move(entries)) {
        if (entries_.size() != phases_.size() * phases_.size())
            throw std::invalid_argument("DelayMatrix: entries must be n*n");
        for (double e : entries_)
            if (!(e >= 0.0) || !std::isfinite(e))
                throw std::invalid_argument("DelayMatrix: entries must be finite and >= 0");
    }

    // Convenience for tests and tools: phases labelled 1..n.
    [[nodiscard]] static DelayMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        const std::size_t n = rows.size();
        std::vector<int> ids(n);
        std::vector<double> flat;
        flat.reserve(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            ids[i] = static_cast<int>(i + 1);
            if (rows[i].size() != n) throw std::invalid_argument("DelayMatrix: rows must be square");
            for (std::size_t j = 0; j < n; ++j) flat.push_back(i == j ? 0.0 : rows[i][j]);
        }
        return DelayMatrix(std::move(ids), std::move(flat));
    }

    [[nodiscard]] std::size_t size() const { return phases_.size(); }
    [[nodiscard]] const std::vector<int>& occupied_phases() const { return phases_; }
    [[nodiscard]] double operator()(std::size_t from, std::size_t to) const {
        return entries_[from * phases_.size() + to];
    }
    [[nodiscard]] const std::vector<double>& entries() const { return entries_; }

    [[nodiscard]] double max_entry() const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            for (std::size_t j = 0; j < size(); ++j)
                if (i != j) m = std::max(m, (*this)(i, j));
        return m;
    }

    bool operator==(const DelayMatrix&) const = default;

private:
    std::vector<int> phases_;
    std::vector<double> entries_;
};

[[nodiscard]] inline DelayMatrix build_delay_matrix(std::span<const VehicleSnapshot> vehicles,
                                                    std::span<const PhaseGroup> catalogue,
                                                    const SignalTiming& timing) {
    std::vector<const PhaseGroup*> occupied;
    for (const auto& g : catalogue)
        if (phase_occupied(g, vehicles)) occupied.push_back(&g);

    const std::size_t n = occupied.size();
    std::vector<int> ids(n);
    std::vector<double> last_eta(n);
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = occupied[i]->id;
        last_eta[i] = last_vehicle_eta(*occupied[i], vehicles);
    }

    std::vector<double> etas(vehicles.size());
    for (std::size_t v = 0; v < vehicles.size(); ++v) etas[v] = eta(vehicles[v]);

    const double lost = timing.lost_time_s();
    std::vector<double> entries(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double total = 0.0;
            for (std::size_t v = 0; v < vehicles.size(); ++v)
                if (occupied[j]->contains(vehicles[v].movement))
                    total += std::max(0.0, last_eta[i] - etas[v] + lost);
            entries[i * n + j] = total;
        }
    }
    return DelayMatrix(std::move(ids), std::move(entries));
}

[[nodiscard]] inline DelayMatrix build_delay_matrix(std::span<const VehicleSnapshot> vehicles,
                                                    const SignalTiming& timing) {
    static constexpr PhaseCatalogue kCatalogue = standard_phase_groups();
    return build_delay_matrix(vehicles, kCatalogue, timing);
}

// ---- serialization --------------------------------------------------------

inline void to_json(nlohmann::json& j, const DelayMatrix& d) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < d.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < d.size(); ++k) row.push_back(d(i, k));
        rows.push_back(std::move(row));
    }
    j = nlohmann::json{{"occupied_phases", d.occupied_phases()}, {"entries", std::move(rows)}};
}

inline void from_json(const nlohmann::json& j, DelayMatrix& d) {
    auto ids = j.at("occupied_phases").get<std::vector<int>>();
    std::vector<double> flat;
    for (const auto& row : j.at("entries")) {
        if (row.size() != ids.size()) throw std::invalid_argument("DelayMatrix JSON: ragged rows");
        for (const auto& v : row) flat.push_back(v.get<double>());
    }
    d = DelayMatrix(std::move(ids), std::move(flat));
}

// CSV layout: header `phase,<id>,...`, then one row per from-phase
// `<id>,<d>,...`. Diagonal cells are written as 0.
[[nodiscard]] inline std::string to_csv(const DelayMatrix& d) {
    std::ostringstream os;
    os << std::setprecision(17) << "phase";
    for (int id : d.occupied_phases()) os << ',' << id;
    os << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        os << d.occupied_phases()[i];
        for (std::size_t k = 0; k < d.size(); ++k) os << ',' << d(i, k);
        os << '\n';
    }
    return os.str();
}

[[nodiscard]] inline DelayMatrix delay_matrix_from_csv(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    std::string line;
    std::vector<int> ids;
    std::vector<double> flat;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (header) {
            if (cells.empty() || cells[0] != "phase") throw std::invalid_argument("delay CSV: missing header");
            for (std::size_t k = 1; k < cells.size(); ++k) ids.push_back(std::stoi(cells[k]));
            header = false;
            continue;
        }
        if (cells.size() != ids.size() + 1) throw std::invalid_argument("delay CSV: ragged row");
        for (std::size_t k = 1; k < cells.size(); ++k) flat.push_back(std::stod(cells[k]));
    }
    if (header) throw std::invalid_argument("delay CSV: empty input");
    if (flat.size() != ids.size() * ids.size()) throw std::invalid_argument("delay CSV: expected square matrix");
    for (std::size_t i = 0; i < ids.size(); ++i) flat[i * ids.size() + i] = 0.0;
    return DelayMatrix(std::move(ids), std::move(flat));
}

}  // namespace vtl
