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
   Movements, concurrent phase groups and signal timing for a single 4-way
   intersection with two lanes per approach: the right lane carries through
   and right-turn traffic, the left lane carries left turns.
*/

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace vtl {

enum class Approach : std::uint8_t { North = 0, South = 1, East = 2, West = 3 };
enum class MovementKind : std::uint8_t { Through = 0, Left = 1 };

inline constexpr std::size_t kNumMovements = 8;
inline constexpr std::size_t kNumPhaseGroups = 8;

struct Movement {
    Approach approach = Approach::North;
    MovementKind kind = MovementKind::Through;

    constexpr bool operator==(const Movement&) const = default;

    // Dense index in [0, 8): approach * 2 + kind.
    [[nodiscard]] constexpr std::size_t index() const {
        return static_cast<std::size_t>(approach) * 2 + static_cast<std::size_t>(kind);
    }

    [[nodiscard]] static constexpr Movement from_index(std::size_t i) {
        return Movement{static_cast<Approach>(i / 2), static_cast<MovementKind>(i % 2)};
    }

    // North/South approaches share a street; East/West the other.
    [[nodiscard]] constexpr bool north_south() const {
        return approach == Approach::North || approach == Approach::South;
    }

    [[nodiscard]] std::string name() const {
        static constexpr std::array<char, 4> kApproach{'N', 'S', 'E', 'W'};
        std::string s(1, kApproach[static_cast<std::size_t>(approach)]);
        s += kind == MovementKind::Through ? 'T' : 'L';
        return s;
    }
};

[[nodiscard]] inline Movement parse_movement(std::string_view name) {
    if (name.size() == 2) {
        for (std::size_t i = 0; i < kNumMovements; ++i) {
            Movement m = Movement::from_index(i);
            if (m.name() == name) return m;
        }
    }
    throw std::invalid_argument("unknown movement '" + std::string(name) + "'");
}

[[nodiscard]] inline constexpr std::array<Movement, kNumMovements> all_movements() {
    std::array<Movement, kNumMovements> out{};
    for (std::size_t i = 0; i < kNumMovements; ++i) out[i] = Movement::from_index(i);
    return out;
}

// True iff the two movements cannot hold right-of-way at the same time.
// Cross-street pairs always conflict; on one street a through movement
// conflicts with the opposing left turn.
[[nodiscard]] inline constexpr bool movements_conflict(Movement a, Movement b) {
    if (a == b) return false;
    if (a.north_south() != b.north_south()) return true;
    return a.kind != b.kind && a.approach != b.approach;
}

struct PhaseGroup {
    int id = 0;  // 1..8
    std::array<Movement, 2> movements{};

    constexpr bool operator==(const PhaseGroup&) const = default;

    [[nodiscard]] constexpr bool contains(Movement m) const {
        return movements[0] == m || movements[1] == m;
    }

    [[nodiscard]] std::string name() const {
        return movements[0].name() + "+" + movements[1].name();
    }
};

using PhaseCatalogue = std::array<PhaseGroup, kNumPhaseGroups>;

// Fixed catalogue of the 8 compatible movement pairs, ids 1..8. Per street:
// both lefts, both throughs, then each approach's left with its own through.
// The ids are internal labels.
[[nodiscard]] inline constexpr PhaseCatalogue standard_phase_groups() {
    using A = Approach;
    using K = MovementKind;
    constexpr auto mv = [](A a, K k) { return Movement{a, k}; };
    return PhaseCatalogue{{
        {1, {mv(A::North, K::Left), mv(A::South, K::Left)}},
        {2, {mv(A::North, K::Through), mv(A::South, K::Through)}},
        {3, {mv(A::North, K::Left), mv(A::North, K::Through)}},
        {4, {mv(A::South, K::Left), mv(A::South, K::Through)}},
        {5, {mv(A::East, K::Left), mv(A::West, K::Left)}},
        {6, {mv(A::East, K::Through), mv(A::West, K::Through)}},
        {7, {mv(A::East, K::Left), mv(A::East, K::Through)}},
        {8, {mv(A::West, K::Left), mv(A::West, K::Through)}},
    }};
}

[[nodiscard]] inline const PhaseGroup& phase_by_id(int id) {
    static constexpr PhaseCatalogue kCatalogue = standard_phase_groups();
    if (id < 1 || id > static_cast<int>(kNumPhaseGroups))
        throw std::out_of_range("phase id out of range: " + std::to_string(id));
    return kCatalogue[static_cast<std::size_t>(id - 1)];
}

struct SignalTiming {
    double yellow_s = 3.0;
    double all_red_s = 2.0;

    [[nodiscard]] double lost_time_s() const { return yellow_s + all_red_s; }

    void validate() const {
        if (!(yellow_s > 0.0)) throw std::invalid_argument("yellow_s must be > 0");
        if (!(all_red_s >= 0.0)) throw std::invalid_argument("all_red_s must be >= 0");
    }
};

inline void to_json(nlohmann::json& j, const SignalTiming& t) {
    j = nlohmann::json{{"yellow_s", t.yellow_s}, {"all_red_s", t.all_red_s}};
}

inline void from_json(const nlohmann::json& j, SignalTiming& t) {
    t.yellow_s = j.value("yellow_s", t.yellow_s);
    t.all_red_s = j.value("all_red_s", t.all_red_s);
}

inline void to_json(nlohmann::json& j, const PhaseGroup& g) {
    j = nlohmann::json{{"id", g.id},
                       {"movements", {g.movements[0].name(), g.movements[1].name()}}};
}

[[nodiscard]] inline nlohmann::json catalogue_json(const PhaseCatalogue& groups = standard_phase_groups()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& g : groups) arr.push_back(g);
    return arr;
}

}  // namespace vtl
