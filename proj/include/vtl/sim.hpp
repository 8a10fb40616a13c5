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
   Discrete-time microscopic simulation of one 4-way intersection.

   Eight lanes, one per movement. Positions are distances to the stop line
   (negative once a vehicle has crossed); a vehicle leaves the network when
   its rear clears the intersection box. Vehicles follow a bounded
   acceleration point-queue model: speed is capped so the vehicle can always
   brake (at the comfortable deceleration) before its leader's rear plus the
   standstill gap, and before the stop line unless it holds permission.

   VtlController runs the optimize -> grant -> clear -> yellow -> all-red
   loop. Each decision snapshots the in-zone vehicles, builds the transition
   delay matrix, asks a solver for a phase order and grants exactly the
   snapshot vehicles of the first phase once the decision latency has
   elapsed. FixedCycleController is a plain round-robin reference.
*/

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "vtl/delay_matrix.hpp"
#include "vtl/hash.hpp"
#include "vtl/metrics.hpp"
#include "vtl/phase_model.hpp"
#include "vtl/qubo.hpp"
#include "vtl/solvers.hpp"

namespace vtl {

inline constexpr double kMphToMps = 0.44704;

struct LatencyModel {
    double fixed_overhead_s = 0.0;  // upload + queue + download
    double processing_s = 0.0;      // solver compute

    [[nodiscard]] double total_s() const { return fixed_overhead_s + processing_s; }
    [[nodiscard]] static LatencyModel none() { return {}; }
    // Cloud annealer round trip: 2.793 s transfer/queue, 0.197 s QPU access.
    [[nodiscard]] static LatencyModel paper() { return {2.793, 0.197}; }

    // "none" | "paper" | "custom:<fixed>,<processing>"
    [[nodiscard]] static LatencyModel parse(const std::string& s) {
        if (s == "none") return none();
        if (s == "paper") return paper();
        if (s.rfind("custom:", 0) == 0) {
            LatencyModel m;
            char tail = 0;
            if (std::sscanf(s.c_str() + 7, "%lf,%lf%c", &m.fixed_overhead_s, &m.processing_s, &tail) == 2) {
                m.validate();
                return m;
            }
        }
        throw std::invalid_argument("latency must be none, paper or custom:<fixed>,<processing>; got '" + s + "'");
    }

    void validate() const {
        if (!(fixed_overhead_s >= 0.0) || !(processing_s >= 0.0))
            throw std::invalid_argument("latency components must be >= 0");
    }
    bool operator==(const LatencyModel&) const = default;
};

struct KinematicParams {
    double accel_mps2 = 2.6;
    double decel_mps2 = 4.5;
    double vehicle_length_m = 5.0;
    double standstill_gap_m = 2.5;
    double box_length_m = 20.0;
    bool operator==(const KinematicParams&) const = default;
};

enum class ArrivalMode { Deterministic, Exponential };

struct ScenarioConfig {
    double volume_fraction = 0.35;
    double capacity_pcphpl = 1800.0;
    double vtl_zone_m = 100.0;
    double speed_limit_mps = 35.0 * kMphToMps;
    double approach_length_m = 300.0;
    double sim_duration_s = 3600.0;
    double warmup_s = 300.0;  // trips spawned earlier are excluded from metrics
    double time_step_s = 0.1;
    SignalTiming timing{};
    std::uint64_t seed = 1;
    LatencyModel latency{};
    ArrivalMode arrivals = ArrivalMode::Deterministic;
    KinematicParams kinematics{};

    [[nodiscard]] double headway_s() const { return 3600.0 / (volume_fraction * capacity_pcphpl); }

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be > 0");
        };
        positive(volume_fraction, "volume_fraction");
        positive(capacity_pcphpl, "capacity_pcphpl");
        positive(vtl_zone_m, "vtl_zone_m");
        positive(speed_limit_mps, "speed_limit_mps");
        positive(approach_length_m, "approach_length_m");
        positive(sim_duration_s, "sim_duration_s");
        positive(time_step_s, "time_step_s");
        positive(kinematics.accel_mps2, "accel_mps2");
        positive(kinematics.decel_mps2, "decel_mps2");
        positive(kinematics.vehicle_length_m, "vehicle_length_m");
        positive(kinematics.box_length_m, "box_length_m");
        if (!(kinematics.standstill_gap_m >= 0.0)) throw std::invalid_argument("standstill_gap_m must be >= 0");
        if (!(warmup_s >= 0.0)) throw std::invalid_argument("warmup_s must be >= 0");
        if (!(warmup_s < sim_duration_s)) throw std::invalid_argument("warmup_s must be shorter than sim_duration_s");
        if (vtl_zone_m > approach_length_m) throw std::invalid_argument("vtl_zone_m must not exceed approach_length_m");
        timing.validate();
        latency.validate();
    }
};

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json{
        {"volume_fraction", c.volume_fraction},
        {"capacity_pcphpl", c.capacity_pcphpl},
        {"vtl_zone_m", c.vtl_zone_m},
        {"speed_limit_mps", c.speed_limit_mps},
        {"approach_length_m", c.approach_length_m},
        {"sim_duration_s", c.sim_duration_s},
        {"warmup_s", c.warmup_s},
        {"time_step_s", c.time_step_s},
        {"timing", c.timing},
        {"seed", c.seed},
        {"latency", {{"fixed_overhead_s", c.latency.fixed_overhead_s}, {"processing_s", c.latency.processing_s}}},
        {"arrivals", c.arrivals == ArrivalMode::Deterministic ? "deterministic" : "exponential"},
        {"kinematics",
         {{"accel_mps2", c.kinematics.accel_mps2},
          {"decel_mps2", c.kinematics.decel_mps2},
          {"vehicle_length_m", c.kinematics.vehicle_length_m},
          {"standstill_gap_m", c.kinematics.standstill_gap_m},
          {"box_length_m", c.kinematics.box_length_m}}}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    static const std::unordered_set<std::string> kKnown{
        "volume_fraction", "capacity_pcphpl", "vtl_zone_m", "speed_limit_mps", "approach_length_m",
        "sim_duration_s",  "warmup_s",        "time_step_s", "timing",         "seed",
        "latency",         "arrivals",        "kinematics"};
    for (const auto& [key, _] : j.items())
        if (!kKnown.contains(key)) throw std::invalid_argument("unknown scenario key '" + key + "'");
    c.volume_fraction = j.value("volume_fraction", c.volume_fraction);
    c.capacity_pcphpl = j.value("capacity_pcphpl", c.capacity_pcphpl);
    c.vtl_zone_m = j.value("vtl_zone_m", c.vtl_zone_m);
    c.speed_limit_mps = j.value("speed_limit_mps", c.speed_limit_mps);
    c.approach_length_m = j.value("approach_length_m", c.approach_length_m);
    c.sim_duration_s = j.value("sim_duration_s", c.sim_duration_s);
    c.warmup_s = j.value("warmup_s", c.warmup_s);
    c.time_step_s = j.value("time_step_s", c.time_step_s);
    if (j.contains("timing")) j.at("timing").get_to(c.timing);
    c.seed = j.value("seed", c.seed);
    if (j.contains("latency")) {
        const auto& l = j.at("latency");
        if (l.is_string()) {
            c.latency = LatencyModel::parse(l.get<std::string>());
        } else {
            c.latency.fixed_overhead_s = l.value("fixed_overhead_s", c.latency.fixed_overhead_s);
            c.latency.processing_s = l.value("processing_s", c.latency.processing_s);
        }
    }
    if (j.contains("arrivals")) {
        const auto a = j.at("arrivals").get<std::string>();
        if (a == "deterministic") c.arrivals = ArrivalMode::Deterministic;
        else if (a == "exponential") c.arrivals = ArrivalMode::Exponential;
        else throw std::invalid_argument("arrivals must be deterministic or exponential");
    }
    if (j.contains("kinematics")) {
        const auto& k = j.at("kinematics");
        c.kinematics.accel_mps2 = k.value("accel_mps2", c.kinematics.accel_mps2);
        c.kinematics.decel_mps2 = k.value("decel_mps2", c.kinematics.decel_mps2);
        c.kinematics.vehicle_length_m = k.value("vehicle_length_m", c.kinematics.vehicle_length_m);
        c.kinematics.standstill_gap_m = k.value("standstill_gap_m", c.kinematics.standstill_gap_m);
        c.kinematics.box_length_m = k.value("box_length_m", c.kinematics.box_length_m);
    }
}

inline constexpr std::size_t kNumLanes = kNumMovements;

// Arrival times in [0, sim_duration_s) for one lane (lane index = movement
// index). Deterministic mode staggers the lanes by an eighth of a headway.
[[nodiscard]] inline std::vector<double> generate_arrivals(const ScenarioConfig& cfg, std::size_t lane) {
    if (lane >= kNumLanes) throw std::out_of_range("lane index out of range");
    const double h = cfg.headway_s();
    std::vector<double> times;
    if (cfg.arrivals == ArrivalMode::Deterministic) {
        const double offset = h * static_cast<double>(lane) / static_cast<double>(kNumLanes);
        for (std::size_t k = 0;; ++k) {
            const double t = offset + static_cast<double>(k) * h;
            if (t >= cfg.sim_duration_s) break;
            times.push_back(t);
        }
    } else {
        std::mt19937_64 rng(mix_seed(cfg.seed, lane));
        std::exponential_distribution<double> gap(1.0 / h);
        for (double t = gap(rng); t < cfg.sim_duration_s; t += gap(rng)) times.push_back(t);
    }
    return times;
}

struct VehicleState {
    std::uint64_t id = 0;
    Movement movement{};
    double position_m = 0.0;  // to the stop line; negative after crossing
    double speed_mps = 0.0;
    double spawn_time_s = 0.0;  // scheduled arrival
    double stopped_time_s = 0.0;
    std::optional<double> exit_time_s;
    bool may_cross = false;  // right-of-way granted

    // A vehicle waiting exactly at the line has not crossed.
    [[nodiscard]] bool crossed() const { return position_m < 0.0; }
};

// Largest speed from which a vehicle can still stop within `room` metres
// after moving for one more step at that speed.
[[nodiscard]] inline double safe_speed(double room, double decel, double dt) {
    if (room <= 0.0) return 0.0;
    const double bdt = decel * dt;
    return -bdt + std::sqrt(bdt * bdt + 2.0 * decel * room);
}

// Advances one lane (leader first) by dt. Stopped time accrues whenever the
// updated speed is below the stopped threshold.
inline void step_kinematics(std::deque<VehicleState>& lane, const KinematicParams& k, double speed_limit,
                            double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_kinematics: dt must be > 0");
    const VehicleState* leader = nullptr;
    for (auto& v : lane) {
        double target = std::min(speed_limit, v.speed_mps + k.accel_mps2 * dt);
        if (!v.may_cross && !v.crossed()) target = std::min(target, safe_speed(v.position_m, k.decel_mps2, dt));
        if (leader != nullptr) {
            const double room = v.position_m - (leader->position_m + k.vehicle_length_m) - k.standstill_gap_m;
            target = std::min(target, safe_speed(room, k.decel_mps2, dt));
        }
        target = std::max(0.0, target);
        if (!v.may_cross && !v.crossed() && v.position_m - target * dt < 0.0) target = v.position_m / dt;
        v.position_m -= target * dt;
        if (!v.may_cross && v.position_m < 0.0) v.position_m = 0.0;  // rounding at the line
        v.speed_mps = target;
        if (target < kStoppedSpeedMps) v.stopped_time_s += dt;
        leader = &v;
    }
}

enum class Signal : std::uint8_t { Red, Yellow, Green };
using Displays = std::array<Signal, kNumMovements>;

[[nodiscard]] inline Displays all_red() {
    Displays d;
    d.fill(Signal::Red);
    return d;
}

[[nodiscard]] inline Displays phase_display(const PhaseGroup& g, Signal s) {
    Displays d = all_red();
    for (const auto& m : g.movements) d[m.index()] = s;
    return d;
}

struct SafetyCounters {
    std::uint64_t ticks = 0;
    std::uint64_t conflicting_display_ticks = 0;
    std::uint64_t conflicting_box_ticks = 0;
    std::uint64_t conservation_violations = 0;
    std::uint64_t spawned = 0;  // inserted into the network
    std::uint64_t exited = 0;
    std::uint64_t in_network_end = 0;
    std::uint64_t backlog_end = 0;  // scheduled but not yet inserted at the end

    [[nodiscard]] std::uint64_t conflict_ticks() const { return conflicting_display_ticks + conflicting_box_ticks; }
};

class Intersection {
public:
    explicit Intersection(const ScenarioConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        for (std::size_t l = 0; l < kNumLanes; ++l) {
            lanes_[l].movement = Movement::from_index(l);
            lanes_[l].schedule = generate_arrivals(cfg_, l);
        }
    }

    // Explicit per-lane arrival times (sorted), for hand-built scenarios.
    Intersection(const ScenarioConfig& cfg, const std::array<std::vector<double>, kNumLanes>& schedules)
        : cfg_(cfg) {
        cfg_.validate();
        for (std::size_t l = 0; l < kNumLanes; ++l) {
            if (!std::is_sorted(schedules[l].begin(), schedules[l].end()))
                throw std::invalid_argument("arrival schedule must be sorted");
            lanes_[l].movement = Movement::from_index(l);
            lanes_[l].schedule = schedules[l];
        }
    }

    [[nodiscard]] const ScenarioConfig& config() const { return cfg_; }

    // Inserts at most one due arrival per lane when the entry has room.
    void insert_arrivals(double now) {
        const auto& k = cfg_.kinematics;
        for (auto& lane : lanes_) {
            if (lane.next >= lane.schedule.size() || lane.schedule[lane.next] > now + kTimeEps) continue;
            double room = std::numeric_limits<double>::infinity();
            if (!lane.vehicles.empty()) {
                const auto& back = lane.vehicles.back();
                room = cfg_.approach_length_m - (back.position_m + k.vehicle_length_m) - k.standstill_gap_m;
                if (room < 0.0) continue;
            }
            VehicleState v;
            v.id = next_id_++;
            v.movement = lane.movement;
            v.position_m = cfg_.approach_length_m;
            v.spawn_time_s = lane.schedule[lane.next++];
            v.stopped_time_s = std::max(0.0, now - v.spawn_time_s);  // waited at the entry
            v.speed_mps = std::min(cfg_.speed_limit_mps, safe_speed(room, k.decel_mps2, cfg_.time_step_s));
            lane.vehicles.push_back(v);
            ++spawned_;
        }
    }

    void step(double now) {
        const double dt = cfg_.time_step_s;
        const double clear_at = -(cfg_.kinematics.box_length_m + cfg_.kinematics.vehicle_length_m);
        for (auto& lane : lanes_) {
            step_kinematics(lane.vehicles, cfg_.kinematics, cfg_.speed_limit_mps, dt);
            while (!lane.vehicles.empty() && lane.vehicles.front().position_m <= clear_at) {
                auto v = lane.vehicles.front();
                lane.vehicles.pop_front();
                v.exit_time_s = now + dt;
                trips_.push_back(TripRecord{v.id, v.movement, v.spawn_time_s, *v.exit_time_s,
                                            *v.exit_time_s - v.spawn_time_s, v.stopped_time_s});
                ++exited_;
            }
        }
    }

    [[nodiscard]] std::vector<VehicleSnapshot> snapshot() const {
        std::vector<VehicleSnapshot> out;
        for (const auto& lane : lanes_)
            for (const auto& v : lane.vehicles)
                if (!v.crossed() && v.position_m <= cfg_.vtl_zone_m)
                    out.push_back({v.id, v.movement, v.position_m, v.speed_mps});
        return out;
    }

    // Grants right-of-way to the listed vehicles.
    void permit(const std::unordered_set<std::uint64_t>& ids) {
        for (auto& lane : lanes_)
            for (auto& v : lane.vehicles)
                if (ids.contains(v.id)) v.may_cross = true;
    }

    // Grants in queue order: a lane stops at its first waiting vehicle that
    // fails `pred`, so nobody is permitted behind a vehicle held at the line.
    template <typename Pred>
    void permit_if(Pred&& pred) {
        for (auto& lane : lanes_)
            for (auto& v : lane.vehicles) {
                if (v.may_cross || v.crossed()) continue;
                if (!pred(v)) break;
                v.may_cross = true;
            }
    }

    // Permitted vehicles still short of the stop line.
    [[nodiscard]] std::size_t permitted_waiting() const {
        std::size_t n = 0;
        for (const auto& lane : lanes_)
            for (const auto& v : lane.vehicles) n += v.may_cross && !v.crossed() ? 1 : 0;
        return n;
    }

    [[nodiscard]] std::size_t permitted_in_network() const {
        std::size_t n = 0;
        for (const auto& lane : lanes_)
            for (const auto& v : lane.vehicles) n += v.may_cross ? 1 : 0;
        return n;
    }

    // True when vehicles of mutually conflicting movements are past the
    // stop line at the same time.
    [[nodiscard]] bool box_conflict() const {
        std::array<bool, kNumMovements> inside{};
        for (std::size_t l = 0; l < kNumLanes; ++l)
            for (const auto& v : lanes_[l].vehicles)
                if (v.crossed()) inside[l] = true;
        for (std::size_t a = 0; a < kNumMovements; ++a)
            for (std::size_t b = a + 1; b < kNumMovements; ++b)
                if (inside[a] && inside[b] && movements_conflict(Movement::from_index(a), Movement::from_index(b)))
                    return true;
        return false;
    }

    [[nodiscard]] std::uint64_t in_network() const {
        std::uint64_t n = 0;
        for (const auto& lane : lanes_) n += lane.vehicles.size();
        return n;
    }
    [[nodiscard]] std::uint64_t backlog() const {
        std::uint64_t n = 0;
        for (const auto& lane : lanes_) n += lane.schedule.size() - lane.next;
        return n;
    }
    [[nodiscard]] std::uint64_t spawned() const { return spawned_; }
    [[nodiscard]] std::uint64_t exited() const { return exited_; }
    [[nodiscard]] const std::vector<TripRecord>& trips() const { return trips_; }
    [[nodiscard]] const std::deque<VehicleState>& lane(std::size_t l) const { return lanes_.at(l).vehicles; }

    static constexpr double kTimeEps = 1e-9;

private:
    struct Lane {
        Movement movement{};
        std::deque<VehicleState> vehicles;  // front = closest to (or past) the stop line
        std::vector<double> schedule;
        std::size_t next = 0;
    };

    ScenarioConfig cfg_;
    std::array<Lane, kNumLanes> lanes_{};
    std::uint64_t next_id_ = 1;
    std::uint64_t spawned_ = 0;
    std::uint64_t exited_ = 0;
    std::vector<TripRecord> trips_;
};

// One optimization performed by the controller.
struct DecisionRecord {
    double time_s = 0.0;
    double applied_at_s = 0.0;
    std::size_t num_phases = 0;
    int granted_phase = 0;
    bool solved = false;  // false when a single occupied phase was granted directly
    double cost_s = 0.0;
    double raw_energy = 0.0;
    bool feasible_at_readout = true;
    bool repaired = false;
    std::uint64_t evaluations = 0;
    double gamma = 0.0;
    double latency_fixed_s = 0.0;
    double latency_processing_s = 0.0;
};

inline void to_json(nlohmann::json& j, const DecisionRecord& d) {
    j = nlohmann::json{{"time_s", d.time_s},
                       {"applied_at_s", d.applied_at_s},
                       {"num_phases", d.num_phases},
                       {"granted_phase", d.granted_phase},
                       {"solved", d.solved},
                       {"cost_s", d.cost_s},
                       {"raw_energy", d.raw_energy},
                       {"feasible_at_readout", d.feasible_at_readout},
                       {"repaired", d.repaired},
                       {"evaluations", d.evaluations},
                       {"gamma", d.gamma},
                       {"latency_fixed_s", d.latency_fixed_s},
                       {"latency_processing_s", d.latency_processing_s}};
}

inline void from_json(const nlohmann::json& j, DecisionRecord& d) {
    d.time_s = j.at("time_s").get<double>();
    d.applied_at_s = j.at("applied_at_s").get<double>();
    d.num_phases = j.at("num_phases").get<std::size_t>();
    d.granted_phase = j.at("granted_phase").get<int>();
    d.solved = j.at("solved").get<bool>();
    d.cost_s = j.at("cost_s").get<double>();
    d.raw_energy = j.at("raw_energy").get<double>();
    d.feasible_at_readout = j.at("feasible_at_readout").get<bool>();
    d.repaired = j.at("repaired").get<bool>();
    d.evaluations = j.at("evaluations").get<std::uint64_t>();
    d.gamma = j.at("gamma").get<double>();
    d.latency_fixed_s = j.at("latency_fixed_s").get<double>();
    d.latency_processing_s = j.at("latency_processing_s").get<double>();
}

struct SolverSelection {
    SolverKind kind = SolverKind::SimulatedAnnealing;
    SolverConfig config{};  // seed is re-derived per decision
};

class VtlController {
public:
    enum class Mode { Optimizing, Green, Yellow, AllRed };

    VtlController(const ScenarioConfig& cfg, SolverSelection solver) : cfg_(cfg), solver_(std::move(solver)) {}

    void tick(Intersection& world, double now) {
        // A few transitions may chain within one tick (zero all-red, zero latency).
        for (int guard = 0; guard < 4; ++guard) {
            switch (mode_) {
                case Mode::Optimizing:
                    if (!pending_) {
                        if (!request(world, now)) return;
                    }
                    if (now + Intersection::kTimeEps < pending_->apply_at) return;
                    grant(world);
                    return;
                case Mode::Green:
                    if (world.permitted_waiting() > 0) return;
                    mode_ = Mode::Yellow;
                    phase_end_ = now + cfg_.timing.yellow_s;
                    return;
                case Mode::Yellow:
                    if (now + Intersection::kTimeEps < phase_end_) return;
                    mode_ = Mode::AllRed;
                    phase_end_ = now + cfg_.timing.all_red_s;
                    continue;
                case Mode::AllRed:
                    if (now + Intersection::kTimeEps < phase_end_) return;
                    mode_ = Mode::Optimizing;
                    continue;
            }
        }
    }

    [[nodiscard]] Displays displays() const {
        switch (mode_) {
            case Mode::Green: return phase_display(phase_by_id(phase_), Signal::Green);
            case Mode::Yellow: return phase_display(phase_by_id(phase_), Signal::Yellow);
            default: return all_red();
        }
    }

    [[nodiscard]] Mode mode() const { return mode_; }
    [[nodiscard]] int current_phase() const { return phase_; }
    [[nodiscard]] const std::unordered_set<std::uint64_t>& granted() const { return granted_; }
    [[nodiscard]] const std::vector<DecisionRecord>& decisions() const { return decisions_; }
    [[nodiscard]] std::uint64_t solver_calls() const { return solver_calls_; }
    [[nodiscard]] double solver_wall_time_s() const { return solver_wall_s_; }

private:
    struct Pending {
        int phase = 0;
        std::unordered_set<std::uint64_t> vehicles;
        double apply_at = 0.0;
    };

    // Snapshot and decide; false when the zone is empty.
    bool request(const Intersection& world, double now) {
        const auto snap = world.snapshot();
        const DelayMatrix d = build_delay_matrix(snap, cfg_.timing);
        if (d.size() == 0) return false;

        DecisionRecord rec;
        rec.time_s = now;
        rec.num_phases = d.size();
        double latency = 0.0;
        if (d.size() == 1) {
            rec.granted_phase = d.occupied_phases().front();
        } else {
            SolverConfig sc = solver_.config;
            sc.seed = mix_seed(cfg_.seed ^ solver_.config.seed, decisions_.size());
            const SolverResult r = solve(solver_.kind, d, sc);
            ++solver_calls_;
            solver_wall_s_ += r.wall_time_s;
            rec.solved = true;
            rec.granted_phase = r.sequence.order.front();
            rec.cost_s = r.cost_s;
            rec.raw_energy = r.raw_energy;
            rec.feasible_at_readout = r.feasible_at_readout;
            rec.repaired = r.repaired;
            rec.evaluations = r.evaluations;
            rec.gamma = r.gamma;
            rec.latency_fixed_s = cfg_.latency.fixed_overhead_s;
            rec.latency_processing_s = cfg_.latency.processing_s;
            latency = cfg_.latency.total_s();
        }
        rec.applied_at_s = now + latency;

        Pending p;
        p.phase = rec.granted_phase;
        p.apply_at = rec.applied_at_s;
        const PhaseGroup& g = phase_by_id(p.phase);
        for (const auto& v : snap)
            if (g.contains(v.movement)) p.vehicles.insert(v.vehicle_id);
        pending_ = std::move(p);
        decisions_.push_back(rec);
        return true;
    }

    void grant(Intersection& world) {
        phase_ = pending_->phase;
        granted_ = std::move(pending_->vehicles);
        pending_.reset();
        world.permit(granted_);
        mode_ = Mode::Green;
    }

    ScenarioConfig cfg_;
    SolverSelection solver_;
    Mode mode_ = Mode::Optimizing;
    int phase_ = 1;
    double phase_end_ = 0.0;
    std::unordered_set<std::uint64_t> granted_;
    std::optional<Pending> pending_;
    std::vector<DecisionRecord> decisions_;
    std::uint64_t solver_calls_ = 0;
    double solver_wall_s_ = 0.0;
};

// Fixed-time round robin over the lefts-then-throughs pairs of each street.
// A vehicle of the active phase gets right-of-way when it can reach the stop
// line before the green expires; the next green waits for the previous
// grants to clear the box.
class FixedCycleController {
public:
    struct Settings {
        double green_s = 15.0;
        std::vector<int> ring{1, 2, 5, 6};
    };

    FixedCycleController(const ScenarioConfig& cfg, Settings s) : cfg_(cfg), s_(std::move(s)) {
        if (s_.ring.empty() || !(s_.green_s > 0.0)) throw std::invalid_argument("fixed cycle: bad settings");
    }
    explicit FixedCycleController(const ScenarioConfig& cfg) : FixedCycleController(cfg, Settings{}) {}

    void tick(Intersection& world, double now) {
        for (int guard = 0; guard < 4; ++guard) {
            switch (mode_) {
                case Mode::Start:
                    start_green(now);
                    continue;
                case Mode::Green: {
                    if (now + Intersection::kTimeEps >= phase_end_) {
                        mode_ = Mode::Yellow;
                        phase_end_ = now + cfg_.timing.yellow_s;
                        return;
                    }
                    const PhaseGroup& g = phase_by_id(current());
                    const double remaining = phase_end_ - now;
                    const auto& k = cfg_.kinematics;
                    const double vmax = cfg_.speed_limit_mps;
                    world.permit_if([&](const VehicleState& v) {
                        return g.contains(v.movement) && !v.crossed() &&
                               time_to_line(v.position_m, v.speed_mps, k.accel_mps2, vmax) <= remaining;
                    });
                    return;
                }
                case Mode::Yellow:
                    if (now + Intersection::kTimeEps < phase_end_) return;
                    mode_ = Mode::AllRed;
                    phase_end_ = now + cfg_.timing.all_red_s;
                    continue;
                case Mode::AllRed:
                    if (now + Intersection::kTimeEps < phase_end_ || world.permitted_in_network() > 0) return;
                    index_ = (index_ + 1) % s_.ring.size();
                    start_green(now);
                    continue;
            }
        }
    }

    [[nodiscard]] Displays displays() const {
        switch (mode_) {
            case Mode::Green: return phase_display(phase_by_id(current()), Signal::Green);
            case Mode::Yellow: return phase_display(phase_by_id(current()), Signal::Yellow);
            default: return all_red();
        }
    }

    [[nodiscard]] const std::vector<DecisionRecord>& decisions() const { return none_; }
    [[nodiscard]] std::uint64_t solver_calls() const { return 0; }
    [[nodiscard]] double solver_wall_time_s() const { return 0.0; }

    // Unobstructed time to cover `distance` from `speed`, accelerating to vmax.
    [[nodiscard]] static double time_to_line(double distance, double speed, double accel, double vmax) {
        if (distance <= 0.0) return 0.0;
        const double t_acc = std::max(0.0, (vmax - speed) / accel);
        const double d_acc = (speed + vmax) / 2.0 * t_acc;
        if (distance <= d_acc) return (-speed + std::sqrt(speed * speed + 2.0 * accel * distance)) / accel;
        return t_acc + (distance - d_acc) / vmax;
    }

private:
    enum class Mode { Start, Green, Yellow, AllRed };

    [[nodiscard]] int current() const { return s_.ring[index_]; }
    void start_green(double now) {
        mode_ = Mode::Green;
        phase_end_ = now + s_.green_s;
    }

    ScenarioConfig cfg_;
    Settings s_;
    Mode mode_ = Mode::Start;
    std::size_t index_ = 0;
    double phase_end_ = 0.0;
    std::vector<DecisionRecord> none_;
};

struct RunResult {
    std::vector<TripRecord> trips;  // every completed trip, warm-up included
    RunMetrics metrics;             // trips spawned at or after warm-up
    std::vector<DecisionRecord> decisions;
    SafetyCounters safety;
    std::uint64_t solver_calls = 0;
    double solver_wall_time_s = 0.0;  // informational; not deterministic
};

[[nodiscard]] inline std::string scenario_fingerprint(const ScenarioConfig& cfg, const std::string& controller) {
    nlohmann::json j = cfg;
    j["controller"] = controller;
    return sha256_hex(j.dump()).substr(0, 16);
}

template <typename Controller>
[[nodiscard]] RunResult simulate(Intersection& world, Controller& controller, const std::string& label) {
    const ScenarioConfig& cfg = world.config();
    RunResult out;
    const auto ticks = static_cast<std::uint64_t>(std::llround(cfg.sim_duration_s / cfg.time_step_s));
    for (std::uint64_t tick = 0; tick < ticks; ++tick) {
        const double now = static_cast<double>(tick) * cfg.time_step_s;
        world.insert_arrivals(now);
        controller.tick(world, now);

        const Displays shown = controller.displays();
        bool conflict = false;
        for (std::size_t a = 0; a < kNumMovements && !conflict; ++a)
            for (std::size_t b = a + 1; b < kNumMovements; ++b)
                if (shown[a] != Signal::Red && shown[b] != Signal::Red &&
                    movements_conflict(Movement::from_index(a), Movement::from_index(b))) {
                    conflict = true;
                    break;
                }
        out.safety.conflicting_display_ticks += conflict ? 1 : 0;

        world.step(now);
        out.safety.conflicting_box_ticks += world.box_conflict() ? 1 : 0;
        if (world.spawned() != world.exited() + world.in_network()) ++out.safety.conservation_violations;
        ++out.safety.ticks;
    }
    out.safety.spawned = world.spawned();
    out.safety.exited = world.exited();
    out.safety.in_network_end = world.in_network();
    out.safety.backlog_end = world.backlog();
    out.trips = world.trips();
    out.decisions = controller.decisions();
    out.solver_calls = controller.solver_calls();
    out.solver_wall_time_s = controller.solver_wall_time_s();

    std::vector<TripRecord> measured;
    for (const auto& t : out.trips)
        if (t.spawn_s + Intersection::kTimeEps >= cfg.warmup_s) measured.push_back(t);
    out.metrics = summarize(std::span<const TripRecord>(measured), label, scenario_fingerprint(cfg, label));
    return out;
}

template <typename Controller>
[[nodiscard]] RunResult simulate(const ScenarioConfig& cfg, Controller& controller, const std::string& label) {
    Intersection world(cfg);
    return simulate(world, controller, label);
}

[[nodiscard]] inline RunResult run_scenario(const ScenarioConfig& cfg, const SolverSelection& solver) {
    VtlController controller(cfg, solver);
    return simulate(cfg, controller, std::string(solver_name(solver.kind)));
}

[[nodiscard]] inline RunResult run_fixed_cycle(const ScenarioConfig& cfg,
                                               FixedCycleController::Settings settings = {}) {
    FixedCycleController controller(cfg, std::move(settings));
    return simulate(cfg, controller, "fixed_cycle");
}

// vehicle_id,movement,spawn_s,exit_s,travel_time_s,stopped_delay_s
[[nodiscard]] inline std::string trips_csv(const std::vector<TripRecord>& trips) {
    std::string out = "vehicle_id,movement,spawn_s,exit_s,travel_time_s,stopped_delay_s\n";
    char buf[160];
    for (const auto& t : trips) {
        std::snprintf(buf, sizeof buf, "%llu,%s,%.3f,%.3f,%.3f,%.3f\n", static_cast<unsigned long long>(t.vehicle_id),
                      t.movement.name().c_str(), t.spawn_s, t.exit_s, t.travel_time_s, t.stopped_delay_s);
        out += buf;
    }
    return out;
}

}  // namespace vtl
