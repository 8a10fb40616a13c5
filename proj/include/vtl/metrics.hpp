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

// Trip aggregation and one-tailed Welch t-tests between solver conditions.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "vtl/phase_model.hpp"

namespace vtl {

struct TripRecord {
    std::uint64_t vehicle_id = 0;
    Movement movement{};
    double spawn_s = 0.0;
    double exit_s = 0.0;
    double travel_time_s = 0.0;
    double stopped_delay_s = 0.0;
    bool operator==(const TripRecord&) const = default;
};

struct TripOutcome {
    double delay_s = 0.0;
    double travel_time_s = 0.0;
    bool operator==(const TripOutcome&) const = default;
};

struct RunMetrics {
    std::vector<TripOutcome> per_vehicle;
    bool empty = true;
    double mean_delay_s = 0.0;
    double total_delay_s = 0.0;
    double max_delay_s = 0.0;
    double se_delay_s = 0.0;
    double mean_travel_s = 0.0;
    double total_travel_s = 0.0;
    double max_travel_s = 0.0;
    double se_travel_s = 0.0;
    std::string solver_name;
    std::string cfg_fingerprint;

    [[nodiscard]] std::vector<double> delays() const {
        std::vector<double> v;
        v.reserve(per_vehicle.size());
        for (const auto& t : per_vehicle) v.push_back(t.delay_s);
        return v;
    }
    [[nodiscard]] std::vector<double> travel_times() const {
        std::vector<double> v;
        v.reserve(per_vehicle.size());
        for (const auto& t : per_vehicle) v.push_back(t.travel_time_s);
        return v;
    }

    bool operator==(const RunMetrics&) const = default;
};

namespace detail {

// Sums in sorted order so the result does not depend on input order.
inline double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0);
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;  // unbiased
};

inline Moments moments(std::span<const double> xs) {
    Moments m;
    const auto n = static_cast<double>(xs.size());
    if (xs.empty()) return m;
    m.mean = sorted_sum({xs.begin(), xs.end()}) / n;
    if (xs.size() > 1) {
        std::vector<double> sq;
        sq.reserve(xs.size());
        for (double x : xs) sq.push_back((x - m.mean) * (x - m.mean));
        m.variance = sorted_sum(std::move(sq)) / (n - 1.0);
    }
    return m;
}

}  // namespace detail

[[nodiscard]] inline RunMetrics summarize(std::span<const TripOutcome> trips, std::string solver_name = {},
                                          std::string cfg_fingerprint = {}) {
    RunMetrics r;
    r.per_vehicle.assign(trips.begin(), trips.end());
    // Canonical order keeps the stored record permutation-invariant too.
    std::sort(r.per_vehicle.begin(), r.per_vehicle.end(), [](const TripOutcome& a, const TripOutcome& b) {
        return std::tie(a.delay_s, a.travel_time_s) < std::tie(b.delay_s, b.travel_time_s);
    });
    r.solver_name = std::move(solver_name);
    r.cfg_fingerprint = std::move(cfg_fingerprint);
    r.empty = trips.empty();
    if (r.empty) return r;

    const auto n = static_cast<double>(trips.size());
    const auto d = r.delays();
    const auto t = r.travel_times();
    r.total_delay_s = detail::sorted_sum(d);
    r.total_travel_s = detail::sorted_sum(t);
    r.mean_delay_s = r.total_delay_s / n;
    r.mean_travel_s = r.total_travel_s / n;
    r.max_delay_s = *std::max_element(d.begin(), d.end());
    r.max_travel_s = *std::max_element(t.begin(), t.end());
    r.se_delay_s = std::sqrt(detail::moments(d).variance / n);
    r.se_travel_s = std::sqrt(detail::moments(t).variance / n);
    return r;
}

[[nodiscard]] inline RunMetrics summarize(std::span<const TripRecord> trips, std::string solver_name = {},
                                          std::string cfg_fingerprint = {}) {
    std::vector<TripOutcome> outcomes;
    outcomes.reserve(trips.size());
    for (const auto& t : trips) outcomes.push_back({t.stopped_delay_s, t.travel_time_s});
    return summarize(std::span<const TripOutcome>(outcomes), std::move(solver_name), std::move(cfg_fingerprint));
}

inline void to_json(nlohmann::json& j, const RunMetrics& m) {
    nlohmann::json delays = nlohmann::json::array(), travel = nlohmann::json::array();
    for (const auto& t : m.per_vehicle) {
        delays.push_back(t.delay_s);
        travel.push_back(t.travel_time_s);
    }
    j = nlohmann::json{{"solver", m.solver_name},
                       {"cfg_fingerprint", m.cfg_fingerprint},
                       {"empty", m.empty},
                       {"count", m.per_vehicle.size()},
                       {"mean_delay_s", m.mean_delay_s},
                       {"total_delay_s", m.total_delay_s},
                       {"max_delay_s", m.max_delay_s},
                       {"se_delay_s", m.se_delay_s},
                       {"mean_travel_s", m.mean_travel_s},
                       {"total_travel_s", m.total_travel_s},
                       {"max_travel_s", m.max_travel_s},
                       {"se_travel_s", m.se_travel_s},
                       {"per_vehicle_delay_s", std::move(delays)},
                       {"per_vehicle_travel_s", std::move(travel)}};
}

// Aggregates are recomputed from the per-vehicle arrays on load.
inline void from_json(const nlohmann::json& j, RunMetrics& m) {
    const auto d = j.at("per_vehicle_delay_s").get<std::vector<double>>();
    const auto t = j.at("per_vehicle_travel_s").get<std::vector<double>>();
    if (d.size() != t.size()) throw std::invalid_argument("RunMetrics JSON: per-vehicle arrays differ in length");
    std::vector<TripOutcome> trips(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) trips[i] = {d[i], t[i]};
    m = summarize(std::span<const TripOutcome>(trips), j.value("solver", std::string{}),
                  j.value("cfg_fingerprint", std::string{}));
}

// ---- Welch t-test ------------------------------------------------------------

struct TTestReport {
    double t_statistic = 0.0;
    double welch_dof = 0.0;
    double p_value = 0.5;  // one-tailed, alternative: mean_a < mean_b
    std::size_t n_a = 0, n_b = 0;
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 0.0, var_b = 0.0;
};

[[nodiscard]] inline TTestReport welch_one_tailed(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_one_tailed: each sample needs n >= 2");
    const auto ma = detail::moments(a), mb = detail::moments(b);
    TTestReport r;
    r.n_a = a.size();
    r.n_b = b.size();
    r.mean_a = ma.mean;
    r.mean_b = mb.mean;
    r.var_a = ma.variance;
    r.var_b = mb.variance;
    const double qa = ma.variance / static_cast<double>(a.size());
    const double qb = mb.variance / static_cast<double>(b.size());
    const double se2 = qa + qb;
    if (se2 == 0.0) {
        if (ma.mean == mb.mean) throw std::invalid_argument("welch_one_tailed: degenerate samples (no variance, equal means)");
        r.t_statistic = ma.mean < mb.mean ? -std::numeric_limits<double>::infinity()
                                          : std::numeric_limits<double>::infinity();
        r.welch_dof = static_cast<double>(a.size() + b.size() - 2);
        r.p_value = ma.mean < mb.mean ? 0.0 : 1.0;
        return r;
    }
    r.t_statistic = (ma.mean - mb.mean) / std::sqrt(se2);
    r.welch_dof = se2 * se2 /
                  (qa * qa / static_cast<double>(a.size() - 1) + qb * qb / static_cast<double>(b.size() - 1));
    const boost::math::students_t dist(r.welch_dof);
    r.p_value = boost::math::cdf(dist, r.t_statistic);
    return r;
}

// ---- experiment tables -------------------------------------------------------

enum class SampleUnit { PerVehicle, PerSeedMean };

[[nodiscard]] inline const char* to_string(SampleUnit u) {
    return u == SampleUnit::PerVehicle ? "per_vehicle_pooled" : "per_seed_mean";
}

struct ConditionRun {
    double volume = 0.0;
    double zone_m = 0.0;
    std::string solver;
    std::uint64_t seed = 0;
    RunMetrics metrics;
};

struct ComparisonCell {
    std::string metric;  // "delay" or "travel_time"
    double volume = 0.0;
    double zone_m = 0.0;
    std::string reference;
    std::string baseline;
    TTestReport test;
};

struct ComparisonReport {
    SampleUnit unit = SampleUnit::PerVehicle;
    std::vector<ComparisonCell> cells;
};

// Tests H_a: mean(reference) < mean(baseline) for every (volume, zone) and
// every other solver present in the input, for delay and travel time.
[[nodiscard]] inline ComparisonReport experiment_table(std::vector<ConditionRun> runs,
                                                       const std::string& reference = "sa",
                                                       SampleUnit unit = SampleUnit::PerVehicle) {
    std::sort(runs.begin(), runs.end(), [](const ConditionRun& x, const ConditionRun& y) {
        return std::tie(x.volume, x.zone_m, x.solver, x.seed) < std::tie(y.volume, y.zone_m, y.solver, y.seed);
    });
    std::set<double> volumes, zones;
    std::set<std::string> solvers;
    using Key = std::tuple<double, double, std::string>;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> pooled;
    for (const auto& r : runs) {
        volumes.insert(r.volume);
        zones.insert(r.zone_m);
        solvers.insert(r.solver);
        auto& [d, t] = pooled[{r.volume, r.zone_m, r.solver}];
        if (unit == SampleUnit::PerVehicle) {
            for (const auto& v : r.metrics.per_vehicle) {
                d.push_back(v.delay_s);
                t.push_back(v.travel_time_s);
            }
        } else if (!r.metrics.empty) {
            d.push_back(r.metrics.mean_delay_s);
            t.push_back(r.metrics.mean_travel_s);
        }
    }
    if (!solvers.contains(reference)) throw std::invalid_argument("experiment_table: no runs for reference solver '" + reference + "'");

    std::string missing;
    for (double v : volumes)
        for (double z : zones)
            for (const auto& s : solvers)
                if (!pooled.contains({v, z, s})) {
                    char buf[128];
                    std::snprintf(buf, sizeof buf, "(volume=%g, zone=%g, solver=%s) ", v, z, s.c_str());
                    missing += buf;
                }
    if (!missing.empty()) throw std::invalid_argument("experiment_table: missing cells " + missing);

    ComparisonReport report;
    report.unit = unit;
    for (const char* metric : {"delay", "travel_time"}) {
        const bool is_delay = std::string(metric) == "delay";
        for (double v : volumes)
            for (double z : zones) {
                const auto& ref = pooled.at({v, z, reference});
                for (const auto& s : solvers) {
                    if (s == reference) continue;
                    const auto& base = pooled.at({v, z, s});
                    ComparisonCell cell{metric, v, z, reference, s, {}};
                    const auto& a = is_delay ? ref.first : ref.second;
                    const auto& b = is_delay ? base.first : base.second;
                    try {
                        cell.test = welch_one_tailed(a, b);
                    } catch (const std::invalid_argument&) {
                        // too few samples or no spread: the test is undefined
                        const double nan = std::numeric_limits<double>::quiet_NaN();
                        cell.test = {nan, nan, nan, a.size(), b.size(), nan, nan, nan, nan};
                    }
                    report.cells.push_back(std::move(cell));
                }
            }
    }
    return report;
}

namespace detail {
inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}
}  // namespace detail

[[nodiscard]] inline std::string to_csv(const ComparisonReport& r) {
    std::string out = "metric,volume,zone_m,reference,baseline,t,dof,p,n_reference,n_baseline,unit\n";
    for (const auto& c : r.cells) {
        out += c.metric + "," + detail::fmt("%.17g", c.volume) + "," + detail::fmt("%.17g", c.zone_m) + "," +
               c.reference + "," + c.baseline + "," + detail::fmt("%.17g", c.test.t_statistic) + "," +
               detail::fmt("%.17g", c.test.welch_dof) + "," + detail::fmt("%.17g", c.test.p_value) + "," +
               std::to_string(c.test.n_a) + "," + std::to_string(c.test.n_b) + "," + to_string(r.unit) + "\n";
    }
    return out;
}

// One block per metric: rows are (baseline, zone), columns are volumes.
[[nodiscard]] inline std::string to_text(const ComparisonReport& r) {
    std::string out;
    for (const char* metric : {"delay", "travel_time"}) {
        std::set<double> volumes;
        std::map<std::pair<std::string, double>, std::map<double, double>> rows;
        std::string reference;
        for (const auto& c : r.cells) {
            if (c.metric != metric) continue;
            volumes.insert(c.volume);
            rows[{c.baseline, c.zone_m}][c.volume] = c.test.p_value;
            reference = c.reference;
        }
        if (rows.empty()) continue;
        out += std::string("One-tailed Welch p-values for ") + metric + " (H_a: mean_" + reference +
               " < mean_baseline, unit " + to_string(r.unit) + ")\n";
        out += "baseline  zone_m";
        for (double v : volumes) out += detail::fmt("  %10.2f", v);
        out += "\n";
        for (const auto& [key, cols] : rows) {
            char head[64];
            std::snprintf(head, sizeof head, "%-8s  %6g", key.first.c_str(), key.second);
            out += head;
            for (double v : volumes) out += cols.contains(v) ? detail::fmt("  %10.3g", cols.at(v)) : "           -";
            out += "\n";
        }
        out += "\n";
    }
    return out;
}

}  // namespace vtl
