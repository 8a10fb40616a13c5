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

#include <random>

#include <gtest/gtest.h>

#include "fixtures/welch_reference.hpp"
#include "vtl/metrics.hpp"

using namespace vtl;

namespace {

RunMetrics of(std::vector<TripOutcome> trips) { return summarize(std::span<const TripOutcome>(trips)); }

std::vector<TripOutcome> random_trips(std::mt19937_64& rng, std::size_t n, double delay_mean = 30.0) {
    std::exponential_distribution<double> e(1.0 / delay_mean);
    std::uniform_real_distribution<double> u(20.0, 40.0);
    std::vector<TripOutcome> t(n);
    for (auto& x : t) {
        x.delay_s = e(rng);
        x.travel_time_s = x.delay_s + u(rng);
    }
    return t;
}

}  // namespace

TEST(Summarize, OneTrip) {
    const auto m = of({{10.0, 50.0}});
    EXPECT_DOUBLE_EQ(m.mean_delay_s, 10.0);
    EXPECT_DOUBLE_EQ(m.max_travel_s, 50.0);
    EXPECT_FALSE(m.empty);
}

TEST(Summarize, ThreeDelays) {
    const auto m = of({{0, 1}, {0, 1}, {30, 1}});
    EXPECT_DOUBLE_EQ(m.mean_delay_s, 10.0);
    EXPECT_DOUBLE_EQ(m.total_delay_s, 30.0);
    EXPECT_DOUBLE_EQ(m.max_delay_s, 30.0);
}

TEST(Summarize, EmptyIsFlagged) {
    const auto m = of({});
    EXPECT_TRUE(m.empty);
    EXPECT_EQ(m.total_delay_s, 0.0);
}

TEST(Summarize, MatchesStreamingRecomputation) {
    std::mt19937_64 rng(1);
    const auto trips = random_trips(rng, 1000);
    const auto m = of(trips);
    // Welford pass.
    double n = 0, mean_d = 0, m2_d = 0, mean_t = 0, max_d = 0, max_t = 0, total_d = 0;
    for (const auto& t : trips) {
        n += 1;
        const double dd = t.delay_s - mean_d;
        mean_d += dd / n;
        m2_d += dd * (t.delay_s - mean_d);
        mean_t += (t.travel_time_s - mean_t) / n;
        max_d = std::max(max_d, t.delay_s);
        max_t = std::max(max_t, t.travel_time_s);
        total_d += t.delay_s;
    }
    EXPECT_NEAR(m.mean_delay_s, mean_d, 1e-9);
    EXPECT_NEAR(m.mean_travel_s, mean_t, 1e-9);
    EXPECT_NEAR(m.total_delay_s, total_d, 1e-7);
    EXPECT_EQ(m.max_delay_s, max_d);
    EXPECT_EQ(m.max_travel_s, max_t);
    EXPECT_NEAR(m.se_delay_s, std::sqrt(m2_d / (n - 1) / n), 1e-9);
}

TEST(Summarize, PermutationInvariant) {
    std::mt19937_64 rng(2);
    auto trips = random_trips(rng, 500);
    const auto a = of(trips);
    std::shuffle(trips.begin(), trips.end(), rng);
    EXPECT_EQ(of(trips), a);
}

TEST(Summarize, JsonRoundTripRecomputesAggregates) {
    std::mt19937_64 rng(3);
    const auto m = summarize(std::span<const TripOutcome>(random_trips(rng, 50)), "sa", "abc");
    const nlohmann::json j = m;
    EXPECT_EQ(j.get<RunMetrics>(), m);
    auto tampered = j;
    tampered["mean_delay_s"] = -1.0;
    EXPECT_EQ(tampered.get<RunMetrics>().mean_delay_s, m.mean_delay_s);
}

TEST(Welch, MatchesReferenceTable) {
    const auto& cases = fixtures::welch_cases();
    ASSERT_EQ(cases.size(), 25u);
    for (std::size_t k = 0; k < cases.size(); ++k) {
        const auto& c = cases[k];
        const auto r = welch_one_tailed(c.a, c.b);
        EXPECT_NEAR(r.t_statistic, c.t, 1e-9) << "case " << k;
        EXPECT_NEAR(r.welch_dof, c.dof, 1e-9) << "case " << k;
        EXPECT_NEAR(r.p_value, c.p, 1e-9) << "case " << k;
    }
}

TEST(Welch, IdenticalSamplesGiveHalf) {
    const std::vector<double> a{1.0, 4.0, 2.5, 8.0};
    const auto r = welch_one_tailed(a, a);
    EXPECT_EQ(r.t_statistic, 0.0);
    EXPECT_DOUBLE_EQ(r.p_value, 0.5);
}

TEST(Welch, DirectionOfAlternative) {
    const std::vector<double> a{1.0, 1.01, 0.99, 1.0}, b{5.0, 5.01, 4.99, 5.0};
    EXPECT_LT(welch_one_tailed(a, b).p_value, 0.05);
    EXPECT_GT(welch_one_tailed(b, a).p_value, 0.95);
}

TEST(Welch, AntisymmetryAndComplement) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> na(10, 3), nb(11, 5);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> a(5 + t % 7), b(4 + t % 11);
        for (auto& x : a) x = na(rng);
        for (auto& x : b) x = nb(rng);
        const auto ab = welch_one_tailed(a, b), ba = welch_one_tailed(b, a);
        EXPECT_NEAR(ab.t_statistic, -ba.t_statistic, 1e-12);
        EXPECT_NEAR(ab.p_value + ba.p_value, 1.0, 1e-12);
        EXPECT_NEAR(ab.welch_dof, ba.welch_dof, 1e-9);
    }
}

TEST(Welch, ScaleEquivariance) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> a(12), b(9);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng) + 0.3;
    const auto r = welch_one_tailed(a, b);
    for (double c : {0.001, 3.0, 1e4}) {
        auto as = a, bs = b;
        for (auto& x : as) x *= c;
        for (auto& x : bs) x *= c;
        const auto s = welch_one_tailed(as, bs);
        EXPECT_NEAR(s.t_statistic, r.t_statistic, 1e-9);
        EXPECT_NEAR(s.welch_dof, r.welch_dof, 1e-9);
        EXPECT_NEAR(s.p_value, r.p_value, 1e-12);
    }
}

TEST(Welch, Errors) {
    const std::vector<double> one{1.0}, two{1.0, 2.0}, flat{3.0, 3.0};
    EXPECT_THROW((void)welch_one_tailed(one, two), std::invalid_argument);
    EXPECT_THROW((void)welch_one_tailed(flat, flat), std::invalid_argument);
    EXPECT_NO_THROW((void)welch_one_tailed(flat, two));
}

namespace {

std::vector<ConditionRun> grid_runs(std::mt19937_64& rng, const std::vector<std::string>& solvers) {
    std::vector<ConditionRun> runs;
    for (double v : {0.35, 0.70, 1.05})
        for (double z : {50.0, 75.0, 100.0})
            for (const auto& s : solvers)
                for (std::uint64_t seed = 1; seed <= 3; ++seed)
                    runs.push_back({v, z, s, seed,
                                    summarize(std::span<const TripOutcome>(random_trips(rng, 20, s == "sa" ? 20 : 30)),
                                              s)});
    return runs;
}

}  // namespace

TEST(ExperimentTable, SingleConditionTwoSolvers) {
    std::mt19937_64 rng(6);
    std::vector<ConditionRun> runs{{0.35, 50, "sa", 1, of(random_trips(rng, 10))},
                                   {0.35, 50, "hc", 1, of(random_trips(rng, 10))}};
    const auto rep = experiment_table(runs);
    ASSERT_EQ(rep.cells.size(), 2u);  // one per metric
    EXPECT_EQ(rep.cells[0].metric, "delay");
    EXPECT_EQ(rep.cells[1].metric, "travel_time");
    EXPECT_EQ(rep.cells[0].baseline, "hc");
}

TEST(ExperimentTable, FullGridHasThirtySixCellsPerMetric) {
    std::mt19937_64 rng(7);
    const auto rep = experiment_table(grid_runs(rng, {"sa", "hc", "gd", "adam", "bnb"}));
    std::size_t delay = 0, travel = 0;
    for (const auto& c : rep.cells) (c.metric == "delay" ? delay : travel)++;
    EXPECT_EQ(delay, 36u);
    EXPECT_EQ(travel, 36u);
    const std::string csv = to_csv(rep);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "metric,volume,zone_m,reference,baseline,t,dof,p,n_reference,n_baseline,unit");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 73);
    EXPECT_NE(to_text(rep).find("per_vehicle_pooled"), std::string::npos);
}

TEST(ExperimentTable, OrderIndependent) {
    std::mt19937_64 rng(8);
    auto runs = grid_runs(rng, {"sa", "hc", "gd"});
    const auto a = to_csv(experiment_table(runs));
    std::shuffle(runs.begin(), runs.end(), rng);
    EXPECT_EQ(to_csv(experiment_table(runs)), a);
}

TEST(ExperimentTable, MissingCellNamed) {
    std::mt19937_64 rng(9);
    auto runs = grid_runs(rng, {"sa", "hc"});
    std::erase_if(runs, [](const ConditionRun& r) { return r.solver == "hc" && r.volume == 0.70 && r.zone_m == 75.0; });
    try {
        (void)experiment_table(runs);
        FAIL() << "expected missing-cell error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("volume=0.7, zone=75, solver=hc"), std::string::npos) << e.what();
    }
}

TEST(ExperimentTable, PerSeedUnit) {
    std::mt19937_64 rng(10);
    const auto rep = experiment_table(grid_runs(rng, {"sa", "hc"}), "sa", SampleUnit::PerSeedMean);
    EXPECT_EQ(rep.cells[0].test.n_a, 3u);
    EXPECT_NE(to_csv(rep).find("per_seed_mean"), std::string::npos);
}

TEST(ExperimentTable, TooFewSamplesGiveUndefinedCell) {
    std::mt19937_64 rng(11);
    std::vector<ConditionRun> runs{{0.35, 50, "sa", 1, of(random_trips(rng, 1))},
                                   {0.35, 50, "hc", 1, of(random_trips(rng, 10))}};
    const auto rep = experiment_table(runs);
    ASSERT_EQ(rep.cells.size(), 2u);
    EXPECT_TRUE(std::isnan(rep.cells[0].test.p_value));
    EXPECT_EQ(rep.cells[0].test.n_a, 1u);
    EXPECT_EQ(rep.cells[0].test.n_b, 10u);
    EXPECT_NE(to_csv(rep).find("nan"), std::string::npos);
}
