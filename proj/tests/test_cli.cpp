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

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "vtl/qubo.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the tool with the given argument string; stderr is discarded.
Run cli(const std::string& args) {
    const std::string cmd = std::string(VTL_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (pipe == nullptr) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("vtl_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        write("m.csv", "phase,1,2,5\n1,0,10,20\n2,5,0,30\n5,40,1,0\n");
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write(const std::string& name, const std::string& text) {
        std::ofstream(dir_ / name) << text;
        return (dir_ / name).string();
    }
    [[nodiscard]] std::string at(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, PhasesCatalogue) {
    const auto r = cli("phases");
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.size(), 8u);
}

TEST_F(CliTest, SolveEveryMethodOnCsv) {
    // Best order 5 -> 2 -> 1 with cost 1 + 5.
    for (const char* s : {"exact", "sa", "hc", "gd", "adam", "bnb"}) {
        const auto r = cli("solve " + at("m.csv") + " --solver " + s + " --seed 3");
        ASSERT_EQ(r.code, 0) << s;
        const auto j = nlohmann::json::parse(r.out);
        EXPECT_EQ(j.at("solver"), s);
        EXPECT_EQ(j.at("sequence").size(), 3u);
        EXPECT_GE(j.at("cost_s").get<double>(), 6.0 - 1e-9);
        if (std::string(s) == "exact" || std::string(s) == "bnb" || std::string(s) == "sa") {
            EXPECT_EQ(j.at("sequence"), nlohmann::json::parse("[5, 2, 1]")) << s;
            EXPECT_NEAR(j.at("cost_s").get<double>(), 6.0, 1e-9) << s;
        }
    }
}

TEST_F(CliTest, QuboTextRoundTripsThroughSolve) {
    const auto q = cli("qubo " + at("m.csv") + " --gamma 100 -o " + at("m.qubo"));
    ASSERT_EQ(q.code, 0);
    std::ifstream in(at("m.qubo"));
    const auto m = vtl::qubo_from_text(in);
    EXPECT_EQ(m.num_vars(), 9u);
    EXPECT_EQ(m.gamma(), 100.0);
    EXPECT_EQ(m.offset(), 600.0);
    const auto r = cli("solve " + at("m.qubo") + " --solver exact");
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("space"), "qubo");
    // Phase labels are 1..p for a bare QUBO; index order 2,1,0.
    EXPECT_EQ(j.at("sequence"), nlohmann::json::parse("[3, 2, 1]"));
    EXPECT_NEAR(j.at("cost_s").get<double>(), 6.0, 1e-9);
}

TEST_F(CliTest, IsingOutput) {
    const auto r = cli("qubo " + at("m.csv") + " --ising");
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("h").size(), 9u);
    EXPECT_FALSE(j.at("J").empty());
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(cli("solve " + at("m.csv") + " --solver qa").code, 2);
    EXPECT_EQ(cli("solve " + write("bad.csv", "phase,1,2\n1,0\n")).code, 2);
    EXPECT_EQ(cli("solve " + at("missing.csv")).code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
    EXPECT_EQ(cli("run --volumes -1 --out " + at("r")).code, 2);
    EXPECT_EQ(cli("run --latency slow --out " + at("r")).code, 2);
    EXPECT_EQ(cli("simulate --latency custom:1 --solver exact").code, 2);
    EXPECT_EQ(cli("run --duration 90 --out " + at("r")).code, 2);  // shorter than the warm-up
    EXPECT_EQ(cli("report " + at("nothing")).code, 1);
}

TEST_F(CliTest, RunThenReport) {
    const std::string run = "run --volumes 0.35 --zones 75 --solvers sa,hc --seeds 1-2 --duration 400 --latency none "
                            "--workers 1 --out " + at("res");
    ASSERT_EQ(cli(run).code, 0);
    const std::string manifest = at("res") + "/manifest.json";
    std::ifstream a(manifest);
    const std::string first((std::istreambuf_iterator<char>(a)), {});
    ASSERT_EQ(cli(run).code, 0);
    std::ifstream b(manifest);
    EXPECT_EQ(first, std::string((std::istreambuf_iterator<char>(b)), {}));
    EXPECT_EQ(nlohmann::json::parse(first).at("files").size(), 16u);
    ASSERT_EQ(cli(run + " --force").code, 0);

    const auto rep = cli("report " + at("res"));
    ASSERT_EQ(rep.code, 0);
    EXPECT_NE(rep.out.find("Mean stopped delay"), std::string::npos);
    EXPECT_TRUE(fs::exists(at("res") + "/report/pvalues.csv"));
}

TEST_F(CliTest, SimulateWritesMetrics) {
    const auto cfg = write("s.json", R"({"sim_duration_s": 120, "warmup_s": 0, "volume_fraction": 0.7})");
    const auto r = cli("simulate --config " + cfg + " --solver fixed --trips " + at("t.csv"));
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_FALSE(j.at("empty").get<bool>());
    std::ifstream t(at("t.csv"));
    std::string header;
    std::getline(t, header);
    EXPECT_EQ(header, "vehicle_id,movement,spawn_s,exit_s,travel_time_s,stopped_delay_s");
}
