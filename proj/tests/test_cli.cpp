// Drives the drbatch executable end to end.

#include <json.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("drbatch_cli_" + std::string(info->name()) + "_" +
                                            std::to_string(std::random_device{}()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    /// Run the CLI with `args`; returns the exit status.
    int run(const std::string& args) {
        const std::string cmd = std::string("\"") + DRBATCH_EXE + "\" " + args + " > \"" + path("stdout").string() +
                                "\" 2> \"" + path("stderr").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path path(const std::string& name) const { return dir_ / name; }
    std::string q(const std::string& name) const { return "\"" + path(name).string() + "\""; }

    std::string read(const std::string& name) const {
        std::ifstream in(path(name), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

    fs::path dir_;
};

const char* bar3 = "nodes 3\n0 0 0\n0.5 0 0\n1 0 0\nelements 2\n0 1 0\n1 2 0\nmaterials 1\n1 1 1\nboundary 2\n0\n2\n";

} // namespace

TEST_F(Cli, GenIsDeterministic) {
    ASSERT_EQ(run("gen --lattice 3,3,3 --jitter 0.2 --seed 4 -o " + q("a.net")), 0);
    ASSERT_EQ(run("gen --lattice 3,3,3 --jitter 0.2 --seed 4 -o " + q("b.net")), 0);
    EXPECT_EQ(read("a.net"), read("b.net"));
    const auto text = read("a.net");
    EXPECT_NE(text.find("nodes 27"), std::string::npos);
    EXPECT_NE(text.find("elements 54"), std::string::npos);
}

TEST_F(Cli, GenRejectsDegenerateLattice) {
    EXPECT_EQ(run("gen --lattice 1,2,2"), 1);
    EXPECT_FALSE(read("stderr").empty());
}

TEST_F(Cli, SolveIdentity) {
    ASSERT_EQ(run("gen --lattice 3,3,3 --jitter 0.2 -o " + q("a.net")), 0);
    ASSERT_EQ(run("solve --network " + q("a.net") + " -o " + q("r.json")), 0);
    const auto j = nlohmann::json::parse(read("r.json"));
    EXPECT_TRUE(j["converged"].get<bool>());
    for (double x : j["u"].get<std::vector<double>>())
        EXPECT_EQ(x, 0.0);
}

TEST_F(Cli, SolveBarEveryStrategy) {
    write("bar.net", bar3);
    for (const std::string s : {"serial", "naive --workers 2", "team --teams 2 --team-size 2"}) {
        ASSERT_EQ(run("solve --network " + q("bar.net") + " --deform 1.1 0 0 0 1 0 0 0 1 --strategy " + s), 0) << s;
        const auto j = nlohmann::json::parse(read("stdout"));
        EXPECT_NEAR(j["u"][3].get<double>(), 0.05, 1e-6) << s;
        EXPECT_NEAR(j["avg_stress"][0].get<double>(), 0.11, 1e-6) << s;
        EXPECT_TRUE(j["energy_residual"].is_null());
    }
}

TEST_F(Cli, SolveEnergyLedger) {
    write("bar.net", bar3);
    ASSERT_EQ(run("solve --network " + q("bar.net") + " --deform 1.1 0 0 0 1 0 0 0 1 --ramp 20 --energy-interval 1"),
              0);
    const auto j = nlohmann::json::parse(read("stdout"));
    EXPECT_LE(j["energy_residual"].get<double>(), 1e-3);
}

TEST_F(Cli, SolveErrors) {
    EXPECT_EQ(run("solve --network " + q("missing.net")), 1);
    EXPECT_FALSE(read("stderr").empty());
    write("bad.net", "nodes 2\n0 0 0\n");
    EXPECT_EQ(run("solve --network " + q("bad.net")), 1);
    EXPECT_NE(read("stderr").find("line"), std::string::npos);
    write("bar.net", bar3);
    EXPECT_EQ(run("solve --network " + q("bar.net") + " --strategy bogus"), 1);
    EXPECT_EQ(run("solve --network " + q("bar.net") + " --deform -1 0 0 0 1 0 0 0 1"), 1);
    EXPECT_EQ(run("solve --network " + q("bar.net") + " --bogus"), 1);
    EXPECT_EQ(run("solve --network " + q("bar.net") + " --strategy team --teams 8 --team-size 1024"), 1);
}

TEST_F(Cli, SolveNonConvergenceExitCode) {
    ASSERT_EQ(run("gen --lattice 4,4,4 --jitter 0.2 -o " + q("a.net")), 0);
    EXPECT_EQ(run("solve --network " + q("a.net") + " --deform 1.1 0 0 0 1 0 0 0 1 --max-iters 2"), 2);
    EXPECT_FALSE(nlohmann::json::parse(read("stdout"))["converged"].get<bool>());
}

TEST_F(Cli, BenchSingleCell) {
    ASSERT_EQ(run("bench --sizes 3x3x3 --counts 1 --reps 1 --strategies team -o " + q("b.csv")), 0);
    const auto raw = read("b.csv");
    EXPECT_EQ(raw.rfind("strategy,n_dofs,n_problems,rep,wall_seconds\n", 0), 0u);
    EXPECT_EQ(std::count(raw.begin(), raw.end(), '\n'), 2);
    const auto sum = read("b_summary.csv");
    EXPECT_NE(sum.find("team,81,1,"), std::string::npos);
    EXPECT_NE(sum.find(",1,"), std::string::npos);
}

TEST_F(Cli, BenchDefaultRepsAndReferenceTeamSize) {
    ASSERT_EQ(run("bench --sizes 2x2x2 --counts 1,2 --strategies naive,team --teams 1 --team-size 512 -o " +
                  q("b.csv") + " --summary " + q("s.csv")),
              0)
        << read("stderr");
    const auto raw = read("b.csv");
    EXPECT_EQ(std::count(raw.begin(), raw.end(), '\n'), 1 + 2 * 2 * 3);
    EXPECT_EQ(run("plot --input " + q("s.csv") + " -o " + q("a.svg")), 0);
    EXPECT_EQ(run("plot --input " + q("s.csv") + " -o " + q("b.svg")), 0);
    EXPECT_EQ(read("a.svg"), read("b.svg"));
    EXPECT_NE(read("a.svg").find("class=\"series\""), std::string::npos);
    EXPECT_EQ(run("plot --input " + q("s.csv") + " --metric naive -o " + q("c.svg")), 0);
}

TEST_F(Cli, PlotEmptySummary) {
    write("s.csv", "strategy,n_dofs,n_problems,mean_seconds,self_speedup,speedup_over_naive\n");
    ASSERT_EQ(run("plot --input " + q("s.csv")), 0);
    const auto svg = read("stdout");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_EQ(svg.find("class=\"series\""), std::string::npos);
}

TEST_F(Cli, HelpAndUsage) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("plot"), 1);
}
