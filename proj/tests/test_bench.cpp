#include "drbatch/bench.hpp"
#include "drbatch/plot.hpp"
#include "drbatch/result_json.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace drb;

TEST(SelfSpeedup, Examples) {
    EXPECT_DOUBLE_EQ(self_speedup(1.0, 1.0, 1), 1.0);
    EXPECT_DOUBLE_EQ(self_speedup(1.0, 4.0, 4), 1.0);
    EXPECT_DOUBLE_EQ(self_speedup(1.0, 1.0, 4), 4.0);
    EXPECT_DOUBLE_EQ(self_speedup(2.0, 8.0, 16), 4.0);
    EXPECT_THROW(self_speedup(0.0, 1.0, 2), std::invalid_argument);
    EXPECT_THROW(self_speedup(1.0, -1.0, 2), std::invalid_argument);
    EXPECT_THROW(self_speedup(1.0, 1.0, 0), std::invalid_argument);
}

TEST(Summarize, Examples) {
    const std::vector<BenchRecord> recs{
        {"team", 81, 1, 0, 1.0}, {"team", 81, 1, 1, 3.0}, {"team", 81, 4, 0, 4.0},
        {"naive", 81, 4, 0, 8.0}, {"naive", 81, 1, 0, 1.0}};
    const auto rows = summarize(recs);
    ASSERT_EQ(rows.size(), 4u);
    // Sorted by (strategy, n_dofs, n_problems).
    EXPECT_EQ(rows[0], (SpeedupRow{"naive", 81, 1, 1.0, 1.0, 1.0}));
    EXPECT_EQ(rows[1], (SpeedupRow{"naive", 81, 4, 8.0, 0.5, 1.0}));
    EXPECT_EQ(rows[2], (SpeedupRow{"team", 81, 1, 2.0, 1.0, 0.5}));
    EXPECT_EQ(rows[3], (SpeedupRow{"team", 81, 4, 4.0, 2.0, 2.0}));
}

TEST(Summarize, MissingBaselinesAndNonConverged) {
    const std::vector<BenchRecord> recs{{"team", 81, 2, 0, 1.0}, {"team", 81, 1, 0, 0.0, false}};
    const auto rows = summarize(recs);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_FALSE(rows[0].self_speedup);
    EXPECT_FALSE(rows[0].speedup_over_naive);
    EXPECT_TRUE(summarize({}).empty());
}

TEST(Summarize, PermutationInvariant) {
    std::mt19937_64 rng(8);
    std::vector<BenchRecord> recs;
    for (const char* s : {"naive", "team", "serial"})
        for (std::size_t d : {81u, 192u})
            for (std::size_t n : {1u, 2u, 4u, 8u})
                for (std::size_t rep = 0; rep < 3; ++rep)
                    recs.push_back({s, d, n, rep, std::uniform_real_distribution<double>(0.01, 2.0)(rng)});
    const auto ref = emit_summary_csv(summarize(recs));
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(recs.begin(), recs.end(), rng);
        EXPECT_EQ(emit_summary_csv(summarize(recs)), ref);
    }
}

TEST(Csv, HeadersAreExact) {
    EXPECT_EQ(emit_records_csv({}), "strategy,n_dofs,n_problems,rep,wall_seconds\n");
    EXPECT_EQ(emit_summary_csv({}), "strategy,n_dofs,n_problems,mean_seconds,self_speedup,speedup_over_naive\n");
    EXPECT_EQ(emit_records_csv({{"team", 81, 1, 0, 0.0, false}}),
              "strategy,n_dofs,n_problems,rep,wall_seconds\nteam,81,1,0,nonconverged\n");
}

TEST(Csv, RoundTripProperty) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> t(1e-6, 1e3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<BenchRecord> recs(rng() % 20);
        for (auto& r : recs)
            r = {rng() % 2 ? "team" : "naive", rng() % 5000, 1 + rng() % 64, rng() % 5, t(rng), rng() % 7 != 0};
        for (auto& r : recs)
            if (!r.converged)
                r.wall_seconds = 0.0;
        EXPECT_EQ(parse_records_csv(emit_records_csv(recs)), recs);

        std::vector<SpeedupRow> rows(rng() % 10);
        for (auto& r : rows) {
            r = {"team", rng() % 5000, 1 + rng() % 64, t(rng), std::nullopt, std::nullopt};
            if (rng() % 2)
                r.self_speedup = t(rng);
            if (rng() % 2)
                r.speedup_over_naive = t(rng);
        }
        EXPECT_EQ(parse_summary_csv(emit_summary_csv(rows)), rows);
    }
}

TEST(Csv, ParseErrors) {
    EXPECT_THROW(parse_records_csv("wrong,header\n"), ParseError);
    EXPECT_THROW(parse_records_csv("strategy,n_dofs,n_problems,rep,wall_seconds\nteam,81,1\n"), ParseError);
    EXPECT_THROW(parse_records_csv("strategy,n_dofs,n_problems,rep,wall_seconds\nteam,x,1,0,1.0\n"), ParseError);
}

TEST(RunBenchmark, RecordCountsAndSizes) {
    BenchConfig cfg;
    cfg.sizes = {LatticeSpec{3, 3, 3, 0.2, 1, {}}, LatticeSpec{2, 2, 2, 0.0, 0, {}}};
    cfg.counts = {1, 2};
    cfg.strategies = {NaiveLoop{2}, TeamBatched{2, 1}};
    cfg.reps = 2;
    const auto recs = run_benchmark(cfg);
    EXPECT_EQ(recs.size(), 2u * 2u * 2u * 2u);
    for (const auto& r : recs) {
        EXPECT_TRUE(r.converged);
        EXPECT_GT(r.wall_seconds, 0.0);
        EXPECT_TRUE(r.n_dofs == 81 || r.n_dofs == 24);
        EXPECT_LT(r.rep, 2u);
    }
    const auto rows = summarize(recs);
    EXPECT_EQ(rows.size(), 8u);
    for (const auto& row : rows) {
        ASSERT_TRUE(row.self_speedup);
        if (row.n_problems == 1)
            EXPECT_DOUBLE_EQ(*row.self_speedup, 1.0);
        ASSERT_TRUE(row.speedup_over_naive);
    }
}

TEST(RunBenchmark, NonConvergenceIsMarked) {
    BenchConfig cfg;
    cfg.sizes = {LatticeSpec{4, 4, 4, 0.2, 1, {}}};
    cfg.counts = {1};
    cfg.strategies = {SerialReference{}};
    cfg.reps = 1;
    cfg.solver.max_iters = 2;
    const auto recs = run_benchmark(cfg);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_FALSE(recs[0].converged);
    EXPECT_NE(emit_records_csv(recs).find("nonconverged"), std::string::npos);
}

TEST(RunBenchmark, ArgumentErrors) {
    BenchConfig cfg;
    cfg.sizes = {LatticeSpec{}};
    cfg.counts = {1};
    cfg.strategies = {TeamBatched{1, 8}};
    cfg.max_lanes = 4;
    EXPECT_THROW(run_benchmark(cfg), ConfigError);
    cfg.max_lanes = 8;
    cfg.reps = 0;
    EXPECT_THROW(run_benchmark(cfg), std::invalid_argument);
}

TEST(Plot, EmptyInputGivesAxesOnly) {
    const auto svg = render_svg({}, PlotMetric::SelfSpeedup);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_EQ(svg.find("class=\"series\""), std::string::npos);
}

TEST(Plot, OnePolylinePerSeries) {
    std::vector<SpeedupRow> rows;
    for (std::size_t d : {81u, 192u})
        for (std::size_t n : {1u, 4u, 16u})
            rows.push_back({"team", d, n, 1.0, double(n) / 2.0, 1.5});
    const auto svg = render_svg(rows, PlotMetric::SelfSpeedup);
    std::size_t lines = 0;
    for (auto p = svg.find("class=\"series\""); p != std::string::npos; p = svg.find("class=\"series\"", p + 1))
        ++lines;
    EXPECT_EQ(lines, 2u);
    EXPECT_EQ(svg, render_svg(rows, PlotMetric::SelfSpeedup));

    const auto series = plot_series(rows, PlotMetric::SelfSpeedup);
    ASSERT_EQ(series.size(), 2u);
    EXPECT_EQ(series[0].points.size(), 3u);
    EXPECT_EQ(series[0].points.back(), (std::pair<double, double>{16.0, 8.0}));
}

TEST(ResultJson, RoundTrip) {
    SolveResult r;
    r.converged = true;
    r.iters = 42;
    r.final_residual = 1.25e-9;
    r.u = {0.1, -0.2, 1.0 / 3.0};
    r.avg_stress[0][1] = r.avg_stress[1][0] = 0.5;
    auto back = solve_result_from_json(nlohmann::json::parse(to_json(r).dump()));
    EXPECT_EQ(back.u, r.u);
    EXPECT_EQ(back.iters, 42u);
    EXPECT_EQ(back.avg_stress, r.avg_stress);
    EXPECT_TRUE(std::isnan(back.energy_residual));
    EXPECT_TRUE(to_json(r)["energy_residual"].is_null());
}
