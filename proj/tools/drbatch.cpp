// drbatch: generate fiber networks, solve them by dynamic relaxation, benchmark batch
// strategies and plot speedup tables.
//
// Exit codes: 0 success, 1 usage / IO / validation error, 2 solve did not converge.

#include "drbatch/drbatch.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_not_converged = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    if (!out)
        throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<std::size_t> parse_counts(const std::string& s, char sep, const char* what) {
    std::vector<std::size_t> out;
    for (auto tok : drb::detail::split(s, sep)) {
        auto v = drb::detail::parse_size(tok);
        if (!v)
            throw UsageError(std::string("bad ") + what + " '" + s + "'");
        out.push_back(*v);
    }
    return out;
}

drb::Mat3 deformation_from(const std::vector<double>& f) {
    drb::Mat3 m{};
    for (int k = 0; k < 9; ++k)
        m[k / 3][k % 3] = f[k];
    return m;
}

drb::DampingMode damping_from(const std::string& s) {
    if (s == "adaptive")
        return drb::AdaptiveDamping{};
    auto c = drb::detail::parse_double(s);
    if (!c)
        throw UsageError("--damping must be 'adaptive' or a non-negative number");
    return drb::FixedDamping{*c};
}

drb::ExecutionStrategy strategy_from(const std::string& name, std::size_t workers, std::size_t teams,
                                     std::size_t team_size, bool static_assign) {
    if (name == "serial")
        return drb::SerialReference{};
    if (name == "naive")
        return drb::NaiveLoop{workers};
    if (name == "team")
        return drb::TeamBatched{teams, team_size, !static_assign};
    throw UsageError("unknown strategy '" + name + "' (serial, naive, team)");
}

struct SolverFlags {
    double tol = drb::SolverConfig{}.tol_rel;
    double tol_abs = drb::SolverConfig{}.tol_abs;
    std::size_t max_iters = drb::SolverConfig{}.max_iters;
    double dt_safety = drb::SolverConfig{}.dt_safety;
    std::string damping = "adaptive";
    std::size_t ramp = 0;
    std::size_t energy_interval = 0;

    void add_to(CLI::App* app) {
        app->add_option("--tol", tol, "Relative residual tolerance")->capture_default_str();
        app->add_option("--tol-abs", tol_abs, "Absolute residual tolerance")->capture_default_str();
        app->add_option("--max-iters", max_iters, "Iteration limit")->capture_default_str();
        app->add_option("--dt-safety", dt_safety, "Time step safety factor in (0,1]")->capture_default_str();
        app->add_option("--damping", damping, "'adaptive' or a fixed coefficient")->capture_default_str();
        app->add_option("--ramp", ramp, "Iterations over which the boundary displacement is ramped")
            ->capture_default_str();
        app->add_option("--energy-interval", energy_interval, "Energy balance check interval (0 = off)")
            ->capture_default_str();
    }

    drb::SolverConfig config() const {
        drb::SolverConfig c;
        c.tol_rel = tol;
        c.tol_abs = tol_abs;
        c.max_iters = max_iters;
        c.dt_safety = dt_safety;
        c.damping = damping_from(damping);
        c.bc_ramp_iters = ramp;
        c.energy_check_interval = energy_interval;
        c.validate();
        return c;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Batched dynamic relaxation of fiber networks"};
    app.require_subcommand(1);

    const std::size_t hw = drb::exec::hardware_threads();
    std::size_t max_lanes = 0;
    app.add_option("--max-lanes", max_lanes, "Cap on total logical lanes (default: DRBATCH_MAX_LANES or 4096)");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a jittered lattice network");
    std::string gen_lattice, gen_out;
    double gen_jitter = 0.0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--lattice", gen_lattice, "nx,ny,nz")->required();
    gen->add_option("--jitter", gen_jitter, "Interior jitter as a fraction of the spacing")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
    gen->add_option("-o,--output", gen_out, "Output network file (default stdout)");

    // solve
    auto* solve = app.add_subcommand("solve", "Solve one network under an affine deformation");
    std::string solve_net, solve_out, solve_strategy = "serial";
    std::vector<double> deform{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::size_t solve_teams = 1, solve_team_size = 1, solve_workers = hw;
    SolverFlags solve_flags;
    solve->add_option("--network", solve_net, "Network file")->required();
    solve->add_option("--deform", deform, "Deformation gradient f11 f12 f13 f21 ... f33")->expected(9);
    solve->add_option("--strategy", solve_strategy, "serial | naive | team")->capture_default_str();
    solve->add_option("--teams", solve_teams)->capture_default_str();
    solve->add_option("--team-size", solve_team_size)->capture_default_str();
    solve->add_option("--workers", solve_workers)->capture_default_str();
    solve->add_option("-o,--output", solve_out, "Result JSON (default stdout)");
    solve_flags.add_to(solve);

    // bench
    auto* bench = app.add_subcommand("bench", "Benchmark batch strategies and compute speedups");
    std::string bench_sizes = "3x3x3", bench_counts = "1,2,4,8", bench_strategies = "naive,team", bench_out,
                bench_summary;
    std::size_t bench_reps = 3, bench_teams = hw, bench_team_size = 0, bench_workers = hw;
    double bench_jitter = 0.2;
    std::uint64_t bench_seed = 0;
    bool heterogeneous = false, static_assign = false;
    std::vector<double> bench_deform{1.05, 0, 0, 0, 1.05, 0, 0, 0, 1.05};
    SolverFlags bench_flags;
    bench->add_option("--sizes", bench_sizes, "Lattice sizes, e.g. 3x3x3,5x5x5")->capture_default_str();
    bench->add_option("--counts", bench_counts, "Batch sizes, e.g. 1,2,4,8")->capture_default_str();
    bench->add_option("--strategies", bench_strategies, "Comma list of serial, naive, team")->capture_default_str();
    bench->add_option("--reps", bench_reps, "Timed repetitions per cell")->capture_default_str();
    bench->add_option("--teams", bench_teams)->capture_default_str();
    bench->add_option("--team-size", bench_team_size, "Lanes per team (default: hardware threads / teams)");
    bench->add_option("--workers", bench_workers, "Workers for the naive strategy")->capture_default_str();
    bench->add_option("--jitter", bench_jitter)->capture_default_str();
    bench->add_option("--seed", bench_seed)->capture_default_str();
    bench->add_option("--deform", bench_deform, "Deformation gradient (9 numbers)")->expected(9);
    bench->add_flag("--heterogeneous", heterogeneous, "Vary the seed per sub-problem");
    bench->add_flag("--static-assign", static_assign, "Static block assignment of problems to teams");
    bench->add_option("-o,--output", bench_out, "Raw timing CSV")->required();
    bench->add_option("--summary", bench_summary, "Summary CSV (default: <output stem>_summary.csv)");
    bench_flags.add_to(bench);

    // plot
    auto* plot = app.add_subcommand("plot", "Render a summary CSV as an SVG line chart");
    std::string plot_in, plot_out, plot_metric = "self";
    plot->add_option("--input", plot_in, "Summary CSV")->required();
    plot->add_option("-o,--output", plot_out, "SVG file (default stdout)");
    plot->add_option("--metric", plot_metric, "self | naive")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_error;
    }

    try {
        if (max_lanes == 0)
            max_lanes = drb::max_lanes_from_env();

        if (*gen) {
            const auto dims = parse_counts(gen_lattice, ',', "--lattice");
            if (dims.size() != 3)
                throw UsageError("--lattice needs three counts nx,ny,nz");
            drb::LatticeSpec spec{dims[0], dims[1], dims[2], gen_jitter, gen_seed, {}};
            write_output(gen_out, drb::save_network(drb::generate_lattice(spec)));
            return exit_ok;
        }

        if (*solve) {
            const auto text = read_file(solve_net);
            std::vector<drb::FiberNetwork> nets{drb::load_network(text)};
            std::vector<drb::AffineBC> bcs{drb::AffineBC(deformation_from(deform))};
            const auto strategy =
                strategy_from(solve_strategy, solve_workers, solve_teams, solve_team_size, false);
            auto batch = drb::pack_batch(std::move(nets), std::move(bcs));
            const auto results = drb::solve_batch(batch, strategy, solve_flags.config(), {max_lanes, nullptr});
            write_output(solve_out, drb::to_json(results.front()).dump(2) + "\n");
            if (!results.front().converged) {
                std::cerr << "drbatch: solve did not converge after " << results.front().iters << " iterations\n";
                return exit_not_converged;
            }
            return exit_ok;
        }

        if (*bench) {
            drb::BenchConfig cfg;
            for (auto item : drb::detail::split(bench_sizes, ',')) {
                const auto dims = parse_counts(std::string(item), 'x', "--sizes");
                if (dims.size() != 3)
                    throw UsageError("--sizes entries look like 4x4x4");
                cfg.sizes.push_back({dims[0], dims[1], dims[2], bench_jitter, bench_seed, {}});
            }
            cfg.counts = parse_counts(bench_counts, ',', "--counts");
            if (bench_team_size == 0)
                bench_team_size = std::max<std::size_t>(1, hw / std::max<std::size_t>(bench_teams, 1));
            for (auto name : drb::detail::split(bench_strategies, ','))
                cfg.strategies.push_back(
                    strategy_from(std::string(name), bench_workers, bench_teams, bench_team_size, static_assign));
            cfg.reps = bench_reps;
            cfg.solver = bench_flags.config();
            cfg.bc = drb::AffineBC(deformation_from(bench_deform));
            cfg.heterogeneous = heterogeneous;
            cfg.max_lanes = max_lanes;
            for (const auto& size : cfg.sizes)
                (void)drb::generate_lattice(size); // validate before any timing work

            const auto records = drb::run_benchmark(cfg);
            write_output(bench_out, drb::emit_records_csv(records));
            if (bench_summary.empty()) {
                auto stem = bench_out;
                if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv")
                    stem.resize(stem.size() - 4);
                bench_summary = stem + "_summary.csv";
            }
            write_output(bench_summary, drb::emit_summary_csv(drb::summarize(records)));
            return exit_ok;
        }

        if (*plot) {
            drb::PlotMetric metric;
            if (plot_metric == "self")
                metric = drb::PlotMetric::SelfSpeedup;
            else if (plot_metric == "naive")
                metric = drb::PlotMetric::SpeedupOverNaive;
            else
                throw UsageError("--metric must be 'self' or 'naive'");
            const auto rows = drb::parse_summary_csv(read_file(plot_in));
            write_output(plot_out, drb::render_svg(rows, metric));
            return exit_ok;
        }
    } catch (const std::exception& e) {
        std::cerr << "drbatch: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}
