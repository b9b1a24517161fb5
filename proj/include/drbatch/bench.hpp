#pragma once

/**
 * @file bench.hpp
 * @brief Self-speedup benchmarking of batched solves.
 *
 * Timed region: pack_batch + solve_batch. Network generation happens before the clock starts.
 */

#include "drbatch/batch.hpp"
#include "drbatch/detail/text.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace drb {

struct BenchRecord {
    std::string strategy;
    std::size_t n_dofs = 0;
    std::size_t n_problems = 0;
    std::size_t rep = 0;
    double wall_seconds = 0.0;
    bool converged = true; ///< false: some sub-problem did not converge; excluded from summaries

    bool operator==(const BenchRecord&) const = default;
};

struct SpeedupRow {
    std::string strategy;
    std::size_t n_dofs = 0;
    std::size_t n_problems = 0;
    double mean_seconds = 0.0;
    std::optional<double> self_speedup;
    std::optional<double> speedup_over_naive;

    bool operator==(const SpeedupRow&) const = default;
};

/// N t1 / tN: 1 means runtime grows linearly with the batch size, N means it stays flat.
inline double self_speedup(double t1, double tn, std::size_t n) {
    if (!(t1 > 0.0) || !(tn > 0.0))
        throw std::invalid_argument("timings must be positive");
    if (n < 1)
        throw std::invalid_argument("batch size must be at least 1");
    return double(n) * t1 / tn;
}

struct BenchConfig {
    std::vector<LatticeSpec> sizes;
    std::vector<std::size_t> counts;
    std::vector<ExecutionStrategy> strategies;
    std::size_t reps = 3;
    SolverConfig solver{};
    AffineBC bc{Mat3{{{1.05, 0.0, 0.0}, {0.0, 1.05, 0.0}, {0.0, 0.0, 1.05}}}};
    bool heterogeneous = false; ///< problem i uses seed + i instead of one shared seed
    std::size_t max_lanes = default_max_lanes;
};

/// Batch of n lattice problems built from `spec` (not timed by run_benchmark).
inline std::vector<FiberNetwork> make_networks(const LatticeSpec& spec, std::size_t n, bool heterogeneous) {
    std::vector<FiberNetwork> nets;
    nets.reserve(n);
    if (!heterogeneous) {
        const auto net = generate_lattice(spec);
        nets.assign(n, net);
        return nets;
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto s = spec;
        s.seed = spec.seed + i;
        nets.push_back(generate_lattice(s));
    }
    return nets;
}

/**
 * One warm-up plus `reps` timed runs per (strategy, size, count) cell; cells run one after
 * another. Returns one record per timed run.
 */
inline std::vector<BenchRecord> run_benchmark(const BenchConfig& cfg) {
    if (cfg.reps < 1)
        throw std::invalid_argument("reps must be at least 1");
    for (const auto& s : cfg.strategies)
        validate_strategy(s, cfg.max_lanes);
    for (auto n : cfg.counts)
        if (n < 1)
            throw std::invalid_argument("batch counts must be at least 1");

    std::vector<BenchRecord> records;
    for (const auto& strategy : cfg.strategies) {
        for (const auto& size : cfg.sizes) {
            for (auto count : cfg.counts) {
                const auto nets = make_networks(size, count, cfg.heterogeneous);
                const std::size_t n_dofs = nets.front().dof_count();
                const std::vector<AffineBC> bcs(count, cfg.bc);
                for (std::size_t rep = 0; rep <= cfg.reps; ++rep) {
                    auto copies = nets;
                    auto bc_copies = bcs;
                    const auto t0 = std::chrono::steady_clock::now();
                    auto batch = pack_batch(std::move(copies), std::move(bc_copies));
                    const auto results = solve_batch(batch, strategy, cfg.solver, {cfg.max_lanes, nullptr});
                    const auto t1 = std::chrono::steady_clock::now();
                    if (rep == 0)
                        continue; // warm-up
                    const bool ok = std::all_of(results.begin(), results.end(),
                                                [](const SolveResult& r) { return r.converged; });
                    records.push_back({strategy_name(strategy), n_dofs, count, rep - 1,
                                       std::chrono::duration<double>(t1 - t0).count(), ok});
                }
            }
        }
    }
    return records;
}

/**
 * Mean over reps per (strategy, n_dofs, n_problems), then self speedup against the N = 1 mean
 * of the same strategy and size, and speedup over the "naive" strategy at the same size and N.
 * Output is sorted by key, so the result does not depend on record order.
 */
inline std::vector<SpeedupRow> summarize(std::vector<BenchRecord> records) {
    records.erase(std::remove_if(records.begin(), records.end(), [](const BenchRecord& r) { return !r.converged; }),
                  records.end());
    auto key = [](const BenchRecord& r) { return std::tie(r.strategy, r.n_dofs, r.n_problems, r.rep, r.wall_seconds); };
    std::sort(records.begin(), records.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });

    using Cell = std::tuple<std::string, std::size_t, std::size_t>;
    std::map<Cell, std::pair<double, std::size_t>> acc;
    for (const auto& r : records) {
        auto& [sum, n] = acc[{r.strategy, r.n_dofs, r.n_problems}];
        sum += r.wall_seconds;
        ++n;
    }
    std::map<Cell, double> mean;
    for (const auto& [cell, sn] : acc)
        mean[cell] = sn.first / double(sn.second);

    std::vector<SpeedupRow> rows;
    for (const auto& [cell, m] : mean) {
        const auto& [strategy, dofs, n] = cell;
        SpeedupRow row{strategy, dofs, n, m, std::nullopt, std::nullopt};
        if (auto base = mean.find({strategy, dofs, 1}); base != mean.end())
            row.self_speedup = self_speedup(base->second, m, n);
        if (auto naive = mean.find({"naive", dofs, n}); naive != mean.end())
            row.speedup_over_naive = naive->second / m;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view records_header = "strategy,n_dofs,n_problems,rep,wall_seconds";
inline constexpr std::string_view summary_header =
    "strategy,n_dofs,n_problems,mean_seconds,self_speedup,speedup_over_naive";

/// Marker written in place of wall_seconds for a cell with a non-converged sub-problem.
inline constexpr std::string_view nonconverged_marker = "nonconverged";

inline std::string emit_records_csv(const std::vector<BenchRecord>& records) {
    std::string out(records_header);
    out += '\n';
    for (const auto& r : records) {
        out += r.strategy + ',' + std::to_string(r.n_dofs) + ',' + std::to_string(r.n_problems) + ',' +
               std::to_string(r.rep) + ',' +
               (r.converged ? detail::format_double(r.wall_seconds) : std::string(nonconverged_marker)) + '\n';
    }
    return out;
}

inline std::string emit_summary_csv(const std::vector<SpeedupRow>& rows) {
    auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string(); };
    std::string out(summary_header);
    out += '\n';
    for (const auto& r : rows)
        out += r.strategy + ',' + std::to_string(r.n_dofs) + ',' + std::to_string(r.n_problems) + ',' +
               detail::format_double(r.mean_seconds) + ',' + opt(r.self_speedup) + ',' +
               opt(r.speedup_over_naive) + '\n';
    return out;
}

namespace detail {

template <class Row, class Fn>
std::vector<Row> parse_csv(std::string_view text, std::string_view header, std::size_t columns, Fn&& parse_row) {
    std::vector<Row> out;
    std::size_t line_no = 0;
    bool seen_header = false;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        if (!seen_header) {
            if (line != header)
                throw ParseError(line_no, "unexpected CSV header");
            seen_header = true;
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != columns)
            throw ParseError(line_no, "expected " + std::to_string(columns) + " columns");
        out.push_back(parse_row(f, line_no));
    }
    if (!seen_header)
        throw ParseError(1, "missing CSV header");
    return out;
}

inline std::size_t csv_size(std::string_view s, std::size_t line) {
    if (auto v = parse_size(s))
        return *v;
    throw ParseError(line, "bad integer '" + std::string(s) + "'");
}

inline double csv_double(std::string_view s, std::size_t line) {
    if (auto v = parse_double(s))
        return *v;
    throw ParseError(line, "bad number '" + std::string(s) + "'");
}

} // namespace detail

inline std::vector<BenchRecord> parse_records_csv(std::string_view text) {
    return detail::parse_csv<BenchRecord>(text, records_header, 5, [](const auto& f, std::size_t ln) {
        BenchRecord r;
        r.strategy = std::string(f[0]);
        r.n_dofs = detail::csv_size(f[1], ln);
        r.n_problems = detail::csv_size(f[2], ln);
        r.rep = detail::csv_size(f[3], ln);
        if (f[4] == nonconverged_marker) {
            r.converged = false;
        } else {
            r.wall_seconds = detail::csv_double(f[4], ln);
        }
        return r;
    });
}

inline std::vector<SpeedupRow> parse_summary_csv(std::string_view text) {
    return detail::parse_csv<SpeedupRow>(text, summary_header, 6, [](const auto& f, std::size_t ln) {
        auto opt = [&](std::string_view s) -> std::optional<double> {
            if (s.empty())
                return std::nullopt;
            return detail::csv_double(s, ln);
        };
        return SpeedupRow{std::string(f[0]),        detail::csv_size(f[1], ln), detail::csv_size(f[2], ln),
                          detail::csv_double(f[3], ln), opt(f[4]),              opt(f[5])};
    });
}

} // namespace drb
