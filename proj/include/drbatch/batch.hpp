#pragma once

/**
 * @file batch.hpp
 * @brief Many independent sub-problems solved under one of three execution strategies.
 *
 *  - SerialReference: one problem after another on the calling thread. The oracle.
 *  - NaiveLoop: problems strictly one after another; every kernel of the solve loop is
 *    dispatched to a worker pool and joined before the next one starts.
 *  - TeamBatched: `teams` teams pull problem indices from a shared queue and each runs the
 *    whole solve loop for its problem with team-local synchronization only.
 *
 * Solver state for all problems lives in packed storage, one row per problem. Kernels work on
 * space A; results are read back from space B after a sync.
 */

#include "drbatch/errors.hpp"
#include "drbatch/execution.hpp"
#include "drbatch/microsolver.hpp"
#include "drbatch/network.hpp"
#include "drbatch/packed.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace drb {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

struct SerialReference {};

struct NaiveLoop {
    std::size_t workers = 1;
};

struct TeamBatched {
    std::size_t teams = 1;
    std::size_t team_size = 1;
    bool dynamic = true; ///< false: each team takes a contiguous block of problems
};

using ExecutionStrategy = std::variant<SerialReference, NaiveLoop, TeamBatched>;

/// Conventional GPU team size; accepted by default as a logical lane count.
inline constexpr std::size_t reference_team_size = 512;

/// Default cap on total logical lanes; override with DRBATCH_MAX_LANES or the CLI.
inline constexpr std::size_t default_max_lanes = 4096;

inline std::size_t max_lanes_from_env() {
    if (const char* env = std::getenv("DRBATCH_MAX_LANES")) {
        if (auto v = detail::parse_size(env); v && *v > 0)
            return *v;
        throw ConfigError("DRBATCH_MAX_LANES must be a positive integer");
    }
    return default_max_lanes;
}

inline std::string strategy_name(const ExecutionStrategy& s) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, SerialReference>)
                return "serial";
            else if constexpr (std::is_same_v<T, NaiveLoop>)
                return "naive";
            else
                return "team";
        },
        s);
}

inline std::size_t lane_count(const ExecutionStrategy& s) {
    return std::visit(
        [](const auto& x) -> std::size_t {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, SerialReference>)
                return 1;
            else if constexpr (std::is_same_v<T, NaiveLoop>)
                return x.workers;
            else
                return x.teams * x.team_size;
        },
        s);
}

inline void validate_strategy(const ExecutionStrategy& s, std::size_t max_lanes) {
    if (const auto* n = std::get_if<NaiveLoop>(&s); n && n->workers == 0)
        throw ConfigError("naive strategy needs at least one worker");
    if (const auto* t = std::get_if<TeamBatched>(&s); t && (t->teams == 0 || t->team_size == 0))
        throw ConfigError("team strategy needs at least one team of at least one lane");
    if (lane_count(s) > max_lanes)
        throw ConfigError("strategy requests " + std::to_string(lane_count(s)) + " lanes, cap is " +
                          std::to_string(max_lanes));
}

// ---------------------------------------------------------------------------
// Batch
// ---------------------------------------------------------------------------

class Batch {
public:
    Batch() = default;
    Batch(const Batch&) = delete;
    Batch& operator=(const Batch&) = delete;
    Batch(Batch&&) = default;
    Batch& operator=(Batch&&) = default;

    std::size_t size() const noexcept { return networks_.size(); }
    const std::vector<FiberNetwork>& networks() const noexcept { return networks_; }
    const std::vector<AffineBC>& bcs() const noexcept { return bcs_; }
    const Problem& problem(std::size_t i) const { return problems_.at(i); }

    PackedStorage<double> u, v, a, f_int, f_prev, mass;

    /// Solver-state view of row i in the given space.
    MicroStateView state(std::size_t i, Space space) {
        return MicroStateView{u.subview(i, space),      v.subview(i, space),     a.subview(i, space),
                              f_int.subview(i, space),  f_prev.subview(i, space), mass.subview(i, space),
                              problems_[i].n_free()};
    }

    template <class Fn>
    void for_each_storage(Fn&& fn) {
        for (auto* s : {&u, &v, &a, &f_int, &f_prev, &mass})
            fn(*s);
    }

private:
    friend Batch pack_batch(std::vector<FiberNetwork> networks, std::vector<AffineBC> bcs);

    std::vector<FiberNetwork> networks_;
    std::vector<AffineBC> bcs_;
    std::vector<Problem> problems_;
};

/// Pack sub-problems into contiguous storage: u, v, a, forces zero; lumped mass filled in.
inline Batch pack_batch(std::vector<FiberNetwork> networks, std::vector<AffineBC> bcs) {
    if (networks.size() != bcs.size())
        throw std::invalid_argument("networks and boundary conditions differ in length");
    Batch b;
    b.networks_ = std::move(networks);
    b.bcs_ = std::move(bcs);
    b.problems_.reserve(b.networks_.size());
    std::vector<std::size_t> rows;
    rows.reserve(b.networks_.size());
    for (std::size_t i = 0; i < b.networks_.size(); ++i) {
        b.problems_.emplace_back(b.networks_[i], b.bcs_[i]);
        rows.push_back(b.problems_.back().n_total());
    }
    b.for_each_storage([&](PackedStorage<double>& s) { s = PackedStorage<double>(rows, 0.0); });
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto& p = b.problems_[i];
        const auto m = p.dofs().permute(compute_lumped_mass(p.network()));
        for (auto space : {Space::A, Space::B}) {
            auto row = b.mass.subview(i, space);
            std::copy(m.begin(), m.end(), row.begin());
        }
    }
    return b;
}

/// Optional per-problem instrumentation for solve_batch.
struct BatchObserver {
    explicit BatchObserver(std::size_t n) : solves(n) {}
    std::vector<std::atomic<unsigned>> solves;
};

struct BatchOptions {
    std::size_t max_lanes = default_max_lanes;
    BatchObserver* observer = nullptr;
};

namespace detail {

/// Team threads per team: never more OS threads than the machine offers for that team.
inline std::size_t team_threads(const TeamBatched& t) {
    const std::size_t per_team = std::max<std::size_t>(1, exec::hardware_threads() / t.teams);
    return std::min(t.team_size, per_team);
}

} // namespace detail

/**
 * @brief Solve every sub-problem of the batch.
 *
 * Non-convergence is recorded per result. A solver error in any sub-problem (singular element)
 * lets the others finish and is then rethrown, lowest problem index first.
 */
inline std::vector<SolveResult> solve_batch(Batch& batch, const ExecutionStrategy& strategy,
                                            const SolverConfig& config, const BatchOptions& opts = {}) {
    validate_strategy(strategy, opts.max_lanes);
    config.validate();
    const std::size_t n = batch.size();
    if (n == 0)
        return {};

    std::vector<SolveOutcome> outcomes(n);
    std::vector<std::exception_ptr> errors(n);

    auto solve_one = [&](std::size_t i, auto& ex) {
        if (opts.observer)
            opts.observer->solves[i].fetch_add(1, std::memory_order_relaxed);
        try {
            auto state = batch.state(i, Space::A);
            outcomes[i] = relax(batch.problem(i), state, config, ex);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    if (std::holds_alternative<SerialReference>(strategy)) {
        exec::SerialLane ex;
        for (std::size_t i = 0; i < n; ++i)
            solve_one(i, ex);
    } else if (const auto* naive = std::get_if<NaiveLoop>(&strategy)) {
        exec::DispatchPool pool(naive->workers);
        for (std::size_t i = 0; i < n; ++i)
            solve_one(i, pool);
    } else {
        const auto& team = std::get<TeamBatched>(strategy);
        const std::size_t threads = detail::team_threads(team);
        std::atomic<std::size_t> next{0};
        auto team_main = [&](std::size_t t) {
            exec::TeamLanes lanes(team.team_size, threads);
            if (team.dynamic) {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                    solve_one(i, lanes);
            } else {
                const auto [b, e] = exec::chunk(n, t, team.teams);
                for (std::size_t i = b; i < e; ++i)
                    solve_one(i, lanes);
            }
        };
        std::vector<std::thread> teams;
        teams.reserve(team.teams);
        for (std::size_t t = 0; t < team.teams; ++t)
            teams.emplace_back(team_main, t);
        for (auto& th : teams)
            th.join();
    }

    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    batch.for_each_storage([](PackedStorage<double>& s) {
        s.mark_modified(Space::A);
        s.sync(Space::B);
    });

    std::vector<SolveResult> results;
    results.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        results.push_back(make_result(batch.problem(i), outcomes[i], batch.u.subview(i, Space::B),
                                      batch.f_int.subview(i, Space::B)));
    return results;
}

} // namespace drb
