#pragma once

/**
 * @file execution.hpp
 * @brief Lane executors used by the solver kernels.
 *
 * Every executor exposes the same surface:
 *
 *   lanes()        number of logical lanes the index range is split across
 *   concurrent()   true when more than one OS thread may run a kernel at once
 *   for_range(n, f)        f(begin, end) on each lane's chunk of [0, n)
 *   sum(n, f) -> Partials  f(begin, end) returns a Partials; lane results added in lane order
 *   min(n, f) -> double    f(begin, end) returns a double; lane results combined with min
 *
 * Partial results are always combined in logical-lane order, so for a fixed lane count the
 * reductions are independent of how many threads actually execute the lanes.
 */

#include <algorithm>
#include <array>
#include <atomic>
#include <barrier>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace drb::exec {

using Partials = std::array<double, 4>;

inline constexpr std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t lane, std::size_t lanes) {
    return {n * lane / lanes, n * (lane + 1) / lanes};
}

inline std::size_t hardware_threads() {
    const auto n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Single lane on the calling thread.
class SerialLane {
public:
    std::size_t lanes() const noexcept { return 1; }
    bool concurrent() const noexcept { return false; }

    template <class F>
    void for_range(std::size_t n, F&& f) {
        if (n > 0)
            f(std::size_t{0}, n);
    }

    template <class F>
    Partials sum(std::size_t n, F&& f) {
        return n > 0 ? f(std::size_t{0}, n) : Partials{};
    }

    template <class F>
    double min(std::size_t n, F&& f) {
        return n > 0 ? f(std::size_t{0}, n) : std::numeric_limits<double>::infinity();
    }
};

namespace detail {

struct Job {
    void (*fn)(void*, std::size_t) = nullptr;
    void* ctx = nullptr;
    void operator()(std::size_t lane) const { fn(ctx, lane); }
};

template <class K>
Job make_job(K& kernel) {
    return Job{[](void* c, std::size_t lane) { (*static_cast<K*>(c))(lane); }, &kernel};
}

/// Shared kernel bodies; `Self::run(Job)` executes one job over all logical lanes.
template <class Self>
class LaneKernels {
public:
    template <class F>
    void for_range(std::size_t n, F&& f) {
        const std::size_t lanes = self().lanes();
        auto kernel = [&](std::size_t lane) {
            auto [b, e] = chunk(n, lane, lanes);
            if (b < e)
                f(b, e);
        };
        self().run(make_job(kernel));
    }

    template <class F>
    Partials sum(std::size_t n, F&& f) {
        const std::size_t lanes = self().lanes();
        auto& partials = self().partials_;
        auto kernel = [&](std::size_t lane) {
            auto [b, e] = chunk(n, lane, lanes);
            partials[lane] = b < e ? f(b, e) : Partials{};
        };
        self().run(make_job(kernel));
        Partials total{};
        for (std::size_t l = 0; l < lanes; ++l)
            for (std::size_t k = 0; k < total.size(); ++k)
                total[k] += partials[l][k];
        return total;
    }

    template <class F>
    double min(std::size_t n, F&& f) {
        const std::size_t lanes = self().lanes();
        auto& partials = self().partials_;
        auto kernel = [&](std::size_t lane) {
            auto [b, e] = chunk(n, lane, lanes);
            partials[lane][0] = b < e ? f(b, e) : std::numeric_limits<double>::infinity();
        };
        self().run(make_job(kernel));
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < lanes; ++l)
            m = std::min(m, partials[l][0]);
        return m;
    }

private:
    Self& self() { return static_cast<Self&>(*this); }
};

class ErrorSlot {
public:
    void capture() {
        std::lock_guard lk(m_);
        if (!error_)
            error_ = std::current_exception();
    }
    void rethrow() {
        std::exception_ptr e;
        {
            std::lock_guard lk(m_);
            std::swap(e, error_);
        }
        if (e)
            std::rethrow_exception(e);
    }

private:
    std::mutex m_;
    std::exception_ptr error_;
};

} // namespace detail

/**
 * @brief Host-driven worker pool: one launch per kernel.
 *
 * The calling thread never computes. Each kernel call wakes every worker, waits for all of
 * them to finish, and only then returns: a full cross-worker barrier per operation.
 */
class DispatchPool : public detail::LaneKernels<DispatchPool> {
    friend class detail::LaneKernels<DispatchPool>;

public:
    explicit DispatchPool(std::size_t workers) : workers_(std::max<std::size_t>(workers, 1)), partials_(workers_) {
        threads_.reserve(workers_);
        for (std::size_t w = 0; w < workers_; ++w)
            threads_.emplace_back([this, w] { worker(w); });
    }

    DispatchPool(const DispatchPool&) = delete;
    DispatchPool& operator=(const DispatchPool&) = delete;

    ~DispatchPool() {
        {
            std::lock_guard lk(m_);
            stop_ = true;
        }
        work_cv_.notify_all();
        for (auto& t : threads_)
            t.join();
    }

    std::size_t lanes() const noexcept { return workers_; }
    bool concurrent() const noexcept { return workers_ > 1; }

    void run(detail::Job job) {
        {
            std::lock_guard lk(m_);
            job_ = job;
            pending_ = workers_;
            ++generation_;
        }
        work_cv_.notify_all();
        {
            std::unique_lock lk(m_);
            done_cv_.wait(lk, [this] { return pending_ == 0; });
        }
        errors_.rethrow();
    }

private:
    void worker(std::size_t lane) {
        std::size_t seen = 0;
        for (;;) {
            detail::Job job;
            {
                std::unique_lock lk(m_);
                work_cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_)
                    return;
                seen = generation_;
                job = job_;
            }
            try {
                job(lane);
            } catch (...) {
                errors_.capture();
            }
            bool last = false;
            {
                std::lock_guard lk(m_);
                last = --pending_ == 0;
            }
            if (last)
                done_cv_.notify_one();
        }
    }

    std::size_t workers_;
    std::vector<Partials> partials_;
    std::vector<std::thread> threads_;
    std::mutex m_;
    std::condition_variable work_cv_;
    std::condition_variable done_cv_;
    detail::Job job_;
    std::size_t pending_ = 0;
    std::size_t generation_ = 0;
    bool stop_ = false;
    detail::ErrorSlot errors_;
};

/**
 * @brief A team: `lanes` logical lanes executed by `threads` OS threads.
 *
 * The constructing thread is team thread 0 and drives the control flow; helpers join it at a
 * team-local barrier before and after each kernel. Thread t runs logical lanes t, t+threads, ...
 * With a single thread no synchronization happens at all.
 */
class TeamLanes : public detail::LaneKernels<TeamLanes> {
    friend class detail::LaneKernels<TeamLanes>;

public:
    TeamLanes(std::size_t lanes, std::size_t threads)
        : lanes_(std::max<std::size_t>(lanes, 1)),
          threads_(std::clamp<std::size_t>(threads, 1, lanes_)),
          partials_(lanes_),
          barrier_(static_cast<std::ptrdiff_t>(threads_)) {
        helpers_.reserve(threads_ - 1);
        for (std::size_t t = 1; t < threads_; ++t)
            helpers_.emplace_back([this, t] { helper(t); });
    }

    TeamLanes(const TeamLanes&) = delete;
    TeamLanes& operator=(const TeamLanes&) = delete;

    ~TeamLanes() {
        if (threads_ > 1) {
            stop_ = true;
            barrier_.arrive_and_wait();
            for (auto& t : helpers_)
                t.join();
        }
    }

    std::size_t lanes() const noexcept { return lanes_; }
    std::size_t threads() const noexcept { return threads_; }
    bool concurrent() const noexcept { return threads_ > 1; }

    void run(detail::Job job) {
        if (threads_ == 1) {
            for (std::size_t l = 0; l < lanes_; ++l)
                job(l);
            return;
        }
        job_ = job;
        barrier_.arrive_and_wait();
        execute(0);
        barrier_.arrive_and_wait();
        errors_.rethrow();
    }

private:
    void execute(std::size_t t) {
        try {
            for (std::size_t l = t; l < lanes_; l += threads_)
                job_(l);
        } catch (...) {
            errors_.capture();
        }
    }

    void helper(std::size_t t) {
        for (;;) {
            barrier_.arrive_and_wait();
            if (stop_)
                return;
            execute(t);
            barrier_.arrive_and_wait();
        }
    }

    std::size_t lanes_;
    std::size_t threads_;
    std::vector<Partials> partials_;
    std::barrier<> barrier_;
    std::vector<std::thread> helpers_;
    detail::Job job_;
    bool stop_ = false;
    detail::ErrorSlot errors_;
};

} // namespace drb::exec
