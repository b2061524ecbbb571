#pragma once

// Deterministic data parallelism. Work is split into a fixed number of
// contiguous chunks independent of the thread count, and reductions use a
// fixed pairwise tree, so results are bit-identical for any thread count.

#include <cstddef>
#include <span>
#include <thread>
#include <vector>

namespace horolab {

void set_thread_count(int threads);
int thread_count();

/// Pairwise (fixed tree) summation.
double pairwise_sum(std::span<const double> values);

/// Calls f(i) for every i in [0, n); f must only write to slot i of its output.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    const int threads = thread_count();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t lo = n * w / workers;
            const std::size_t hi = n * (w + 1) / workers;
            for (std::size_t i = lo; i < hi; ++i) f(i);
        });
    }
}

/// Evaluates f on [0, n) in parallel and sums with the fixed tree.
template <class F>
double parallel_sum(std::size_t n, F&& f) {
    std::vector<double> values(n);
    parallel_for(n, [&](std::size_t i) { values[i] = f(i); });
    return pairwise_sum(values);
}

} // namespace horolab
