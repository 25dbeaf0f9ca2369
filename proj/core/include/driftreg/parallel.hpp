#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <thread>
#include <vector>

namespace driftreg {

// Upper bound on worker threads used inside a single library call. Read once
// from DRIFTREG_THREADS (default: hardware concurrency); set_thread_count(0)
// restores that default.
std::size_t thread_count();
void set_thread_count(std::size_t n);

namespace parallel {

// Work is always split into chunks of this many elements regardless of the
// thread count; reductions combine per-chunk partials in chunk order, so the
// result is bitwise identical for any number of threads.
inline constexpr std::size_t kChunk = 8192;

// Below this many elements everything runs on the calling thread.
inline constexpr std::size_t kSerialCutoff = 1u << 16;

inline std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

// fn(chunk_index, begin, end)
template <class Fn>
void for_chunks(std::size_t n, Fn&& fn) {
    const std::size_t chunks = chunk_count(n);
    const std::size_t workers = std::min(thread_count(), chunks);
    auto run = [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        fn(c, begin, std::min(n, begin + kChunk));
    };
    if (n < kSerialCutoff || workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run(c);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) run(c);
        });
    }
    for (std::size_t c = 0; c < chunks; c += workers) run(c);
}

// fn(begin, end) over independent element ranges.
template <class Fn>
void for_range(std::size_t n, Fn&& fn) {
    for_chunks(n, [&](std::size_t, std::size_t b, std::size_t e) { fn(b, e); });
}

// Sum of term(i) for i in [0, n), accumulated per chunk then merged in order.
template <class Term>
double sum(std::size_t n, Term&& term) {
    std::vector<double> partial(chunk_count(n), 0.0);
    for_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) acc += term(i);
        partial[c] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

// Same as sum() for K simultaneous accumulators: term(i, acc) adds into acc.
template <std::size_t K, class Term>
std::array<double, K> sums(std::size_t n, Term&& term) {
    std::vector<std::array<double, K>> partial(chunk_count(n), std::array<double, K>{});
    for_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
        std::array<double, K> acc{};
        for (std::size_t i = b; i < e; ++i) term(i, acc);
        partial[c] = acc;
    });
    std::array<double, K> total{};
    for (const auto& p : partial)
        for (std::size_t k = 0; k < K; ++k) total[k] += p[k];
    return total;
}

}  // namespace parallel
}  // namespace driftreg
