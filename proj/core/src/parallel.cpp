#include "driftreg/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace driftreg {
namespace {

std::size_t default_thread_count() {
    if (const char* env = std::getenv("DRIFTREG_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

std::atomic<std::size_t> g_override{0};

}  // namespace

std::size_t thread_count() {
    const std::size_t o = g_override.load(std::memory_order_relaxed);
    if (o != 0) return o;
    static const std::size_t dflt = default_thread_count();
    return dflt;
}

void set_thread_count(std::size_t n) { g_override.store(n, std::memory_order_relaxed); }

}  // namespace driftreg
