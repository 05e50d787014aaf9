#pragma once

// Worker-thread control. GAITFI_THREADS caps parallelism everywhere.
// parallel_for assigns each index to exactly one worker, so float
// accumulation order never depends on the thread count.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gaitfi {

inline int max_threads() {
    static const int cached = [] {
#ifdef _OPENMP
        int hw = omp_get_max_threads();
#else
        int hw = 1;
#endif
        if (const char* env = std::getenv("GAITFI_THREADS")) {
            int cap = std::atoi(env);
            if (cap >= 1 && cap < hw) return cap;
        }
        return hw;
    }();
    return cached;
}

template <class F>
void parallel_for(int64_t n, F&& body) {
    if (n <= 0) return;
#ifdef _OPENMP
    if (n > 1 && max_threads() > 1) {
#pragma omp parallel for schedule(static) num_threads(max_threads())
        for (int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) body(i);
}

// For bodies that may throw (an exception escaping an OpenMP region aborts):
// captures the first exception, skips remaining work, rethrows afterwards.
template <class F>
void parallel_for_checked(int64_t n, F&& body) {
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    parallel_for(n, [&](int64_t i) {
        if (failed.load(std::memory_order_relaxed)) return;
        try {
            body(i);
        } catch (...) {
            if (!failed.exchange(true)) err = std::current_exception();
        }
    });
    if (err) std::rethrow_exception(err);
}

}  // namespace gaitfi
