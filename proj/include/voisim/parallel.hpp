#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace voisim {

/// Worker count: explicit request, else VOISIM_WORKERS, else hardware.
inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("VOISIM_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Run fn(i) for i in [0, count) over `workers` threads. Work is split into
/// contiguous chunks; callers write to disjoint indices, so the result never
/// depends on the worker count.
inline void parallel_for(long count, int workers, const std::function<void(long)>& fn) {
    workers = resolve_workers(workers);
    if (workers <= 1 || count <= 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    const long chunks = std::min<long>(workers, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(chunks));
    std::exception_ptr error;
    std::mutex error_mutex;
    for (long c = 0; c < chunks; ++c) {
        const long begin = count * c / chunks;
        const long end = count * (c + 1) / chunks;
        pool.emplace_back([&, begin, end] {
            try {
                for (long i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace voisim
