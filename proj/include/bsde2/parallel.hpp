#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace bsde2 {

/// Worker count from BSDE2_THREADS; 1 when unset or invalid.
inline std::size_t default_thread_count() {
    const char* env = std::getenv("BSDE2_THREADS");
    if (env == nullptr) return 1;
    try {
        const long v = std::stol(env);
        return v > 0 ? static_cast<std::size_t>(v) : 1;
    } catch (...) {
        return 1;
    }
}

/// Runs body(i) for i in [begin, end) on `workers` threads with contiguous
/// static blocks. The body must write only to slots owned by i, which keeps
/// results independent of the worker count.
template <typename Body>
void parallel_for(std::size_t begin, std::size_t end, std::size_t workers, Body&& body) {
    if (end <= begin) return;
    const std::size_t total = end - begin;
    workers = std::clamp<std::size_t>(workers, 1, total);
    if (workers == 1) {
        for (std::size_t i = begin; i < end; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    const std::size_t block = (total + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = begin + w * block;
        const std::size_t hi = std::min(end, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi, w] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace bsde2
