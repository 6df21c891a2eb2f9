#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gcnstab {

// Worker pool size: GCNSTAB_THREADS when set, hardware concurrency otherwise.
inline int worker_count() {
    if (const char* env = std::getenv("GCNSTAB_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for every i in [0, count). Each call must write only its own
// result slot; aggregation then happens by index, so the outcome does not
// depend on thread scheduling. The first exception cancels remaining work
// and is rethrown after all workers join.
template <typename Fn>
void parallel_for(int count, const Fn& fn, int workers = 0) {
    if (count <= 0) return;
    if (workers <= 0) workers = worker_count();
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= count) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                    next.store(count);
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// Pairwise summation in index order; used for all cross-trial reductions so
// totals are bit-identical however the trials were scheduled.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += v[i];
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

}  // namespace gcnstab
