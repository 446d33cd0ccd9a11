#ifndef FAIRFIT_PARALLEL_HPP
#define FAIRFIT_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fairfit {

// Worker count from the FAIRFIT_THREADS environment variable;
// 0 or unset means hardware concurrency.
inline int env_worker_count() {
    const char* raw = std::getenv("FAIRFIT_THREADS");
    int workers = 0;
    if (raw) workers = std::atoi(raw);
    if (workers <= 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        workers = hw == 0 ? 1 : static_cast<int>(hw);
    }
    return workers;
}

// Runs fn(0) .. fn(count - 1), each exactly once, on up to `workers`
// threads. Tasks must write only to their own output slots so results
// do not depend on the schedule. The first exception thrown by any task
// is rethrown after all threads join.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace fairfit

#endif
