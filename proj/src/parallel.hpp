#ifndef SAP_SRC_PARALLEL_HPP
#define SAP_SRC_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sap::detail {

// Index-parallel loop over independent work items. Results must be
// written by index so the outcome is identical regardless of
// scheduling; the first exception is rethrown after all workers join.
template <typename F>
void parallel_for(int n, F&& body) {
    const unsigned hw = std::thread::hardware_concurrency();
    const int workers = std::min<int>(n, static_cast<int>(hw ? hw : 1));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace sap::detail

#endif
