#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace compresslab {

/// Counting limiter on in-flight calls.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(std::size_t max_in_flight);

    void acquire();
    void release();
    std::size_t capacity() const noexcept { return capacity_; }

    class Permit {
    public:
        explicit Permit(ConcurrencyLimiter& l) : limiter_(&l) { limiter_->acquire(); }
        ~Permit() { limiter_->release(); }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;

    private:
        ConcurrencyLimiter* limiter_;
    };

private:
    std::size_t capacity_;
    std::size_t in_flight_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

/// Runs fn(0..n-1) on up to `workers` threads and returns results in index
/// order, whatever order they complete in. The first exception stops the
/// remaining work from being started and is rethrown after all workers join.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t workers, Fn&& fn) {
    std::vector<std::optional<T>> slots(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mu;

    auto work = [&] {
        while (!failed.load()) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n) return;
            try {
                slots[k].emplace(fn(k));
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                failed.store(true);
            }
        }
    };

    const std::size_t count = std::max<std::size_t>(1, std::min(workers, n));
    if (count == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(count);
        for (std::size_t t = 0; t < count; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<T> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace compresslab
