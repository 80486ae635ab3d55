#include "compresslab/concurrency.hpp"

#include <stdexcept>

namespace compresslab {

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t max_in_flight) : capacity_(max_in_flight) {
    if (capacity_ == 0) throw std::invalid_argument("max_concurrency must be >= 1");
}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < capacity_; });
    ++in_flight_;
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

}  // namespace compresslab
