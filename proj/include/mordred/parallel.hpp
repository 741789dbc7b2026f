#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace mordred {

/// Runs body(i) for i in [0, n). With `parallel` set the iterations are spread
/// over OpenMP threads; otherwise they run in order on the calling thread.
/// The first exception thrown by any iteration is rethrown after the loop.
/// Bodies must write only to slot i of preallocated outputs so results do not
/// depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, bool parallel, Body&& body) {
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace mordred
