#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rsim {

/// Hardware concurrency with a floor of one.
inline std::size_t default_jobs() noexcept { return std::max<std::size_t>(1, std::thread::hardware_concurrency()); }

/// Calls fn(worker, begin, end) over contiguous chunks of [0, n). Chunk
/// boundaries depend only on (n, jobs); results must not depend on them.
/// The first exception thrown by any worker is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      const std::size_t begin = n * w / jobs;
      const std::size_t end = n * (w + 1) / jobs;
      workers.emplace_back([&, w, begin, end] {
        try {
          fn(w, begin, end);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace rsim
