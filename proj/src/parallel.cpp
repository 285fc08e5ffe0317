#include "pulse/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pulse {

std::size_t resolve_threads(std::size_t requested) {
  std::size_t cap = 0;
  if (const char* env = std::getenv("PULSE_SEQ_THREADS")) {
    try {
      cap = static_cast<std::size_t>(std::stoul(env));
    } catch (...) {
      cap = 0;
    }
  }
  std::size_t n = requested;
  if (n == 0) n = cap != 0 ? cap : std::max(1u, std::thread::hardware_concurrency());
  if (cap != 0) n = std::min(n, cap);
  return std::max<std::size_t>(n, 1);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min(std::max<std::size_t>(threads, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace pulse
