#include "tcnn/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tcnn {

void parallel_chunks(std::size_t total, std::size_t chunks, unsigned jobs,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (total == 0) return;
  if (chunks == 0) chunks = 1;
  if (chunks > total) chunks = total;

  auto chunk_bounds = [&](std::size_t c) {
    std::size_t base = total / chunks, rem = total % chunks;
    std::size_t begin = c * base + std::min(c, rem);
    std::size_t end = begin + base + (c < rem ? 1 : 0);
    return std::pair<std::size_t, std::size_t>(begin, end);
  };

  unsigned workers = jobs == 0 ? 1 : jobs;
  if (workers <= 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      auto [b, e] = chunk_bounds(c);
      fn(c, b, e);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;

  auto worker = [&] {
    while (true) {
      std::size_t c = next.fetch_add(1);
      if (c >= chunks || failed.load()) return;
      auto [b, e] = chunk_bounds(c);
      try {
        fn(c, b, e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, chunks));
  pool.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

unsigned default_jobs() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

}  // namespace tcnn
