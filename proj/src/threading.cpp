#include "cell/threading.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cell::threading {

namespace {

int read_env_threads() {
  if (const char* s = std::getenv("CELL_THREADS")) {
    int n = std::atoi(s);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int& thread_cap() {
  static int cap = read_env_threads();
  return cap;
}

}  // namespace

int max_threads() { return thread_cap(); }

void set_max_threads(int n) { thread_cap() = n < 1 ? 1 : n; }

void for_chunks(std::size_t n, std::size_t chunk_size,
                const std::function<void(std::size_t, std::size_t,
                                         std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t num_chunks = (n + chunk_size - 1) / chunk_size;
  const int workers =
      static_cast<int>(std::min<std::size_t>(num_chunks,
                                             static_cast<std::size_t>(max_threads())));
  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    try {
      for (;;) {
        std::size_t c = next.fetch_add(1);
        if (c >= num_chunks) return;
        fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace cell::threading
