#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "paths.hpp"

namespace winding {

// Default worker count: WINDING_THREADS if set, else hardware concurrency.
inline unsigned default_threads() {
  if (const char* e = std::getenv("WINDING_THREADS")) {
    const long v = std::strtol(e, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Sample i always uses stream first_stream + i, and lands at index i, so
// the batch does not depend on how many workers produced it.
template <class Fn>
SampleBatch generate_batch(std::size_t n, std::uint64_t seed, std::uint64_t first_stream,
                           const std::string& label, Fn fn, unsigned threads = 0) {
  SampleBatch b;
  b.master_seed = seed;
  b.first_stream = first_stream;
  b.label = label;
  b.values.resize(n);
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  constexpr std::size_t chunk = 256;
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      const std::size_t lo = next.fetch_add(chunk);
      if (lo >= n) return;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) {
          RngStream rng(seed, first_stream + i);
          b.values[i] = fn(rng);
        }
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
        next = n;
        return;
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (err) std::rethrow_exception(err);
  return b;
}

}  // namespace winding
