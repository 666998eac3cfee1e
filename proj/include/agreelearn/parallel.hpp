#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace agreelearn {

namespace detail {

inline std::atomic<std::size_t>& thread_setting() {
  static std::atomic<std::size_t> threads{0};
  return threads;
}

inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}

}  // namespace detail

/// Worker count used by parallel_for when the caller does not pass one.
/// Zero means "one per hardware thread".
inline void set_thread_count(std::size_t threads) { detail::thread_setting() = threads; }

inline std::size_t thread_count() {
  std::size_t t = detail::thread_setting();
  if (t == 0) t = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return t;
}

/// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
/// results do not depend on scheduling. Nested calls run serially on the
/// calling worker. If several indices throw, the lowest index wins.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t threads = 0) {
  if (threads == 0) threads = thread_count();
  threads = std::min(threads, n);
  if (threads <= 1 || detail::inside_parallel_region()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        detail::inside_parallel_region() = true;
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// splitmix64 finalizer; used to derive independent seeds for folds, sweep
/// entries and inner validation from a single run seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ b);
}

}  // namespace agreelearn
