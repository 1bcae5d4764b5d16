#ifndef ISTLAB_RANDOM_HPP
#define ISTLAB_RANDOM_HPP

// Seed streams and replica-parallel loops.
//
// Splitting rule: replica i of a run seeded with s draws from
//   mt19937_64(splitmix64(s ^ splitmix64(i + 1)))
// so every replica's stream depends only on (s, i), never on scheduling or
// on the number of worker threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace istlab {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

inline Rng replica_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(replica_seed(seed, index));
}

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_exponential(Rng& rng) { return -std::log(uniform_open(rng)); }

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> n{0};
  return n;
}
}  // namespace detail

/// Worker count: explicit setting, else IST_LAB_THREADS, else hardware.
inline unsigned thread_count() {
  unsigned n = detail::thread_setting().load();
  if (n > 0) return n;
  if (const char* env = std::getenv("IST_LAB_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_thread_count(unsigned n) { detail::thread_setting().store(n); }

/// Runs fn(i) for i in [0, n) on up to thread_count() workers. fn must only
/// write to per-index output. The first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    try {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next.store(n);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Replica map: out[i] = fn(i, rng_i) with rng_i from the splitting rule.
template <class T, class Fn>
std::vector<T> replicate(std::size_t n, std::uint64_t seed, Fn&& fn) {
  std::vector<T> out(n);
  parallel_for(n, [&](std::size_t i) {
    Rng rng = replica_rng(seed, i);
    out[i] = fn(i, rng);
  });
  return out;
}

}  // namespace istlab

#endif
