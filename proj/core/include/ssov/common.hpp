#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ssov {

// Thrown for malformed inputs: schema mismatches, invariant violations,
// infeasible option combinations. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown for numerical failures: singular designs, degenerate instruments,
// non-finite intermediate results. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Every candidate moment had zero scale (e.g. exact-fit residuals). Callers
// running a full test pipeline report this as a degenerate outcome instead
// of failing.
class DegenerateMomentsError : public NumericalError {
 public:
  explicit DegenerateMomentsError(const std::string& msg)
      : NumericalError(msg) {}
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Substream seed for replication `idx` of a run seeded with `seed`.
// Results must not depend on how replications are distributed over
// threads, so every consumer derives its engine from this and nothing else.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t idx) {
  return splitmix64(splitmix64(seed) ^ splitmix64(idx + 0x51ED2701FFULL));
}

inline std::mt19937_64 substream_engine(std::uint64_t seed, std::uint64_t idx) {
  return std::mt19937_64(substream_seed(seed, idx));
}

// Runs body(i) for i in [0, count) on up to `threads` workers over contiguous
// blocks. Callers own determinism: body(i) may only write to slot i.
inline void parallel_for(std::int64_t count, int threads,
                         const std::function<void(std::int64_t)>& body) {
  if (threads <= 1 || count < 2) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  int workers = std::min<std::int64_t>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::int64_t chunk = (count + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    std::int64_t lo = t * chunk;
    std::int64_t hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (std::int64_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace ssov
