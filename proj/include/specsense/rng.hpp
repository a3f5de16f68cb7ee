#pragma once

#include <cstdint>
#include <random>

namespace specsense {

// splitmix64 finalizer; the seed-splitting primitive for every random stream.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from a parent seed and up to two labels.
// per-trial seed = derive_seed(master, exp_id, trial).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                          std::uint64_t b = 0);

// Stream labels for the independent random draws of one trial.
enum class Stream : std::uint64_t {
  Geometry = 1,
  Fading = 2,
  Filters = 3,
  Noise = 4,
  Erasure = 5,
  Occupancy = 6,
  Sketch = 7,
};

/// Portable random source. mt19937_64 is fully specified by the standard;
/// the distribution code lives here so results do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream)
      : engine_(derive_seed(seed, static_cast<std::uint64_t>(stream))) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal (Box-Muller, caches the second variate).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace specsense
