#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace rtdnas {

// Deterministic random source. The standard distributions are
// implementation-defined, so sampling is done by hand on top of the engine
// to keep outputs identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent sub-stream derived from a global seed and a stream name
  // ("search", "ga", "sampling", ...).
  static Rng stream(std::uint64_t seed, std::string_view name);

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);

  // Standard normal via Box-Muller.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name);

}  // namespace rtdnas
