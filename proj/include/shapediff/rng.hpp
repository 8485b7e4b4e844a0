#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace shapediff {

// Deterministic random source.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard library distributions are not (their algorithms are
// implementation-defined), so every distribution used by this project is
// implemented here:
//   uniform()  - top 53 bits of one engine draw, scaled to [0, 1)
//   below(n)   - rejection sampling on the top of the 64-bit range, unbiased
//   normal()   - Box-Muller on two uniform() draws, the sine branch is cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Seed for a named sub-stream: splitmix64(seed ^ fnv1a64(tag)).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace shapediff
