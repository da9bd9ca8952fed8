#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace volt {

// Seeded generator that can be split by a string label. Streams derived from
// the same (seed, label) pair are identical regardless of the order in which
// other streams were created, so initialization does not depend on call order
// or thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  Rng split(std::string_view label) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  std::size_t uniform_index(std::size_t n);  // [0, n)

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);

}  // namespace volt
