#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace splitpit {

/// Seedable generator with distribution helpers whose output does not depend
/// on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool coin() { return (next() >> 63) != 0; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

  /// Child generator for a named sub-stream: seed = hash(seed, name).
  static Rng derive(std::uint64_t seed, std::string_view name) {
    return Rng(derive_seed(seed, name));
  }

  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

 private:
  std::mt19937_64 engine_;
};

}  // namespace splitpit
