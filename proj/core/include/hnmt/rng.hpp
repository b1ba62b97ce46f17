#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hnmt {

/// xoshiro256** seeded through splitmix64. All randomness in the project
/// (initialization, shuffling, synthetic data, pseudo recommendations) goes
/// through this generator so that a seed fully determines every artifact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next();

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// Derive an independent stream, e.g. one per sentence.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t s_[4];
};

}  // namespace hnmt
