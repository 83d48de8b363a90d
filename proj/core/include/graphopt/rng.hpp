#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace graphopt {

/// Deterministic xoshiro256** generator.
///
/// The 256-bit state is expanded from (seed, stream) with SplitMix64, so
/// stream k of a seed is an independent sequence. Every simulation that is
/// split into blocks uses one stream per block, which makes outputs
/// independent of how many workers consumed the blocks. All derived variates
/// (uniform, normal, exponential, bounded integers) use only integer
/// arithmetic plus log/sqrt, so sequences are identical on every IEEE-754
/// platform with a correctly rounded libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Standard normal via the Marsaglia polar method.
  double normal();
  /// Unit-rate exponential.
  double exponential();
  /// Uniform integer in [0, bound); bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by Rng (std::shuffle is implementation-defined).
template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// SplitMix64 finaliser; also used to derive sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace graphopt
