#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cts {

/// Deterministic, platform-independent PRNG: xoshiro256** seeded through
/// SplitMix64. All sampling helpers below are implemented here rather than
/// via <random> distributions, whose output is implementation-defined.
///
/// `split(k)` derives an independent child stream from the generator's seed
/// material and a stream key without advancing the parent, so the child
/// depends only on (seed, path of keys).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Child stream keyed by `key`; does not advance this generator.
  Rng split(std::uint64_t key) const;

  /// Uniform integer in [0, n); n must be > 0. Unbiased (Lemire).
  std::uint64_t uniform_index(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

  bool bernoulli(double p) { return uniform01() < p; }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// k distinct indices from [0, n) in sampling order (partial
  /// Fisher-Yates). Requires k <= n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

/// SplitMix64 finalizer; also used to mix stream keys.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Combine a seed with a sequence of integer keys into a derived seed.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> keys) noexcept;

}  // namespace cts
