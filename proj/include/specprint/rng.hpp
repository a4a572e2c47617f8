#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace specprint {

/// PCG32 (XSH-RR output, 64-bit LCG state).
///
/// State update: state = state * 6364136223846793005 + inc, where inc = (stream << 1) | 1.
/// Output: xorshift-high then a data-dependent rotate of the old state. The raw u32 stream
/// depends only on integer arithmetic, so it is identical on every platform.
///
/// Sub-streams: `Rng::derive(seed, key)` gives an independent generator for work item `key`
/// (a model id, a pair index, ...). It seeds state with splitmix64(seed ^ splitmix64(key))
/// and uses `key` as the PCG stream selector.
class Rng {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kDefaultStream = 1442695040888963407ULL >> 1;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = kDefaultStream);

  static Rng derive(std::uint64_t seed, std::uint64_t key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n) in random order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace specprint
