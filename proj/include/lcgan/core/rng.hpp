#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lcgan {

/// Seeded generator with platform-independent draws.
///
/// Only the raw mt19937_64 stream is taken from the standard library; the
/// distribution transforms are written out so that a given seed produces the
/// same sequence with any standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller (no cached second value, so state is the
  /// engine alone).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename Item>
  void shuffle(std::vector<Item>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// A child generator whose seed is derived from this generator's seed
  /// material and a stream tag; does not advance this generator.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::string save_state() const;
  void load_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used to decorrelate derived seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace lcgan
