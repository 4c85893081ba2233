#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace tlab {

std::uint64_t splitmix64(std::uint64_t x);

// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t hash_string(std::string_view s);

// Mixes a base seed with a list of integer parts into a new seed. Used for
// every derived stream (per rollout, per prompt, per stage) so results never
// depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

// Thin wrapper over mt19937_64 whose conversions are written out by hand:
// the standard distributions are implementation-defined, which would break
// byte-identical reruns across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), n > 0, unbiased.
  std::uint64_t below(std::uint64_t n);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tlab
