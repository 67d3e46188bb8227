#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rtrl {

/// SplitMix64 finalizer. Used both for deriving child seeds and as the
/// fingerprint bit hash, so its constants are fixed forever.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seedable 64-bit generator (std::mt19937_64) with a splitting rule.
///
/// A child stream for indices (i0, i1, ...) is seeded with
///   s = splitmix64(seed); s = splitmix64(s ^ splitmix64(i_k + 1)) for each k
/// so rollouts keyed by (step, group, completion) draw the same numbers no
/// matter which thread produces them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return Rng(derive(seed, path));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) built from the top 53 bits (platform independent).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Rejection sampling, platform independent.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace rtrl
