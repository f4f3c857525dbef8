#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cgl {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed for a named subsystem: mix64(master ^ fnv1a(label)). Adding a new
/// label never changes the seeds of existing ones.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
  return mix64(master ^ fnv1a(label));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index + 0x5851F42D4C957F2DULL));
}

/// Seeded generator with distribution helpers that do not depend on the
/// standard library's unspecified distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (one value per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace cgl
