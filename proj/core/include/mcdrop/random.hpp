#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mcdrop {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed for the stream identified by (master, coordinates...). The result
/// depends only on its arguments, never on the order streams are created.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t c : coords) s = mix64(s ^ mix64(c + 0x632BE59BD9B4E019ULL));
  return s;
}

/// Random stream used throughout the library.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  bool bernoulli(double p) { return uniform01() < p; }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(engine_); }
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64 &engine() noexcept { return engine_; }

private:
  std::mt19937_64 engine_;
};

} // namespace mcdrop
