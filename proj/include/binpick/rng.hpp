#pragma once

#include <cstdint>
#include <random>

namespace binpick {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate sub-streams that share a seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for one purpose (scene, depth noise, mask corruption...)
/// of one seed.
enum class Stream : std::uint64_t {
  Scene = 1,
  Depth = 2,
  Corruption = 3,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng{mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(stream)))};
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>{lo, hi}(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>{lo, hi}(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::bernoulli_distribution{p}(rng);
}

}  // namespace binpick
