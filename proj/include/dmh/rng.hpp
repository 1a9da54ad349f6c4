#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dmh {

using Rng = std::mt19937_64;

// Stream tags keep independent random streams apart when they are derived
// from the same (seed, generation, index) counter.
enum class Stream : std::uint64_t {
  kInit = 1,
  kNoise = 2,
  kInstanceDraw = 3,
  kEpisode = 4,
  kRanking = 5,
  kGenerator = 6,
  kArrivalNoise = 7,
  kEvaluation = 8,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a sequence of counters into one well-mixed 64-bit seed. The result
/// depends only on the values and their order, never on call history.
inline constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) { return Rng{derive_seed(parts)}; }

inline constexpr std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

}  // namespace dmh
