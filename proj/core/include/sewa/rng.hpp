#pragma once

// Counter-based random numbers. Every draw is a pure function of a key and a
// counter, so results never depend on how many draws happened elsewhere.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sewa::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a seed and any number of integer words into one 64-bit key.
template <class... Words>
constexpr std::uint64_t derive(std::uint64_t seed, Words... words) noexcept {
  std::uint64_t h = mix64(seed + kGolden);
  ((h = mix64(h ^ (static_cast<std::uint64_t>(words) * 0xd6e8feb86659fd93ULL +
                   0x632be59bd9b4e019ULL))),
   ...);
  return h;
}

// Maps 64 random bits to the open interval (0, 1). Uses the top 52 bits so
// the result is exact in double precision and never equals 0 or 1.
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// Unbiased-enough integer in [0, n) via the multiply-high trick.
__extension__ using uint128 = unsigned __int128;

constexpr std::uint64_t below(std::uint64_t bits, std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<uint128>(bits) * n) >> 64);
}

// Output i of the stream is mix64(key + (i + 1) * kGolden), i.e. splitmix64.
class Stream {
 public:
  constexpr explicit Stream(std::uint64_t key) noexcept : state_(key) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  constexpr double uniform() noexcept { return to_open_unit(next()); }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  constexpr std::uint64_t below(std::uint64_t n) noexcept {
    return rng::below(next(), n);
  }

  // Box-Muller; consumes two uniforms per call.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace sewa::rng
