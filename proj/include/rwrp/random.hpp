#pragma once

#include <cstdint>

#include "rwrp/lattice.hpp"

namespace rwrp {

// SplitMix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Injective in index for a fixed master seed.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + (index + 1) * kGolden);
}

constexpr double to_unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Uniform in [0,1) keyed by (seed, lattice coordinates). Keying on coordinates
// rather than box index keeps environments consistent across box radii.
inline double site_uniform(std::uint64_t seed, const BoxGeometry& box, SiteIndex index) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (int a = 0; a < box.dimension(); ++a) {
    const auto c = static_cast<std::uint64_t>(static_cast<std::int64_t>(box.coordinate(index, a)));
    h = mix64(h + kGolden + c);
  }
  return to_unit_interval(h);
}

}  // namespace rwrp
