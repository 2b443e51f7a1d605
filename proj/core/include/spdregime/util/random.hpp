#pragma once

#include <cstdint>

namespace spdregime::util {

/// One step of the splitmix64 mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent seed for a named sub-stream of `base` (e.g. one per window).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

}  // namespace spdregime::util
