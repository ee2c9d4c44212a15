#pragma once

#include <cstdint>

namespace mfkrig {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent sub-seed for stream `index` of `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return base ^ mix64(index + 0x632be59bd9b4e019ULL * (base | 1ULL));
}

}  // namespace mfkrig
