#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mpfb {

// Derives a named sub-seed from a global seed so that every consumer of
// randomness in the pipeline gets its own deterministic stream.  FNV-1a over
// the stream name, mixed with the parent seed.
inline std::uint64_t sub_seed(std::uint64_t global_seed, std::string_view stream) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 1099511628211ull;
  }
  h ^= global_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t global_seed, std::string_view stream) {
  return std::mt19937_64(sub_seed(global_seed, stream));
}

}  // namespace mpfb
