#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace ami {

// Counter-based seed derivation: one master seed fans out into independent
// named streams so that adding a consumer never shifts the draws of another.
// Streams are identified by a label plus an integer index (worker id, seed
// slot, ...).

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derive a child seed from (master, stream label, index).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master ^ fnv1a64(label));
  return splitmix64(h ^ splitmix64(index));
}

/// Engine for a named stream of a master seed.
inline std::mt19937_64 make_engine(std::uint64_t master, std::string_view label,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(master, label, index));
}

}  // namespace ami
