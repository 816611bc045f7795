#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "etk/types.hpp"

namespace etk::rng {

// Counter-based generator: every stream is a pure function of
// (seed, stream name, up to two indices, draw counter). Draws are therefore
// reproducible and independent of the order in which streams are consumed.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a over the stream name, so keys survive recompilation and reordering.
constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view name, std::uint64_t index0 = 0,
         std::uint64_t index1 = 0) {
    std::uint64_t k = splitmix64(seed + kGolden);
    k = splitmix64(k ^ hash_name(name));
    k = splitmix64(k ^ (index0 + kGolden));
    key_ = splitmix64(k ^ (index1 + kGolden));
  }

  std::uint64_t next_u64() { return splitmix64(key_ + (++counter_) * kGolden); }

  // Uniform on (0, 1); offset keeps log() finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // One Box-Muller normal per pair of uniforms.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec normal_vec(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace etk::rng
