#pragma once

#include <cstdint>
#include <random>

namespace qici {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent random streams, keyed by what they are used for, so that
/// different estimator variants see identical noise realizations.
enum class Stream : std::uint64_t {
  Trial = 0x54524941,
  Imu = 0x494d55,
  Pixel = 0x504958,
  Graph = 0x475248,
  Init = 0x494e4954,
};

inline std::uint64_t derive_seed(std::uint64_t base, Stream purpose, std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ (index * 0x9e3779b97f4a7c15ULL + 1));
}

inline Rng make_rng(std::uint64_t base, Stream purpose, std::uint64_t index = 0) {
  return Rng(derive_seed(base, purpose, index));
}

/// Seed of Monte-Carlo trial `t` of a scenario seeded with `scenario_seed`.
inline std::uint64_t child_seed(std::uint64_t scenario_seed, std::uint64_t t) {
  return derive_seed(scenario_seed, Stream::Trial, t);
}

/// 64-bit FNV-1a, used for digests of records and configs.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace qici
