#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

// Platform-stable random helpers: std::mt19937_64 output is fixed by the standard, but the std
// distributions and std::shuffle are not, so sampling is done here.
namespace lexdrift::rnd {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t below(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - (Engine::max() % n + 1) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return x % n;
}

inline bool coin(Engine& rng) { return (rng() >> 63) != 0; }

/// Uniform double in [0, 1).
inline double uniform(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double normal(Engine& rng) {
  double u1;
  do {
    u1 = uniform(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Engine& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(below(rng, i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

/// First `k` elements of a uniform random permutation of `v`.
template <typename T>
std::vector<T> sample(std::vector<T> v, std::size_t k, Engine& rng) {
  for (std::size_t i = 0; i < k && i < v.size(); ++i) {
    const auto j = i + static_cast<std::size_t>(below(rng, v.size() - i));
    using std::swap;
    swap(v[i], v[j]);
  }
  v.resize(std::min(k, v.size()));
  return v;
}

}  // namespace lexdrift::rnd
