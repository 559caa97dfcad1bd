#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "epl/vec.hpp"

namespace epl::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stream key for (seed, tag, rung, index). Every random draw in the library
/// is a pure function of a key and a counter, so scheduling cannot change it.
constexpr std::uint64_t key(std::uint64_t seed, std::string_view tag, std::uint64_t rung = 0,
                            std::uint64_t index = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ hash_tag(tag));
  h = mix64(h ^ rung);
  return mix64(h ^ index);
}

/// Uniform double in [0, 1).
inline double uniform(std::uint64_t k, std::uint64_t counter) {
  return static_cast<double>(mix64(k ^ mix64(counter)) >> 11) * 0x1.0p-53;
}

inline double gaussian(std::uint64_t k, std::uint64_t counter) {
  double u1 = uniform(k, 2 * counter);
  double u2 = uniform(k, 2 * counter + 1);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Van der Corput radical inverse in the given base.
inline double radical_inverse(unsigned base, std::uint64_t i) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

/// Deterministic unit direction number `counter` of the stream `k`.
/// In R^1 directions alternate +-1, in R^2 they follow a rotated golden-angle
/// sequence, above that they are normalized Gaussians.
inline Vec direction(std::size_t n, std::uint64_t k, std::uint64_t counter) {
  if (n == 1) return Vec{counter % 2 == 0 ? 1.0 : -1.0};
  if (n == 2) {
    constexpr double golden = 0.6180339887498949;
    double t = uniform(k, 0) + golden * static_cast<double>(counter);
    double th = 2.0 * std::numbers::pi * (t - std::floor(t));
    return Vec{std::cos(th), std::sin(th)};
  }
  Vec d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = gaussian(k, counter * n + i);
  double nd = norm(d);
  if (nd == 0.0) return unit(n, 0);
  return d / nd;
}

}  // namespace epl::rng
