#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <initializer_list>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "epl/errors.hpp"

namespace epl {

/// Dense vector in R^n. Used both for primal points and dual vectors.
class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double value = 0.0) : v_(n, value) {}
  Vec(std::initializer_list<double> values) : v_(values) {}
  explicit Vec(std::vector<double> values) : v_(std::move(values)) {}

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::vector<double>& values() const noexcept { return v_; }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }

  Vec& operator+=(const Vec& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
  }
  Vec& operator/=(double s) {
    for (double& x : v_) x /= s;
    return *this;
  }

  bool operator==(const Vec& o) const = default;

  void check_same(const Vec& o) const {
    if (o.size() != size())
      throw InputError("dimension mismatch: " + std::to_string(size()) + " vs " +
                       std::to_string(o.size()));
  }

 private:
  std::vector<double> v_;
};

using Point = Vec;
using DualVector = Vec;

inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator-(Vec a) { return a *= -1.0; }
inline Vec operator*(Vec a, double s) { return a *= s; }
inline Vec operator*(double s, Vec a) { return a *= s; }
inline Vec operator/(Vec a, double s) { return a /= s; }

inline double dot(const Vec& a, const Vec& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }
inline double dist(const Vec& a, const Vec& b) { return norm(a - b); }

inline bool all_finite(const Vec& a) {
  return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

/// Unit vector in the direction of `a`; zero stays zero.
inline Vec normalized(const Vec& a) {
  double n = norm(a);
  return n > 0.0 ? a / n : a;
}

/// Angle in [0, pi] between two nonzero vectors.
inline double angle_between(const Vec& a, const Vec& b) {
  double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return std::numbers::pi;
  double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  // acos is ill-conditioned near +-1; use the chord for small angles.
  if (c > 0.99) return 2.0 * std::asin(std::min(1.0, norm(a / na - b / nb) / 2.0));
  return std::acos(c);
}

inline Vec unit(std::size_t n, std::size_t i) {
  Vec e(n);
  e[i] = 1.0;
  return e;
}

inline Vec concat(const std::vector<Vec>& parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return Vec(std::move(out));
}

inline std::string to_string(const Vec& a) {
  std::string s = "(";
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s += ", ";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", a[i]);
    s += buf;
  }
  return s + ")";
}

}  // namespace epl
