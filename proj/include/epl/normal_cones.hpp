#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "epl/objective.hpp"
#include "epl/random.hpp"
#include "epl/set_oracle.hpp"

namespace epl {

/// Discretization of x -> xbar: rungs of annuli [sigma rho_j, rho_j], rho_j = rho0 sigma^j.
struct RadiusLadder {
  double rho0 = 0.1;
  double sigma = 0.5;
  int rungs = 14;
  int samples = 512;
  std::uint64_t seed = 0x5eed;

  void validate() const {
    if (!(rho0 > 0.0)) throw InputError("ladder: rho0 must be positive");
    if (!(sigma > 0.0 && sigma < 1.0)) throw InputError("ladder: sigma must lie in (0,1)");
    if (rungs < 1 || samples < 1) throw InputError("ladder: rungs and samples must be positive");
    if (!(rho0 * std::pow(sigma, rungs) > 1e-12))
      throw InputError("ladder: finest radius falls below the 1e-12 noise floor");
  }
  double radius(int j) const { return rho0 * std::pow(sigma, j); }
  /// First rung of the aggregation window (the last max(3, J/4) rungs).
  int window_start() const { return std::max(0, rungs - std::max(3, rungs / 4)); }

  /// Probe j,s: a point in the annulus of rung j around xbar.
  Vec probe(const Vec& xbar, std::string_view tag, int j, int s) const {
    auto k = rng::key(seed, tag, static_cast<std::uint64_t>(j));
    double frac = sigma + (1.0 - sigma) * rng::radical_inverse(3, static_cast<std::uint64_t>(s) + 1);
    return xbar + rng::direction(xbar.size(), k, static_cast<std::uint64_t>(s)) * (radius(j) * frac);
  }
};

struct ResidualEstimate {
  double value = 0.0;
  bool isolated = false;
  /// Per-rung values over the aggregation window, coarsest first.
  std::vector<double> per_rung;
};

/// Finite sample of a limiting normal cone: unit directions observed at the finest rungs.
struct ConeSample {
  Vec base;
  std::vector<Vec> directions;
  std::vector<double> radii;

  json to_json() const {
    json d = json::array();
    for (const auto& v : directions) d.push_back(schema::to_json(v));
    return {{"base", schema::to_json(base)}, {"directions", d}, {"radii", radii}};
  }
};

/// Greedy angular clustering; each cluster is represented by its normalized mean.
inline std::vector<Vec> cluster_directions(const std::vector<Vec>& dirs, double tol_angle) {
  std::vector<Vec> sums;
  std::vector<Vec> reps;
  for (const auto& d : dirs) {
    bool merged = false;
    for (std::size_t c = 0; c < reps.size(); ++c) {
      if (angle_between(reps[c], d) <= tol_angle) {
        sums[c] += d;
        reps[c] = normalized(sums[c]);
        merged = true;
        break;
      }
    }
    if (!merged) {
      sums.push_back(d);
      reps.push_back(normalized(d));
    }
  }
  return reps;
}

/// Sampled set points near xbar at rung j (inside probes and projections of outside probes).
inline std::vector<Vec> sample_set_points(const Set& set, const Vec& xbar, const RadiusLadder& ladder,
                                          int j, std::string_view tag) {
  std::vector<Vec> pts;
  double rho = ladder.radius(j);
  for (int s = 0; s < ladder.samples; ++s) {
    Vec p = ladder.probe(xbar, tag, j, s);
    if (set.inside(p)) {
      pts.push_back(std::move(p));
      continue;
    }
    Vec w = set.project(p);
    double r = dist(w, xbar);
    if (r > 0.0 && r <= rho) pts.push_back(std::move(w));
  }
  return pts;
}

/// Estimate of limsup_{x -> xbar, x in set} <x*, x - xbar> / ||x - xbar||.
inline ResidualEstimate eps_normal_residual(const Set& set, const Vec& xbar, const Vec& xstar,
                                            const RadiusLadder& ladder = {}, double tol_feas = 1e-9) {
  ladder.validate();
  set.check_dim(xbar);
  set.check_dim(xstar);
  if (!set.contains(xbar, tol_feas)) throw PreconditionError("eps_normal_residual: base point not in set");
  ResidualEstimate out;
  const double nx = norm(xstar);
  const Vec u = normalized(xstar);
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int j = ladder.window_start(); j < ladder.rungs; ++j) {
    double sup = -std::numeric_limits<double>::infinity();
    for (const auto& x : sample_set_points(set, xbar, ladder, j, "eps_normal")) {
      Vec d = x - xbar;
      double n = norm(d);
      if (n == 0.0) continue;
      sup = std::max(sup, nx == 0.0 ? 0.0 : dot(u, d) / n);
    }
    if (std::isfinite(sup)) {
      sup *= nx;
      any = true;
      best = std::max(best, sup);
    }
    out.per_rung.push_back(sup);
  }
  out.isolated = !any;
  out.value = any ? best : -std::numeric_limits<double>::infinity();
  return out;
}

/// Accepts x* as an eps-normal when the residual is at most eps + tol_res.
inline bool is_eps_normal(const ResidualEstimate& r, double eps, double tol_res = 1e-3) {
  return r.value <= eps + tol_res;
}

/// Sample of N(xbar; set) from normalized x - project(x) over shrinking balls.
inline ConeSample limiting_cone_sample(const Set& set, const Vec& xbar, const RadiusLadder& ladder = {},
                                       double tol_angle = 0.02, double tol_feas = 1e-9) {
  ladder.validate();
  if (!set.contains(xbar, tol_feas)) throw PreconditionError("limiting_cone_sample: base point not in set");
  auto rung_dirs = [&](int j) {
    std::vector<Vec> dirs;
    for (int s = 0; s < ladder.samples; ++s) {
      Vec p = ladder.probe(xbar, "limiting_cone", j, s);
      if (set.inside(p)) continue;
      Vec v = p - set.project(p);
      if (norm(v) > 0.0) dirs.push_back(normalized(v));
    }
    return cluster_directions(dirs, tol_angle);
  };
  ConeSample out{xbar, {}, {}};
  const int fine = ladder.rungs - 1;
  auto finest = rung_dirs(fine);
  auto second = ladder.rungs >= 2 ? rung_dirs(fine - 1) : finest;
  for (const auto& d : finest) {
    bool recurs = std::any_of(second.begin(), second.end(),
                              [&](const Vec& e) { return angle_between(d, e) <= tol_angle; });
    if (recurs) out.directions.push_back(d);
  }
  out.radii = {ladder.radius(fine), ladder.radius(std::max(0, fine - 1))};
  return out;
}

/// Angular distance from v to the sampled directions; +inf for an empty sample.
inline double cone_angular_distance(const ConeSample& cone, const Vec& v) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& d : cone.directions) best = std::min(best, angle_between(d, v));
  return best;
}

inline bool cone_membership(const ConeSample& cone, const Vec& v, double tol_angle = 0.02,
                            std::string* diagnostic = nullptr) {
  if (norm(v) == 0.0) return true;
  if (cone.directions.empty()) {
    if (diagnostic) *diagnostic = "empty cone sample";
    return false;
  }
  return cone_angular_distance(cone, v) <= tol_angle;
}

/// Estimate of liminf_{x -> xbar} (f(x) - f(xbar) - <x*, x - xbar>) / ||x - xbar||.
inline ResidualEstimate frechet_subdiff_residual(const Objective& f, const Vec& xbar, const Vec& xstar,
                                                 const RadiusLadder& ladder = {}) {
  ladder.validate();
  double f0 = f(xbar);
  if (!std::isfinite(f0)) throw PreconditionError("frechet_subdiff_residual: f is not finite at the base point");
  xbar.check_same(xstar);
  ResidualEstimate out;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < ladder.rungs; ++j) {
    double inf = std::numeric_limits<double>::infinity();
    for (int s = 0; s < ladder.samples; ++s) {
      Vec x = ladder.probe(xbar, "frechet_subdiff", j, s);
      double fx = f(x);
      if (std::isnan(fx) || fx == std::numeric_limits<double>::infinity()) continue;
      Vec d = x - xbar;
      inf = std::min(inf, (fx - f0 - dot(xstar, d)) / norm(d));
    }
    out.per_rung.push_back(inf);
    if (j >= ladder.window_start()) best = std::min(best, inf);
  }
  out.value = best;
  return out;
}

inline bool fermat_check(const Objective& f, const Vec& xbar, const RadiusLadder& ladder = {},
                         double tol_res = 1e-3) {
  return frechet_subdiff_residual(f, xbar, Vec(xbar.size()), ladder).value >= -tol_res;
}

}  // namespace epl
