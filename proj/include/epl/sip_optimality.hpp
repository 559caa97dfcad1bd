#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "epl/intersection_calculus.hpp"
#include "epl/objective.hpp"

namespace epl {

enum class Verdict { Pass, Fail, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct SIPProblem {
  Objective objective;
  IndexedFamily constraints;
  /// Constraint indices probed by the representation check.
  std::vector<int> indices{1};
  bool assume_aqc = true;
};

struct SIPConfig {
  std::vector<double> eps{0.1, 0.05, 0.02, 0.01};
  RadiusLadder ladder{0.1, 0.5, 12, 64, 0x5eed};
  double tol_res = 1e-3;
  double cluster_tol = 1e-2;
  /// Growth of the per-rung Lipschitz quotient tolerated before phi counts as non-Lipschitz.
  double lipschitz_growth = 4.0;
  RepresentationConfig representation;
};

struct SubdiffSample {
  std::vector<Vec> vectors;
  std::string diagnostic;
};

namespace detail {

inline Vec sip_probe(const Vec& xbar, const RadiusLadder& ladder, int rung, int s) {
  auto key = rng::key(ladder.seed, "sip_probe");
  return xbar + rng::direction(xbar.size(), key, static_cast<std::uint64_t>(s)) *
                    (ladder.rho0 * std::pow(ladder.sigma, rung));
}

inline Vec central_gradient(const Objective& f, const Vec& x, double h) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vec e = unit(x.size(), i) * h;
    g[i] = (f(x + e) - f(x - e)) / (2.0 * h);
  }
  return g;
}

inline void add_unique(std::vector<Vec>& out, const Vec& v, double tol) {
  for (const auto& w : out)
    if (dist(v, w) <= tol * (1.0 + norm(w))) return;
  out.push_back(v);
}

inline Objective negated(const Objective& f) {
  return Objective::custom("neg", f.dimension(), Objective::Kind::General, [f](const Vec& x) { return -f(x); });
}

/// Extreme points of conv(points): a point is dropped when it is a convex combination
/// of the others (affine row enforced by a heavy NNLS weight).
inline std::vector<Vec> hull_extreme_points(const std::vector<Vec>& points) {
  std::vector<Vec> uniq;
  for (const auto& p : points) add_unique(uniq, p, 1e-12);
  if (uniq.size() <= 2) return uniq;
  constexpr double w = 1e4;
  std::vector<Vec> out;
  for (std::size_t j = 0; j < uniq.size(); ++j) {
    std::vector<Vec> cols;
    for (std::size_t i = 0; i < uniq.size(); ++i) {
      if (i == j) continue;
      Vec c(uniq[i].size() + 1);
      for (std::size_t a = 0; a < uniq[i].size(); ++a) c[a] = uniq[i][a];
      c[uniq[i].size()] = w;
      cols.push_back(c);
    }
    Vec target(uniq[j].size() + 1);
    for (std::size_t a = 0; a < uniq[j].size(); ++a) target[a] = uniq[j][a];
    target[uniq[j].size()] = w;
    auto coef = solvers::nnls(cols, target);
    Vec fit(target.size());
    for (std::size_t i = 0; i < cols.size(); ++i) fit += coef[i] * cols[i];
    if (dist(fit, target) > 1e-9 * (1.0 + norm(uniq[j]))) out.push_back(uniq[j]);
  }
  return out;
}

}  // namespace detail

struct LipschitzEstimate {
  double value = 0.0;
  std::vector<double> per_rung;
  bool finite = true;
};

/// Per-rung max of |phi(x) - phi(xbar)| / ||x - xbar||; infinite when it keeps growing.
inline LipschitzEstimate lipschitz_estimate(const Objective& f, const Vec& xbar, const SIPConfig& cfg = {}) {
  double f0 = f(xbar);
  if (!std::isfinite(f0)) throw PreconditionError("objective is not finite at the base point");
  LipschitzEstimate out;
  for (int j = 0; j < cfg.ladder.rungs; ++j) {
    double m = 0.0;
    for (int s = 0; s < cfg.ladder.samples; ++s) {
      Vec x = detail::sip_probe(xbar, cfg.ladder, j, s);
      double fx = f(x);
      if (!std::isfinite(fx)) {
        m = std::numeric_limits<double>::infinity();
        break;
      }
      m = std::max(m, std::abs(fx - f0) / dist(x, xbar));
    }
    out.per_rung.push_back(m);
    out.value = std::max(out.value, m);
  }
  out.finite = std::isfinite(out.value) && out.per_rung.back() <= cfg.lipschitz_growth * out.per_rung.front() + 1e-9;
  if (!out.finite) out.value = std::numeric_limits<double>::infinity();
  return out;
}

/// Sample of the limiting subdifferential at xbar.
inline SubdiffSample subdiff_sample(const Objective& f, const Vec& xbar, const SIPConfig& cfg = {}) {
  SubdiffSample out;
  if (!std::isfinite(f(xbar))) throw PreconditionError("objective is not finite at the base point");
  switch (f.kind()) {
    case Objective::Kind::Smooth:
      out.vectors.push_back(f.gradient(xbar));
      return out;
    case Objective::Kind::ConvexMax:
      out.vectors = detail::hull_extreme_points(f.active_gradients(xbar));
      return out;
    default: break;
  }
  // Gradients along fixed rays recurring on the two finest rungs, plus Frechet
  // subgradients at xbar among the resulting candidates and 0.
  const int J = cfg.ladder.rungs;
  std::vector<Vec> fine, finer;
  for (int j : {J - 2, J - 1})
    for (int s = 0; s < cfg.ladder.samples; ++s) {
      Vec x = detail::sip_probe(xbar, cfg.ladder, j, s);
      Vec g = detail::central_gradient(f, x, 1e-3 * dist(x, xbar));
      if (!all_finite(g)) continue;
      detail::add_unique(j == J - 1 ? finer : fine, g, cfg.cluster_tol);
    }
  for (const auto& g : finer)
    for (const auto& h : fine)
      if (dist(g, h) <= cfg.cluster_tol * (1.0 + norm(h))) {
        detail::add_unique(out.vectors, g, cfg.cluster_tol);
        break;
      }
  std::vector<Vec> candidates{Vec(xbar.size())};
  for (const auto& v : out.vectors) candidates.push_back(v);
  RadiusLadder fl = cfg.ladder;
  fl.samples = std::max(fl.samples, 256);
  for (const auto& c : candidates)
    if (frechet_subdiff_residual(f, xbar, c, fl).value >= -cfg.tol_res) detail::add_unique(out.vectors, c, cfg.cluster_tol);
  if (out.vectors.empty()) out.diagnostic = "no accepted subgradients";
  return out;
}

/// Sample of the Frechet upper subdifferential -d^(-phi)(xbar).
inline SubdiffSample upper_subdiff_sample(const Objective& f, const Vec& xbar, const SIPConfig& cfg = {}) {
  SubdiffSample out;
  if (f.kind() == Objective::Kind::Smooth) {
    out.vectors.push_back(f.gradient(xbar));
    return out;
  }
  Objective g = detail::negated(f);
  std::vector<Vec> candidates{Vec(xbar.size())};
  if (f.kind() == Objective::Kind::ConvexMax)
    for (const auto& a : f.active_gradients(xbar)) candidates.push_back(a);
  for (int s = 0; s < cfg.ladder.samples; ++s) {
    Vec x = detail::sip_probe(xbar, cfg.ladder, cfg.ladder.rungs - 1, s);
    Vec d = detail::central_gradient(f, x, 1e-3 * dist(x, xbar));
    if (all_finite(d)) detail::add_unique(candidates, d, cfg.cluster_tol);
  }
  RadiusLadder fl = cfg.ladder;
  fl.samples = std::max(fl.samples, 256);
  for (const auto& c : candidates)
    if (frechet_subdiff_residual(g, xbar, -1.0 * c, fl).value >= -cfg.tol_res) detail::add_unique(out.vectors, c, cfg.cluster_tol);
  if (out.vectors.empty()) out.diagnostic = "empty upper subdifferential";
  return out;
}

struct ConditionCandidate {
  Vec vector;
  std::vector<double> distances;
  bool pass = false;
};

struct ConditionReport {
  Verdict verdict = Verdict::Inconclusive;
  bool vacuous = false;
  std::vector<double> eps;
  std::vector<ConditionCandidate> candidates;
  std::string diagnostic;

  json to_json() const {
    json c = json::array();
    for (const auto& k : candidates)
      c.push_back({{"vector", schema::to_json(k.vector)}, {"distances", k.distances}, {"pass", k.pass}});
    return {{"verdict", to_string(verdict)}, {"vacuous", vacuous}, {"eps", eps}, {"candidates", c},
            {"diagnostic", diagnostic}};
  }
};

namespace detail {

inline RepresentationConfig sip_representation(const SIPProblem& p, const SIPConfig& cfg) {
  RepresentationConfig rc = cfg.representation;
  rc.indices = p.indices;
  rc.assume_aqc = p.assume_aqc;
  return rc;
}

inline ConditionCandidate represent_on_ladder(const Vec& u, const SIPProblem& p, const SIPConfig& cfg) {
  ConditionCandidate c{u, {}, true};
  auto rc = sip_representation(p, cfg);
  for (double e : cfg.eps) {
    auto r = limiting_rnormal_representation_check(u, p.constraints, e, rc);
    c.distances.push_back(r.distance);
    c.pass = c.pass && r.pass;
  }
  return c;
}

/// min over v in conv(G) of dist(-v, representable sums) at one eps.
inline double hull_representation_distance(const std::vector<Vec>& G, const SIPProblem& p, double eps,
                                           const SIPConfig& cfg) {
  auto rc = sip_representation(p, cfg);
  auto pool = normal_pool(p.constraints, rc.indices, eps, rc.pool);
  const std::size_t n = p.constraints.dimension;
  constexpr double w = 1e4;
  std::vector<NormalCandidate> aug;
  for (const auto& c : pool) {
    Vec d(n + 1);
    for (std::size_t a = 0; a < n; ++a) d[a] = c.direction[a];
    aug.push_back({c.index, c.point, d});
  }
  int pseudo = -1;
  for (const auto& g : G) {
    Vec d(n + 1);
    for (std::size_t a = 0; a < n; ++a) d[a] = g[a];
    d[n] = w;
    aug.push_back({pseudo--, p.constraints.xbar, d});
  }
  Vec target(n + 1);
  target[n] = w;
  auto fit = conic_fit(aug, target, rc.n_max + static_cast<int>(G.size()));
  double wsum = 0.0;
  for (std::size_t a = 0; a < fit.columns.size(); ++a)
    if (aug[fit.columns[a]].index < 0) wsum += fit.coefficients[a];
  if (!(wsum > 0.0)) return std::numeric_limits<double>::infinity();
  Vec s(n);
  for (std::size_t a = 0; a < fit.columns.size(); ++a) {
    const auto& col = aug[fit.columns[a]];
    Vec d(n);
    for (std::size_t b = 0; b < n; ++b) d[b] = col.direction[b];
    s += d * (fit.coefficients[a] / wsum);
  }
  return norm(s);
}

}  // namespace detail

/// For each u in -d^+phi(xbar), u must be representable at every eps of the ladder.
inline ConditionReport check_upper_condition(const SIPProblem& p, const SIPConfig& cfg = {}) {
  p.constraints.require_base(p.indices);
  ConditionReport rep;
  rep.eps = cfg.eps;
  auto up = upper_subdiff_sample(p.objective, p.constraints.xbar, cfg);
  if (up.vectors.empty()) {
    rep.vacuous = true;
    rep.verdict = Verdict::Pass;
    rep.diagnostic = up.diagnostic;
    return rep;
  }
  bool all = true;
  for (const auto& v : up.vectors) {
    auto c = detail::represent_on_ladder(-1.0 * v, p, cfg);
    all = all && c.pass;
    rep.candidates.push_back(std::move(c));
  }
  rep.verdict = all ? Verdict::Pass : Verdict::Fail;
  return rep;
}

/// Some v in d phi(xbar) with -v representable at every eps; the convex hull of the
/// sample is searched for convex-max objectives.
inline ConditionReport check_lower_condition(const SIPProblem& p, const SIPConfig& cfg = {}) {
  p.constraints.require_base(p.indices);
  ConditionReport rep;
  rep.eps = cfg.eps;
  const Vec& xbar = p.constraints.xbar;
  if (!lipschitz_estimate(p.objective, xbar, cfg).finite) {
    rep.diagnostic = "objective is not Lipschitz near the base point";
    return rep;
  }
  auto sd = subdiff_sample(p.objective, xbar, cfg);
  if (sd.vectors.empty()) {
    rep.diagnostic = sd.diagnostic;
    return rep;
  }
  bool any = false;
  for (const auto& v : sd.vectors) {
    auto c = detail::represent_on_ladder(-1.0 * v, p, cfg);
    any = any || c.pass;
    rep.candidates.push_back(std::move(c));
  }
  if (!any && p.objective.kind() == Objective::Kind::ConvexMax && sd.vectors.size() > 1) {
    ConditionCandidate hull{Vec(xbar.size()), {}, true};
    for (double e : cfg.eps) {
      double d = detail::hull_representation_distance(sd.vectors, p, e, cfg);
      hull.distances.push_back(d);
      hull.pass = hull.pass && d <= e + cfg.representation.tol;
    }
    any = hull.pass;
    rep.candidates.push_back(std::move(hull));
    rep.diagnostic = "convex hull of the sample searched";
  }
  rep.verdict = any ? Verdict::Pass : Verdict::Fail;
  return rep;
}

struct SIPReport {
  ConditionReport upper;
  ConditionReport lower;

  Verdict verdict() const {
    if (upper.verdict == Verdict::Fail || lower.verdict == Verdict::Fail) return Verdict::Fail;
    if ((upper.verdict == Verdict::Pass && !upper.vacuous) || lower.verdict == Verdict::Pass) return Verdict::Pass;
    return Verdict::Inconclusive;
  }
  json to_json() const {
    return {{"verdict", to_string(verdict())}, {"upper", upper.to_json()}, {"lower", lower.to_json()}};
  }
};

inline SIPReport check_sip(const SIPProblem& p, const SIPConfig& cfg = {}) {
  return {check_upper_condition(p, cfg), check_lower_condition(p, cfg)};
}

/// Grid probe: no feasible point of the truncated constraint set within `radius`
/// improves phi(xbar) by more than tol.
inline bool local_minimum_probe(const SIPProblem& p, double radius = 0.05, int samples = 400, double tol = 1e-12) {
  const Vec& xbar = p.constraints.xbar;
  Set T = p.constraints.truncation(p.indices);
  double f0 = p.objective(xbar);
  auto key = rng::key(0x5eed, "local_min");
  for (int j = 0; j < 8; ++j)
    for (int s = 0; s < samples; ++s) {
      Vec x = xbar + rng::direction(xbar.size(), key, static_cast<std::uint64_t>(s)) * (radius * std::pow(0.5, j));
      if (!T.inside(x)) x = T.project(x);
      if (dist(x, xbar) > radius) continue;
      if (p.objective(x) < f0 - tol) return false;
    }
  return true;
}

}  // namespace epl
