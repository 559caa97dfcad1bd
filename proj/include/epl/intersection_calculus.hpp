#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epl/infinite_extremality.hpp"
#include "epl/normal_cones.hpp"
#include "epl/solvers.hpp"

namespace epl {

// ---- R-normals ---------------------------------------------------------------------

struct RNormalQuery {
  Vec xstar;
  RateFunction R;
  SelectionRule selection;
  int directions = 64;
  /// Violations must exceed r by this fraction of r.
  double slack = 1e-9;
  /// Perturbed variant: x ranges over n (Omega_i - x_i) with base point 0.
  std::function<Vec(int)> perturbation;
};

struct RNormalRung {
  double r = 0.0;
  std::size_t size = 0;
  double R = 0.0;
  double ratio = 0.0;
  double max_lhs = -std::numeric_limits<double>::infinity();
  int samples = 0;
  bool pass = true;
  bool vacuous = false;
  std::optional<Vec> violation;

  double margin() const { return r - max_lhs; }
};

struct RNormalReport {
  bool pass = true;
  std::vector<RNormalRung> rungs;
  std::vector<std::string> diagnostics;

  std::string csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "r,size,R_r,ratio,margin,verdict\n";
    for (const auto& g : rungs)
      os << g.r << ',' << g.size << ',' << g.R << ',' << g.ratio << ',' << g.margin() << ','
         << (g.vacuous ? "vacuous" : (g.pass ? "pass" : "fail")) << '\n';
    return os.str();
  }
  json to_json() const {
    json rs = json::array();
    for (const auto& g : rungs) {
      json j = {{"r", g.r},           {"size", g.size},       {"R", g.R},         {"ratio", g.ratio},
                {"max_lhs", g.max_lhs}, {"margin", g.margin()}, {"samples", g.samples},
                {"pass", g.pass},     {"vacuous", g.vacuous}};
      if (g.violation) j["violation"] = schema::to_json(*g.violation);
      rs.push_back(j);
    }
    return {{"pass", pass}, {"rungs", rs}, {"diagnostics", diagnostics}};
  }
};

/// <x*, x - xbar> - r ||x - xbar||.
inline double r_normal_lhs(const Vec& xstar, const Vec& x, const Vec& xbar, double r) {
  Vec d = x - xbar;
  return dot(xstar, d) - r * norm(d);
}

/// Samples the truncated intersection n_{i in I(r)} Omega_i n B(xbar, r R_r) on every
/// rung of the selection and checks <x*, x - xbar> - r ||x - xbar|| < r.
inline RNormalReport verify_r_normal(const IndexedFamily& fam, const RNormalQuery& q) {
  if (auto why = q.selection.growth_violation(); !why.empty()) throw InputError("selection: " + why);
  if (q.xstar.size() != fam.dimension) throw InputError("x* has the wrong dimension");
  RNormalReport rep;
  const Vec base = q.perturbation ? Vec(fam.dimension) : fam.xbar;
  const double nx = norm(q.xstar);
  auto key = rng::key(0x5eed, "r_normal");
  for (int k = 1; k <= q.selection.rungs(); ++k) {
    const auto& e = q.selection.at(k);
    std::vector<Set> members;
    for (int i : e.indices) {
      Set s = fam.at(i);
      if (q.perturbation) {
        Vec xi = q.perturbation(i);
        if (!s.contains(xi, 1e-9)) throw PreconditionError("perturbation point is not in Omega_" + std::to_string(i));
        s = s.translate(xi);
      }
      members.push_back(s);
    }
    Set T = intersection(members);
    if (!T.contains(base, 1e-9)) throw PreconditionError("base point is not in the truncated intersection");
    RNormalRung g;
    g.r = e.r;
    g.size = e.indices.size();
    g.R = q.R(e.r);
    g.ratio = std::pow(static_cast<double>(g.size), 1.5) / g.R;
    const double rho = e.r * g.R;
    // Below ||x - xbar|| = r / ||x*|| no violation is possible.
    const double floor = nx > 0.0 ? 0.25 * e.r / nx : rho;
    auto consider = [&](const Vec& x) {
      if (dist(x, base) > rho || x == base) return;
      ++g.samples;
      double v = r_normal_lhs(q.xstar, x, base, e.r);
      if (v > g.max_lhs) {
        g.max_lhs = v;
        if (v >= e.r * (1.0 - q.slack)) g.violation = x;
      }
    };
    for (int j = 0; j < 60; ++j) {
      double radius = rho * std::pow(0.5, j);
      if (j > 0 && radius < floor) break;
      for (int s = 0; s < q.directions; ++s) {
        Vec p = base + rng::direction(fam.dimension, key, static_cast<std::uint64_t>(s)) * radius;
        if (T.inside(p))
          consider(p);
        else
          consider(T.project(p));
      }
    }
    if (g.samples == 0) {
      g.vacuous = true;
      rep.diagnostics.push_back("rung r=" + std::to_string(e.r) + ": empty sample of the truncated intersection");
    }
    g.pass = !g.violation.has_value();
    rep.pass = rep.pass && g.pass;
    rep.rungs.push_back(std::move(g));
  }
  return rep;
}

struct RFrechetConsistency {
  bool r_normal = false;
  double frechet_residual = 0.0;
  bool frechet_accepted = false;
  /// R-normal implies Frechet normal; vacuous when x* is not an R-normal.
  bool forward_ok = true;
  bool forward_vacuous = false;
  /// Frechet normal implies R-normal, checked on finite systems only.
  std::optional<bool> converse_ok;
};

/// Compares the R-normal verdict with the Frechet residual on the full intersection
/// (closed form when the family has one, else the truncation over the largest I).
inline RFrechetConsistency r_normal_frechet_consistency(const IndexedFamily& fam, const RNormalQuery& q,
                                                        const RadiusLadder& ladder = {}, double tol_res = 1e-3) {
  RFrechetConsistency out;
  out.r_normal = verify_r_normal(fam, q).pass;
  Set target = fam.limit ? *fam.limit : fam.truncation(q.selection.entries.back().indices);
  out.frechet_residual = eps_normal_residual(target, fam.xbar, q.xstar, ladder).value;
  out.frechet_accepted = out.frechet_residual <= tol_res;
  if (out.r_normal)
    out.forward_ok = out.frechet_accepted;
  else
    out.forward_vacuous = true;
  if (fam.size && out.frechet_accepted) out.converse_ok = out.r_normal;
  return out;
}

// ---- normal pools ----------------------------------------------------------------

struct NormalCandidate {
  int index = 0;
  Vec point;
  Vec direction;
};

struct PoolConfig {
  int index_cap = 32;
  int directions = 32;
  std::vector<double> radius_fractions{0.9, 0.5, 0.25, 0.1, 0.03, 0.01};
  /// Cone specialization: only normals at xbar itself.
  bool base_point_only = false;
  RadiusLadder cone_ladder{0.1, 0.5, 12, 128, 0x5eed};
};

/// Unit Frechet normal candidates at points x_i with ||x_i - xbar|| < eps: proximal
/// normals of probes, the family's analytic normals, and sampled cones at xbar.
inline std::vector<NormalCandidate> normal_pool(const IndexedFamily& fam, const std::vector<int>& indices,
                                                double eps, const PoolConfig& cfg = {}) {
  std::vector<NormalCandidate> pool;
  auto key = rng::key(cfg.cone_ladder.seed, "normal_pool");
  auto add = [&](int i, const Vec& x, const Vec& v) {
    if (norm(v) == 0.0 || !all_finite(v)) return;
    Vec u = normalized(v);
    for (const auto& c : pool)
      if (c.index == i && c.point == x && angle_between(c.direction, u) < 1e-9) return;
    pool.push_back({i, x, u});
  };
  for (int i : indices) {
    Set s = fam.at(i);
    for (const auto& d : limiting_cone_sample(s, fam.xbar, cfg.cone_ladder).directions) add(i, fam.xbar, d);
    if (fam.normal)
      if (auto v = fam.normal(i, fam.xbar); v && s.distance(fam.xbar + 1e-9 * *v) > 0.0) add(i, fam.xbar, *v);
    if (cfg.base_point_only) continue;
    for (double f : cfg.radius_fractions)
      for (int d = 0; d < cfg.directions; ++d) {
        Vec p = fam.xbar + rng::direction(fam.dimension, key, static_cast<std::uint64_t>(d)) * (f * eps);
        if (s.inside(p)) continue;
        Vec w = s.project(p);
        if (!(dist(w, fam.xbar) < eps)) continue;
        add(i, w, p - w);
        if (fam.normal)
          if (auto v = fam.normal(i, w)) add(i, w, *v);
      }
  }
  return pool;
}

struct ConicFit {
  std::vector<std::size_t> columns;
  std::vector<double> coefficients;
  double distance = std::numeric_limits<double>::infinity();
};

/// min ||sum c_j v_j - target||, c >= 0, over pool columns with at most one point per index
/// and at most n_max summands: NNLS, then repeated removal of conflicting columns.
inline ConicFit conic_fit(const std::vector<NormalCandidate>& pool, const Vec& target, int n_max = 64) {
  std::vector<bool> active(pool.size(), true);
  ConicFit best;
  for (int round = 0; round < 200; ++round) {
    std::vector<std::size_t> cols;
    std::vector<Vec> A;
    for (std::size_t j = 0; j < pool.size(); ++j)
      if (active[j]) {
        cols.push_back(j);
        A.push_back(pool[j].direction);
      }
    auto c = solvers::nnls(A, target);
    std::map<int, std::size_t> lead;
    std::vector<std::size_t> drop;
    std::vector<std::pair<double, std::size_t>> support;
    for (std::size_t a = 0; a < cols.size(); ++a) {
      if (c[a] <= 0.0) continue;
      support.push_back({c[a], a});
      int idx = pool[cols[a]].index;
      auto it = lead.find(idx);
      if (it == lead.end()) {
        lead[idx] = a;
      } else if (c[a] > c[it->second]) {
        drop.push_back(it->second);
        it->second = a;
      } else {
        drop.push_back(a);
      }
    }
    if (drop.empty() && static_cast<int>(support.size()) > n_max) {
      std::sort(support.begin(), support.end());
      for (std::size_t s = 0; s + n_max < support.size(); ++s) drop.push_back(support[s].second);
    }
    if (drop.empty()) {
      best = {};
      Vec sum(target.size());
      for (auto [coef, a] : support) {
        best.columns.push_back(cols[a]);
        best.coefficients.push_back(coef);
        sum += coef * pool[cols[a]].direction;
      }
      best.distance = dist(sum, target);
      return best;
    }
    for (std::size_t a : drop) active[cols[a]] = false;
  }
  throw NumericFailure("conic_fit: index conflicts did not resolve", {});
}

// ---- fuzzy intersection rule -----------------------------------------------------

struct FuzzyCertificate {
  double lambda = 0.0;
  double eps = 0.0;
  std::vector<int> indices;
  std::vector<Vec> points;
  std::vector<Vec> duals;

  Vec dual_sum(std::size_t n) const {
    Vec s(n);
    for (const auto& d : duals) s += d;
    return s;
  }
  /// ||lambda x* - sum x*_i||.
  double inclusion_gap(const Vec& xstar) const { return dist(lambda * xstar, dual_sum(xstar.size())); }
  /// dist(lambda x*, sum x*_i + eps B).
  double inclusion_defect(const Vec& xstar) const { return std::max(0.0, inclusion_gap(xstar) - eps); }
  double identity_defect(const Vec& xstar) const {
    double s = lambda * lambda + lambda * lambda * norm_sq(xstar);
    for (const auto& d : duals) s += norm_sq(d);
    return std::abs(s - 1.0);
  }

  json to_json(const Vec& xstar) const {
    json p = json::array(), d = json::array();
    for (const auto& x : points) p.push_back(schema::to_json(x));
    for (const auto& x : duals) d.push_back(schema::to_json(x));
    return {{"lambda", lambda},
            {"eps", eps},
            {"indices", indices},
            {"points", p},
            {"duals", d},
            {"residuals",
             {{"inclusion_defect", inclusion_defect(xstar)}, {"identity_defect", identity_defect(xstar)}}}};
  }
};

struct FuzzyTolerances {
  double res = 1e-3;
  double cert = 1e-9;
  double incl = 1e-12;
};

/// Re-validates a fuzzy certificate from its fields.
inline CheckReport fuzzy_certificate_check(const FuzzyCertificate& c, const Vec& xstar, const IndexedFamily& fam,
                                           const RadiusLadder& ladder = certificate_ladder(),
                                           const FuzzyTolerances& tol = {}) {
  CheckReport rep;
  if (c.indices.size() != c.points.size() || c.indices.size() != c.duals.size())
    throw InputError("fuzzy certificate: index, point and dual lists differ in length");
  if (!(c.lambda >= 0.0)) rep.fail("lambda must be nonnegative");
  double worst_res = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.indices.size(); ++i) {
    const int idx = c.indices[i];
    if (!(dist(c.points[i], fam.xbar) < c.eps)) rep.fail("point " + std::to_string(idx) + " is not within eps of xbar");
    Set s = fam.at(idx);
    if (!s.contains(c.points[i], 1e-9)) {
      rep.fail("point " + std::to_string(idx) + " is not in its set");
      continue;
    }
    double res = eps_normal_residual(s, c.points[i], c.duals[i], ladder).value;
    worst_res = std::max(worst_res, res);
    if (res > tol.res) rep.fail("dual " + std::to_string(idx) + " is not a Frechet normal (residual " + std::to_string(res) + ")");
  }
  double incl = c.inclusion_defect(xstar), ident = c.identity_defect(xstar);
  rep.margins["worst_residual"] = worst_res;
  rep.margins["inclusion_defect"] = incl;
  rep.margins["identity_defect"] = ident;
  if (incl > tol.incl) rep.fail("inclusion defect " + std::to_string(incl));
  if (ident > tol.cert) rep.fail("identity defect " + std::to_string(ident));
  return rep;
}

struct FuzzySearchConfig {
  std::vector<int> indices{1, 2};
  int n_max = 64;
  PoolConfig pool;
};

struct FuzzySearchResult {
  bool found = false;
  FuzzyCertificate certificate;
  double best_residual = std::numeric_limits<double>::infinity();
};

/// Builds a certificate from a conic fit of x* (lambda > 0) or, failing that, from the
/// most cancelling unit-normalized pair or triple of normals (lambda = 0).
inline FuzzySearchResult search_fuzzy_certificate(const IndexedFamily& fam, const Vec& xstar, double eps,
                                                  const FuzzySearchConfig& cfg = {}) {
  if (!(eps > 0.0)) throw InputError("fuzzy search: eps must be positive");
  auto pool = normal_pool(fam, cfg.indices, eps, cfg.pool);
  FuzzySearchResult out;
  if (pool.empty()) return out;
  auto consider = [&](FuzzyCertificate c) {
    double res = std::max(c.inclusion_defect(xstar), c.identity_defect(xstar));
    if (res < out.best_residual) {
      out.best_residual = res;
      out.certificate = std::move(c);
    }
  };
  {
    auto fit = conic_fit(pool, xstar, cfg.n_max);
    double s = 1.0 + norm_sq(xstar);
    for (double c : fit.coefficients) s += c * c;
    FuzzyCertificate c;
    c.eps = eps;
    c.lambda = 1.0 / std::sqrt(s);
    for (std::size_t a = 0; a < fit.columns.size(); ++a) {
      const auto& col = pool[fit.columns[a]];
      c.indices.push_back(col.index);
      c.points.push_back(col.point);
      c.duals.push_back(col.direction * (c.lambda * fit.coefficients[a]));
    }
    // Rescaling keeps the identity exact when the fit is empty.
    if (c.duals.empty()) c.lambda = 1.0 / std::sqrt(1.0 + norm_sq(xstar));
    consider(std::move(c));
  }
  if (out.best_residual > 0.0) {
    // lambda = 0: minimize ||t_a v_a + t_b v_b|| over t >= 0, ||t|| = 1, distinct indices.
    double best = 2.0;
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < pool.size(); ++a)
      for (std::size_t b = a + 1; b < pool.size(); ++b) {
        if (pool[a].index == pool[b].index) continue;
        double c = dot(pool[a].direction, pool[b].direction);
        if (c < best) {
          best = c;
          ba = a;
          bb = b;
        }
      }
    if (best < 0.0) {
      FuzzyCertificate c;
      c.eps = eps;
      c.lambda = 0.0;
      for (std::size_t a : {ba, bb}) {
        c.indices.push_back(pool[a].index);
        c.points.push_back(pool[a].point);
        c.duals.push_back(pool[a].direction / std::sqrt(2.0));
      }
      consider(std::move(c));
    }
  }
  out.found = out.best_residual <= 1e-12;
  return out;
}

// ---- approximate qualification condition -------------------------------------------

struct AQCRung {
  double eps = 0.0;
  std::vector<int> indices;
  std::vector<Vec> points;
  std::vector<Vec> duals;
};

struct AQCProbe {
  std::vector<AQCRung> rungs;
};

struct AQCConfig {
  double delta_gate = 1e-2;
  double delta_gate_sq = 5e-2;
  double tol_res = 1e-3;
  bool verify_normals = true;
};

struct AQCReport {
  bool pass = true;
  bool antecedent = false;
  std::vector<double> eps;
  std::vector<double> sum_norms;
  std::vector<double> square_sums;
  std::optional<double> violating_eps;

  json to_json() const {
    json j = {{"pass", pass}, {"antecedent", antecedent}, {"eps", eps}, {"sum_norms", sum_norms},
              {"square_sums", square_sums}};
    if (violating_eps) j["violating_eps"] = *violating_eps;
    return j;
  }
};

/// Ladder surrogate of ||sum x*|| -> 0 => sum ||x*||^2 -> 0.
inline AQCReport aqc_check(const IndexedFamily& fam, const AQCProbe& probe, const AQCConfig& cfg = {}) {
  if (probe.rungs.empty()) throw InputError("aqc: empty probe");
  AQCReport rep;
  auto ladder = certificate_ladder();
  for (const auto& g : probe.rungs) {
    if (g.indices.size() != g.points.size() || g.indices.size() != g.duals.size())
      throw InputError("aqc: index, point and dual lists differ in length");
    if (g.indices.empty()) throw InputError("aqc: no boundary points near xbar at eps=" + std::to_string(g.eps));
    Vec sum(fam.dimension);
    double sq = 0.0;
    for (std::size_t i = 0; i < g.indices.size(); ++i) {
      if (norm(g.duals[i]) > 1.0 + 1e-12) throw InputError("aqc: dual exceeds the unit ball");
      if (dist(g.points[i], fam.xbar) > g.eps) throw InputError("aqc: point farther than eps from xbar");
      if (cfg.verify_normals && norm(g.duals[i]) > 0.0) {
        Set s = fam.at(g.indices[i]);
        if (!s.contains(g.points[i], 1e-9)) throw InputError("aqc: point is not in its set");
        if (eps_normal_residual(s, g.points[i], g.duals[i], ladder).value > cfg.tol_res)
          throw InputError("aqc: dual is not a Frechet normal");
      }
      sum += g.duals[i];
      sq += norm_sq(g.duals[i]);
    }
    rep.eps.push_back(g.eps);
    rep.sum_norms.push_back(norm(sum));
    rep.square_sums.push_back(sq);
  }
  auto decreasing = [](const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
      if (v[k] > v[k - 1] + 1e-12) return false;
    return true;
  };
  rep.antecedent = decreasing(rep.sum_norms) && rep.sum_norms.back() < cfg.delta_gate;
  if (rep.antecedent) {
    bool ok = decreasing(rep.square_sums) && rep.square_sums.back() < cfg.delta_gate_sq;
    if (!ok) {
      rep.pass = false;
      for (std::size_t k = 0; k < rep.square_sums.size(); ++k)
        if (rep.square_sums[k] >= cfg.delta_gate_sq || (k > 0 && rep.square_sums[k] > rep.square_sums[k - 1] + 1e-12)) {
          rep.violating_eps = rep.eps[k];
          break;
        }
      if (!rep.violating_eps) rep.violating_eps = rep.eps.back();
    }
  }
  return rep;
}

inline std::vector<double> default_eps_ladder() { return {1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3, 3.125e-3}; }

/// Per eps, the unit-normalized normals with the smallest sum (support of at most three
/// distinct indices): pairs exhaustively, then the best third column.
inline AQCProbe adversarial_aqc_probe(const IndexedFamily& fam, const std::vector<int>& indices,
                                      const std::vector<double>& eps_ladder = default_eps_ladder(),
                                      const PoolConfig& pcfg = {}) {
  AQCProbe probe;
  for (double eps : eps_ladder) {
    auto pool = normal_pool(fam, indices, eps, pcfg);
    if (pool.empty()) throw InputError("aqc: no boundary points near xbar at eps=" + std::to_string(eps));
    std::vector<std::size_t> best_cols{0};
    double best = 1.0;
    for (std::size_t a = 0; a < pool.size(); ++a)
      for (std::size_t b = a + 1; b < pool.size(); ++b) {
        if (pool[a].index == pool[b].index) continue;
        double v = 1.0 + std::min(0.0, dot(pool[a].direction, pool[b].direction));
        if (v < best) {
          best = v;
          best_cols = {a, b};
        }
      }
    std::vector<double> weights(best_cols.size(), 1.0 / std::sqrt(static_cast<double>(best_cols.size())));
    if (best_cols.size() == 2) {
      for (std::size_t c = 0; c < pool.size(); ++c) {
        if (pool[c].index == pool[best_cols[0]].index || pool[c].index == pool[best_cols[1]].index) continue;
        std::vector<std::size_t> cols{best_cols[0], best_cols[1], c};
        Eigen::MatrixXd G(3, 3);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) G(i, j) = dot(pool[cols[i]].direction, pool[cols[j]].direction);
        auto m = solvers::sphere_orthant_min(G);
        if (m.value < best - 1e-15) {
          best = m.value;
          std::vector<std::size_t> keep;
          std::vector<double> w;
          for (int i = 0; i < 3; ++i)
            if (m.t[i] > 0.0) {
              keep.push_back(cols[i]);
              w.push_back(m.t[i]);
            }
          best_cols = keep;
          weights = w;
          break;
        }
      }
    }
    AQCRung g;
    g.eps = eps;
    for (std::size_t a = 0; a < best_cols.size(); ++a) {
      g.indices.push_back(pool[best_cols[a]].index);
      g.points.push_back(pool[best_cols[a]].point);
      g.duals.push_back(pool[best_cols[a]].direction * weights[a]);
    }
    probe.rungs.push_back(std::move(g));
  }
  return probe;
}

// ---- equicontinuity ---------------------------------------------------------------

using VectorFieldFamily = std::function<Vec(int, const Vec&)>;

struct EquicontinuityResult {
  bool equicontinuous = false;
  std::optional<double> delta;
  int witness_k = 0;
  Vec witness_x;
  double witness_value = 0.0;
  std::vector<double> sup_per_delta;
};

/// True iff some delta of the ladder keeps sup_{k <= k_max, ||x - xbar|| <= delta}
/// ||F_k(x) - F_k(xbar)|| below eps; otherwise the largest deviation on the finest rung.
inline EquicontinuityResult equicontinuity_probe(const VectorFieldFamily& F, const Vec& xbar, double eps,
                                                 const std::vector<double>& deltas, int k_max,
                                                 int directions = 32) {
  if (deltas.empty() || k_max < 1 || !(eps > 0.0)) throw InputError("equicontinuity: bad ladder or range");
  auto key = rng::key(0x5eed, "equicontinuity");
  EquicontinuityResult out;
  std::vector<int> ks;
  for (int k = 1; k <= k_max; k = k < 16 ? k + 1 : k * 2) ks.push_back(k);
  if (ks.back() != k_max) ks.push_back(k_max);
  for (double delta : deltas) {
    double sup = 0.0;
    int arg_k = 0;
    Vec arg_x;
    for (int k : ks) {
      Vec f0 = F(k, xbar);
      for (double frac : {1.0, 0.5, 0.1}) {
        for (int s = 0; s < directions; ++s) {
          Vec x = xbar + rng::direction(xbar.size(), key, static_cast<std::uint64_t>(s)) * (delta * frac);
          double v = dist(F(k, x), f0);
          if (v > sup) {
            sup = v;
            arg_k = k;
            arg_x = x;
          }
        }
        for (std::size_t i = 0; i < xbar.size(); ++i)
          for (double sgn : {1.0, -1.0}) {
            Vec x = xbar + unit(xbar.size(), i) * (sgn * delta * frac);
            double v = dist(F(k, x), f0);
            if (v > sup) {
              sup = v;
              arg_k = k;
              arg_x = x;
            }
          }
      }
    }
    out.sup_per_delta.push_back(sup);
    if (sup < eps) {
      out.equicontinuous = true;
      out.delta = delta;
      return out;
    }
    out.witness_k = arg_k;
    out.witness_x = arg_x;
    out.witness_value = sup;
  }
  return out;
}

// ---- limiting R-normal representation --------------------------------------------

struct RepresentationConfig {
  std::vector<int> indices{1, 2};
  int n_max = 64;
  double tol = 1e-9;
  PoolConfig pool;
  /// The scenario asserts AQC and that limiting normals are limiting R-normals.
  bool assume_aqc = true;
  bool assume_limiting_r_normals = true;
};

struct RepresentationResult {
  bool pass = false;
  double distance = std::numeric_limits<double>::infinity();
  std::vector<int> indices;
  std::vector<Vec> points;
  std::vector<Vec> normals;
  json assumptions;

  json to_json() const {
    json n = json::array();
    for (const auto& v : normals) n.push_back(schema::to_json(v));
    return {{"pass", pass}, {"distance", distance}, {"indices", indices}, {"normals", n}, {"assumptions", assumptions}};
  }
};

/// dist(x*, {sum_{i in I} v_i : v_i Frechet normals at x_i, ||x_i - xbar|| < eps}) by a
/// conic fit over a sampled normal pool; pass iff at most eps + tol.
inline RepresentationResult limiting_rnormal_representation_check(const Vec& xstar, const IndexedFamily& fam,
                                                                   double eps,
                                                                   const RepresentationConfig& cfg = {}) {
  if (!(eps > 0.0)) throw InputError("representation: eps must be positive");
  if (xstar.size() != fam.dimension) throw InputError("x* has the wrong dimension");
  RepresentationResult out;
  out.assumptions = {{"aqc", cfg.assume_aqc}, {"limiting_normals_are_limiting_r_normals", cfg.assume_limiting_r_normals}};
  if (norm(xstar) == 0.0) {
    out.distance = 0.0;
    out.pass = true;
    return out;
  }
  auto pool = normal_pool(fam, cfg.indices, eps, cfg.pool);
  if (pool.empty()) {
    out.distance = norm(xstar);
  } else {
    auto fit = conic_fit(pool, xstar, cfg.n_max);
    out.distance = fit.distance;
    for (std::size_t a = 0; a < fit.columns.size(); ++a) {
      const auto& col = pool[fit.columns[a]];
      out.indices.push_back(col.index);
      out.points.push_back(col.point);
      out.normals.push_back(col.direction * fit.coefficients[a]);
    }
  }
  out.pass = out.distance <= eps + cfg.tol;
  return out;
}

}  // namespace epl
