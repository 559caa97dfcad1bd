#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "epl/normal_cones.hpp"
#include "epl/random.hpp"
#include "epl/set_oracle.hpp"
#include "epl/solvers.hpp"

namespace epl {

/// Shifts a_{ik}, stored as shifts[k][i] for rungs k = 1..K.
struct TranslationSchedule {
  std::vector<std::vector<Vec>> shifts;

  int rungs() const { return static_cast<int>(shifts.size()); }
  std::size_t members() const { return shifts.empty() ? 0 : shifts.front().size(); }
  const std::vector<Vec>& at(int k) const { return shifts.at(static_cast<std::size_t>(k - 1)); }

  /// r_k = max_i ||a_ik|| for 1-based k.
  double radius(int k) const {
    double r = 0.0;
    for (const auto& a : at(k)) r = std::max(r, norm(a));
    return r;
  }

  /// a_ik = base^{-k} * direction_i for k = 1..K.
  static TranslationSchedule geometric(const std::vector<Vec>& directions, int K, double base = 4.0) {
    TranslationSchedule s;
    for (int k = 1; k <= K; ++k) {
      std::vector<Vec> row;
      for (const auto& d : directions) row.push_back(d * std::pow(base, -k));
      s.shifts.push_back(std::move(row));
    }
    return s;
  }

  void validate(std::size_t m, std::size_t n) const {
    if (shifts.empty()) throw InputError("schedule: no rungs");
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= rungs(); ++k) {
      if (at(k).size() != m)
        throw InputError("schedule: rung " + std::to_string(k) + " has " + std::to_string(at(k).size()) +
                         " shifts for " + std::to_string(m) + " sets");
      for (const auto& a : at(k))
        if (a.size() != n || !all_finite(a)) throw InputError("schedule: malformed shift at rung " + std::to_string(k));
      double r = radius(k);
      if (!(r > 0.0)) throw InputError("schedule: r_k must be positive (rung " + std::to_string(k) + ")");
      if (!(r < prev)) throw InputError("schedule: r_k must be strictly decreasing (rung " + std::to_string(k) + ")");
      prev = r;
    }
  }

  json to_json() const {
    json out = json::array();
    for (const auto& row : shifts) {
      json r = json::array();
      for (const auto& a : row) r.push_back(schema::to_json(a));
      out.push_back(r);
    }
    return out;
  }
};

struct RatedQuery {
  double alpha = 0.5;
  double gamma = 0.5;
  int K = 10;
  int grid = 101;
  double tol_feas_ext = 1e-9;

  void validate(bool allow_rank_one = false) const {
    if (!(alpha >= 0.0 && (alpha < 1.0 || (allow_rank_one && alpha == 1.0))))
      throw InputError("alpha must lie in [0,1)");
    if (!(gamma > 0.0)) throw InputError("gamma must be positive");
    if (K < 1) throw InputError("K must be positive");
    if (grid < 3) throw InputError("grid resolution must be at least 3");
  }
  /// Radius gamma r^alpha of the test ball.
  double ball_radius(double r) const { return alpha == 0.0 ? gamma : gamma * std::pow(r, alpha); }
};

struct ExtremalityVerdict {
  bool holds = false;
  int rungs_checked = 0;
  std::optional<int> counterexample_k;
  std::optional<Vec> witness;
  /// Per-rung flags: true where a common point was found.
  std::vector<bool> violated;

  std::string summary() const {
    if (holds) return "holds_up_to_K (K=" + std::to_string(rungs_checked) + ")";
    return "counterexample at k=" + std::to_string(*counterexample_k) + " witness " + to_string(*witness);
  }
};

/// Searches B(center, radius) for a point within `tol` of every set: exact
/// membership on a grid first, then compass descent on max_i dist from the
/// best grid points. One-sided: a miss is not a proof of emptiness.
inline std::optional<Vec> find_common_point(const std::vector<Set>& sets, const Vec& center, double radius,
                                            int grid, double tol, std::uint64_t seed = 0x5eed) {
  const std::size_t n = center.size();
  std::vector<Vec> pts;
  if (n <= 3) {
    std::vector<int> idx(n, 0);
    const int g = grid;
    while (true) {
      Vec x = center;
      double r2 = 0.0;
      for (std::size_t d = 0; d < n; ++d) {
        double u = -1.0 + 2.0 * idx[d] / (g - 1);
        x[d] += radius * u;
        r2 += u * u;
      }
      if (r2 <= 1.0) pts.push_back(std::move(x));
      std::size_t d = 0;
      while (d < n && ++idx[d] == g) idx[d++] = 0;
      if (d == n) break;
    }
  } else {
    auto k = rng::key(seed, "common_point");
    for (int s = 0; s < grid * grid; ++s) {
      double rad = radius * std::pow(rng::uniform(k, 1'000'000 + s), 1.0 / n);
      pts.push_back(center + rng::direction(n, k, s) * rad);
    }
  }
  // Grid order: points closer to the center first, so witnesses are reproducible and small.
  std::stable_sort(pts.begin(), pts.end(),
                   [&](const Vec& a, const Vec& b) { return norm_sq(a - center) < norm_sq(b - center); });
  for (const auto& x : pts) {
    bool all = true;
    for (const auto& s : sets)
      if (!s.inside(x)) {
        all = false;
        break;
      }
    if (all) return x;
  }
  auto merit = [&](const Vec& x) {
    double m = 0.0;
    for (const auto& s : sets) m = std::max(m, s.distance(x));
    return m;
  };
  const std::size_t stride = std::max<std::size_t>(1, pts.size() / 400);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < pts.size(); i += stride) scored.push_back({merit(pts[i]), i});
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  auto to_ball = [&](const Vec& y) {
    Vec d = y - center;
    double nd = norm(d);
    return nd <= radius ? y : center + d * (radius / nd);
  };
  for (std::size_t s = 0; s < std::min<std::size_t>(5, scored.size()); ++s) {
    const Vec& x0 = pts[scored[s].second];
    if (scored[s].first <= tol) return x0;
    auto res = solvers::compass_descent(merit, x0, radius / (grid - 1), radius * 1e-9, 400, to_ball);
    if (res.value <= tol) return res.x;
  }
  return std::nullopt;
}

inline void require_common_point(const std::vector<Set>& system, const Vec& xbar, double tol) {
  for (std::size_t i = 0; i < system.size(); ++i) {
    system[i].check_dim(xbar);
    if (!system[i].contains(xbar, tol))
      throw PreconditionError("base point is not in set " + std::to_string(i + 1));
  }
}

/// Checks that the shifted intersection misses B(xbar, gamma r_k^alpha) for every stored rung.
inline ExtremalityVerdict verify_rated_extremality(const std::vector<Set>& system, const Vec& xbar,
                                                   const RatedQuery& q, const TranslationSchedule& sched,
                                                   double tol_feas = 1e-9) {
  q.validate(true);
  if (system.empty()) throw InputError("empty set system");
  sched.validate(system.size(), xbar.size());
  require_common_point(system, xbar, tol_feas);
  ExtremalityVerdict v;
  const int K = std::min(q.K, sched.rungs());
  for (int k = 1; k <= K; ++k) {
    std::vector<Set> shifted;
    for (std::size_t i = 0; i < system.size(); ++i) shifted.push_back(system[i].translate(sched.at(k)[i]));
    auto w = find_common_point(shifted, xbar, q.ball_radius(sched.radius(k)), q.grid, q.tol_feas_ext);
    v.violated.push_back(w.has_value());
    v.rungs_checked = k;
    if (w && !v.counterexample_k) {
      v.counterexample_k = k;
      v.witness = *w;
    }
  }
  v.holds = !v.counterexample_k.has_value();
  return v;
}

// ---- tangential rate condition ------------------------------------------------

struct TangentialConfig {
  std::vector<Set> cones;
  double C = 1.0;
  double p = 0.5;
  RadiusLadder ladder{0.1, 0.5, 14, 256, 0x5eed};
  double tol = 1e-12;

  void validate() const {
    if (!(C > 0.0)) throw InputError("tangential: C must be positive");
    if (!(p > 0.0 && p < 1.0)) throw InputError("tangential: p must lie in (0,1)");
    ladder.validate();
  }
};

struct TangentialResult {
  std::vector<bool> ok;
  std::vector<double> worst_ratio;
  std::vector<std::optional<Vec>> witness;
  bool all() const { return std::all_of(ok.begin(), ok.end(), [](bool b) { return b; }); }
};

/// Spot-checks that `cone` contains 0 and is closed under positive scaling.
inline void require_cone(const Set& cone, std::size_t index, const RadiusLadder& ladder) {
  Vec zero(cone.dimension());
  if (!cone.contains(zero, 1e-12)) throw InputError("tangential: Lambda_" + std::to_string(index) + " does not contain 0");
  for (int s = 0; s < 64; ++s) {
    Vec w = cone.project(ladder.probe(zero, "cone_check", 0, s) * 10.0);
    for (double lam : {0.5, 2.0, 10.0}) {
      if (!cone.contains(w * lam, 1e-9 * (1.0 + lam * norm(w))))
        throw InputError("tangential: Lambda_" + std::to_string(index) + " is not a cone");
    }
  }
}

/// Tests dist(x - xbar; Lambda_i) <= C ||x - xbar||^{1+p} on sampled x in Omega_i near xbar.
inline TangentialResult tangential_rate_check(const std::vector<Set>& system, const Vec& xbar,
                                              const TangentialConfig& cfg) {
  cfg.validate();
  if (cfg.cones.size() != system.size()) throw InputError("tangential: one cone per set is required");
  require_common_point(system, xbar, 1e-9);
  TangentialResult out;
  for (std::size_t i = 0; i < system.size(); ++i) {
    require_cone(cfg.cones[i], i + 1, cfg.ladder);
    bool ok = true;
    double worst = 0.0;
    std::optional<Vec> wit;
    for (int j = 0; j < cfg.ladder.rungs; ++j) {
      for (const auto& x : sample_set_points(system[i], xbar, cfg.ladder, j, "tangential")) {
        Vec d = x - xbar;
        double nd = norm(d);
        if (nd == 0.0) continue;
        double defect = cfg.cones[i].distance(d);
        double bound = cfg.C * std::pow(nd, 1.0 + cfg.p);
        double ratio = defect / bound;
        if (ratio > worst) {
          worst = ratio;
          if (defect > bound + cfg.tol) wit = x;
        }
        if (defect > bound + cfg.tol) ok = false;
      }
    }
    out.ok.push_back(ok);
    out.worst_ratio.push_back(worst);
    out.witness.push_back(wit);
  }
  return out;
}

// ---- constructive exact extremal principle ----------------------------------------

struct Residuals {
  double sum_norm = 0.0;
  double unit_defect = 0.0;
  std::vector<double> cone_defects;
};

struct PrincipleCertificate {
  int k = 0;
  double r = 0.0;
  std::vector<Vec> points;
  std::vector<Vec> duals;
  Residuals residuals;
  double nu = 0.0;
  Vec minimizer;
  double objective = 0.0;

  json to_json() const {
    json pts = json::array(), ds = json::array();
    for (const auto& p : points) pts.push_back(schema::to_json(p));
    for (const auto& d : duals) ds.push_back(schema::to_json(d));
    return {{"k", k},
            {"r", r},
            {"points", pts},
            {"duals", ds},
            {"residuals",
             {{"sum_norm", residuals.sum_norm},
              {"unit_defect", residuals.unit_defect},
              {"cone_defects", residuals.cone_defects}}},
            {"nu", nu},
            {"minimizer", minimizer.empty() ? json(nullptr) : schema::to_json(minimizer)},
            {"objective", objective}};
  }
};

/// Recomputes residuals from the stored duals; cone defects are angles to the sampled cones.
inline Residuals certificate_residuals(const std::vector<Vec>& duals, const std::vector<ConeSample>& cones = {}) {
  Residuals r;
  if (duals.empty()) return r;
  Vec s(duals.front().size());
  double sq = 0.0;
  for (const auto& d : duals) {
    s += d;
    sq += norm_sq(d);
  }
  r.sum_norm = norm(s);
  r.unit_defect = std::abs(sq - 1.0);
  for (std::size_t i = 0; i < cones.size() && i < duals.size(); ++i) {
    if (norm(duals[i]) <= 1e-12) r.cone_defects.push_back(0.0);
    else if (cones[i].directions.empty()) r.cone_defects.push_back(std::numbers::pi);
    else r.cone_defects.push_back(cone_angular_distance(cones[i], duals[i]));
  }
  return r;
}

inline Residuals certificate_residuals(const PrincipleCertificate& cert, const std::vector<ConeSample>& cones = {}) {
  return certificate_residuals(cert.duals, cones);
}

struct PrincipleConfig {
  int multistart = 8;
  int max_iterations = 400;
  double step_tol_rel = 1e-12;
  int limit_rungs = 3;
  double tol_angle = 0.02;
  /// Run alpha = 1 inputs instead of refusing them (diagnostic use only).
  bool allow_rank_one = false;
  RadiusLadder ladder{};
  std::uint64_t seed = 0x5eed;
};

struct PrincipleRun {
  std::vector<PrincipleCertificate> per_k;
  PrincipleCertificate limit;
  std::vector<ConeSample> cones;
  int cluster_size = 0;

  /// CSV convergence table (k, r_k, nu_k, sum_norm, unit_defect).
  std::string convergence_csv() const {
    std::string s = "k,r_k,nu_k,sum_norm,unit_defect\n";
    char buf[160];
    for (const auto& c : per_k) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", c.k, c.r, c.nu, c.residuals.sum_norm,
                    c.residuals.unit_defect);
      s += buf;
    }
    return s;
  }
};

/// d_k(x) = sqrt(sum_i dist^2(x + a_ik; Omega_i)) + (sqrt(m)/gamma^{1/alpha}) ||x - xbar||^{1/alpha}.
/// For alpha = 0 the penalty is dropped and x is confined to B(xbar, gamma).
inline double principle_objective(const std::vector<Set>& system, const std::vector<Vec>& shifts, const Vec& xbar,
                                  const RatedQuery& q, const Vec& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < system.size(); ++i) {
    double d = system[i].distance(x + shifts[i]);
    s += d * d;
  }
  double v = std::sqrt(s);
  if (q.alpha > 0.0) {
    double m = static_cast<double>(system.size());
    v += std::sqrt(m) / std::pow(q.gamma, 1.0 / q.alpha) * std::pow(norm(x - xbar), 1.0 / q.alpha);
  }
  return v;
}

inline PrincipleCertificate principle_rung(const std::vector<Set>& system, const Vec& xbar, const RatedQuery& q,
                                           const TranslationSchedule& sched, int k, const PrincipleConfig& cfg,
                                           const std::vector<ConeSample>& cones, double tol_feas) {
  const auto& shifts = sched.at(k);
  const double r = sched.radius(k);
  const double rad = q.ball_radius(r);
  auto f = [&](const Vec& x) { return principle_objective(system, shifts, xbar, q, x); };
  std::function<Vec(const Vec&)> constraint;
  if (q.alpha == 0.0) {
    constraint = [&](const Vec& y) {
      Vec d = y - xbar;
      double nd = norm(d);
      return nd <= q.gamma ? y : xbar + d * (q.gamma / nd);
    };
  }
  std::vector<Vec> seeds{xbar};
  auto key = rng::key(cfg.seed, "principle_seed", static_cast<std::uint64_t>(k));
  for (int s = 0; s < cfg.multistart; ++s) seeds.push_back(xbar + rng::direction(xbar.size(), key, s) * (rad / 2.0));
  solvers::DescentResult best{xbar, std::numeric_limits<double>::infinity(), 0, false};
  for (const auto& s0 : seeds) {
    auto res = solvers::compass_descent(f, s0, rad / 2.0, cfg.step_tol_rel * rad, cfg.max_iterations, constraint);
    if (res.value < best.value) best = res;
  }
  if (!best.converged && best.value > f(xbar))
    throw NumericFailure("principle: descent did not converge at k=" + std::to_string(k), best.x.values());

  PrincipleCertificate c;
  c.k = k;
  c.r = r;
  c.minimizer = best.x;
  c.objective = best.value;
  double nu2 = 0.0;
  std::vector<Vec> diffs;
  for (std::size_t i = 0; i < system.size(); ++i) {
    Vec y = best.x + shifts[i];
    Vec w = system[i].project(y);
    c.points.push_back(w);
    diffs.push_back(y - w);
    nu2 += norm_sq(y - w);
  }
  c.nu = std::sqrt(nu2);
  // Relative threshold: nu_k scales with r_k on rated systems.
  if (c.nu <= tol_feas * r)
    throw ExtremalityViolated("principle: shifted sets intersect at the minimizer of rung k=" + std::to_string(k), k);
  for (auto& d : diffs) c.duals.push_back(d / c.nu);
  c.residuals = certificate_residuals(c.duals, cones);
  return c;
}

/// Runs the constructive procedure for every stored rung and extracts a limit certificate.
inline PrincipleRun run_exact_principle(const std::vector<Set>& system, const Vec& xbar, const RatedQuery& q,
                                        const TranslationSchedule& sched, const PrincipleConfig& cfg = {},
                                        double tol_feas = 1e-9) {
  if (q.alpha == 1.0 && !cfg.allow_rank_one)
    throw InputError("alpha must lie in [0,1): rank one is outside the exact principle (set allow_rank_one to diagnose)");
  q.validate(cfg.allow_rank_one);
  if (system.empty()) throw InputError("empty set system");
  sched.validate(system.size(), xbar.size());
  require_common_point(system, xbar, tol_feas);
  PrincipleRun run;
  for (const auto& s : system) run.cones.push_back(limiting_cone_sample(s, xbar, cfg.ladder, cfg.tol_angle, tol_feas));
  const int K = std::min(q.K, sched.rungs());
  for (int k = 1; k <= K; ++k) run.per_k.push_back(principle_rung(system, xbar, q, sched, k, cfg, run.cones, tol_feas));

  // Limit: largest angular cluster of dual tuples over the finest rungs.
  const int first = std::max(0, K - cfg.limit_rungs);
  std::vector<Vec> tuples;
  for (int k = first; k < K; ++k) tuples.push_back(concat(run.per_k[k].duals));
  std::vector<Vec> sums;
  std::vector<int> counts;
  std::vector<int> last;
  for (int t = 0; t < static_cast<int>(tuples.size()); ++t) {
    bool merged = false;
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (angle_between(normalized(sums[c]), tuples[t]) <= cfg.tol_angle) {
        sums[c] += tuples[t];
        ++counts[c];
        last[c] = t;
        merged = true;
        break;
      }
    }
    if (!merged) {
      sums.push_back(tuples[t]);
      counts.push_back(1);
      last.push_back(t);
    }
  }
  std::size_t pick = 0;
  for (std::size_t c = 1; c < sums.size(); ++c)
    if (counts[c] > counts[pick] || (counts[c] == counts[pick] && last[c] > last[pick])) pick = c;
  Vec centroid = normalized(sums[pick]);
  const std::size_t n = xbar.size();
  PrincipleCertificate lim;
  lim.k = 0;
  lim.r = 0.0;
  for (std::size_t i = 0; i < system.size(); ++i) {
    lim.duals.push_back(Vec(std::vector<double>(centroid.begin() + i * n, centroid.begin() + (i + 1) * n)));
    lim.points.push_back(xbar);
  }
  lim.residuals = certificate_residuals(lim.duals, run.cones);
  run.limit = lim;
  run.cluster_size = counts[pick];
  return run;
}

// ---- minimal residual over sampled cones ---------------------------------------------

struct PrincipleSearchResult {
  double best_residual = 0.0;
  std::vector<Vec> vectors;
  bool degenerate = false;
};

/// Minimizes ||sum u_i|| over u_i in the sampled cones with sum ||u_i||^2 = 1.
/// Exact over the sampled rays: magnitudes are optimized by face enumeration.
inline PrincipleSearchResult search_principle_certificate(const std::vector<ConeSample>& cones) {
  if (cones.empty()) throw InputError("search_principle_certificate: no cones");
  for (const auto& c : cones)
    if (c.directions.empty()) throw InputError("search_principle_certificate: empty cone sample");
  PrincipleSearchResult out;
  const std::size_t m = cones.size();
  if (m == 1) {
    out.best_residual = 1.0;
    out.vectors = {normalized(cones[0].directions[0])};
    out.degenerate = true;
    return out;
  }
  double total = 1.0;
  for (const auto& c : cones) total *= static_cast<double>(c.directions.size());
  if (total > 2e6) throw InputError("search_principle_certificate: too many direction tuples");
  std::vector<std::size_t> idx(m, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<Vec> d;
    for (std::size_t i = 0; i < m; ++i) d.push_back(normalized(cones[i].directions[idx[i]]));
    Eigen::MatrixXd G(m, m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) G(a, b) = dot(d[a], d[b]);
    auto sol = solvers::sphere_orthant_min(G);
    if (sol.value < best) {
      best = sol.value;
      out.vectors.clear();
      for (std::size_t i = 0; i < m; ++i) out.vectors.push_back(d[i] * sol.t[i]);
    }
    std::size_t i = 0;
    while (i < m && ++idx[i] == cones[i].directions.size()) idx[i++] = 0;
    if (i == m) break;
  }
  out.best_residual = std::sqrt(std::max(0.0, best));
  return out;
}

}  // namespace epl
