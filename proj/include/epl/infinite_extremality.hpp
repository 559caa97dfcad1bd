#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "epl/finite_extremality.hpp"
#include "epl/normal_cones.hpp"
#include "epl/set_oracle.hpp"

namespace epl {

// ---- rate functions ------------------------------------------------------------

/// r -> R(r) with r R(r) <= M and R(r) -> inf as r -> 0.
class RateFunction {
 public:
  RateFunction() = default;

  /// gamma r^-p.
  static RateFunction power(double gamma, double p) {
    if (!(gamma > 0.0) || !std::isfinite(p)) throw InputError("rate: gamma must be positive and p finite");
    RateFunction f;
    f.name_ = "power";
    f.params_ = {gamma, p};
    f.eval_ = [gamma, p](double r) { return gamma * std::pow(r, -p); };
    return f;
  }
  /// gamma / r^(1 - alpha), the rate attached to rank alpha.
  static RateFunction from_rank(double alpha, double gamma) { return power(gamma, 1.0 - alpha); }

  static RateFunction custom(std::string name, std::function<double(double)> eval) {
    RateFunction f;
    f.name_ = std::move(name);
    f.eval_ = std::move(eval);
    return f;
  }

  double operator()(double r) const {
    if (!(r > 0.0)) throw InputError("rate: r must be positive");
    if (!eval_) throw InputError("rate: empty rate function");
    return eval_(r);
  }
  const std::string& name() const { return name_; }

  json to_json() const {
    if (name_ == "power") return {{"type", "power"}, {"gamma", params_[0]}, {"p", params_[1]}};
    return {{"type", name_}};
  }

  static std::optional<RateFunction> from_json(const json& j, const std::string& path, SchemaErrors& err) {
    if (!schema::strict_object(j, path, {"type", "gamma", "p", "alpha"}, err)) return std::nullopt;
    auto t = j.find("type");
    if (t == j.end() || !t->is_string()) {
      err.add(schema::child(path, "type"), "missing rate type");
      return std::nullopt;
    }
    auto gamma = schema::number(j, "gamma", path, err, false);
    if (!j.contains("gamma")) gamma = 1.0;
    if (*t == "power") {
      auto p = schema::number(j, "p", path, err);
      if (!gamma || !p) return std::nullopt;
      if (!(*gamma > 0.0)) {
        err.add(schema::child(path, "gamma"), "gamma must be positive");
        return std::nullopt;
      }
      return power(*gamma, *p);
    }
    if (*t == "rank") {
      auto a = schema::number(j, "alpha", path, err);
      if (!gamma || !a) return std::nullopt;
      if (!(*a >= 0.0 && *a < 1.0)) {
        err.add(schema::child(path, "alpha"), "alpha must lie in [0,1)");
        return std::nullopt;
      }
      if (!(*gamma > 0.0)) {
        err.add(schema::child(path, "gamma"), "gamma must be positive");
        return std::nullopt;
      }
      return from_rank(*a, *gamma);
    }
    err.add(schema::child(path, "type"), "unknown rate type '" + t->get<std::string>() + "'");
    return std::nullopt;
  }

 private:
  std::string name_;
  std::vector<double> params_;
  std::function<double(double)> eval_;
};

struct RateReport {
  double max_rR = 0.0;
  /// Grid positions j where R(r_j) <= R(r_{j-1}) although r_j < r_{j-1}.
  std::vector<int> monotone_violations;
  double growth = 0.0;
  bool bounded = true;
  bool valid = false;
  double M = 0.0;
};

/// Checks r R(r) <= M on a decreasing grid. Without a declared M the bound is
/// certified as the grid maximum provided r R(r) does not grow towards r = 0.
inline RateReport rate_function_validate(const RateFunction& R, const std::vector<double>& grid,
                                         std::optional<double> M = std::nullopt) {
  if (grid.size() < 2) throw InputError("rate grid needs at least two radii");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid[j] > 0.0)) throw InputError("rate grid must be positive");
    if (j > 0 && !(grid[j] < grid[j - 1])) throw InputError("rate grid must be strictly decreasing");
  }
  RateReport rep;
  std::vector<double> vals;
  for (double r : grid) {
    double v = R(r);
    if (!(v > 0.0) || !std::isfinite(v))
      throw InputError("rate function is not positive and finite at r=" + std::to_string(r));
    vals.push_back(v);
    rep.max_rR = std::max(rep.max_rR, r * v);
  }
  for (std::size_t j = 1; j < vals.size(); ++j)
    if (!(vals[j] > vals[j - 1])) rep.monotone_violations.push_back(static_cast<int>(j));
  rep.growth = vals.back() / vals.front();
  double first = grid.front() * vals.front(), last = grid.back() * vals.back();
  if (M) {
    rep.M = *M;
    rep.bounded = rep.max_rR <= *M * (1.0 + 1e-12);
  } else {
    rep.M = rep.max_rR;
    rep.bounded = last <= first * (1.0 + 1e-9);
  }
  rep.valid = rep.bounded && rep.monotone_violations.empty() && rep.growth > 10.0;
  return rep;
}

// ---- indexed families ------------------------------------------------------------

/// Countable system i -> Omega_i, i = 1, 2, ...
struct IndexedFamily {
  std::string name;
  std::size_t dimension = 2;
  Vec xbar;
  std::function<Set(int)> generator;
  /// Optional unit outer normal of Omega_i at a boundary point.
  std::function<std::optional<Vec>(int, const Vec&)> normal;
  /// Closed form of the full intersection when known.
  std::optional<Set> limit;
  /// Number of members for finite systems.
  std::optional<int> size;
  json descriptor;

  Set at(int i) const {
    if (i < 1) throw InputError("family indices start at 1");
    return generator(i);
  }
  std::vector<Set> members(const std::vector<int>& indices) const {
    std::vector<Set> out;
    for (int i : indices) out.push_back(at(i));
    return out;
  }
  Set truncation(const std::vector<int>& indices) const { return intersection(members(indices)); }

  void require_base(const std::vector<int>& indices, double tol = 1e-9) const {
    for (int i : indices)
      if (!at(i).contains(xbar, tol)) throw PreconditionError("base point is not in Omega_" + std::to_string(i));
  }

  /// Finite system padded by whole-space members beyond its size.
  static IndexedFamily padded(std::vector<Set> sets, Vec xbar, std::string name = "padded") {
    if (sets.empty()) throw InputError("padded family needs at least one set");
    IndexedFamily f;
    f.name = std::move(name);
    f.dimension = xbar.size();
    f.xbar = std::move(xbar);
    json members = json::array();
    for (const auto& s : sets) members.push_back(s.to_json());
    f.descriptor = {{"type", "padded"}, {"members", members}};
    f.size = static_cast<int>(sets.size());
    f.limit = intersection(sets);
    auto n = f.dimension;
    f.generator = [sets = std::move(sets), n](int i) {
      return static_cast<std::size_t>(i) <= sets.size() ? sets[static_cast<std::size_t>(i - 1)] : whole_space(n);
    };
    return f;
  }

  /// Omega_k = epi of k^m max(t,0)^2; the intersection over all k is R_- x R_+.
  static IndexedFamily k_m_parabolas(double m) {
    IndexedFamily f;
    f.name = "k_m_parabolas";
    f.dimension = 2;
    f.xbar = Vec{0.0, 0.0};
    f.descriptor = {{"type", "k_m_parabolas"}, {"m", m}};
    const double inf = std::numeric_limits<double>::infinity();
    f.limit = box(Vec{-inf, 0.0}, Vec{0.0, inf});
    f.generator = [m](int k) { return epigraph(Function1d::k_m_parabola(k, m)); };
    f.normal = [m](int k, const Vec& x) -> std::optional<Vec> { return km_normal(k, m, x); };
    return f;
  }

  /// xi_k(x) = (2 k^m x1, -1) / sqrt(4 k^{2m} x1^2 + 1) for x1 > 0 and (0, -1) otherwise.
  static Vec km_normal(int k, double m, const Vec& x) {
    if (!(x[0] > 0.0)) return Vec{0.0, -1.0};
    double c = 2.0 * std::pow(static_cast<double>(k), m) * x[0];
    double d = std::sqrt(c * c + 1.0);
    return Vec{c / d, -1.0 / d};
  }

  static std::optional<IndexedFamily> from_json(const json& j, const std::string& path, SchemaErrors& err,
                                                std::size_t dim) {
    if (!j.is_object()) {
      err.add(path, "family must be an object");
      return std::nullopt;
    }
    auto t = j.find("type");
    if (t == j.end() || !t->is_string()) {
      err.add(schema::child(path, "type"), "missing family type");
      return std::nullopt;
    }
    if (*t == "k_m_parabolas") {
      if (!schema::strict_object(j, path, {"type", "m"}, err)) return std::nullopt;
      auto m = schema::number(j, "m", path, err);
      if (!m) return std::nullopt;
      if (dim != 2) err.add(path, "k_m_parabolas lives in dimension 2");
      if (!(*m > 0.0)) {
        err.add(schema::child(path, "m"), "m must be positive");
        return std::nullopt;
      }
      return k_m_parabolas(*m);
    }
    if (*t == "padded") {
      if (!schema::strict_object(j, path, {"type", "members"}, err)) return std::nullopt;
      auto sets = detail::set_list(j, "members", path, err, dim);
      if (!sets) return std::nullopt;
      return padded(*sets, Vec(dim));
    }
    err.add(schema::child(path, "type"), "unknown family type '" + t->get<std::string>() + "'");
    return std::nullopt;
  }
};

// ---- selection rules -----------------------------------------------------------

struct SelectionEntry {
  double r = 0.0;
  double R = 0.0;
  std::vector<int> indices;

  double ratio() const { return std::pow(static_cast<double>(indices.size()), 1.5) / R; }
};

/// Index sets I_k per rung with the growth surrogate for |I_k|^{3/2} = o(R_k).
struct SelectionRule {
  std::vector<SelectionEntry> entries;
  double final_ratio_max = 0.5;

  const SelectionEntry& at(int k) const { return entries.at(static_cast<std::size_t>(k - 1)); }
  int rungs() const { return static_cast<int>(entries.size()); }

  /// I(r) = {1..count(r)} at every radius of the ladder.
  static SelectionRule prefix(const std::vector<double>& radii, const RateFunction& R,
                              const std::function<int(double)>& count) {
    SelectionRule s;
    for (double r : radii) {
      SelectionEntry e{r, R(r), {}};
      int c = count(r);
      for (int i = 1; i <= c; ++i) e.indices.push_back(i);
      s.entries.push_back(std::move(e));
    }
    return s;
  }

  std::vector<double> ratios() const {
    std::vector<double> out;
    for (const auto& e : entries) out.push_back(e.ratio());
    return out;
  }

  /// Empty string when the surrogate holds, else the first violation.
  std::string growth_violation() const {
    if (entries.empty()) return "selection has no rungs";
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (entries[k].indices.empty()) return "I_" + std::to_string(k + 1) + " is empty";
      if (k > 0 && !(entries[k].ratio() < entries[k - 1].ratio()))
        return "growth ratio does not decrease at rung " + std::to_string(k + 1);
    }
    if (!(entries.back().ratio() < final_ratio_max))
      return "final growth ratio " + std::to_string(entries.back().ratio()) + " is not below " +
             std::to_string(final_ratio_max);
    return {};
  }
  bool growth_ok() const { return growth_violation().empty(); }

  std::string growth_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "k,r_k,R_k,size,ratio\n";
    for (std::size_t k = 0; k < entries.size(); ++k)
      os << k + 1 << ',' << entries[k].r << ',' << entries[k].R << ',' << entries[k].indices.size() << ','
         << entries[k].ratio() << '\n';
    return os.str();
  }
};

/// Smallest integer k0 >= 1 with c <= k0^m, by integer scan.
inline int smallest_power_index(double c, double m, int cap = 100'000'000) {
  if (!(m > 0.0)) throw InputError("smallest_power_index: m must be positive");
  int lo = 1;
  if (c <= 1.0) return 1;
  // Exponential bracket, then bisection on the monotone predicate.
  int hi = 2;
  while (std::pow(static_cast<double>(hi), m) < c) {
    if (hi > cap / 2) throw InputError("smallest_power_index: index exceeds cap");
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    (std::pow(static_cast<double>(mid), m) >= c ? hi : lo) = mid;
  }
  return std::pow(static_cast<double>(lo), m) >= c ? lo : hi;
}

// ---- rated extremality of infinite systems -----------------------------------------

/// Checks that the shifted intersection over I_k misses B(xbar, r_k R(r_k)). The
/// schedule row k lists shifts for the indices of I_k in order.
inline ExtremalityVerdict verify_rated_extremality_infinite(const IndexedFamily& fam, const RateFunction& R,
                                                            const TranslationSchedule& sched,
                                                            const SelectionRule& sel, int grid = 101,
                                                            double tol_feas_ext = 1e-9) {
  if (auto why = sel.growth_violation(); !why.empty()) throw InputError("selection: " + why);
  if (sched.rungs() != sel.rungs())
    throw InputError("selection has " + std::to_string(sel.rungs()) + " rungs, schedule " +
                     std::to_string(sched.rungs()));
  ExtremalityVerdict v;
  for (int k = 1; k <= sched.rungs(); ++k) {
    const auto& e = sel.at(k);
    if (sched.at(k).size() != e.indices.size())
      throw InputError("rung " + std::to_string(k) + ": schedule lists " + std::to_string(sched.at(k).size()) +
                       " shifts for " + std::to_string(e.indices.size()) + " indices");
    double r = sched.radius(k);
    fam.require_base(e.indices);
    if (r == 0.0) {
      v.violated.push_back(true);
      v.rungs_checked = k;
      if (!v.counterexample_k) {
        v.counterexample_k = k;
        v.witness = fam.xbar;
      }
      continue;
    }
    if (std::abs(r - e.r) > 1e-9 * e.r)
      throw InputError("rung " + std::to_string(k) + ": r_k=" + std::to_string(r) +
                       " does not match the selection radius " + std::to_string(e.r));
    std::vector<Set> shifted;
    for (std::size_t i = 0; i < e.indices.size(); ++i) shifted.push_back(fam.at(e.indices[i]).translate(sched.at(k)[i]));
    auto w = find_common_point(shifted, fam.xbar, r * R(r), grid, tol_feas_ext);
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

// ---- certificates --------------------------------------------------------------

struct InfiniteCertificate {
  double eps = 0.0;
  double r = 0.0;
  std::vector<int> indices;
  std::vector<Vec> points;
  std::vector<Vec> duals;

  Residuals residuals() const { return certificate_residuals(duals); }

  void validate_structure() const {
    if (indices.empty()) throw InputError("certificate: empty index list");
    if (points.size() != indices.size() || duals.size() != indices.size())
      throw InputError("certificate: index, point and dual lists differ in length");
    if (!(eps > 0.0) || !(r >= 0.0)) throw InputError("certificate: eps must be positive and r nonnegative");
  }

  json to_json() const {
    json p = json::array(), d = json::array();
    for (const auto& x : points) p.push_back(schema::to_json(x));
    for (const auto& x : duals) d.push_back(schema::to_json(x));
    auto res = residuals();
    return {{"eps", eps},     {"r", r},
            {"indices", indices},
            {"points", p},    {"duals", d},
            {"residuals", {{"sum_norm", res.sum_norm}, {"unit_defect", res.unit_defect}}}};
  }
};

struct CheckReport {
  bool pass = true;
  std::vector<std::string> failures;
  json margins = json::object();

  void fail(std::string why) {
    pass = false;
    failures.push_back(std::move(why));
  }
  json to_json() const { return {{"pass", pass}, {"failures", failures}, {"margins", margins}}; }
};

/// Searches an accepted Frechet normal v of `set` at x with ||x* - v|| <= radius.
/// Candidates are x* itself, 0, and the projections of x* on sampled or analytic normal rays.
inline std::optional<Vec> nearby_frechet_normal(const Set& set, const Vec& x, const Vec& xstar, double radius,
                                                const RadiusLadder& ladder, double tol_res,
                                                const std::optional<Vec>& analytic = std::nullopt) {
  std::vector<Vec> cands{xstar};
  std::vector<Vec> rays;
  if (analytic) rays.push_back(*analytic);
  for (const auto& d : limiting_cone_sample(set, x, ladder).directions) rays.push_back(d);
  for (const auto& d : rays) cands.push_back(d * std::max(0.0, dot(xstar, d)));
  cands.push_back(Vec(x.size()));
  for (const auto& v : cands) {
    if (dist(v, xstar) > radius) continue;
    if (is_eps_normal(eps_normal_residual(set, x, v, ladder), 0.0, tol_res)) return v;
  }
  return std::nullopt;
}

struct CertificateTolerances {
  double cert = 1e-6;
  double res = 1e-3;
  double feas = 1e-9;
};

inline RadiusLadder certificate_ladder() {
  RadiusLadder l;
  l.rungs = 10;
  l.samples = 128;
  return l;
}

/// Checks |I| r < eps, ||x_i - xbar|| <= eps, x*_i in N^(x_i; Omega_i) + r B*, and
/// the balance sum x*_i = 0, sum ||x*_i||^2 = 1.
inline CheckReport verify_infinite_certificate(const InfiniteCertificate& c, const IndexedFamily& fam,
                                               const RadiusLadder& ladder = certificate_ladder(),
                                               const CertificateTolerances& tol = {}) {
  c.validate_structure();
  CheckReport rep;
  double N = static_cast<double>(c.indices.size());
  rep.margins["rate"] = c.eps - N * c.r;
  if (!(N * c.r < c.eps)) rep.fail("rate condition |I| r < eps fails: " + std::to_string(N * c.r));
  double worst_dist = 0.0, worst_dual = 0.0;
  for (std::size_t i = 0; i < c.indices.size(); ++i) {
    const int idx = c.indices[i];
    worst_dist = std::max(worst_dist, dist(c.points[i], fam.xbar));
    if (dist(c.points[i], fam.xbar) > c.eps)
      rep.fail("point " + std::to_string(idx) + " lies farther than eps from xbar");
    Set s = fam.at(idx);
    if (!s.contains(c.points[i], tol.feas)) {
      rep.fail("point " + std::to_string(idx) + " is not in its set");
      continue;
    }
    std::optional<Vec> analytic;
    if (fam.normal) analytic = fam.normal(idx, c.points[i]);
    auto v = nearby_frechet_normal(s, c.points[i], c.duals[i], c.r + tol.cert, ladder, tol.res, analytic);
    if (!v) {
      rep.fail("dual " + std::to_string(idx) + " is not within r of an accepted Frechet normal");
      worst_dual = INFINITY;
    } else {
      worst_dual = std::max(worst_dual, dist(*v, c.duals[i]));
    }
  }
  auto res = c.residuals();
  rep.margins["max_point_distance"] = worst_dist;
  rep.margins["max_dual_inflation"] = worst_dual;
  rep.margins["sum_norm"] = res.sum_norm;
  rep.margins["unit_defect"] = res.unit_defect;
  if (res.sum_norm > tol.cert) rep.fail("sum_norm " + std::to_string(res.sum_norm));
  if (res.unit_defect > tol.cert) rep.fail("unit_defect " + std::to_string(res.unit_defect));
  return rep;
}

struct Nontriviality {
  bool trivial = false;
  std::optional<int> dominating;
};

/// Trivial iff some i0 has ||x*_i|| <= r for every other i.
inline Nontriviality nontriviality_diagnostic(const InfiniteCertificate& c) {
  c.validate_structure();
  std::vector<std::size_t> big;
  for (std::size_t i = 0; i < c.duals.size(); ++i)
    if (norm(c.duals[i]) > c.r) big.push_back(i);
  Nontriviality out;
  if (big.size() > 1) return out;
  out.trivial = true;
  if (big.size() == 1) {
    out.dominating = c.indices[big[0]];
  } else {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < c.duals.size(); ++i)
      if (norm(c.duals[i]) > norm(c.duals[arg])) arg = i;
    out.dominating = c.indices[arg];
  }
  return out;
}

struct QuantitativeBounds {
  double sum_bound = 0.0;
  double distance_bound = 0.0;
  double sum_norm = 0.0;
  double max_distance = 0.0;
  bool pass = false;
};

/// ||sum x*_i|| <= 4 N^{3/4} / R^{1/2} and ||x_i - xbar|| <= 2 r R^{1/2} N^{3/4}.
inline QuantitativeBounds quantitative_bounds_check(double sum_norm, const std::vector<double>& distances,
                                                    int N, double R, double r) {
  if (N < 1 || !(R > 0.0) || !(r >= 0.0)) throw InputError("quantitative bounds need N >= 1, R > 0, r >= 0");
  QuantitativeBounds q;
  double n34 = std::pow(static_cast<double>(N), 0.75);
  q.sum_bound = 4.0 * n34 / std::sqrt(R);
  q.distance_bound = 2.0 * r * std::sqrt(R) * n34;
  q.sum_norm = sum_norm;
  for (double d : distances) q.max_distance = std::max(q.max_distance, d);
  q.pass = sum_norm <= q.sum_bound && q.max_distance <= q.distance_bound;
  return q;
}

inline QuantitativeBounds quantitative_bounds_check(const InfiniteCertificate& c, const Vec& xbar, double R) {
  std::vector<double> d;
  for (const auto& x : c.points) d.push_back(dist(x, xbar));
  return quantitative_bounds_check(c.residuals().sum_norm, d, static_cast<int>(c.indices.size()), R, c.r);
}

// ---- measure of overlapping ------------------------------------------------------

struct OverlapConfig {
  int directions = 64;
  int nu_grid = 200;
  double nu_max = 4.0;
  int iterations = 100;
  int bisection = 30;
  double tol = 1e-7;
  std::uint64_t seed = 0x5eed;
  bool negate_directions = false;
};

struct OverlapResult {
  double value = 0.0;
  bool grid_capped = false;
  /// Direction attaining the minimum and the smallest nu found infeasible along it.
  Vec direction;
  double escape = std::numeric_limits<double>::infinity();
};

namespace detail {

/// Cyclic projections onto A, A-ball, B + t, B-ball + t for u in A n (B + t) with optional
/// truncation ||u|| <= rho and ||u - t|| <= rho. `u` carries the warm start in and the last iterate out.
inline bool difference_contains(const Set& A, const Set& B, const Vec& t, std::optional<double> rho,
                                int iterations, double tol, Vec& u) {
  Set Bt = B.translate(-1.0 * t);
  auto ball_proj = [](const Vec& x, const Vec& c, double r) {
    Vec d = x - c;
    double n = norm(d);
    return n <= r ? x : c + d * (r / n);
  };
  Vec zero(t.size());
  if (rho) {
    // Membership grid over rho B first; inside tests are cheap compared with projections.
    const std::size_t n = t.size();
    const int g = n <= 2 ? 41 : (n == 3 ? 13 : 0);
    auto hit = [&](const Vec& x) {
      return norm(x) <= *rho && dist(x, t) <= *rho && A.inside(x) && Bt.inside(x);
    };
    if (g > 0) {
      std::vector<int> idx(n, 0);
      while (true) {
        Vec x(n);
        for (std::size_t k = 0; k < n; ++k) x[k] = *rho * (-1.0 + 2.0 * idx[k] / (g - 1));
        if (hit(x)) {
          u = x;
          return true;
        }
        std::size_t k = 0;
        while (k < n && ++idx[k] == g) idx[k++] = 0;
        if (k == n) break;
      }
    } else {
      auto key = rng::key(0x5eed, "overlap_grid");
      for (int s = 0; s < 1681; ++s) {
        Vec x = rng::direction(n, key, s) * (*rho * std::pow(rng::uniform(key, 100000 + s), 1.0 / n));
        if (hit(x)) {
          u = x;
          return true;
        }
      }
    }
  }
  if (u.size() != t.size()) u = 0.5 * t;
  if (rho) u = ball_proj(u, zero, *rho);
  u = A.project(u);
  for (int it = 0; it < iterations; ++it) {
    Vec p = Bt.project(u);
    double viol = dist(p, u);
    if (rho) viol = std::max({viol, norm(u) - *rho, dist(u, t) - *rho});
    if (viol <= tol) return true;
    if (rho) {
      p = ball_proj(p, t, *rho);
      p = ball_proj(p, zero, *rho);
    }
    Vec next = A.project(p);
    if (!all_finite(next)) throw NumericFailure("overlap: projection produced a non-finite point", next.values());
    if (next == u) return false;
    u = std::move(next);
  }
  double viol = Bt.distance(u);
  if (rho) viol = std::max({viol, norm(u) - *rho, dist(u, t) - *rho});
  return viol <= tol;
}

}  // namespace detail

/// Lower-bound estimate of sup{nu : nu B within Omega1 - Omega2} (or of the truncated
/// pair when `rho` is set): per direction the grid is scanned up to the first nu
/// without a decomposition, then refined by bisection; the value is the minimum.
inline OverlapResult overlap_measure(const Set& A, const Set& B, const OverlapConfig& cfg = {},
                                     std::optional<double> rho = std::nullopt) {
  if (cfg.directions < 1 || cfg.nu_grid < 1 || !(cfg.nu_max > 0.0))
    throw InputError("overlap: directions, grid and nu_max must be positive");
  const std::size_t n = A.dimension();
  if (B.dimension() != n) throw InputError("overlap: dimension mismatch");
  auto key = rng::key(cfg.seed, "overlap");
  OverlapResult out;
  out.value = cfg.nu_max;
  out.grid_capped = true;
  const double tol = cfg.tol * cfg.nu_max;
  Vec warm;
  auto feasible = [&](const Vec& d, double nu) {
    Vec u = warm;
    bool ok = detail::difference_contains(A, B, nu * d, rho, cfg.iterations, tol, u);
    if (ok) warm = u;
    return ok;
  };
  for (int s = 0; s < cfg.directions; ++s) {
    Vec d = rng::direction(n, key, static_cast<std::uint64_t>(s));
    if (cfg.negate_directions) d = -1.0 * d;
    warm = Vec();
    if (feasible(d, out.value)) continue;
    const double step = cfg.nu_max / cfg.nu_grid;
    double lo = -1.0, hi = out.value;
    for (int g = 0; g <= cfg.nu_grid; ++g) {
      double nu = g * step;
      if (nu >= hi) break;
      if (!feasible(d, nu)) {
        hi = nu;
        break;
      }
      lo = nu;
    }
    if (lo < 0.0) {
      out.value = 0.0;
      out.grid_capped = false;
      out.direction = d;
      out.escape = 0.0;
      return out;
    }
    for (int b = 0; b < cfg.bisection; ++b) {
      double mid = 0.5 * (lo + hi);
      (feasible(d, mid) ? lo : hi) = mid;
    }
    if (lo < out.value) {
      out.value = lo;
      out.grid_capped = false;
      out.direction = d;
      out.escape = hi;
    }
  }
  return out;
}

struct LinearSubextremality {
  double estimate = 0.0;
  std::vector<double> radii;
  std::vector<double> per_rung;
  /// Minimizing data on the two finest rungs.
  Vec x1, x2;
  double r = 0.0;
  OverlapResult overlap;
};

struct SubextremalityConfig {
  RadiusLadder ladder{0.1, 0.5, 5, 1, 0x5eed};
  OverlapConfig overlap{8, 200, 1.0, 100, 20, 1e-7, 0x5eed, false};
};

/// Estimate of liminf theta([Omega1 - x1] n rB, [Omega2 - x2] n rB) / r over sampled
/// x_i near xbar; the minimum over the two finest rungs is returned.
inline LinearSubextremality linear_subextremality_estimate(const Set& A, const Set& B, const Vec& xbar,
                                                           const SubextremalityConfig& cfg = {}) {
  cfg.ladder.validate();
  require_common_point({A, B}, xbar, 1e-9);
  LinearSubextremality out;
  out.estimate = std::numeric_limits<double>::infinity();
  auto near_points = [&](const Set& S, int j, std::string_view tag) {
    std::vector<Vec> pts{xbar};
    for (int s = 0; s < cfg.ladder.samples; ++s) {
      Vec w = S.project(cfg.ladder.probe(xbar, tag, j, s));
      if (dist(w, xbar) <= cfg.ladder.radius(j)) pts.push_back(w);
    }
    return pts;
  };
  for (int j = 0; j < cfg.ladder.rungs; ++j) {
    double r = cfg.ladder.radius(j);
    OverlapConfig oc = cfg.overlap;
    oc.nu_max = 2.0 * r;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& x1 : near_points(A, j, "lin_sub_1"))
      for (const auto& x2 : near_points(B, j, "lin_sub_2")) {
        auto o = overlap_measure(A.translate(x1), B.translate(x2), oc, r);
        double ratio = o.value / r;
        if (ratio < best) best = ratio;
        if (j >= cfg.ladder.rungs - 2 && ratio < out.estimate) {
          out.estimate = ratio;
          out.x1 = x1;
          out.x2 = x2;
          out.r = r;
          out.overlap = o;
        }
      }
    out.radii.push_back(r);
    out.per_rung.push_back(best);
  }
  return out;
}

// ---- perturbed extremality -----------------------------------------------------

struct PerturbedWitness {
  std::vector<int> indices;
  std::vector<Vec> points;
  std::vector<Vec> shifts;
};

struct PerturbedVerdict {
  bool holds = false;
  double r = 0.0;
  double ball_radius = 0.0;
  std::optional<Vec> witness;
};

/// Checks that n (Omega_i - x_i - a_i) misses (r R(r)) B, r = max ||a_i||.
inline PerturbedVerdict verify_perturbed_extremality(const IndexedFamily& fam, const RateFunction& R, double eps,
                                                     const PerturbedWitness& w, int grid = 101,
                                                     double growth_bound = 0.5, double tol_feas = 1e-9) {
  if (w.indices.empty() || w.points.size() != w.indices.size() || w.shifts.size() != w.indices.size())
    throw InputError("perturbed witness: index, point and shift lists differ in length");
  PerturbedVerdict v;
  for (std::size_t i = 0; i < w.indices.size(); ++i) {
    if (!fam.at(w.indices[i]).contains(w.points[i], tol_feas))
      throw InputError("perturbed witness: x_" + std::to_string(w.indices[i]) + " is not in its set");
    if (dist(w.points[i], fam.xbar) > eps)
      throw InputError("perturbed witness: x_" + std::to_string(w.indices[i]) + " is farther than eps from xbar");
    v.r = std::max(v.r, norm(w.shifts[i]));
  }
  if (!(v.r < eps)) throw InputError("perturbed witness: shift size must be below eps");
  if (v.r > 0.0) {
    double ratio = std::pow(static_cast<double>(w.indices.size()), 1.5) / R(v.r);
    if (!(ratio <= growth_bound))
      throw InputError("perturbed witness: |I|^{3/2}/R(r) = " + std::to_string(ratio) + " exceeds the growth bound");
  }
  v.ball_radius = v.r > 0.0 ? v.r * R(v.r) : 0.0;
  std::vector<Set> shifted;
  for (std::size_t i = 0; i < w.indices.size(); ++i)
    shifted.push_back(fam.at(w.indices[i]).translate(w.points[i] + w.shifts[i]));
  Vec origin(fam.dimension);
  std::optional<Vec> hit;
  if (v.ball_radius == 0.0) {
    bool all = std::all_of(shifted.begin(), shifted.end(), [&](const Set& s) { return s.contains(origin, tol_feas); });
    if (all) hit = origin;
  } else {
    hit = find_common_point(shifted, origin, v.ball_radius, grid, tol_feas);
  }
  v.witness = hit;
  v.holds = !hit.has_value();
  return v;
}

struct PerturbedPipeline {
  LinearSubextremality estimate;
  PerturbedWitness witness;
  RateFunction rate;
  double eps = 0.0;
  PerturbedVerdict verdict;
};

/// From a small truncated overlap theta < nu r along direction d, the shifts
/// a_1 = e/2, a_2 = -e/2 with e = scale * nu_escape d separate the pair on the ball of
/// radius r - ||e||/2; the rate is chosen so that r_a R(r_a) equals that radius.
inline PerturbedPipeline perturbed_from_subextremality(const Set& A, const Set& B, const Vec& xbar, double eps,
                                                       const SubextremalityConfig& cfg = {},
                                                       double escape_scale = 1.5) {
  PerturbedPipeline p;
  p.eps = eps;
  p.estimate = linear_subextremality_estimate(A, B, xbar, cfg);
  const auto& o = p.estimate.overlap;
  if (!std::isfinite(o.escape) || o.direction.size() == 0)
    throw PreconditionError("perturbed pipeline: overlap is grid-capped, no separating direction");
  Vec e = o.direction * std::max(escape_scale * o.escape, 1e-12);
  double ra = 0.5 * norm(e);
  double radius = p.estimate.r - ra;
  if (!(radius > 0.0)) throw PreconditionError("perturbed pipeline: escape vector too long for the rung");
  p.rate = RateFunction::power(radius / std::sqrt(ra), 0.5);
  IndexedFamily fam = IndexedFamily::padded({A, B}, xbar, "pair");
  p.witness = {{1, 2}, {p.estimate.x1, p.estimate.x2}, {0.5 * e, -0.5 * e}};
  p.verdict = verify_perturbed_extremality(fam, p.rate, eps, p.witness);
  return p;
}

}  // namespace epl
