#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epl/errors.hpp"
#include "epl/function1d.hpp"
#include "epl/schema.hpp"
#include "epl/vec.hpp"

namespace epl {

struct Tolerances {
  double feas = 1e-9;
  double proj = 1e-7;
};

namespace detail {

class SetNode {
 public:
  virtual ~SetNode() = default;
  virtual std::size_t dimension() const = 0;
  virtual bool inside(const Vec& x) const = 0;
  virtual Vec project(const Vec& x) const = 0;
  virtual double distance(const Vec& x) const {
    if (inside(x)) return 0.0;
    return dist(x, project(x));
  }
  virtual bool convex() const = 0;
  /// False when project() returns a feasible point that is not guaranteed nearest.
  virtual bool exact_projection() const { return true; }
  virtual std::string family() const = 0;
  virtual json to_json() const = 0;
};

}  // namespace detail

/// Closed nonempty subset of R^n exposed through membership, nearest-point
/// projection and distance. Immutable and safe to share between threads.
class Set {
 public:
  explicit Set(std::shared_ptr<const detail::SetNode> node) : node_(std::move(node)) {}

  std::size_t dimension() const { return node_->dimension(); }
  bool convex() const { return node_->convex(); }
  bool exact_projection() const { return node_->exact_projection(); }
  std::string family() const { return node_->family(); }
  json to_json() const { return node_->to_json(); }
  const detail::SetNode& node() const { return *node_; }

  /// Exact membership test (no tolerance).
  bool inside(const Vec& x) const {
    check_dim(x);
    return node_->inside(x);
  }

  bool contains(const Vec& x, double tol) const {
    check_dim(x);
    if (tol < 0.0) throw InputError("contains: tolerance must be nonnegative");
    if (node_->inside(x)) return true;
    return node_->distance(x) <= tol;
  }

  Vec project(const Vec& x) const {
    check_dim(x);
    if (!all_finite(x)) throw InputError("project: non-finite point");
    return node_->project(x);
  }

  double distance(const Vec& x) const {
    check_dim(x);
    return node_->distance(x);
  }

  /// The set {w - a : w in *this}.
  Set translate(const Vec& a) const;

  void check_dim(const Vec& x) const {
    if (x.size() != dimension())
      throw InputError("dimension mismatch: set in R^" + std::to_string(dimension()) +
                       ", point in R^" + std::to_string(x.size()));
  }

 private:
  std::shared_ptr<const detail::SetNode> node_;
};

namespace detail {

class Halfspace final : public SetNode {
 public:
  Halfspace(Vec a, double b) : a_(std::move(a)), b_(b), nsq_(norm_sq(a_)) {
    if (nsq_ == 0.0) throw InputError("halfspace: zero normal");
  }
  std::size_t dimension() const override { return a_.size(); }
  bool inside(const Vec& x) const override { return dot(a_, x) <= b_; }
  Vec project(const Vec& x) const override {
    double v = dot(a_, x) - b_;
    if (v <= 0.0) return x;
    return x - a_ * (v / nsq_);
  }
  double distance(const Vec& x) const override {
    return std::max(0.0, dot(a_, x) - b_) / std::sqrt(nsq_);
  }
  bool convex() const override { return true; }
  std::string family() const override { return "halfspace"; }
  json to_json() const override {
    return {{"family", "halfspace"}, {"normal", schema::to_json(a_)}, {"offset", b_}};
  }
  const Vec& normal() const { return a_; }
  double offset() const { return b_; }

 private:
  Vec a_;
  double b_;
  double nsq_;
};

class Ball final : public SetNode {
 public:
  Ball(Vec c, double r) : c_(std::move(c)), r_(r) {
    if (!(r >= 0.0)) throw InputError("ball: radius must be nonnegative");
  }
  std::size_t dimension() const override { return c_.size(); }
  bool inside(const Vec& x) const override { return norm_sq(x - c_) <= r_ * r_; }
  Vec project(const Vec& x) const override {
    Vec d = x - c_;
    double n = norm(d);
    if (n <= r_) return x;
    return c_ + d * (r_ / n);
  }
  double distance(const Vec& x) const override { return std::max(0.0, norm(x - c_) - r_); }
  bool convex() const override { return true; }
  std::string family() const override { return "ball"; }
  json to_json() const override {
    return {{"family", "ball"}, {"center", schema::to_json(c_)}, {"radius", r_}};
  }

 private:
  Vec c_;
  double r_;
};

class Box final : public SetNode {
 public:
  Box(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    lo_.check_same(hi_);
    for (std::size_t i = 0; i < lo_.size(); ++i)
      if (!(lo_[i] <= hi_[i])) throw InputError("box: lo must not exceed hi");
  }
  std::size_t dimension() const override { return lo_.size(); }
  bool inside(const Vec& x) const override {
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
    return true;
  }
  Vec project(const Vec& x) const override {
    Vec w = x;
    for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::clamp(x[i], lo_[i], hi_[i]);
    return w;
  }
  bool convex() const override { return true; }
  std::string family() const override { return "box"; }
  json to_json() const override {
    auto side = [](const Vec& v) {
      json a = json::array();
      for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
      return a;
    };
    return {{"family", "box"}, {"lo", side(lo_)}, {"hi", side(hi_)}};
  }

 private:
  Vec lo_, hi_;
};

class WholeSpace final : public SetNode {
 public:
  explicit WholeSpace(std::size_t n) : n_(n) {
    if (n == 0) throw InputError("whole_space: dimension must be positive");
  }
  std::size_t dimension() const override { return n_; }
  bool inside(const Vec&) const override { return true; }
  Vec project(const Vec& x) const override { return x; }
  bool convex() const override { return true; }
  std::string family() const override { return "whole_space"; }
  json to_json() const override { return {{"family", "whole_space"}, {"dimension", n_}}; }

 private:
  std::size_t n_;
};

/// Epigraph {s >= f(t)} or hypograph {s <= f(t)} of a scalar function, in R^2.
class Graph final : public SetNode {
 public:
  Graph(Function1d f, bool epi) : f_(std::move(f)), epi_(epi) {}
  std::size_t dimension() const override { return 2; }
  bool inside(const Vec& x) const override {
    double v = f_(x[0]);
    return epi_ ? x[1] >= v : x[1] <= v;
  }
  bool convex() const override { return epi_ ? f_.convex() : f_.concave(); }
  std::string family() const override { return epi_ ? "epigraph1d" : "hypograph1d"; }
  json to_json() const override {
    json o = {{"family", family()}};
    f_.write_json(o);
    return o;
  }
  const Function1d& function() const { return f_; }
  bool epigraph() const { return epi_; }

  Vec project(const Vec& x) const override {
    const double t = x[0], s = x[1];
    const double ft = f_(t);
    if (epi_ ? s >= ft : s <= ft) return x;
    // (t, f(t)) is feasible, so every nearest point lies in [t - d0, t + d0].
    const double d0 = std::abs(ft - s);
    const bool cvx = convex();
    const int n = cvx ? 257 : 10001;
    const double lo = t - d0, step = 2.0 * d0 / (n - 1);
    auto h = [&](double u) {
      double du = u - t, dv = f_(u) - s;
      return du * du + dv * dv;
    };
    auto grid = [&](int i) { return i == (n - 1) / 2 ? t : lo + step * i; };
    std::vector<double> hs(n);
    for (int i = 0; i < n; ++i) hs[i] = h(grid(i));
    std::vector<int> minima;
    for (int i = 0; i < n; ++i) {
      bool left = i == 0 || hs[i] <= hs[i - 1];
      bool right = i == n - 1 || hs[i] <= hs[i + 1];
      if (left && right) minima.push_back(i);
    }
    std::sort(minima.begin(), minima.end(), [&](int a, int b) {
      return hs[a] != hs[b] ? hs[a] < hs[b] : a > b;
    });
    if (minima.size() > 8) minima.resize(8);

    double best_u = t, best_h = hs[(n - 1) / 2];
    for (int i : minima) {
      double a = lo + step * std::max(0, i - 1);
      double b = lo + step * std::min(n - 1, i + 1);
      double u = refine(a, b, t, s, h);
      double hu = h(u);
      double hi = hs[i];
      if (hi < hu) {
        u = grid(i);
        hu = hi;
      }
      double tie = 1e-12 * (best_h + 1e-300);
      if (hu < best_h - tie) {
        best_u = u;
        best_h = hu;
      } else if (hu <= best_h + tie) {
        // Lexicographic-max tie-breaking between (numerically) equal minimizers.
        if (u > best_u || (u == best_u && f_(u) > f_(best_u))) {
          best_u = u;
          best_h = std::min(best_h, hu);
        }
      }
    }
    return Vec{best_u, f_(best_u)};
  }

 private:
  template <class H>
  double refine(double a, double b, double t, double s, const H& h) const {
    auto dh = [&](double u) -> std::optional<double> {
      auto fp = f_.derivative(u);
      if (!fp) return std::nullopt;
      return 2.0 * (u - t) + 2.0 * (f_(u) - s) * *fp;
    };
    auto da = dh(a), db = dh(b);
    if (da && db && *da < 0.0 && *db > 0.0) {
      for (int it = 0; it < 200; ++it) {
        double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        auto dm = dh(m);
        if (!dm) break;
        (*dm > 0.0 ? b : a) = m;
      }
      return h(a) <= h(b) ? a : b;
    }
    constexpr double g = 0.6180339887498949;
    double c = b - g * (b - a), d = a + g * (b - a);
    double hc = h(c), hd = h(d);
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
      if (hc <= hd) {
        b = d;
        d = c;
        hd = hc;
        c = b - g * (b - a);
        hc = h(c);
      } else {
        a = c;
        c = d;
        hc = hd;
        d = a + g * (b - a);
        hd = h(d);
      }
      if (!(c > a && d < b)) break;
    }
    return hc <= hd ? c : d;
  }

  Function1d f_;
  bool epi_;
};

class Translated final : public SetNode {
 public:
  Translated(Set inner, Vec shift) : inner_(std::move(inner)), shift_(std::move(shift)) {
    inner_.check_dim(shift_);
  }
  std::size_t dimension() const override { return shift_.size(); }
  bool inside(const Vec& x) const override { return inner_.node().inside(x - shift_); }
  Vec project(const Vec& x) const override { return inner_.node().project(x - shift_) + shift_; }
  double distance(const Vec& x) const override { return inner_.node().distance(x - shift_); }
  bool convex() const override { return inner_.convex(); }
  bool exact_projection() const override { return inner_.exact_projection(); }
  std::string family() const override { return "translated"; }
  json to_json() const override {
    return {{"family", "translated"}, {"shift", schema::to_json(shift_)}, {"inner", inner_.to_json()}};
  }

 private:
  Set inner_;
  Vec shift_;
};

class Product final : public SetNode {
 public:
  explicit Product(std::vector<Set> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw InputError("product: no factors");
    n_ = 0;
    for (const auto& f : factors_) n_ += f.dimension();
  }
  std::size_t dimension() const override { return n_; }
  bool inside(const Vec& x) const override {
    std::size_t off = 0;
    for (const auto& f : factors_) {
      if (!f.node().inside(slice(x, off, f.dimension()))) return false;
      off += f.dimension();
    }
    return true;
  }
  Vec project(const Vec& x) const override {
    std::vector<Vec> parts;
    std::size_t off = 0;
    for (const auto& f : factors_) {
      parts.push_back(f.node().project(slice(x, off, f.dimension())));
      off += f.dimension();
    }
    return concat(parts);
  }
  bool convex() const override {
    return std::all_of(factors_.begin(), factors_.end(), [](const Set& s) { return s.convex(); });
  }
  bool exact_projection() const override {
    return std::all_of(factors_.begin(), factors_.end(),
                       [](const Set& s) { return s.exact_projection(); });
  }
  std::string family() const override { return "product"; }
  json to_json() const override {
    json arr = json::array();
    for (const auto& f : factors_) arr.push_back(f.to_json());
    return {{"family", "product"}, {"factors", arr}};
  }

 private:
  static Vec slice(const Vec& x, std::size_t off, std::size_t n) {
    return Vec(std::vector<double>(x.begin() + off, x.begin() + off + n));
  }
  std::vector<Set> factors_;
  std::size_t n_;
};

/// Finite intersection. Epigraph-only and hypograph-only systems fold into a
/// single graph set; other convex systems use Dykstra's algorithm, and
/// nonconvex systems fall back to cyclic projections (feasible, not nearest).
class Intersection final : public SetNode {
 public:
  explicit Intersection(std::vector<Set> members) : members_(std::move(members)) {
    if (members_.empty()) throw InputError("intersection: no members");
    n_ = members_.front().dimension();
    for (const auto& m : members_)
      if (m.dimension() != n_) throw InputError("intersection: dimension mismatch");
    build_parts();
  }
  std::size_t dimension() const override { return n_; }
  bool inside(const Vec& x) const override {
    if (folded_) return folded_->node().inside(x);
    for (const auto& m : parts_)
      if (!m.node().inside(x)) return false;
    return true;
  }
  Vec project(const Vec& x) const override {
    if (folded_) return folded_->node().project(x);
    if (inside(x)) return x;
    if (parts_.size() == 1) return parts_.front().node().project(x);
    return convex() ? dykstra(x) : cyclic(x);
  }
  bool convex() const override {
    if (folded_) return folded_->convex();
    return std::all_of(parts_.begin(), parts_.end(), [](const Set& s) { return s.convex(); });
  }
  bool exact_projection() const override {
    if (folded_) return folded_->exact_projection();
    return parts_.size() == 1 ? parts_.front().exact_projection() : convex();
  }
  std::string family() const override { return "intersection"; }
  json to_json() const override {
    json arr = json::array();
    for (const auto& m : members_) arr.push_back(m.to_json());
    return {{"family", "intersection"}, {"members", arr}};
  }
  const std::vector<Set>& members() const { return members_; }

 private:
  void flatten(const Set& s, std::vector<Set>& out) const {
    if (auto* in = dynamic_cast<const Intersection*>(&s.node())) {
      for (const auto& m : in->members_) flatten(m, out);
    } else if (!dynamic_cast<const WholeSpace*>(&s.node())) {
      out.push_back(s);
    }
  }

  void build_parts() {
    for (const auto& m : members_) flatten(m, parts_);
    if (parts_.empty()) {
      folded_ = Set(std::make_shared<WholeSpace>(n_));
      return;
    }
    bool all_epi = true, all_hypo = true;
    std::vector<Function1d> fs;
    for (const auto& p : parts_) {
      auto* g = dynamic_cast<const Graph*>(&p.node());
      if (!g) {
        all_epi = all_hypo = false;
        break;
      }
      all_epi = all_epi && g->epigraph();
      all_hypo = all_hypo && !g->epigraph();
      fs.push_back(g->function());
    }
    if (all_epi) folded_ = Set(std::make_shared<Graph>(Function1d::max_of(fs), true));
    else if (all_hypo) folded_ = Set(std::make_shared<Graph>(Function1d::min_of(fs), false));
  }

  bool feasible(const Vec& x, double tol) const {
    for (const auto& m : parts_)
      if (m.node().distance(x) > tol) return false;
    return true;
  }

  Vec dykstra(const Vec& x0) const {
    const std::size_t m = parts_.size();
    std::vector<Vec> y(m, Vec(n_));
    Vec x = x0;
    for (int cycle = 0; cycle < 100000; ++cycle) {
      Vec start = x;
      for (std::size_t j = 0; j < m; ++j) {
        Vec z = x + y[j];
        Vec xn = parts_[j].node().project(z);
        y[j] = z - xn;
        x = std::move(xn);
      }
      if (dist(x, start) <= 1e-15 * (1.0 + norm(x)) && feasible(x, 1e-12)) return x;
    }
    if (feasible(x, 1e-9)) return x;
    throw NumericFailure("intersection: Dykstra projection did not converge", x.values());
  }

  Vec cyclic(const Vec& x0) const {
    Vec x = x0;
    for (int cycle = 0; cycle < 10000; ++cycle) {
      for (const auto& p : parts_) x = p.node().project(x);
      if (feasible(x, 1e-12)) return x;
    }
    throw NumericFailure("intersection: cyclic projections did not reach a common point",
                         x.values());
  }

  std::vector<Set> members_;
  std::vector<Set> parts_;
  std::optional<Set> folded_;
  std::size_t n_;
};

}  // namespace detail

inline Set Set::translate(const Vec& a) const {
  check_dim(a);
  return Set(std::make_shared<detail::Translated>(*this, -a));
}

// ---- constructors ---------------------------------------------------------

inline Set halfspace(Vec normal, double offset) {
  return Set(std::make_shared<detail::Halfspace>(std::move(normal), offset));
}
inline Set ball(Vec center, double radius) {
  return Set(std::make_shared<detail::Ball>(std::move(center), radius));
}
inline Set box(Vec lo, Vec hi) { return Set(std::make_shared<detail::Box>(std::move(lo), std::move(hi))); }
inline Set whole_space(std::size_t n) { return Set(std::make_shared<detail::WholeSpace>(n)); }
inline Set epigraph(Function1d f) { return Set(std::make_shared<detail::Graph>(std::move(f), true)); }
inline Set hypograph(Function1d f) { return Set(std::make_shared<detail::Graph>(std::move(f), false)); }
inline Set translated(Set inner, Vec shift) {
  return Set(std::make_shared<detail::Translated>(std::move(inner), std::move(shift)));
}
inline Set intersection(std::vector<Set> members) {
  return Set(std::make_shared<detail::Intersection>(std::move(members)));
}
inline Set product(std::vector<Set> factors) {
  return Set(std::make_shared<detail::Product>(std::move(factors)));
}
inline Set polyhedron(const std::vector<std::pair<Vec, double>>& halfspaces) {
  std::vector<Set> hs;
  for (const auto& [a, b] : halfspaces) hs.push_back(halfspace(a, b));
  return intersection(std::move(hs));
}

/// epi(-||.||) in R^2.
inline Set negnorm_epigraph() { return epigraph(Function1d::neg_abs()); }

/// R x R_- when `upper` is false, R x R_+ when true.
inline Set halfplane_product(bool upper) { return halfspace(Vec{0.0, upper ? -1.0 : 1.0}, 0.0); }

// ---- serialization --------------------------------------------------------

inline std::optional<Set> set_from_json(const json& j, const std::string& path, SchemaErrors& err,
                                        std::optional<std::size_t> dim = std::nullopt);

namespace detail {

inline std::optional<std::vector<Set>> set_list(const json& j, const char* key,
                                                const std::string& path, SchemaErrors& err,
                                                std::optional<std::size_t> dim) {
  auto it = j.find(key);
  std::string p = schema::child(path, key);
  if (it == j.end() || !it->is_array() || it->empty()) {
    err.add(p, "expected a nonempty array of sets");
    return std::nullopt;
  }
  std::vector<Set> out;
  for (std::size_t i = 0; i < it->size(); ++i)
    if (auto s = set_from_json((*it)[i], schema::child(p, i), err, dim)) out.push_back(*s);
  if (out.size() != it->size()) return std::nullopt;
  return out;
}

}  // namespace detail

/// Reads a set description. Unknown families and fields are schema errors.
inline std::optional<Set> set_from_json(const json& j, const std::string& path, SchemaErrors& err,
                                        std::optional<std::size_t> dim) {
  if (!j.is_object()) {
    err.add(path, "expected a set object");
    return std::nullopt;
  }
  auto ft = j.find("family");
  if (ft == j.end() || !ft->is_string()) {
    err.add(schema::child(path, "family"), "missing or non-string family tag");
    return std::nullopt;
  }
  const std::string fam = ft->get<std::string>();
  std::size_t before = err.size();
  std::optional<Set> out;
  auto check_dim = [&](std::size_t n) {
    if (dim && *dim != n) {
      err.add(path, "set dimension " + std::to_string(n) + " does not match " + std::to_string(*dim));
      return false;
    }
    return true;
  };
  try {
    if (fam == "halfspace") {
      schema::strict_object(j, path, {"family", "normal", "offset"}, err);
      auto a = schema::vector(j, "normal", path, err);
      auto b = schema::number(j, "offset", path, err);
      if (a && b && err.size() == before && check_dim(a->size())) {
        if (norm(*a) == 0.0) err.add(schema::child(path, "normal"), "must be nonzero");
        else out = halfspace(*a, *b);
      }
    } else if (fam == "ball") {
      schema::strict_object(j, path, {"family", "center", "radius"}, err);
      auto c = schema::vector(j, "center", path, err);
      auto r = schema::number(j, "radius", path, err);
      if (r && *r < 0.0) err.add(schema::child(path, "radius"), "must be nonnegative");
      if (c && r && err.size() == before && check_dim(c->size())) out = ball(*c, *r);
    } else if (fam == "box") {
      schema::strict_object(j, path, {"family", "lo", "hi"}, err);
      auto side = [&](const char* key, double inf) -> std::optional<Vec> {
        auto it = j.find(key);
        if (it == j.end() || !it->is_array() || it->empty()) {
          err.add(schema::child(path, key), "expected a nonempty array of numbers or nulls");
          return std::nullopt;
        }
        std::vector<double> v;
        for (std::size_t i = 0; i < it->size(); ++i) {
          const auto& e = (*it)[i];
          if (e.is_null()) v.push_back(inf);
          else if (e.is_number()) v.push_back(e.get<double>());
          else err.add(schema::child(schema::child(path, key), i), "expected a number or null");
        }
        return Vec(v);
      };
      auto lo = side("lo", -std::numeric_limits<double>::infinity());
      auto hi = side("hi", std::numeric_limits<double>::infinity());
      if (lo && hi && err.size() == before) {
        if (lo->size() != hi->size()) err.add(path, "lo and hi differ in length");
        else if (check_dim(lo->size())) {
          bool ok = true;
          for (std::size_t i = 0; i < lo->size(); ++i) ok = ok && (*lo)[i] <= (*hi)[i];
          if (!ok) err.add(path, "lo must not exceed hi");
          else out = box(*lo, *hi);
        }
      }
    } else if (fam == "polyhedron") {
      schema::strict_object(j, path, {"family", "halfspaces"}, err);
      auto hs = detail::set_list(j, "halfspaces", path, err, dim);
      if (hs && err.size() == before) out = intersection(*hs);
    } else if (fam == "epigraph1d" || fam == "hypograph1d") {
      auto f = Function1d::read_json(j, path, err, {"family"});
      if (f && err.size() == before && check_dim(2))
        out = fam == "epigraph1d" ? epigraph(*f) : hypograph(*f);
    } else if (fam == "negnorm_epigraph") {
      schema::strict_object(j, path, {"family"}, err);
      if (err.size() == before && check_dim(2)) out = negnorm_epigraph();
    } else if (fam == "halfplane_product") {
      schema::strict_object(j, path, {"family", "sign"}, err);
      auto it = j.find("sign");
      if (it == j.end() || !it->is_string() || (*it != "minus" && *it != "plus"))
        err.add(schema::child(path, "sign"), "expected \"minus\" (R x R_-) or \"plus\" (R x R_+)");
      else if (err.size() == before && check_dim(2))
        out = halfplane_product(*it == "plus");
    } else if (fam == "whole_space") {
      schema::strict_object(j, path, {"family", "dimension"}, err);
      auto n = schema::number(j, "dimension", path, err);
      if (n && (*n < 1 || *n != std::floor(*n)))
        err.add(schema::child(path, "dimension"), "must be a positive integer");
      else if (n && err.size() == before && check_dim(static_cast<std::size_t>(*n)))
        out = whole_space(static_cast<std::size_t>(*n));
    } else if (fam == "translated") {
      schema::strict_object(j, path, {"family", "shift", "inner"}, err);
      auto a = schema::vector(j, "shift", path, err);
      std::optional<Set> inner;
      if (auto it = j.find("inner"); it != j.end())
        inner = set_from_json(*it, schema::child(path, "inner"), err, dim);
      else
        err.add(schema::child(path, "inner"), "missing required field");
      if (a && inner && err.size() == before) {
        if (a->size() != inner->dimension()) err.add(schema::child(path, "shift"), "dimension mismatch");
        else out = translated(*inner, *a);
      }
    } else if (fam == "intersection") {
      schema::strict_object(j, path, {"family", "members"}, err);
      auto ms = detail::set_list(j, "members", path, err, dim);
      if (ms && err.size() == before) out = intersection(*ms);
    } else if (fam == "product") {
      schema::strict_object(j, path, {"family", "factors"}, err);
      auto fs = detail::set_list(j, "factors", path, err, std::nullopt);
      if (fs && err.size() == before) {
        std::size_t n = 0;
        for (const auto& f : *fs) n += f.dimension();
        if (check_dim(n)) out = product(*fs);
      }
    } else {
      err.add(schema::child(path, "family"), "unknown family tag '" + fam + "'");
    }
  } catch (const Error& e) {
    err.add(path, e.what());
    out.reset();
  }
  if (err.size() != before) return std::nullopt;
  return out;
}

inline Set set_from_json(const json& j) {
  SchemaErrors err;
  auto s = set_from_json(j, "", err);
  if (!s) throw InputError(err.joined());
  return *s;
}

}  // namespace epl
