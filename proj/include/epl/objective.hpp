#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epl/function1d.hpp"
#include "epl/schema.hpp"
#include "epl/vec.hpp"

namespace epl {

/// Extended-real objective phi: R^n -> R u {+inf} from a small catalog.
class Objective {
 public:
  enum class Kind { Smooth, ConvexMax, Lipschitz, General };

  struct Piece {
    Vec c;
    double b;
  };

  static Objective linear(Vec c) {
    Objective o(Kind::Smooth, c.size(), {{"type", "linear"}, {"c", schema::to_json(c)}});
    o.eval_ = [c](const Vec& x) { return dot(c, x); };
    o.grad_ = [c](const Vec&) { return c; };
    return o;
  }

  /// 0.5 x^T Q x + c^T x with symmetric Q given by rows.
  static Objective quadratic(std::vector<Vec> q, Vec c) {
    for (const auto& row : q)
      if (row.size() != c.size()) throw InputError("quadratic: Q must be n x n");
    if (q.size() != c.size()) throw InputError("quadratic: Q must be n x n");
    json rows = json::array();
    for (const auto& r : q) rows.push_back(schema::to_json(r));
    Objective o(Kind::Smooth, c.size(), {{"type", "quadratic"}, {"q", rows}, {"c", schema::to_json(c)}});
    auto qx = [q](const Vec& x) {
      Vec y(x.size());
      for (std::size_t i = 0; i < q.size(); ++i) y[i] = dot(q[i], x);
      return y;
    };
    o.eval_ = [qx, c](const Vec& x) { return 0.5 * dot(x, qx(x)) + dot(c, x); };
    o.grad_ = [qx, c, q](const Vec& x) {
      // Gradient of the symmetrized form.
      Vec y(x.size());
      for (std::size_t i = 0; i < q.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) s += 0.5 * (q[i][j] + q[j][i]) * x[j];
        y[i] = s;
      }
      return y + c;
    };
    return o;
  }

  static Objective norm_sq(std::size_t n) {
    Objective o(Kind::Smooth, n, {{"type", "norm_sq"}, {"dimension", n}});
    o.eval_ = [](const Vec& x) { return epl::norm_sq(x); };
    o.grad_ = [](const Vec& x) { return 2.0 * x; };
    return o;
  }

  static Objective neg_norm_sq(std::size_t n) {
    Objective o(Kind::Smooth, n, {{"type", "neg_norm_sq"}, {"dimension", n}});
    o.eval_ = [](const Vec& x) { return -epl::norm_sq(x); };
    o.grad_ = [](const Vec& x) { return -2.0 * x; };
    return o;
  }

  static Objective norm(std::size_t n) {
    Objective o(Kind::Lipschitz, n, {{"type", "norm"}, {"dimension", n}});
    o.eval_ = [](const Vec& x) { return epl::norm(x); };
    return o;
  }

  static Objective neg_norm(std::size_t n) {
    Objective o(Kind::Lipschitz, n, {{"type", "neg_norm"}, {"dimension", n}});
    o.eval_ = [](const Vec& x) { return -epl::norm(x); };
    return o;
  }

  /// max_j <c_j, x> + b_j.
  static Objective max_affine(std::vector<Piece> pieces) {
    if (pieces.empty()) throw InputError("max_affine: no pieces");
    std::size_t n = pieces.front().c.size();
    json arr = json::array();
    for (const auto& p : pieces) {
      if (p.c.size() != n) throw InputError("max_affine: dimension mismatch");
      arr.push_back({{"c", schema::to_json(p.c)}, {"b", p.b}});
    }
    Objective o(Kind::ConvexMax, n, {{"type", "max_affine"}, {"pieces", arr}});
    o.pieces_ = pieces;
    o.eval_ = [pieces](const Vec& x) {
      double v = -std::numeric_limits<double>::infinity();
      for (const auto& p : pieces) v = std::max(v, dot(p.c, x) + p.b);
      return v;
    };
    return o;
  }

  /// |x_i| as the max of two linear pieces.
  static Objective abs_coord(std::size_t n, std::size_t i) {
    Objective o = max_affine({{unit(n, i), 0.0}, {-unit(n, i), 0.0}});
    o.desc_ = {{"type", "abs_coord"}, {"dimension", n}, {"index", i}};
    return o;
  }

  /// sqrt|x_i|, continuous but not Lipschitz at x_i = 0.
  static Objective sqrt_abs_coord(std::size_t n, std::size_t i) {
    Objective o(Kind::General, n, {{"type", "sqrt_abs_coord"}, {"dimension", n}, {"index", i}});
    o.eval_ = [i](const Vec& x) { return std::sqrt(std::abs(x[i])); };
    return o;
  }

  /// A scalar catalog function viewed as an objective on R^1.
  static Objective from_function(Function1d f) {
    Kind k = f.convex() && f.kind() != Function1d::Kind::Max ? Kind::Smooth : Kind::Lipschitz;
    if (f.kind() == Function1d::Kind::KMParabola || f.kind() == Function1d::Kind::NegLogPower ||
        f.kind() == Function1d::Kind::XSinInvX)
      k = Kind::General;
    json d = {{"type", "function1d"}};
    f.write_json(d);
    Objective o(k, 1, d);
    o.eval_ = [f](const Vec& x) { return f(x[0]); };
    if (k == Kind::Smooth)
      o.grad_ = [f](const Vec& x) { return Vec{f.derivative(x[0]).value_or(0.0)}; };
    return o;
  }

  /// Generic objective from callables (used in tests and by library users).
  static Objective custom(std::string name, std::size_t n, Kind kind,
                          std::function<double(const Vec&)> eval,
                          std::function<Vec(const Vec&)> grad = {}) {
    Objective o(kind, n, {{"type", "custom"}, {"name", std::move(name)}});
    o.eval_ = std::move(eval);
    o.grad_ = std::move(grad);
    return o;
  }

  Kind kind() const noexcept { return kind_; }
  std::size_t dimension() const noexcept { return n_; }
  const json& description() const noexcept { return desc_; }
  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  bool has_gradient() const noexcept { return static_cast<bool>(grad_); }

  double operator()(const Vec& x) const {
    if (x.size() != n_) throw InputError("objective: dimension mismatch");
    return eval_(x);
  }

  Vec gradient(const Vec& x) const {
    if (!grad_) throw InputError("objective has no gradient");
    return grad_(x);
  }

  /// Gradients of the pieces active at x (convex-max kind only).
  std::vector<Vec> active_gradients(const Vec& x, double tol = 1e-7) const {
    std::vector<Vec> out;
    double v = (*this)(x);
    for (const auto& p : pieces_)
      if (dot(p.c, x) + p.b >= v - tol * (1.0 + std::abs(v))) out.push_back(p.c);
    return out;
  }

  static std::optional<Objective> from_json(const json& j, const std::string& path, SchemaErrors& err,
                                            std::size_t dim);

 private:
  Objective(Kind k, std::size_t n, json desc) : kind_(k), n_(n), desc_(std::move(desc)) {}

  Kind kind_;
  std::size_t n_;
  json desc_;
  std::vector<Piece> pieces_;
  std::function<double(const Vec&)> eval_;
  std::function<Vec(const Vec&)> grad_;
};

inline std::optional<Objective> Objective::from_json(const json& j, const std::string& path,
                                                     SchemaErrors& err, std::size_t dim) {
  if (!j.is_object()) {
    err.add(path, "expected an objective object");
    return std::nullopt;
  }
  auto t = j.find("type");
  if (t == j.end() || !t->is_string()) {
    err.add(schema::child(path, "type"), "missing or non-string objective type");
    return std::nullopt;
  }
  const std::string type = *t;
  std::size_t before = err.size();
  auto index = [&]() -> std::optional<std::size_t> {
    auto i = schema::number(j, "index", path, err);
    if (!i) return std::nullopt;
    if (*i < 0 || *i != std::floor(*i) || *i >= static_cast<double>(dim)) {
      err.add(schema::child(path, "index"), "must be an integer coordinate index");
      return std::nullopt;
    }
    return static_cast<std::size_t>(*i);
  };
  auto check_dimension = [&]() {
    if (auto it = j.find("dimension"); it != j.end() && (!it->is_number() || *it != dim))
      err.add(schema::child(path, "dimension"), "must equal the scenario dimension");
  };
  auto sized = [&](const std::optional<Vec>& v, const char* key) {
    if (v && v->size() != dim) {
      err.add(schema::child(path, key), "dimension mismatch");
      return false;
    }
    return v.has_value();
  };
  std::optional<Objective> out;
  if (type == "linear") {
    schema::strict_object(j, path, {"type", "c"}, err);
    auto c = schema::vector(j, "c", path, err);
    if (sized(c, "c") && err.size() == before) out = linear(*c);
  } else if (type == "quadratic") {
    schema::strict_object(j, path, {"type", "q", "c"}, err);
    auto c = schema::vector(j, "c", path, err);
    std::vector<Vec> q;
    auto qt = j.find("q");
    if (qt == j.end() || !qt->is_array() || qt->size() != dim) {
      err.add(schema::child(path, "q"), "expected an n x n array");
    } else {
      for (std::size_t i = 0; i < dim; ++i) {
        auto row = schema::vector((*qt)[i], schema::child(schema::child(path, "q"), i), err);
        if (row && row->size() == dim) q.push_back(*row);
        else if (row) err.add(schema::child(schema::child(path, "q"), i), "row length mismatch");
      }
    }
    if (sized(c, "c") && err.size() == before) out = quadratic(q, *c);
  } else if (type == "norm_sq" || type == "neg_norm_sq" || type == "norm" || type == "neg_norm") {
    schema::strict_object(j, path, {"type", "dimension"}, err);
    check_dimension();
    if (err.size() == before) {
      if (type == "norm_sq") out = norm_sq(dim);
      else if (type == "neg_norm_sq") out = neg_norm_sq(dim);
      else if (type == "norm") out = norm(dim);
      else out = neg_norm(dim);
    }
  } else if (type == "abs_coord" || type == "sqrt_abs_coord") {
    schema::strict_object(j, path, {"type", "dimension", "index"}, err);
    check_dimension();
    auto i = index();
    if (i && err.size() == before) out = type == "abs_coord" ? abs_coord(dim, *i) : sqrt_abs_coord(dim, *i);
  } else if (type == "max_affine") {
    schema::strict_object(j, path, {"type", "pieces"}, err);
    auto pt = j.find("pieces");
    std::vector<Piece> pieces;
    if (pt == j.end() || !pt->is_array() || pt->empty()) {
      err.add(schema::child(path, "pieces"), "expected a nonempty array");
    } else {
      for (std::size_t i = 0; i < pt->size(); ++i) {
        std::string pp = schema::child(schema::child(path, "pieces"), i);
        if (!schema::strict_object((*pt)[i], pp, {"c", "b"}, err)) continue;
        auto c = schema::vector((*pt)[i], "c", pp, err);
        auto b = schema::number((*pt)[i], "b", pp, err, false);
        if (c && c->size() != dim) err.add(schema::child(pp, "c"), "dimension mismatch");
        else if (c) pieces.push_back({*c, b.value_or(0.0)});
      }
    }
    if (err.size() == before) out = max_affine(pieces);
  } else {
    err.add(schema::child(path, "type"), "unknown objective type '" + type + "'");
  }
  if (err.size() != before) return std::nullopt;
  return out;
}

}  // namespace epl
