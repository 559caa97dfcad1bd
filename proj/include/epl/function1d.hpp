#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "epl/schema.hpp"

namespace epl {

/// Scalar function R -> R from a fixed catalog. Immutable; cheap to copy.
class Function1d {
 public:
  enum class Kind { Parabola, KMParabola, NegAbs, XSinInvX, NegLogPower, Linear, Max, Min };

  /// c t^2.
  static Function1d parabola(double c) { return Function1d(Kind::Parabola, {c}); }

  /// k^m (max(t,0))^2. Its epigraph is {x : k^m x1^2 - x2 <= 0 for x1 > 0, -x2 <= 0 otherwise}.
  static Function1d k_m_parabola(double k, double m) {
    if (!(k > 0.0)) throw InputError("k_m_parabola: k must be positive");
    return Function1d(Kind::KMParabola, {k, m});
  }

  /// -|t|.
  static Function1d neg_abs() { return Function1d(Kind::NegAbs, {}); }

  /// t sin(1/t) with value 0 at t = 0.
  static Function1d x_sin_inv_x() { return Function1d(Kind::XSinInvX, {}); }

  /// min(0, t sin(1/t)).
  static Function1d x_sin_inv_x_neg_part() { return min_of({x_sin_inv_x(), linear(0.0)}); }

  /// -|t|^(1 + 1/ln^2|t|) for 0 < |t| <= 1/e, 0 at t = 0, and the constant -e^-2 beyond.
  static Function1d neg_log_power() { return Function1d(Kind::NegLogPower, {}); }

  /// slope t + intercept.
  static Function1d linear(double slope, double intercept = 0.0) {
    return Function1d(Kind::Linear, {slope, intercept});
  }

  /// Pointwise max. Nested maxima are flattened and comparable parabolas folded.
  static Function1d max_of(std::vector<Function1d> fs) { return fold(Kind::Max, std::move(fs)); }

  /// Pointwise min. Nested minima are flattened and comparable parabolas folded.
  static Function1d min_of(std::vector<Function1d> fs) { return fold(Kind::Min, std::move(fs)); }

  Kind kind() const noexcept { return node_->kind; }
  const std::vector<double>& params() const noexcept { return node_->params; }
  const std::vector<Function1d>& children() const noexcept { return node_->children; }

  /// Leading coefficient of a (one-sided) parabola.
  double coefficient() const {
    if (kind() == Kind::Parabola) return params()[0];
    if (kind() == Kind::KMParabola) return std::pow(params()[0], params()[1]);
    throw InputError("coefficient: not a parabola");
  }

  double operator()(double t) const {
    const auto& p = params();
    switch (kind()) {
      case Kind::Parabola:
        return p[0] * t * t;
      case Kind::KMParabola: {
        double u = t > 0.0 ? t : 0.0;
        return coefficient() * u * u;
      }
      case Kind::NegAbs:
        return -std::abs(t);
      case Kind::XSinInvX:
        return t == 0.0 ? 0.0 : t * std::sin(1.0 / t);
      case Kind::NegLogPower: {
        double a = std::abs(t);
        if (a == 0.0) return 0.0;
        if (a >= std::exp(-1.0)) return -std::exp(-2.0);
        double l = std::log(a);
        return -std::exp((1.0 + 1.0 / (l * l)) * l);
      }
      case Kind::Linear:
        return p[0] * t + p[1];
      case Kind::Max: {
        double v = -std::numeric_limits<double>::infinity();
        for (const auto& c : children()) v = std::max(v, c(t));
        return v;
      }
      case Kind::Min: {
        double v = std::numeric_limits<double>::infinity();
        for (const auto& c : children()) v = std::min(v, c(t));
        return v;
      }
    }
    return 0.0;
  }

  /// Derivative where the function is differentiable and the formula is known.
  std::optional<double> derivative(double t) const {
    const auto& p = params();
    switch (kind()) {
      case Kind::Parabola:
        return 2.0 * p[0] * t;
      case Kind::KMParabola:
        return t > 0.0 ? 2.0 * coefficient() * t : 0.0;
      case Kind::NegAbs:
        if (t == 0.0) return std::nullopt;
        return t > 0.0 ? -1.0 : 1.0;
      case Kind::XSinInvX:
        if (t == 0.0) return std::nullopt;
        return std::sin(1.0 / t) - std::cos(1.0 / t) / t;
      case Kind::NegLogPower:
        return std::nullopt;
      case Kind::Linear:
        return p[0];
      case Kind::Max:
      case Kind::Min: {
        double best = kind() == Kind::Max ? -std::numeric_limits<double>::infinity()
                                          : std::numeric_limits<double>::infinity();
        const Function1d* arg = nullptr;
        bool tie = false;
        for (const auto& c : children()) {
          double v = c(t);
          bool better = kind() == Kind::Max ? v > best : v < best;
          if (better) {
            best = v;
            arg = &c;
            tie = false;
          } else if (v == best) {
            tie = true;
          }
        }
        if (tie || arg == nullptr) return std::nullopt;
        return arg->derivative(t);
      }
    }
    return std::nullopt;
  }

  bool convex() const {
    switch (kind()) {
      case Kind::Parabola:
        return params()[0] >= 0.0;
      case Kind::KMParabola:
      case Kind::Linear:
        return true;
      case Kind::Max:
        return std::all_of(children().begin(), children().end(),
                           [](const Function1d& c) { return c.convex(); });
      default:
        return false;
    }
  }

  bool concave() const {
    switch (kind()) {
      case Kind::Parabola:
        return params()[0] <= 0.0;
      case Kind::NegAbs:
      case Kind::Linear:
        return true;
      case Kind::Min:
        return std::all_of(children().begin(), children().end(),
                           [](const Function1d& c) { return c.concave(); });
      default:
        return false;
    }
  }

  std::string name() const {
    switch (kind()) {
      case Kind::Parabola: return "parabola";
      case Kind::KMParabola: return "k_m_parabola";
      case Kind::NegAbs: return "neg_abs";
      case Kind::XSinInvX: return "x_sin_inv_x";
      case Kind::NegLogPower: return "neg_log_power";
      case Kind::Linear: return "linear";
      case Kind::Max: return "max";
      case Kind::Min: return "min";
    }
    return "?";
  }

  /// Serializes into `out` (the enclosing set object) under "function" plus parameters.
  void write_json(json& out) const {
    out["function"] = name();
    const auto& p = params();
    switch (kind()) {
      case Kind::Parabola: out["c"] = p[0]; break;
      case Kind::KMParabola: out["k"] = p[0]; out["m"] = p[1]; break;
      case Kind::Linear: out["slope"] = p[0]; out["intercept"] = p[1]; break;
      case Kind::Max:
      case Kind::Min: {
        json arr = json::array();
        for (const auto& c : children()) {
          json o = json::object();
          c.write_json(o);
          arr.push_back(o);
        }
        out["pieces"] = arr;
        break;
      }
      default: break;
    }
  }

  /// Reads a function from `obj`; `extra` lists keys of the enclosing object that are allowed.
  static std::optional<Function1d> read_json(const json& obj, const std::string& path,
                                             SchemaErrors& err,
                                             std::initializer_list<const char*> extra = {}) {
    auto it = obj.find("function");
    if (it == obj.end() || !it->is_string()) {
      err.add(schema::child(path, "function"), "missing or non-string function tag");
      return std::nullopt;
    }
    std::string tag = it->get<std::string>();
    auto allow = [&](std::initializer_list<const char*> own) {
      std::vector<const char*> keys(extra);
      keys.push_back("function");
      keys.insert(keys.end(), own);
      for (auto jt = obj.begin(); jt != obj.end(); ++jt) {
        if (std::find_if(keys.begin(), keys.end(),
                         [&](const char* k) { return jt.key() == k; }) == keys.end())
          err.add(schema::child(path, jt.key()), "unknown field '" + jt.key() + "'");
      }
    };
    if (tag == "parabola") {
      allow({"c"});
      auto c = schema::number(obj, "c", path, err);
      if (!c) return std::nullopt;
      return parabola(*c);
    }
    if (tag == "k_m_parabola") {
      allow({"k", "m"});
      auto k = schema::number(obj, "k", path, err);
      auto m = schema::number(obj, "m", path, err);
      if (!k || !m) return std::nullopt;
      if (*k <= 0.0) {
        err.add(schema::child(path, "k"), "must be positive");
        return std::nullopt;
      }
      return k_m_parabola(*k, *m);
    }
    if (tag == "neg_abs") { allow({}); return neg_abs(); }
    if (tag == "x_sin_inv_x") { allow({}); return x_sin_inv_x(); }
    if (tag == "x_sin_inv_x_neg_part") { allow({}); return x_sin_inv_x_neg_part(); }
    if (tag == "neg_log_power") { allow({}); return neg_log_power(); }
    if (tag == "linear") {
      allow({"slope", "intercept"});
      auto s = schema::number(obj, "slope", path, err);
      auto b = schema::number(obj, "intercept", path, err, false);
      if (!s) return std::nullopt;
      return linear(*s, b.value_or(0.0));
    }
    if (tag == "max" || tag == "min") {
      allow({"pieces"});
      auto pt = obj.find("pieces");
      if (pt == obj.end() || !pt->is_array() || pt->empty()) {
        err.add(schema::child(path, "pieces"), "expected a nonempty array of functions");
        return std::nullopt;
      }
      std::vector<Function1d> fs;
      for (std::size_t i = 0; i < pt->size(); ++i) {
        std::string cp = schema::child(schema::child(path, "pieces"), i);
        if (!(*pt)[i].is_object()) {
          err.add(cp, "expected an object");
          continue;
        }
        if (auto f = read_json((*pt)[i], cp, err)) fs.push_back(*f);
      }
      if (fs.size() != pt->size()) return std::nullopt;
      return tag == "max" ? max_of(std::move(fs)) : min_of(std::move(fs));
    }
    err.add(schema::child(path, "function"), "unknown function tag '" + tag + "'");
    return std::nullopt;
  }

 private:
  struct Node {
    Kind kind;
    std::vector<double> params;
    std::vector<Function1d> children;
  };

  Function1d(Kind k, std::vector<double> p, std::vector<Function1d> ch = {})
      : node_(std::make_shared<const Node>(Node{k, std::move(p), std::move(ch)})) {}

  static Function1d fold(Kind k, std::vector<Function1d> fs) {
    if (fs.empty()) throw InputError("max/min of an empty function list");
    std::vector<Function1d> flat;
    for (auto& f : fs) {
      if (f.kind() == k) flat.insert(flat.end(), f.children().begin(), f.children().end());
      else flat.push_back(f);
    }
    // Same-kind parabolas are totally ordered by their coefficient.
    std::vector<Function1d> out;
    std::optional<Function1d> best_p, best_km;
    auto pick = [k](std::optional<Function1d>& slot, const Function1d& f) {
      if (!slot) { slot = f; return; }
      bool better = k == Kind::Max ? f.coefficient() > slot->coefficient()
                                   : f.coefficient() < slot->coefficient();
      if (better) slot = f;
    };
    for (auto& f : flat) {
      if (f.kind() == Kind::Parabola) pick(best_p, f);
      else if (f.kind() == Kind::KMParabola) pick(best_km, f);
      else out.push_back(f);
    }
    if (best_p) out.insert(out.begin(), *best_p);
    if (best_km) out.insert(out.begin(), *best_km);
    if (out.size() == 1) return out.front();
    return Function1d(k, {}, std::move(out));
  }

  std::shared_ptr<const Node> node_;
};

}  // namespace epl
