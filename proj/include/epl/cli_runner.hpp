#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "epl/finite_extremality.hpp"
#include "epl/geometry_properties.hpp"
#include "epl/infinite_extremality.hpp"
#include "epl/intersection_calculus.hpp"
#include "epl/normal_cones.hpp"
#include "epl/sip_optimality.hpp"

namespace epl::cli {

inline constexpr const char* kSchemaVersion = "v1";
inline constexpr const char* kToolVersion = "1.0.0";

/// All schema violations of a scenario document.
class ScenarioError : public InputError {
 public:
  explicit ScenarioError(SchemaErrors errors) : InputError(errors.joined()), errors_(std::move(errors)) {}
  const SchemaErrors& errors() const noexcept { return errors_; }

 private:
  SchemaErrors errors_;
};

struct CheckOutcome {
  /// pass | fail | inconclusive | vacuous
  std::string verdict = "pass";
  /// Raw result before comparison with an expectation.
  std::string outcome;
  std::string summary;
  json result = json::object();
  std::vector<std::pair<std::string, std::string>> csv;
};

struct RunContext {
  std::vector<Set> sets;
  std::optional<IndexedFamily> family;
  Vec xbar;
  std::uint64_t seed = 0;
  std::size_t dimension = 0;

  /// The scenario family, or the finite sets padded to an indexed family.
  IndexedFamily indexed() const {
    if (family) return *family;
    if (sets.empty()) throw InputError("scenario defines neither sets nor a family");
    return IndexedFamily::padded(sets, xbar);
  }
};

using CheckRunner = std::function<CheckOutcome(const RunContext&)>;

struct CheckSpec {
  std::string id;
  std::string op;
  json params;
  CheckRunner run;
};

struct ScenarioSpec {
  std::string name;
  std::uint64_t seed = 0;
  std::optional<std::string> builtin;
  RunContext context;
  std::vector<CheckSpec> checks;
  /// Fully expanded input document.
  json document;
};

// ---- parameter reader ------------------------------------------------------------

/// Typed access to a check object; unknown keys are reported by finish().
class Params {
 public:
  Params(const json& j, std::string path, SchemaErrors& err) : j_(j), path_(std::move(path)), err_(err) {}

  const std::string& path() const { return path_; }
  SchemaErrors& errors() { return err_; }
  bool has(const char* key) {
    used_.insert(key);
    return j_.contains(key);
  }
  const json* raw(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::optional<double> num(const char* key, std::optional<double> def = std::nullopt) {
    used_.insert(key);
    if (!j_.contains(key)) {
      if (!def) err_.add(schema::child(path_, key), "missing required field");
      return def;
    }
    return schema::number(j_, key, path_, err_);
  }

  std::optional<double> positive(const char* key, std::optional<double> def = std::nullopt) {
    auto v = num(key, def);
    if (v && !(*v > 0.0)) {
      err_.add(schema::child(path_, key), "must be positive");
      return std::nullopt;
    }
    return v;
  }

  std::optional<int> integer(const char* key, std::optional<int> def, int lo, int hi) {
    auto v = num(key, def ? std::optional<double>(*def) : std::nullopt);
    if (!v) return std::nullopt;
    if (*v != std::floor(*v) || *v < lo || *v > hi) {
      err_.add(schema::child(path_, key), "must be an integer in [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
      return std::nullopt;
    }
    return static_cast<int>(*v);
  }

  std::optional<Vec> vec(const char* key, std::size_t dim, bool required = true) {
    used_.insert(key);
    auto v = schema::vector(j_, key, path_, err_, required);
    if (!v) return std::nullopt;
    if (v->size() != dim) {
      err_.add(schema::child(path_, key), "expected " + std::to_string(dim) + " coordinates");
      return std::nullopt;
    }
    if (!all_finite(*v)) {
      err_.add(schema::child(path_, key), "coordinates must be finite");
      return std::nullopt;
    }
    return v;
  }

  /// Strictly decreasing positive list.
  std::optional<std::vector<double>> ladder(const char* key, std::optional<std::vector<double>> def = std::nullopt) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (!def) err_.add(schema::child(path_, key), "missing required field");
      return def;
    }
    auto v = schema::vector(*it, schema::child(path_, key), err_);
    if (!v) return std::nullopt;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!std::isfinite((*v)[i]) || !((*v)[i] > 0.0)) {
        err_.add(schema::child(schema::child(path_, key), i), "must be positive");
        return std::nullopt;
      }
      if (i > 0 && !((*v)[i] < (*v)[i - 1])) {
        err_.add(schema::child(schema::child(path_, key), i), "ladder must be strictly decreasing");
        return std::nullopt;
      }
    }
    return v->values();
  }

  std::optional<std::string> choice(const char* key, std::vector<std::string> options, std::optional<std::string> def) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (!def) err_.add(schema::child(path_, key), "missing required field");
      return def;
    }
    if (!it->is_string() || std::find(options.begin(), options.end(), it->get<std::string>()) == options.end()) {
      std::string o;
      for (const auto& s : options) o += (o.empty() ? "" : "|") + s;
      err_.add(schema::child(path_, key), "expected one of " + o);
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  std::optional<bool> flag(const char* key, bool def) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return def;
    if (!it->is_boolean()) {
      err_.add(schema::child(path_, key), "expected a boolean");
      return std::nullopt;
    }
    return it->get<bool>();
  }

  /// Positive family indices: an explicit list or {"from": a, "to": b}.
  std::optional<std::vector<int>> indices(const char* key, std::optional<std::vector<int>> def) {
    used_.insert(key);
    auto it = j_.find(key);
    std::string p = schema::child(path_, key);
    if (it == j_.end()) {
      if (!def) err_.add(p, "missing required field");
      return def;
    }
    std::vector<int> out;
    auto as_index = [&](const json& v, const std::string& vp) -> std::optional<int> {
      if (!v.is_number() || v.get<double>() != std::floor(v.get<double>()) || v.get<double>() < 1 ||
          v.get<double>() > 1e6) {
        err_.add(vp, "expected an integer index in [1, 1e6]");
        return std::nullopt;
      }
      return static_cast<int>(v.get<double>());
    };
    if (it->is_object()) {
      schema::strict_object(*it, p, {"from", "to"}, err_);
      auto f = it->contains("from") ? as_index((*it)["from"], schema::child(p, "from")) : std::nullopt;
      auto t = it->contains("to") ? as_index((*it)["to"], schema::child(p, "to")) : std::nullopt;
      if (!it->contains("from") || !it->contains("to")) err_.add(p, "range needs from and to");
      if (!f || !t) return std::nullopt;
      if (*t < *f || *t - *f > 100000) {
        err_.add(p, "invalid index range");
        return std::nullopt;
      }
      for (int i = *f; i <= *t; ++i) out.push_back(i);
      return out;
    }
    if (!it->is_array() || it->empty()) {
      err_.add(p, "expected a nonempty index array or {from, to}");
      return std::nullopt;
    }
    for (std::size_t i = 0; i < it->size(); ++i)
      if (auto v = as_index((*it)[i], schema::child(p, i))) out.push_back(*v);
    if (out.size() != it->size()) return std::nullopt;
    return out;
  }

  /// 0-based index into the scenario's finite set list.
  std::optional<int> set_index(const char* key, std::size_t count, std::optional<int> def = 0) {
    if (count == 0) {
      err_.add(path_, "check needs scenario sets");
      used_.insert(key);
      return std::nullopt;
    }
    return integer(key, def, 0, static_cast<int>(count) - 1);
  }

  void finish(std::initializer_list<const char*> extra = {}) {
    for (const char* k : extra) used_.insert(k);
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) err_.add(schema::child(path_, it.key()), "unknown field '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  SchemaErrors& err_;
  std::set<std::string> used_;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline json vec_list(const std::vector<Vec>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(schema::to_json(v));
  return a;
}

inline std::string expect_verdict(const std::optional<std::string>& expect, const std::string& outcome,
                                  const std::string& natural) {
  if (!expect) return natural;
  return *expect == outcome ? "pass" : "fail";
}

inline std::optional<TranslationSchedule> read_schedule(Params& p, std::size_t members, std::size_t dim, int K) {
  const json* s = p.raw("schedule");
  std::string path = schema::child(p.path(), "schedule");
  auto& err = p.errors();
  if (!s) {
    err.add(path, "missing required field");
    return std::nullopt;
  }
  if (!s->is_object()) {
    err.add(path, "expected an object");
    return std::nullopt;
  }
  Params sp(*s, path, err);
  std::size_t before = err.size();
  std::optional<TranslationSchedule> out;
  if (s->contains("directions")) {
    auto base = sp.num("base", 4.0);
    if (base && !(*base > 1.0)) err.add(schema::child(path, "base"), "must exceed 1");
    const json* d = sp.raw("directions");
    std::vector<Vec> dirs;
    if (!d->is_array() || d->size() != members) {
      err.add(schema::child(path, "directions"), "expected one direction per set");
    } else {
      for (std::size_t i = 0; i < d->size(); ++i) {
        auto v = schema::vector((*d)[i], schema::child(schema::child(path, "directions"), i), err);
        if (v && v->size() != dim) err.add(schema::child(schema::child(path, "directions"), i), "dimension mismatch");
        else if (v) dirs.push_back(*v);
      }
    }
    sp.finish();
    if (err.size() == before) out = TranslationSchedule::geometric(dirs, K, *base);
  } else if (s->contains("shifts")) {
    const json* sh = sp.raw("shifts");
    TranslationSchedule t;
    std::string shp = schema::child(path, "shifts");
    if (!sh->is_array() || sh->empty()) err.add(shp, "expected a nonempty array of rungs");
    else
      for (std::size_t k = 0; k < sh->size(); ++k) {
        const json& row = (*sh)[k];
        std::vector<Vec> r;
        if (!row.is_array() || row.size() != members) {
          err.add(schema::child(shp, k), "expected one shift per set");
          continue;
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
          auto v = schema::vector(row[i], schema::child(schema::child(shp, k), i), err);
          if (v && v->size() != dim) err.add(schema::child(schema::child(shp, k), i), "dimension mismatch");
          else if (v) r.push_back(*v);
        }
        t.shifts.push_back(std::move(r));
      }
    sp.finish();
    if (err.size() == before) out = t;
  } else {
    err.add(path, "expected directions or shifts");
    return std::nullopt;
  }
  if (out) {
    try {
      out->validate(members, dim);
    } catch (const InputError& e) {
      err.add(path, e.what());
      return std::nullopt;
    }
  }
  return out;
}

inline std::optional<RatedQuery> read_rated(Params& p, bool allow_rank_one) {
  RatedQuery q;
  auto a = p.num("alpha");
  auto g = p.positive("gamma", 0.5);
  auto K = p.integer("K", 10, 1, 60);
  auto grid = p.integer("grid", 101, 3, 2001);
  if (!a || !g || !K || !grid) return std::nullopt;
  if (!(*a >= 0.0 && (*a < 1.0 || (allow_rank_one && *a == 1.0)))) {
    p.errors().add(schema::child(p.path(), "alpha"), "alpha must lie in [0,1)");
    return std::nullopt;
  }
  q.alpha = *a;
  q.gamma = *g;
  q.K = *K;
  q.grid = *grid;
  return q;
}

inline std::optional<RateFunction> read_rate(Params& p) {
  const json* r = p.raw("rate");
  if (!r) {
    p.errors().add(schema::child(p.path(), "rate"), "missing required field");
    return std::nullopt;
  }
  return RateFunction::from_json(*r, schema::child(p.path(), "rate"), p.errors());
}

/// Selection I(r) = {1..count(r)} on the given radii.
inline std::optional<SelectionRule> read_selection(Params& p, const std::vector<double>& radii, const RateFunction& R) {
  const json* s = p.raw("selection");
  std::string path = schema::child(p.path(), "selection");
  auto& err = p.errors();
  if (!s || !s->is_object()) {
    err.add(path, "expected a selection object");
    return std::nullopt;
  }
  Params sp(*s, path, err);
  std::size_t before = err.size();
  auto type = sp.choice("type", {"power_index", "constant", "explicit"}, std::nullopt);
  std::function<int(double)> count;
  if (type == "power_index") {
    auto m = sp.positive("m");
    auto alpha = sp.num("alpha");
    auto scale = sp.positive("scale", 0.25);
    if (alpha && !(*alpha >= 0.0 && *alpha < 1.0)) err.add(schema::child(path, "alpha"), "alpha must lie in [0,1)");
    if (m && alpha && scale && err.size() == before) {
      double mm = *m, aa = *alpha, sc = *scale;
      count = [mm, aa, sc](double r) { return smallest_power_index(sc * std::pow(r, -(2.0 + aa)), mm, 1'000'000); };
    }
  } else if (type == "constant") {
    auto n = sp.integer("size", std::nullopt, 1, 100000);
    if (n) {
      int nn = *n;
      count = [nn](double) { return nn; };
    }
  } else if (type == "explicit") {
    const json* sz = sp.raw("sizes");
    std::vector<int> sizes;
    if (!sz || !sz->is_array() || sz->size() != radii.size()) {
      err.add(schema::child(path, "sizes"), "expected one size per radius");
    } else {
      for (std::size_t i = 0; i < sz->size(); ++i) {
        const json& v = (*sz)[i];
        if (!v.is_number() || v.get<double>() != std::floor(v.get<double>()) || v.get<double>() < 1 || v.get<double>() > 100000)
          err.add(schema::child(schema::child(path, "sizes"), i), "expected a positive integer");
        else
          sizes.push_back(static_cast<int>(v.get<double>()));
      }
    }
    if (err.size() == before) {
      std::map<double, int> by_r;
      for (std::size_t i = 0; i < radii.size(); ++i) by_r[radii[i]] = sizes[i];
      count = [by_r](double r) { return by_r.at(r); };
    }
  }
  sp.finish();
  if (err.size() != before || !count) return std::nullopt;
  try {
    return SelectionRule::prefix(radii, R, count);
  } catch (const Error& e) {
    err.add(path, e.what());
    return std::nullopt;
  }
}

// ---- check preparation, one function per op ------------------------------------------

inline CheckRunner prepare_project(Params& p, const RunContext& ctx) {
  auto si = p.set_index("set", ctx.sets.size());
  auto x = p.vec("point", ctx.dimension);
  p.finish();
  if (!si || !x) return {};
  return [i = *si, x = *x](const RunContext& c) {
    const Set& s = c.sets[static_cast<std::size_t>(i)];
    Vec w = s.project(x);
    CheckOutcome o;
    o.outcome = "computed";
    o.result = {{"projection", schema::to_json(w)}, {"distance", s.distance(x)}, {"inside", s.inside(x)}};
    o.summary = "distance " + fmt(s.distance(x));
    return o;
  };
}

inline CheckRunner prepare_projection_properties(Params& p, const RunContext& ctx) {
  std::optional<int> si;
  if (p.has("set")) si = p.set_index("set", ctx.sets.size());
  bool catalog = !p.has("set") && ctx.sets.empty();
  auto probes = p.integer("probes", 1000, 1, 1000000);
  auto scale = p.positive("scale", 2.0);
  p.finish();
  if (!probes || !scale || (p.has("set") && !si)) return {};
  return [si, catalog, n = *probes, sc = *scale](const RunContext& c) {
    std::vector<NamedSet> targets;
    if (catalog) targets = projection_catalog();
    else if (si) targets.push_back({"set" + std::to_string(*si), c.sets[static_cast<std::size_t>(*si)], sc});
    else
      for (std::size_t i = 0; i < c.sets.size(); ++i) targets.push_back({"set" + std::to_string(i), c.sets[i], sc});
    CheckOutcome o;
    int total = 0;
    json per = json::object();
    for (const auto& t : targets) {
      auto r = projection_property_suite(t.set, n, c.seed, t.scale);
      total += r.violations();
      per[t.name] = r.to_json();
    }
    o.result = {{"violations", total}, {"sets", per}};
    o.outcome = total == 0 ? "no_violations" : "violations";
    o.verdict = total == 0 ? "pass" : "fail";
    o.summary = std::to_string(total) + " violations over " + std::to_string(targets.size()) + " sets";
    return o;
  };
}

inline CheckRunner prepare_normal(Params& p, const RunContext& ctx) {
  auto si = p.set_index("set", ctx.sets.size());
  auto xs = p.vec("xstar", ctx.dimension);
  std::optional<Vec> point;
  if (p.has("point")) point = p.vec("point", ctx.dimension);
  auto eps = p.num("eps", 0.0);
  auto tol = p.positive("tol_res", 1e-3);
  auto rungs = p.integer("rungs", 12, 3, 40);
  auto samples = p.integer("samples", 512, 8, 100000);
  auto expect = p.choice("expect", {"accepted", "rejected"}, std::string{});
  p.finish();
  if (!si || !xs || !eps || !tol || !rungs || !samples || !expect) return {};
  return [=](const RunContext& c) {
    const Set& s = c.sets[static_cast<std::size_t>(*si)];
    RadiusLadder lad{0.1, 0.5, *rungs, *samples, c.seed};
    Vec at = point.value_or(c.xbar);
    auto r = eps_normal_residual(s, at, *xs, lad);
    CheckOutcome o;
    bool acc = r.isolated || r.value <= *eps + *tol;
    o.outcome = acc ? "accepted" : "rejected";
    o.verdict = expect->empty() ? (acc ? "pass" : "fail") : (*expect == o.outcome ? "pass" : "fail");
    o.result = {{"residual", r.isolated ? json(nullptr) : json(r.value)}, {"isolated", r.isolated}, {"per_rung", r.per_rung}};
    o.summary = "residual " + fmt(r.value);
    return o;
  };
}

inline CheckRunner prepare_extremal(Params& p, const RunContext& ctx) {
  auto allow = p.flag("allow_rank_one", false);
  auto q = read_rated(p, allow.value_or(false));
  std::optional<TranslationSchedule> sched;
  if (q) sched = read_schedule(p, ctx.sets.size(), ctx.dimension, q->K);
  else p.raw("schedule");
  auto expect = p.choice("expect", {"holds", "counterexample", "counterexample_every_rung"}, "holds");
  p.finish();
  if (ctx.sets.empty()) p.errors().add(p.path(), "extremal needs scenario sets");
  if (!q || !sched || !expect || ctx.sets.empty()) return {};
  return [q = *q, sched = *sched, expect = *expect](const RunContext& c) {
    auto v = verify_rated_extremality(c.sets, c.xbar, q, sched);
    bool every = !v.violated.empty() && std::all_of(v.violated.begin(), v.violated.end(), [](bool b) { return b; });
    CheckOutcome o;
    o.outcome = v.holds ? "holds" : (every ? "counterexample_every_rung" : "counterexample");
    bool ok = expect == "holds" ? v.holds : (expect == "counterexample" ? !v.holds : every);
    o.verdict = ok ? "pass" : "fail";
    o.result = {{"holds", v.holds}, {"rungs_checked", v.rungs_checked}, {"violated", v.violated},
                {"schedule", sched.to_json()}};
    if (v.counterexample_k) {
      o.result["counterexample_k"] = *v.counterexample_k;
      o.result["witness"] = schema::to_json(*v.witness);
    }
    o.summary = v.summary();
    return o;
  };
}

inline CheckRunner prepare_principle(Params& p, const RunContext& ctx) {
  auto allow = p.flag("allow_rank_one", false);
  auto q = read_rated(p, allow.value_or(false));
  std::optional<TranslationSchedule> sched;
  if (q) sched = read_schedule(p, ctx.sets.size(), ctx.dimension, q->K);
  else p.raw("schedule");
  auto tol_sum = p.positive("tol_sum_norm", 1e-6);
  auto tol_unit = p.positive("tol_unit_defect", 1e-6);
  auto tol_cone = p.positive("tol_cone", 0.02);
  auto tail = p.integer("decreasing_tail", 0, 0, 60);
  p.finish();
  if (ctx.sets.empty()) p.errors().add(p.path(), "principle needs scenario sets");
  if (!q || !sched || !tol_sum || !tol_unit || !tol_cone || !tail || ctx.sets.empty()) return {};
  bool rank_one = *allow;
  return [=, q = *q, sched = *sched](const RunContext& c) {
    PrincipleConfig cfg;
    cfg.allow_rank_one = rank_one;
    cfg.seed = c.seed;
    cfg.ladder.seed = c.seed;
    auto run = run_exact_principle(c.sets, c.xbar, q, sched, cfg);
    const auto& lim = run.limit.residuals;
    double worst_cone = 0.0;
    for (double d : lim.cone_defects) worst_cone = std::max(worst_cone, d);
    bool dec = true;
    const int K = static_cast<int>(run.per_k.size());
    for (int k = std::max(1, K - *tail); k < K && *tail > 0; ++k)
      dec = dec && run.per_k[k].residuals.sum_norm < run.per_k[k - 1].residuals.sum_norm;
    bool ok = lim.sum_norm <= *tol_sum && lim.unit_defect <= *tol_unit && worst_cone <= *tol_cone && dec;
    CheckOutcome o;
    o.outcome = ok ? "certificate" : "no_certificate";
    o.verdict = ok ? "pass" : "fail";
    json per = json::array();
    for (const auto& cert : run.per_k) per.push_back(cert.to_json());
    o.result = {{"limit", run.limit.to_json()}, {"per_k", per}, {"cluster_size", run.cluster_size},
                {"tail_decreasing", dec}, {"worst_cone_defect", worst_cone}};
    o.csv.push_back({"convergence", run.convergence_csv()});
    o.summary = "limit sum_norm " + fmt(lim.sum_norm) + ", unit_defect " + fmt(lim.unit_defect);
    return o;
  };
}

inline CheckRunner prepare_principle_search(Params& p, const RunContext& ctx) {
  std::optional<std::vector<std::vector<Vec>>> cones;
  if (const json* cj = p.raw("cones")) {
    std::string cp = schema::child(p.path(), "cones");
    std::vector<std::vector<Vec>> cs;
    bool ok = cj->is_array() && !cj->empty();
    if (!ok) p.errors().add(cp, "expected a nonempty array of direction lists");
    else
      for (std::size_t i = 0; i < cj->size(); ++i) {
        std::vector<Vec> dirs;
        const json& l = (*cj)[i];
        if (!l.is_array() || l.empty()) {
          p.errors().add(schema::child(cp, i), "expected a nonempty list of directions");
          ok = false;
          continue;
        }
        for (std::size_t d = 0; d < l.size(); ++d) {
          auto v = schema::vector(l[d], schema::child(schema::child(cp, i), d), p.errors());
          if (!v || v->size() != ctx.dimension || norm(*v) == 0.0 || !all_finite(*v)) {
            if (v) p.errors().add(schema::child(schema::child(cp, i), d), "expected a nonzero finite direction of the scenario dimension");
            ok = false;
          } else {
            dirs.push_back(*v);
          }
        }
        cs.push_back(std::move(dirs));
      }
    if (ok) cones = cs;
  } else if (ctx.sets.empty()) {
    p.errors().add(p.path(), "principle_search needs cones or scenario sets");
  }
  auto tol = p.positive("tol", 1e-6);
  auto expect = p.choice("expect", {"holds", "fails"}, std::string{});
  auto expect_res = p.num("expect_residual", -1.0);
  auto res_tol = p.positive("residual_tol", 0.01);
  p.finish();
  if (!tol || !expect || !expect_res || !res_tol) return {};
  if (p.has("cones") && !cones) return {};
  return [=](const RunContext& c) {
    std::vector<ConeSample> cs;
    if (cones)
      for (const auto& dirs : *cones) {
        ConeSample s;
        s.base = c.xbar;
        for (const auto& d : dirs) s.directions.push_back(normalized(d));
        cs.push_back(s);
      }
    else
      for (const auto& s : c.sets) cs.push_back(limiting_cone_sample(s, c.xbar, RadiusLadder{0.1, 0.5, 14, 512, c.seed}));
    auto r = search_principle_certificate(cs);
    CheckOutcome o;
    o.outcome = r.best_residual <= *tol ? "holds" : "fails";
    std::string natural = o.outcome == "holds" ? "pass" : "fail";
    o.verdict = expect_verdict(expect->empty() ? std::nullopt : std::optional<std::string>(*expect), o.outcome, natural);
    if (*expect_res >= 0.0 && std::abs(r.best_residual - *expect_res) > *res_tol) o.verdict = "fail";
    json cj = json::array();
    for (const auto& s : cs) cj.push_back(s.to_json());
    o.result = {{"best_residual", r.best_residual}, {"vectors", vec_list(r.vectors)}, {"degenerate", r.degenerate},
                {"cones", cj}};
    if (*expect_res >= 0.0) o.result["expected_residual"] = {{"value", *expect_res}, {"tol", *res_tol}};
    o.summary = "best residual " + fmt(r.best_residual);
    return o;
  };
}

struct RNormalParams {
  Vec xstar;
  RateFunction R;
  SelectionRule selection;
  int directions = 64;
};

inline std::optional<RNormalParams> read_rnormal(Params& p, const RunContext& ctx) {
  auto xs = p.vec("xstar", ctx.dimension);
  auto R = read_rate(p);
  auto radii = p.ladder("radii");
  auto dirs = p.integer("directions", 64, 4, 4096);
  std::optional<SelectionRule> sel;
  if (R && radii) sel = read_selection(p, *radii, *R);
  else p.raw("selection");
  if (sel) {
    if (auto why = sel->growth_violation(); !why.empty()) {
      p.errors().add(schema::child(p.path(), "selection"), why);
      sel.reset();
    }
  }
  if (!xs || !R || !radii || !sel || !dirs) return std::nullopt;
  return RNormalParams{*xs, *R, *sel, *dirs};
}

inline RNormalQuery to_query(const RNormalParams& rp) {
  RNormalQuery q;
  q.xstar = rp.xstar;
  q.R = rp.R;
  q.selection = rp.selection;
  q.directions = rp.directions;
  return q;
}

inline CheckRunner prepare_rnormal(Params& p, const RunContext& ctx) {
  auto rp = read_rnormal(p, ctx);
  auto expect = p.choice("expect", {"pass", "fail"}, std::string{});
  p.finish();
  if (!rp || !expect) return {};
  return [rp = *rp, expect = *expect](const RunContext& c) {
    auto fam = c.indexed();
    auto rep = verify_r_normal(fam, to_query(rp));
    CheckOutcome o;
    o.outcome = rep.pass ? "pass" : "fail";
    o.verdict = expect.empty() ? o.outcome : (expect == o.outcome ? "pass" : "fail");
    bool vac = !rep.rungs.empty() && std::all_of(rep.rungs.begin(), rep.rungs.end(), [](const RNormalRung& g) { return g.vacuous; });
    if (vac && o.verdict == "pass") o.verdict = "vacuous";
    o.result = rep.to_json();
    o.result["growth"] = rp.selection.ratios();
    o.csv.push_back({"ladder", rep.csv()});
    o.csv.push_back({"growth", rp.selection.growth_csv()});
    std::string sizes;
    for (const auto& g : rep.rungs) sizes += (sizes.empty() ? "" : ",") + std::to_string(g.size);
    o.summary = std::string(rep.pass ? "R-normal" : "not an R-normal") + " (|I| = " + sizes + ")";
    return o;
  };
}

inline CheckRunner prepare_consistency(Params& p, const RunContext& ctx) {
  auto rp = read_rnormal(p, ctx);
  auto tol = p.positive("tol_res", 1e-3);
  p.finish();
  if (!rp || !tol) return {};
  return [rp = *rp, tol = *tol](const RunContext& c) {
    auto fam = c.indexed();
    auto r = r_normal_frechet_consistency(fam, to_query(rp), RadiusLadder{0.1, 0.5, 12, 512, c.seed}, tol);
    CheckOutcome o;
    bool ok = r.forward_ok && r.converse_ok.value_or(true);
    o.outcome = r.forward_vacuous ? "vacuous" : (ok ? "consistent" : "inconsistent");
    o.verdict = !ok ? "fail" : (r.forward_vacuous && !r.converse_ok ? "vacuous" : "pass");
    o.result = {{"r_normal", r.r_normal},          {"frechet_residual", r.frechet_residual},
                {"frechet_accepted", r.frechet_accepted}, {"forward_ok", r.forward_ok},
                {"forward_vacuous", r.forward_vacuous},
                {"converse_ok", r.converse_ok ? json(*r.converse_ok) : json(nullptr)}};
    o.summary = "Frechet residual " + fmt(r.frechet_residual);
    return o;
  };
}

inline CheckRunner prepare_fuzzy(Params& p, const RunContext& ctx) {
  auto xs = p.vec("xstar", ctx.dimension);
  auto eps = p.positive("eps");
  auto idx = p.indices("indices", std::vector<int>{1, 2});
  auto nmax = p.integer("n_max", 64, 1, 4096);
  auto expect = p.choice("expect", {"found", "not_found"}, "found");
  p.finish();
  if (!xs || !eps || !idx || !nmax || !expect) return {};
  return [=](const RunContext& c) {
    auto fam = c.indexed();
    FuzzySearchConfig cfg;
    cfg.indices = *idx;
    cfg.n_max = *nmax;
    cfg.pool.cone_ladder.seed = c.seed;
    auto res = search_fuzzy_certificate(fam, *xs, *eps, cfg);
    CheckOutcome o;
    bool valid = false;
    if (res.found) {
      auto chk = fuzzy_certificate_check(res.certificate, *xs, fam);
      valid = chk.pass;
      o.result["check"] = chk.to_json();
      o.result["certificate"] = res.certificate.to_json(*xs);
    }
    o.outcome = valid ? "found" : "not_found";
    o.verdict = o.outcome == *expect ? "pass" : "fail";
    o.result["best_residual"] = res.best_residual;
    o.summary = valid ? "certificate with lambda " + fmt(res.certificate.lambda) : "best residual " + fmt(res.best_residual);
    return o;
  };
}

inline CheckRunner prepare_aqc(Params& p, const RunContext&) {
  auto probe = p.choice("probe", {"adversarial", "scaled_normals"}, "adversarial");
  auto idx = p.indices("indices", std::vector<int>{1, 2});
  auto eps = p.ladder("eps", default_eps_ladder());
  auto expect = p.choice("expect", {"pass", "fail"}, std::string{});
  p.finish();
  if (!probe || !idx || !eps || !expect) return {};
  return [=](const RunContext& c) {
    auto fam = c.indexed();
    PoolConfig pc;
    pc.cone_ladder.seed = c.seed;
    AQCProbe pr;
    if (*probe == "adversarial") {
      pr = adversarial_aqc_probe(fam, *idx, *eps, pc);
    } else {
      // One pool normal per index, scaled by eps.
      for (double e : *eps) {
        auto pool = normal_pool(fam, *idx, e, pc);
        AQCRung g{e, {}, {}, {}};
        std::set<int> seen;
        for (const auto& cand : pool)
          if (seen.insert(cand.index).second) {
            g.indices.push_back(cand.index);
            g.points.push_back(cand.point);
            g.duals.push_back(cand.direction * e);
          }
        pr.rungs.push_back(std::move(g));
      }
    }
    auto rep = aqc_check(fam, pr);
    CheckOutcome o;
    o.outcome = rep.pass ? "pass" : "fail";
    o.verdict = expect->empty() ? o.outcome : (*expect == o.outcome ? "pass" : "fail");
    o.result = rep.to_json();
    std::ostringstream csv;
    csv.precision(17);
    csv << "eps,sum_norm,square_sum\n";
    for (std::size_t k = 0; k < rep.eps.size(); ++k) csv << rep.eps[k] << ',' << rep.sum_norms[k] << ',' << rep.square_sums[k] << '\n';
    o.csv.push_back({"aqc", csv.str()});
    o.summary = std::string(rep.antecedent ? "antecedent active" : "antecedent inactive") +
                (rep.violating_eps ? ", violated at eps " + fmt(*rep.violating_eps) : "");
    return o;
  };
}

inline CheckRunner prepare_equicontinuity(Params& p, const RunContext& ctx) {
  auto field = p.choice("field", {"km_normal", "km_gradient", "constant"}, std::nullopt);
  auto m = p.positive("m", 4.0);
  auto eps = p.positive("eps");
  auto deltas = p.ladder("deltas", std::vector<double>{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
  auto kmax = p.integer("k_max", 1000, 1, 1000000);
  auto expect = p.choice("expect", {"equicontinuous", "not_equicontinuous"}, std::string{});
  p.finish();
  if (ctx.dimension != 2 && field != "constant") p.errors().add(p.path(), "field families live in dimension 2");
  if (!field || !m || !eps || !deltas || !kmax || !expect) return {};
  return [=](const RunContext& c) {
    double mm = *m;
    VectorFieldFamily F;
    if (*field == "km_normal") F = [mm](int k, const Vec& x) { return IndexedFamily::km_normal(k, mm, x); };
    else if (*field == "km_gradient")
      F = [mm](int k, const Vec& x) { return x[0] > 0 ? Vec{2.0 * std::pow(k, mm) * x[0], -1.0} : Vec{0.0, -1.0}; };
    else F = [n = c.dimension](int, const Vec&) { return Vec(n, 1.0); };
    auto r = equicontinuity_probe(F, c.xbar, *eps, *deltas, *kmax);
    CheckOutcome o;
    o.outcome = r.equicontinuous ? "equicontinuous" : "not_equicontinuous";
    o.verdict = expect->empty() ? "pass" : (*expect == o.outcome ? "pass" : "fail");
    o.result = {{"equicontinuous", r.equicontinuous}, {"sup_per_delta", r.sup_per_delta}};
    if (r.delta) o.result["delta"] = *r.delta;
    if (!r.equicontinuous)
      o.result["witness"] = {{"k", r.witness_k}, {"x", schema::to_json(r.witness_x)}, {"value", r.witness_value},
                             {"value_sq", r.witness_value * r.witness_value}};
    o.summary = r.equicontinuous ? "equicontinuous" : "witness k=" + std::to_string(r.witness_k) + " |F_k(x)-F_k(0)|^2=" + fmt(r.witness_value * r.witness_value);
    return o;
  };
}

inline CheckRunner prepare_representation(Params& p, const RunContext& ctx) {
  auto xs = p.vec("xstar", ctx.dimension);
  auto eps = p.positive("eps");
  auto idx = p.indices("indices", std::vector<int>{1, 2});
  auto base = p.flag("base_point_only", false);
  auto aqc = p.flag("assume_aqc", true);
  auto expect = p.choice("expect", {"pass", "fail"}, std::string{});
  p.finish();
  if (!xs || !eps || !idx || !base || !aqc || !expect) return {};
  return [=](const RunContext& c) {
    auto fam = c.indexed();
    RepresentationConfig cfg;
    cfg.indices = *idx;
    cfg.pool.base_point_only = *base;
    cfg.pool.cone_ladder.seed = c.seed;
    cfg.assume_aqc = *aqc;
    auto r = limiting_rnormal_representation_check(*xs, fam, *eps, cfg);
    CheckOutcome o;
    o.outcome = r.pass ? "pass" : "fail";
    o.verdict = expect->empty() ? o.outcome : (*expect == o.outcome ? "pass" : "fail");
    o.result = r.to_json();
    o.summary = "distance " + fmt(r.distance);
    return o;
  };
}

inline CheckRunner prepare_sip(Params& p, const RunContext& ctx) {
  auto& err = p.errors();
  std::optional<Objective> obj;
  if (const json* oj = p.raw("objective")) obj = Objective::from_json(*oj, schema::child(p.path(), "objective"), err, ctx.dimension);
  else err.add(schema::child(p.path(), "objective"), "missing required field");
  std::optional<IndexedFamily> fam;
  if (const json* fj = p.raw("family")) {
    fam = IndexedFamily::from_json(*fj, schema::child(p.path(), "family"), err, ctx.dimension);
  } else if (const json* sj = p.raw("sets")) {
    json wrap = {{"sets", *sj}};
    if (auto sets = epl::detail::set_list(wrap, "sets", p.path(), err, ctx.dimension))
      fam = IndexedFamily::padded(*sets, ctx.xbar);
  }
  auto idx = p.indices("indices", std::vector<int>{1});
  auto eps = p.ladder("eps", SIPConfig{}.eps);
  auto expect = p.choice("expect", {"pass", "fail", "inconclusive"}, std::string{});
  p.finish();
  if (!obj || !idx || !eps || !expect) return {};
  if ((p.has("family") || p.has("sets")) && !fam) return {};
  return [=](const RunContext& c) {
    IndexedFamily f = fam ? *fam : c.indexed();
    f.xbar = c.xbar;
    SIPProblem prob{*obj, f, *idx};
    SIPConfig cfg;
    cfg.eps = *eps;
    cfg.ladder.seed = c.seed;
    cfg.representation.pool.cone_ladder.seed = c.seed;
    auto rep = check_sip(prob, cfg);
    CheckOutcome o;
    o.outcome = to_string(rep.verdict());
    o.verdict = expect->empty() ? o.outcome : (*expect == o.outcome ? "pass" : "fail");
    o.result = rep.to_json();
    o.summary = std::string("upper ") + to_string(rep.upper.verdict) + (rep.upper.vacuous ? " (vacuous)" : "") +
                ", lower " + to_string(rep.lower.verdict);
    return o;
  };
}

struct OpInfo {
  const char* name;
  int rank;
  CheckRunner (*prepare)(Params&, const RunContext&);
};

/// Execution order: geometry, finite extremality, R-normals before the rules built on them.
inline const std::vector<OpInfo>& ops() {
  static const std::vector<OpInfo> table{
      {"project", 0, prepare_project},
      {"projection_properties", 1, prepare_projection_properties},
      {"normal", 2, prepare_normal},
      {"extremal", 3, prepare_extremal},
      {"principle", 4, prepare_principle},
      {"principle_search", 5, prepare_principle_search},
      {"rnormal", 6, prepare_rnormal},
      {"consistency", 7, prepare_consistency},
      {"fuzzy", 8, prepare_fuzzy},
      {"aqc", 9, prepare_aqc},
      {"equicontinuity", 10, prepare_equicontinuity},
      {"representation", 11, prepare_representation},
      {"sip", 12, prepare_sip},
  };
  return table;
}

inline const OpInfo* find_op(const std::string& name) {
  for (const auto& o : ops())
    if (name == o.name) return &o;
  return nullptr;
}

}  // namespace detail

// ---- builtins ------------------------------------------------------------------------

struct Builtin {
  std::string name;
  std::string description;
  json document;
};

inline const std::vector<Builtin>& builtins() {
  static const std::vector<Builtin> table = [] {
    std::vector<Builtin> b;
    json parabola_pair = json::array({{{"family", "hypograph1d"}, {"function", "parabola"}, {"c", 1.0}},
                                      {{"family", "epigraph1d"}, {"function", "parabola"}, {"c", -1.0}}});
    json sym = {{"directions", {{0.0, 1.0}, {0.0, -1.0}}}, {"base", 4.0}};
    json asym = {{"shifts", json::array()}};
    for (int k = 1; k <= 13; ++k) {
      double r = std::pow(4.0, -k);
      asym["shifts"].push_back({{0.0, r}, {0.0, -r / 2}});
    }
    json km = {{"type", "k_m_parabolas"}, {"m", 4.0}};
    json rate = {{"type", "power"}, {"gamma", 1.0}, {"p", 0.9}};
    json sel = {{"type", "power_index"}, {"m", 4.0}, {"alpha", 0.1}};
    json radii = {1e-2, 1e-3, 1e-4};
    json to27 = {{"from", 1}, {"to", 27}};

    // Omega_1 = {x2 <= x1^2}, Omega_2 = {x2 >= -x1^2}: rank 1/2 but not locally extremal.
    b.push_back({"example_3_2", "parabola pair, rated extremal of rank 1/2, not locally extremal",
                 {{"schema", kSchemaVersion},
                  {"name", "example_3_2"},
                  {"seed", 1},
                  {"xbar", {0.0, 0.0}},
                  {"sets", parabola_pair},
                  {"checks",
                   {{{"id", "rated_half"}, {"op", "extremal"}, {"alpha", 0.5}, {"gamma", 0.5}, {"K", 10}, {"schedule", sym}},
                    {{"id", "rated_zero"}, {"op", "extremal"}, {"alpha", 0.0}, {"gamma", 0.5}, {"K", 10}, {"schedule", sym},
                     {"expect", "counterexample_every_rung"}},
                    {{"id", "principle"}, {"op", "principle"}, {"alpha", 0.5}, {"gamma", 0.5}, {"K", 13}, {"schedule", asym},
                     {"decreasing_tail", 4}}}}}});

    // Omega_1 = epi(-|x1|), Omega_2 = R x R_-: extremal of rank 1, exact principle fails.
    b.push_back({"example_3_6", "epi(-|x1|) against R x R_-, rank one, exact principle fails",
                 {{"schema", kSchemaVersion},
                  {"name", "example_3_6"},
                  {"seed", 1},
                  {"xbar", {0.0, 0.0}},
                  {"sets", {{{"family", "negnorm_epigraph"}}, {{"family", "halfplane_product"}, {"sign", "minus"}}}},
                  {"checks",
                   {{{"id", "rated_one"}, {"op", "extremal"}, {"alpha", 1.0}, {"gamma", 0.5}, {"K", 8}, {"allow_rank_one", true},
                     {"schedule", {{"directions", {{0.0, -1.0}, {0.0, 1.0}}}, {"base", 4.0}}}},
                    {{"id", "sampled_cones"}, {"op", "principle_search"}, {"expect", "fails"}},
                    {{"id", "stated_cones"},
                     {"op", "principle_search"},
                     {"cones", {{{1.0, -1.0}, {-1.0, -1.0}}, {{0.0, 1.0}}}},
                     {"expect_residual", 1.0 / std::sqrt(3.0)},
                     {"residual_tol", 0.01}}}}}});

    // Omega_k = {x2 >= k^4 max(x1,0)^2}, intersection R_- x R_+.
    b.push_back({"example_5_3", "infinite system k^4 x1^2 epigraphs, R-normal ladder and fuzzy rule",
                 {{"schema", kSchemaVersion},
                  {"name", "example_5_3"},
                  {"seed", 1},
                  {"xbar", {0.0, 0.0}},
                  {"family", km},
                  {"checks",
                   {{{"id", "rnormal"}, {"op", "rnormal"}, {"xstar", {1.0, 0.0}}, {"rate", rate}, {"radii", radii}, {"selection", sel}},
                    {{"id", "rnormal_upward"}, {"op", "rnormal"}, {"xstar", {0.0, 1.0}}, {"rate", rate}, {"radii", radii},
                     {"selection", sel}, {"expect", "fail"}},
                    {{"id", "consistency"}, {"op", "consistency"}, {"xstar", {1.0, 0.0}}, {"rate", rate}, {"radii", radii}, {"selection", sel}},
                    {{"id", "fuzzy"}, {"op", "fuzzy"}, {"xstar", {1.0, 0.0}}, {"eps", 0.05}, {"indices", to27}},
                    {{"id", "representation"}, {"op", "representation"}, {"xstar", {1.0, 0.0}}, {"eps", 0.05}, {"indices", to27}},
                    {{"id", "representation_upward"}, {"op", "representation"}, {"xstar", {0.0, 1.0}}, {"eps", 0.05},
                     {"indices", to27}, {"expect", "fail"}}}}}});

    // xi_k and grad phi_k of the same system.
    b.push_back({"example_5_4", "normal and gradient fields of the k^4 system are not equicontinuous",
                 {{"schema", kSchemaVersion},
                  {"name", "example_5_4"},
                  {"seed", 1},
                  {"xbar", {0.0, 0.0}},
                  {"family", km},
                  {"checks",
                   {{{"id", "normals"}, {"op", "equicontinuity"}, {"field", "km_normal"}, {"m", 4.0}, {"eps", 0.5},
                     {"expect", "not_equicontinuous"}},
                    {{"id", "gradients"}, {"op", "equicontinuity"}, {"field", "km_gradient"}, {"m", 4.0}, {"eps", 0.5},
                     {"expect", "not_equicontinuous"}},
                    {{"id", "constant"}, {"op", "equicontinuity"}, {"field", "constant"}, {"eps", 1e-3}, {"expect", "equicontinuous"}}}}}});

    b.push_back({"example_5_10", "AQC holds for the k^4 system",
                 {{"schema", kSchemaVersion},
                  {"name", "example_5_10"},
                  {"seed", 1},
                  {"xbar", {0.0, 0.0}},
                  {"family", km},
                  {"checks",
                   {{{"id", "aqc_scaled"}, {"op", "aqc"}, {"probe", "scaled_normals"}, {"indices", {{"from", 1}, {"to", 3}}}},
                    {{"id", "aqc_adversarial"}, {"op", "aqc"}, {"probe", "adversarial"}, {"indices", {{"from", 1}, {"to", 4}}}}}}}});

    json upper = json::array({{{"family", "halfplane_product"}, {"sign", "plus"}}});
    b.push_back({"sip_demo", "SIP optimality conditions, pass / fail / inconclusive scenarios",
                 {{"schema", kSchemaVersion},
                  {"name", "sip_demo"},
                  {"seed", 1},
                  {"xbar", {0.0, 0.0}},
                  {"family", km},
                  {"checks",
                   {{{"id", "sip_pass"}, {"op", "sip"}, {"objective", {{"type", "linear"}, {"c", {0.0, 1.0}}}}, {"sets", upper},
                     {"expect", "pass"}},
                    {{"id", "sip_fail"}, {"op", "sip"}, {"objective", {{"type", "linear"}, {"c", {1.0, 1.0}}}}, {"indices", to27},
                     {"expect", "fail"}},
                    {{"id", "sip_inconclusive"}, {"op", "sip"},
                     {"objective", {{"type", "sqrt_abs_coord"}, {"dimension", 2}, {"index", 0}}}, {"sets", upper},
                     {"expect", "inconclusive"}}}}}});
    return b;
  }();
  return table;
}

inline const Builtin* find_builtin(const std::string& name) {
  for (const auto& b : builtins())
    if (b.name == name) return &b;
  return nullptr;
}

// ---- parsing ---------------------------------------------------------------------------

inline ScenarioSpec parse_scenario(const json& input) {
  SchemaErrors err;
  ScenarioSpec spec;
  if (!input.is_object()) {
    err.add("", "scenario must be a JSON object");
    throw ScenarioError(err);
  }
  json doc = input;
  if (auto b = doc.find("builtin"); b != doc.end()) {
    if (!b->is_string()) {
      err.add("/builtin", "expected a string");
      throw ScenarioError(err);
    }
    const Builtin* bi = find_builtin(b->get<std::string>());
    if (!bi) {
      err.add("/builtin", "unknown builtin '" + b->get<std::string>() + "'");
      throw ScenarioError(err);
    }
    spec.builtin = bi->name;
    json merged = bi->document;
    for (auto it = doc.begin(); it != doc.end(); ++it)
      if (it.key() != "builtin") merged[it.key()] = it.value();
    doc = merged;
  }
  schema::strict_object(doc, "", {"schema", "name", "seed", "dimension", "xbar", "sets", "family", "checks"}, err);
  if (auto s = doc.find("schema"); s == doc.end()) err.add("/schema", "missing required field");
  else if (!s->is_string() || *s != kSchemaVersion) err.add("/schema", std::string("unsupported schema version, expected \"") + kSchemaVersion + "\"");
  if (auto n = doc.find("name"); n == doc.end() || !n->is_string() || n->get<std::string>().empty())
    err.add("/name", "expected a nonempty string");
  else
    spec.name = n->get<std::string>();
  if (auto s = doc.find("seed"); s == doc.end()) {
    err.add("/seed", "missing seed");
  } else if (!s->is_number_integer() || s->get<double>() < 0) {
    err.add("/seed", "expected a nonnegative integer");
  } else {
    spec.seed = s->is_number_unsigned() ? s->get<std::uint64_t>() : static_cast<std::uint64_t>(s->get<std::int64_t>());
  }
  auto xbar = schema::vector(doc, "xbar", "", err);
  if (xbar && !all_finite(*xbar)) {
    err.add("/xbar", "coordinates must be finite");
    xbar.reset();
  }
  std::size_t dim = xbar ? xbar->size() : 0;
  if (auto d = doc.find("dimension"); d != doc.end()) {
    if (!d->is_number_integer() || d->get<double>() < 1 || (xbar && d->get<double>() != static_cast<double>(dim)))
      err.add("/dimension", "must be a positive integer equal to the length of xbar");
  }
  RunContext& ctx = spec.context;
  ctx.seed = spec.seed;
  ctx.dimension = dim;
  if (xbar) ctx.xbar = *xbar;
  if (xbar && doc.contains("sets")) {
    if (auto sets = epl::detail::set_list(doc, "sets", "", err, dim)) ctx.sets = *sets;
  }
  if (xbar && doc.contains("family")) {
    if (auto fam = IndexedFamily::from_json(doc["family"], "/family", err, dim)) {
      fam->xbar = *xbar;
      ctx.family = *fam;
    }
  }
  if (xbar && !doc.contains("sets") && !doc.contains("family")) err.add("", "scenario needs sets or a family");
  auto checks = doc.find("checks");
  if (checks == doc.end() || !checks->is_array() || checks->empty()) {
    err.add("/checks", "expected a nonempty array of checks");
  } else if (xbar) {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < checks->size(); ++i) {
      const json& c = (*checks)[i];
      std::string path = schema::child("/checks", i);
      if (!c.is_object()) {
        err.add(path, "expected a check object");
        continue;
      }
      auto op = c.find("op");
      if (op == c.end() || !op->is_string()) {
        err.add(schema::child(path, "op"), "missing or non-string op");
        continue;
      }
      const auto* info = detail::find_op(op->get<std::string>());
      if (!info) {
        err.add(schema::child(path, "op"), "unknown op '" + op->get<std::string>() + "'");
        continue;
      }
      std::string id = info->name + std::string("_") + std::to_string(i);
      if (auto it = c.find("id"); it != c.end()) {
        if (!it->is_string() || it->get<std::string>().empty()) err.add(schema::child(path, "id"), "expected a nonempty string");
        else id = it->get<std::string>();
      }
      if (!ids.insert(id).second) err.add(schema::child(path, "id"), "duplicate check id '" + id + "'");
      Params p(c, path, err);
      p.has("op");
      p.has("id");
      std::size_t before = err.size();
      CheckRunner run;
      try {
        run = info->prepare(p, ctx);
      } catch (const Error& e) {
        err.add(path, e.what());
      }
      if (err.size() == before && !run) err.add(path, "invalid check parameters");
      spec.checks.push_back({id, info->name, c, run});
    }
  }
  if (!err.empty()) throw ScenarioError(err);
  spec.document = doc;
  return spec;
}

inline ScenarioSpec parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    SchemaErrors err;
    err.add("", std::string("invalid JSON: ") + e.what());
    throw ScenarioError(err);
  }
  return parse_scenario(j);
}

// ---- running and reporting -------------------------------------------------------------

struct CheckRecord {
  std::string id;
  std::string op;
  std::string verdict;
  std::string outcome;
  std::string summary;
  json result = json::object();
  std::vector<std::pair<std::string, std::string>> csv;
  double ms = 0.0;
  std::optional<std::string> fault;
};

struct RunReport {
  std::string name;
  std::uint64_t seed = 0;
  json input;
  std::vector<CheckRecord> checks;

  std::map<std::string, int> counts() const {
    std::map<std::string, int> c{{"pass", 0}, {"fail", 0}, {"inconclusive", 0}, {"vacuous", 0}, {"fault", 0}};
    for (const auto& r : checks) ++c[r.verdict];
    return c;
  }

  /// fault > fail > inconclusive > pass (vacuous counts as pass).
  std::string verdict() const {
    auto c = counts();
    if (c["fault"]) return "fault";
    if (c["fail"]) return "fail";
    if (c["inconclusive"]) return "inconclusive";
    return "pass";
  }

  int exit_code() const {
    auto v = verdict();
    return v == "pass" ? 0 : v == "fail" ? 1 : v == "inconclusive" ? 2 : 3;
  }

  json to_json(bool timings = false) const {
    json cs = json::array(), faults = json::array();
    for (const auto& r : checks) {
      json j = {{"id", r.id}, {"op", r.op}, {"verdict", r.verdict}, {"outcome", r.outcome}, {"summary", r.summary},
                {"result", r.result}};
      if (timings) j["timing_ms"] = r.ms;
      if (r.fault) {
        j["fault"] = *r.fault;
        faults.push_back({{"id", r.id}, {"message", *r.fault}});
      }
      cs.push_back(j);
    }
    json j = {{"schema", kSchemaVersion},
              {"tool", {{"name", "epl"}, {"version", kToolVersion}}},
              {"scenario", name},
              {"seed", seed},
              {"input", input},
              {"checks", cs},
              {"summary", counts()},
              {"verdict", verdict()}};
    if (!faults.empty()) j["faults"] = faults;
    return j;
  }

  static RunReport from_json(const json& j) {
    SchemaErrors err;
    RunReport r;
    if (!j.is_object() || !j.contains("checks") || !j["checks"].is_array() || j.value("schema", "") != kSchemaVersion) {
      err.add("", "not a v1 run report");
      throw ScenarioError(err);
    }
    try {
      r.name = j.at("scenario").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.input = j.at("input");
      for (const auto& c : j["checks"]) {
        CheckRecord rec;
        rec.id = c.at("id").get<std::string>();
        rec.op = c.at("op").get<std::string>();
        rec.verdict = c.at("verdict").get<std::string>();
        rec.outcome = c.at("outcome").get<std::string>();
        rec.summary = c.at("summary").get<std::string>();
        rec.result = c.at("result");
        if (c.contains("timing_ms")) rec.ms = c["timing_ms"].get<double>();
        if (c.contains("fault")) rec.fault = c["fault"].get<std::string>();
        r.checks.push_back(std::move(rec));
      }
    } catch (const json::exception& e) {
      err.add("", std::string("malformed run report: ") + e.what());
      throw ScenarioError(err);
    }
    return r;
  }

  std::string text(bool timings = false) const {
    std::ostringstream os;
    os << "scenario " << name << " (seed " << seed << ")\n";
    std::size_t w = 2;
    for (const auto& r : checks) w = std::max(w, r.id.size());
    for (const auto& r : checks) {
      os << "  " << r.id << std::string(w - r.id.size() + 2, ' ') << r.verdict
         << std::string(14 - std::min<std::size_t>(13, r.verdict.size()), ' ') << r.summary;
      if (timings) os << "  [" << detail::fmt(r.ms) << " ms]";
      os << '\n';
    }
    auto c = counts();
    os << "verdict " << verdict() << " (pass " << c["pass"] << ", fail " << c["fail"] << ", inconclusive "
       << c["inconclusive"] << ", vacuous " << c["vacuous"] << ", fault " << c["fault"] << ")\n";
    return os.str();
  }

  /// File name -> contents: a verdict summary plus one table per check that produces one.
  std::map<std::string, std::string> csv_bundle() const {
    std::map<std::string, std::string> out;
    std::string s = "id,op,verdict,outcome\n";
    for (const auto& r : checks) {
      s += r.id + ',' + r.op + ',' + r.verdict + ',' + r.outcome + '\n';
      for (const auto& [suffix, body] : r.csv) out[name + "_" + r.id + "_" + suffix + ".csv"] = body;
    }
    out[name + "_summary.csv"] = s;
    return out;
  }
};

inline CheckRecord run_check(const CheckSpec& c, const RunContext& ctx) {
  CheckRecord rec;
  rec.id = c.id;
  rec.op = c.op;
  auto t0 = std::chrono::steady_clock::now();
  try {
    auto o = c.run(ctx);
    rec.verdict = o.verdict;
    rec.outcome = o.outcome;
    rec.summary = o.summary;
    rec.result = std::move(o.result);
    rec.csv = std::move(o.csv);
  } catch (const PreconditionError& e) {
    rec.verdict = "inconclusive";
    rec.outcome = "precondition";
    rec.summary = e.what();
  } catch (const std::exception& e) {
    rec.verdict = "fault";
    rec.outcome = "fault";
    rec.fault = e.what();
    rec.summary = std::string("fault: ") + e.what();
  }
  rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

/// Runs every check; the report lists checks in dependency order and does not depend on `workers`.
inline RunReport run_scenario(const ScenarioSpec& spec, int workers = 1) {
  std::vector<std::size_t> order(spec.checks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detail::find_op(spec.checks[a].op)->rank < detail::find_op(spec.checks[b].op)->rank;
  });
  RunReport rep;
  rep.name = spec.name;
  rep.seed = spec.seed;
  rep.input = spec.document;
  rep.checks.resize(order.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < order.size(); k = next++) rep.checks[k] = run_check(spec.checks[order[k]], spec.context);
  };
  int n = std::max(1, std::min<int>(workers, static_cast<int>(order.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rep;
}

}  // namespace epl::cli
