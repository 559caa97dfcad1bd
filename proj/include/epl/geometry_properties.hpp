#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epl/random.hpp"
#include "epl/set_oracle.hpp"

namespace epl {

struct ProjectionPropertyReport {
  int probes = 0;
  int idempotence = 0;
  int translation = 0;
  /// Only counted for convex sets.
  int nonexpansive = 0;
  bool convex = false;

  int violations() const { return idempotence + translation + nonexpansive; }
  json to_json() const {
    return {{"probes", probes},         {"idempotence", idempotence}, {"translation", translation},
            {"nonexpansive", nonexpansive}, {"convex", convex},         {"violations", violations()}};
  }
};

/// Uniform probe in [-scale, scale]^n.
inline Vec box_probe(std::size_t n, std::uint64_t k, std::uint64_t i, double scale) {
  Vec x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = scale * (2.0 * rng::uniform(k, i * n + j) - 1.0);
  return x;
}

/// Idempotence P(P x) = P x with P x in the set, translation equivariance
/// P_{S-a}(x) = P_S(x+a) - a, and nonexpansiveness on convex sets.
inline ProjectionPropertyReport projection_property_suite(const Set& s, int probes = 1000, std::uint64_t seed = 0x5eed,
                                                          double scale = 2.0, double tol = 1e-9) {
  ProjectionPropertyReport r;
  r.probes = probes;
  r.convex = s.convex();
  const std::size_t n = s.dimension();
  auto ki = rng::key(seed, "idempotence"), kt = rng::key(seed, "translation"), kn = rng::key(seed, "nonexpansive");
  for (int i = 0; i < probes; ++i) {
    auto u = static_cast<std::uint64_t>(i);
    Vec x = box_probe(n, ki, u, scale);
    Vec w = s.project(x);
    if (dist(s.project(w), w) > tol || !s.contains(w, tol)) ++r.idempotence;

    Vec y = box_probe(n, kt, 2 * u, scale);
    Vec a = box_probe(n, kt, 2 * u + 1, 0.5 * scale);
    Set t = s.translate(a);
    if (dist(t.project(y), s.project(y + a) - a) > tol) ++r.translation;

    if (r.convex) {
      Vec p = box_probe(n, kn, 2 * u, scale), q = box_probe(n, kn, 2 * u + 1, scale);
      if (dist(s.project(p), s.project(q)) > dist(p, q) + tol) ++r.nonexpansive;
    }
  }
  return r;
}

struct NamedSet {
  std::string name;
  Set set;
  double scale;
};

/// Catalog used by the projection property suite.
inline std::vector<NamedSet> projection_catalog() {
  return {
      {"halfspace", halfspace({0.3, -1.0}, 0.2), 2.0},
      {"ball", ball({0.5, -0.5}, 1.0), 3.0},
      {"box", box({-1.0, 0.0}, {1.0, 2.0}), 3.0},
      {"polyhedron", polyhedron({{{1.0, 1.0}, 1.0}, {{-1.0, 2.0}, 0.5}, {{0.0, -1.0}, 1.0}}), 3.0},
      {"parabola_epi", epigraph(Function1d::parabola(2.0)), 2.0},
      {"kmp_epi", epigraph(Function1d::k_m_parabola(3.0, 4.0)), 1.0},
      {"parabola_hypo", hypograph(Function1d::parabola(1.0)), 2.0},
      {"negnorm_epi", negnorm_epigraph(), 2.0},
      {"xsin_epi", epigraph(Function1d::x_sin_inv_x()), 1.0},
      {"translated_ball", ball({0.0, 0.0}, 1.0).translate({1.0, 2.0}), 3.0},
      {"product", product({box({-1.0}, {1.0}), ball({0.0, 0.0}, 0.5)}), 2.0},
      {"corner", intersection({halfspace({0.0, 1.0}, 0.0), halfspace({1.0, 0.0}, 0.0)}), 2.0},
      {"ball_3d", ball({0.0, 1.0, -1.0}, 2.0), 4.0},
  };
}

}  // namespace epl
