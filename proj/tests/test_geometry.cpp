#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "epl/random.hpp"
#include "epl/set_oracle.hpp"
#include "epl/geometry_properties.hpp"

using namespace epl;

namespace {

// Nearest point on the graph of f by dense scanning of [lo, hi].
Vec brute_graph_nearest(const std::function<double(double)>& f, const Vec& x, double lo,
                        double hi, int n = 2'000'001) {
  double best = INFINITY, bu = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = lo + (hi - lo) * i / (n - 1);
    double d = (u - x[0]) * (u - x[0]) + (f(u) - x[1]) * (f(u) - x[1]);
    if (d < best) {
      best = d;
      bu = u;
    }
  }
  return Vec{bu, f(bu)};
}

Set parabola_hypo() { return hypograph(Function1d::parabola(1.0)); }

struct Family {
  const char* name;
  Set set;
  double scale;
};

std::vector<Family> families() {
  return {
      {"halfspace", halfspace({0.3, -1.0}, 0.2), 2.0},
      {"ball", ball({0.5, -0.5}, 1.0), 3.0},
      {"box", box({-1.0, 0.0}, {1.0, 2.0}), 3.0},
      {"polyhedron", polyhedron({{{1.0, 1.0}, 1.0}, {{-1.0, 2.0}, 0.5}, {{0.0, -1.0}, 1.0}}), 3.0},
      {"parabola_epi", epigraph(Function1d::parabola(2.0)), 2.0},
      {"kmp_epi", epigraph(Function1d::k_m_parabola(3.0, 4.0)), 1.0},
      {"parabola_hypo", parabola_hypo(), 2.0},
      {"negnorm_epi", negnorm_epigraph(), 2.0},
      {"xsin_epi", epigraph(Function1d::x_sin_inv_x()), 1.0},
      {"translated_ball", ball({0.0, 0.0}, 1.0).translate({1.0, 2.0}), 3.0},
      {"product", product({box({-1.0}, {1.0}), ball({0.0, 0.0}, 0.5)}), 2.0},
      {"corner", intersection({halfspace({0.0, 1.0}, 0.0), halfspace({1.0, 0.0}, 0.0)}), 2.0},
  };
}

Vec probe(std::size_t n, std::uint64_t k, std::uint64_t i, double scale) {
  Vec x(n);
  for (std::size_t j = 0; j < n; ++j) x[j] = scale * (2.0 * rng::uniform(k, i * n + j) - 1.0);
  return x;
}

}  // namespace

TEST(Contains, HalfspaceInterior) {
  EXPECT_TRUE(halfspace({0.0, 1.0}, 0.0).contains({0.3, -0.1}, 1e-9));
}

TEST(Contains, AboveParabolaIsOutside) {
  EXPECT_FALSE(parabola_hypo().contains({0.0, 0.1}, 1e-9));
}

TEST(Contains, BallBoundary) { EXPECT_TRUE(ball({0.0, 0.0}, 1.0).contains({1.0, 0.0}, 1e-9)); }

TEST(Contains, DimensionMismatchThrows) {
  EXPECT_THROW(ball({0.0, 0.0}, 1.0).contains({1.0, 0.0, 0.0}, 1e-9), InputError);
  EXPECT_THROW(ball({0.0, 0.0}, 1.0).contains({1.0, 0.0}, -1.0), InputError);
}

TEST(Project, HalfspaceDrop) {
  Vec w = halfspace({0.0, 1.0}, 0.0).project({0.3, 0.5});
  EXPECT_DOUBLE_EQ(w[0], 0.3);
  EXPECT_DOUBLE_EQ(w[1], 0.0);
}

TEST(Project, ParabolaTieBrokenLexicographically) {
  Vec w = parabola_hypo().project({0.0, 1.0});
  Vec oracle = brute_graph_nearest([](double u) { return u * u; }, {0.0, 1.0}, 0.0, 2.0);
  EXPECT_NEAR(w[0], oracle[0], 1e-6);
  EXPECT_NEAR(w[1], oracle[1], 1e-6);
  EXPECT_NEAR(w[0], 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(w[1], 0.5, 1e-9);
}

TEST(Project, BallRadial) {
  Vec w = ball({0.0, 0.0}, 1.0).project({2.0, 0.0});
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.0);
}

TEST(Project, GraphsMatchBruteForce) {
  struct Case {
    Function1d f;
    bool epi;
    Vec x;
  };
  std::vector<Case> cases = {
      {Function1d::parabola(1.0), false, {0.3, 0.9}},
      {Function1d::parabola(2.0), true, {0.7, -0.4}},
      {Function1d::k_m_parabola(3.0, 4.0), true, {0.2, 0.1}},
      {Function1d::k_m_parabola(10.0, 4.0), true, {0.02, 0.0}},
      {Function1d::neg_abs(), true, {0.1, -0.5}},
      {Function1d::neg_abs(), true, {0.0, -0.5}},
      {Function1d::x_sin_inv_x(), true, {0.3, -0.4}},
      {Function1d::neg_log_power(), true, {0.05, -0.2}},
  };
  for (const auto& c : cases) {
    Set s = c.epi ? epigraph(c.f) : hypograph(c.f);
    Vec w = s.project(c.x);
    Vec o = brute_graph_nearest([&](double u) { return c.f(u); }, c.x, c.x[0] - 2.0, c.x[0] + 2.0);
    EXPECT_NEAR(dist(c.x, w), dist(c.x, o), 1e-6) << c.f.name() << " " << to_string(c.x);
    EXPECT_TRUE(s.contains(w, 1e-9));
  }
}

TEST(Distance, ParabolaFromAbove) {
  EXPECT_NEAR(parabola_hypo().distance({0.0, 1.0}), std::sqrt(3.0) / 2.0, 1e-9);
}

TEST(Distance, InsideIsZero) {
  for (const auto& f : families()) {
    Vec x = f.set.project(Vec(f.set.dimension(), 0.25));
    EXPECT_EQ(f.set.distance(f.set.project(x)), 0.0) << f.name;
  }
}

TEST(Distance, VerticalDrop) { EXPECT_DOUBLE_EQ(halfplane_product(false).distance({5.0, 2.0}), 2.0); }

TEST(Translate, ShiftedLowerHalfplane) {
  double t = 0.37;
  EXPECT_TRUE(halfplane_product(false).translate({0.0, t}).contains({0.0, -t}, 0.0));
}

TEST(Translate, ZeroShiftIsIdentity) {
  for (const auto& f : families()) {
    Set t = f.set.translate(Vec(f.set.dimension()));
    auto k = rng::key(1, "translate-identity");
    for (int i = 0; i < 100; ++i) {
      Vec x = probe(f.set.dimension(), k, i, f.scale);
      EXPECT_EQ(t.project(x), f.set.project(x)) << f.name;
      EXPECT_EQ(t.inside(x), f.set.inside(x)) << f.name;
    }
  }
}

TEST(Translate, ShiftedDisk) {
  // {w - (1,0) : ||w|| <= 1} is the unit disk centered at (-1,0).
  Vec w = ball({0.0, 0.0}, 1.0).translate({1.0, 0.0}).project({3.0, 0.0});
  EXPECT_NEAR(w[0], 0.0, 1e-15);
  EXPECT_NEAR(w[1], 0.0, 1e-15);
}

TEST(Intersection, EpigraphsFoldToSteepest) {
  std::vector<Set> sets;
  for (int k = 1; k <= 50; ++k) sets.push_back(epigraph(Function1d::k_m_parabola(k, 4)));
  Set s = intersection(sets);
  Vec x{0.01, 0.0};
  Vec w = s.project(x);
  Vec ref = epigraph(Function1d::k_m_parabola(50, 4)).project(x);
  EXPECT_EQ(w, ref);
  EXPECT_TRUE(s.exact_projection());
}

TEST(Intersection, DykstraCorner) {
  Set corner = intersection({halfspace({0.0, 1.0}, 0.0), halfspace({1.0, 0.0}, 0.0)});
  Vec w = corner.project({1.0, 2.0});
  EXPECT_NEAR(w[0], 0.0, 1e-12);
  EXPECT_NEAR(w[1], 0.0, 1e-12);
  Vec v = corner.project({-1.0, 2.0});
  EXPECT_NEAR(v[0], -1.0, 1e-12);
  EXPECT_NEAR(v[1], 0.0, 1e-12);
}

TEST(Serialization, RoundTripAndStrictness) {
  for (const auto& f : families()) {
    json j = f.set.to_json();
    Set back = set_from_json(j);
    EXPECT_EQ(back.to_json(), j) << f.name;
  }
  SchemaErrors err;
  json bad = {{"family", "halfspace"}, {"normal", {0, 1}}, {"offset", 0}, {"extra", 1}};
  EXPECT_FALSE(set_from_json(bad, "/sets/0", err));
  ASSERT_EQ(err.size(), 1u);
  EXPECT_NE(err.list()[0].find("/sets/0/extra"), std::string::npos);
  SchemaErrors err2;
  EXPECT_FALSE(set_from_json(json{{"family", "torus"}}, "", err2));
  EXPECT_NE(err2.list()[0].find("unknown family"), std::string::npos);
}

TEST(Function1d, XSinInvXAtZero) { EXPECT_EQ(Function1d::x_sin_inv_x()(0.0), 0.0); }

TEST(Function1d, ContinuityAlongLadder) {
  for (const auto& f : {Function1d::x_sin_inv_x(), Function1d::neg_log_power(),
                        Function1d::k_m_parabola(5, 4), Function1d::neg_abs()}) {
    double prev = INFINITY;
    for (int j = 1; j <= 12; ++j) {
      double h = std::pow(10.0, -j);
      double d = std::abs(f(h) - f(0.0));
      EXPECT_LE(d, std::max(prev, 1.01 * h)) << f.name();
      prev = d;
    }
  }
}

// ---- property suites --------------------------------------------------------

TEST(Properties, Idempotence) {
  for (const auto& f : families()) {
    auto k = rng::key(7, "idempotence");
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      Vec x = probe(f.set.dimension(), k, i, f.scale);
      Vec w = f.set.project(x);
      if (dist(f.set.project(w), w) > 1e-9 || !f.set.contains(w, 1e-9)) ++violations;
    }
    EXPECT_EQ(violations, 0) << f.name;
  }
}

TEST(Properties, NonexpansiveOnConvexFamilies) {
  for (const auto& f : families()) {
    if (!f.set.convex()) continue;
    auto k = rng::key(8, "nonexpansive");
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      Vec x = probe(f.set.dimension(), k, 2 * i, f.scale);
      Vec y = probe(f.set.dimension(), k, 2 * i + 1, f.scale);
      if (dist(f.set.project(x), f.set.project(y)) > dist(x, y) + 1e-9) ++violations;
    }
    EXPECT_EQ(violations, 0) << f.name;
  }
}

TEST(Properties, TranslationEquivariance) {
  for (const auto& f : families()) {
    auto k = rng::key(9, "translation");
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      Vec x = probe(f.set.dimension(), k, 2 * i, f.scale);
      Vec a = probe(f.set.dimension(), k, 2 * i + 1, 0.5);
      Set t = f.set.translate(a);
      if (t.distance(x) != f.set.distance(x + a)) ++violations;
      if (t.project(x) != f.set.project(x + a) - a) ++violations;
    }
    EXPECT_EQ(violations, 0) << f.name;
  }
}

TEST(Properties, NearestAmongSampledSetPoints) {
  for (const auto& f : families()) {
    if (!f.set.exact_projection()) continue;
    auto k = rng::key(10, "nearest");
    std::vector<Vec> pts;
    for (int i = 0; i < 200; ++i) pts.push_back(f.set.project(probe(f.set.dimension(), k, i, f.scale)));
    int violations = 0;
    for (int i = 0; i < 200; ++i) {
      Vec x = probe(f.set.dimension(), k, 1000 + i, f.scale);
      double d = dist(x, f.set.project(x));
      for (const auto& y : pts)
        if (d > dist(x, y) + 1e-7) ++violations;
    }
    EXPECT_EQ(violations, 0) << f.name;
  }
}

TEST(Properties, Deterministic) {
  Set s = epigraph(Function1d::x_sin_inv_x());
  EXPECT_EQ(s.project({0.21, -0.3}), s.project({0.21, -0.3}));
}

TEST(Properties, CatalogSuiteClean) {
  for (const auto& ns : projection_catalog()) {
    auto r = projection_property_suite(ns.set, 300, 17, ns.scale);
    EXPECT_EQ(r.violations(), 0) << ns.name << ' ' << r.to_json().dump();
    EXPECT_EQ(r.probes, 300);
    if (!r.convex) EXPECT_EQ(r.nonexpansive, 0) << ns.name;
  }
}

TEST(Properties, SuiteSeedStable) {
  Set s = epigraph(Function1d::parabola(2.0));
  EXPECT_EQ(projection_property_suite(s, 100, 4).to_json(), projection_property_suite(s, 100, 4).to_json());
  EXPECT_FALSE(projection_property_suite(s, 10).convex == false && s.convex());
}
