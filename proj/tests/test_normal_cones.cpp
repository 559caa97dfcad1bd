#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "epl/normal_cones.hpp"

using namespace epl;

namespace {

const double kS2 = std::sqrt(2.0);

Set parabola_hypo() { return hypograph(Function1d::parabola(1.0)); }

// sup of x2/||x|| over {x2 <= x1^2} within radius b: attained on the boundary
// curve (t, t^2), scanned densely in t.
double parabola_sup_oracle(double b) {
  double best = -INFINITY;
  for (int i = 1; i <= 1000000; ++i) {
    double t = b * i / 1000000.0;
    if (t * t + t * t * t * t > b * b) break;
    best = std::max(best, t * t / std::sqrt(t * t + t * t * t * t));
  }
  return best;
}

}  // namespace

TEST(RadiusLadder, Validation) {
  RadiusLadder ok;
  EXPECT_NO_THROW(ok.validate());
  EXPECT_EQ(ok.window_start(), 11);
  RadiusLadder bad;
  bad.rungs = 60;
  EXPECT_THROW(bad.validate(), InputError);
  bad = {};
  bad.sigma = 1.0;
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(EpsNormal, ParabolaVerticalNormal) {
  RadiusLadder ladder;
  ladder.rungs = 12;
  auto r = eps_normal_residual(parabola_hypo(), {0, 0}, {0, 1}, ladder);
  EXPECT_LE(r.value, 0.01);
  // Projected samples may fall anywhere inside the outer radius of the window.
  double oracle = parabola_sup_oracle(ladder.radius(ladder.window_start()));
  EXPECT_LE(r.value, oracle + 1e-12);
  EXPECT_TRUE(is_eps_normal(r, 0.0));
}

TEST(EpsNormal, ZeroFunctional) {
  for (const Set& s : {parabola_hypo(), negnorm_epigraph(), ball({0, 1}, 1)}) {
    EXPECT_LE(eps_normal_residual(s, {0, 0}, {0, 0}).value, 0.0);
  }
}

TEST(EpsNormal, TangentDirectionOfHalfplane) {
  auto r = eps_normal_residual(halfplane_product(false), {0, 0}, {1, 0});
  EXPECT_NEAR(r.value, 1.0, 1e-3);
  EXPECT_FALSE(is_eps_normal(r, 0.5));
}

TEST(EpsNormal, NotInSetThrows) {
  EXPECT_THROW(eps_normal_residual(parabola_hypo(), {0, 1}, {0, 1}), PreconditionError);
}

TEST(EpsNormal, IsolatedPoint) {
  auto r = eps_normal_residual(ball({0, 0}, 0.0), {0, 0}, {1, 0});
  EXPECT_TRUE(r.isolated);
  EXPECT_EQ(r.value, -INFINITY);
}

TEST(LimitingCone, LowerHalfplane) {
  auto c = limiting_cone_sample(halfplane_product(false), {0, 0});
  ASSERT_EQ(c.directions.size(), 1u);
  EXPECT_NEAR(c.directions[0][0], 0.0, 1e-12);
  EXPECT_NEAR(c.directions[0][1], 1.0, 1e-12);
}

TEST(LimitingCone, Parabola) {
  auto c = limiting_cone_sample(parabola_hypo(), {0, 0});
  ASSERT_EQ(c.directions.size(), 1u);
  EXPECT_LE(angle_between(c.directions[0], {0, 1}), 0.02);
}

TEST(LimitingCone, NegNormEpigraph) {
  auto c = limiting_cone_sample(negnorm_epigraph(), {0, 0});
  ASSERT_EQ(c.directions.size(), 2u);
  EXPECT_TRUE(cone_membership(c, {-1, -1}, 1e-9));
  EXPECT_TRUE(cone_membership(c, {1, -1}, 1e-9));
  EXPECT_FALSE(cone_membership(c, {0, -1}, 0.01));
  EXPECT_NEAR(cone_angular_distance(c, {0, -1}), std::numbers::pi / 4, 1e-9);
}

TEST(LimitingCone, Interior) {
  auto c = limiting_cone_sample(ball({0, 0}, 1.0), {0.2, 0.1});
  EXPECT_TRUE(c.directions.empty());
  std::string diag;
  EXPECT_FALSE(cone_membership(c, {1, 0}, 0.02, &diag));
  EXPECT_EQ(diag, "empty cone sample");
}

TEST(LimitingCone, HalfspacePolar) {
  Vec a{2.0, -1.0};
  auto c = limiting_cone_sample(halfspace(a, 0.0), {0.5, 1.0});
  ASSERT_EQ(c.directions.size(), 1u);
  EXPECT_LE(angle_between(c.directions[0], a), 0.02);
}

TEST(ConeMembership, Basics) {
  ConeSample c{{0, 0}, {{0, 1}}, {}};
  EXPECT_TRUE(cone_membership(c, {0, 5}, 0.01));
  EXPECT_FALSE(cone_membership(c, {1, 0}, 0.01));
  EXPECT_TRUE(cone_membership(c, {0, 0}, 0.01));
  ConeSample v{{0, 0}, {Vec{-1, -1} / kS2, Vec{1, -1} / kS2}, {}};
  EXPECT_FALSE(cone_membership(v, {0, -1}, 0.01));
}

TEST(Frechet, SmoothMinimum) {
  auto r = frechet_subdiff_residual(Objective::norm_sq(2), {0, 0}, {0, 0});
  EXPECT_GE(r.value, 0.0);
  EXPECT_LE(r.value, 1e-4);
}

TEST(Frechet, AbsoluteValue) {
  auto f = Objective::from_function(Function1d::neg_abs());
  auto absf = Objective::custom("abs", 1, Objective::Kind::Lipschitz,
                                [](const Vec& x) { return std::abs(x[0]); });
  EXPECT_GE(frechet_subdiff_residual(absf, {0}, {0.5}).value, -1e-3);
  auto bad = frechet_subdiff_residual(absf, {0}, {2.0});
  EXPECT_NEAR(bad.value, -1.0, 1e-12);
  EXPECT_LT(frechet_subdiff_residual(f, {0}, {0.0}).value, -0.5);
}

TEST(Frechet, InfiniteAtBaseThrows) {
  auto f = Objective::custom("inf", 1, Objective::Kind::General,
                             [](const Vec&) { return INFINITY; });
  EXPECT_THROW(frechet_subdiff_residual(f, {0}, {0}), PreconditionError);
}

TEST(Fermat, Cases) {
  EXPECT_TRUE(fermat_check(Objective::norm_sq(2), {0, 0}));
  EXPECT_FALSE(fermat_check(Objective::linear({1, -2}), {0, 0}));
  auto r = frechet_subdiff_residual(Objective::neg_norm(2), {0, 0}, {0, 0});
  EXPECT_NEAR(r.value, -1.0, 1e-12);
  EXPECT_FALSE(fermat_check(Objective::neg_norm(2), {0, 0}));
}

// ---- properties ----------------------------------------------------------------

TEST(Properties, PositiveScaling) {
  std::vector<Set> sets = {parabola_hypo(), negnorm_epigraph(), halfplane_product(false),
                           epigraph(Function1d::k_m_parabola(2, 4)), ball({0, -1}, 1)};
  RadiusLadder ladder;
  ladder.samples = 64;
  auto k = rng::key(3, "scaling");
  for (int i = 0; i < 100; ++i) {
    const Set& s = sets[i % sets.size()];
    Vec xs = rng::direction(2, k, i);
    double lam = 0.1 + 5.0 * rng::uniform(k, 1000 + i);
    double a = eps_normal_residual(s, {0, 0}, xs, ladder).value;
    double b = eps_normal_residual(s, {0, 0}, lam * xs, ladder).value;
    EXPECT_NEAR(b, lam * a, 1e-12 * (1.0 + std::abs(lam * a)));
  }
}

TEST(Properties, MonotoneAcceptance) {
  auto r = eps_normal_residual(negnorm_epigraph(), {0, 0}, {0.3, -1.0});
  bool prev = false;
  for (double eps = 0.0; eps <= 2.0; eps += 0.05) {
    bool acc = is_eps_normal(r, eps);
    EXPECT_TRUE(!prev || acc);
    prev = acc;
  }
}

TEST(Properties, InteriorNullity) {
  std::vector<std::pair<Set, Vec>> cases = {
      {parabola_hypo(), {0.0, -0.5}},
      {negnorm_epigraph(), {0.0, 0.5}},
      {box({-1, -1}, {1, 1}), {0.3, 0.3}},
      {epigraph(Function1d::k_m_parabola(2, 4)), {-0.5, 0.5}},
  };
  for (const auto& [s, x] : cases) {
    auto c = limiting_cone_sample(s, x);
    EXPECT_TRUE(c.directions.empty());
    EXPECT_FALSE(cone_membership(c, {0.0, 1.0}));
  }
}

TEST(Properties, StoredDirectionsAreUnit) {
  for (const Set& s : {parabola_hypo(), negnorm_epigraph(), box({0, 0}, {1, 1})}) {
    for (const auto& d : limiting_cone_sample(s, {0, 0}).directions)
      EXPECT_NEAR(norm(d), 1.0, 1e-9);
  }
}
