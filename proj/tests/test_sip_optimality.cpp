#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "epl/sip_optimality.hpp"

using namespace epl;

namespace {

// R x R_+ and R x R_- as one-set families.
IndexedFamily upper_halfplane() { return IndexedFamily::padded({halfplane_product(true)}, {0, 0}); }
IndexedFamily lower_halfplane() { return IndexedFamily::padded({halfplane_product(false)}, {0, 0}); }

std::vector<int> example_indices() {
  std::vector<int> v;
  for (int k = 1; k <= 27; ++k) v.push_back(k);
  return v;
}

bool contains_vec(const std::vector<Vec>& vs, const Vec& v, double tol = 1e-6) {
  for (const auto& w : vs)
    if (dist(v, w) <= tol) return true;
  return false;
}

}  // namespace

TEST(Subdiff, SmoothGradient) {
  auto s = subdiff_sample(Objective::norm_sq(2), Vec{1, 0});
  ASSERT_EQ(s.vectors.size(), 1u);
  EXPECT_EQ(s.vectors[0], (Vec{2, 0}));
}

TEST(Subdiff, AbsExtremePoints) {
  auto s = subdiff_sample(Objective::abs_coord(2, 0), Vec{0, 0});
  ASSERT_EQ(s.vectors.size(), 2u);
  EXPECT_TRUE(contains_vec(s.vectors, Vec{1, 0}));
  EXPECT_TRUE(contains_vec(s.vectors, Vec{-1, 0}));
}

TEST(Subdiff, SeparableSum) {
  auto f = Objective::max_affine({{Vec{1, 1}, 0.0}, {Vec{-1, 1}, 0.0}});
  auto s = subdiff_sample(f, Vec{0, 0});
  ASSERT_EQ(s.vectors.size(), 2u);
  EXPECT_TRUE(contains_vec(s.vectors, Vec{1, 1}));
  EXPECT_TRUE(contains_vec(s.vectors, Vec{-1, 1}));
}

TEST(Subdiff, InteriorPointsOfHullDropped) {
  auto f = Objective::max_affine({{Vec{1, 0}, 0.0}, {Vec{-1, 0}, 0.0}, {Vec{0, 0}, 0.0}, {Vec{0, 1}, 0.0}});
  auto s = subdiff_sample(f, Vec{0, 0});
  EXPECT_EQ(s.vectors.size(), 3u);
  EXPECT_FALSE(contains_vec(s.vectors, Vec{0, 0}));
}

TEST(Subdiff, NormSampleHasZeroAndUnitGradients) {
  auto s = subdiff_sample(Objective::norm(2), Vec{0, 0});
  EXPECT_TRUE(contains_vec(s.vectors, Vec{0, 0}, 0.0));
  int unit_count = 0;
  for (const auto& v : s.vectors)
    if (std::abs(norm(v) - 1.0) < 1e-6) ++unit_count;
  EXPECT_GT(unit_count, 8);
}

TEST(UpperSubdiff, Examples) {
  auto a = upper_subdiff_sample(Objective::neg_norm_sq(2), Vec{0, 0});
  ASSERT_EQ(a.vectors.size(), 1u);
  EXPECT_EQ(a.vectors[0], (Vec{0, 0}));
  auto b = upper_subdiff_sample(Objective::linear(Vec{2, -3}), Vec{0.5, 0.5});
  ASSERT_EQ(b.vectors.size(), 1u);
  EXPECT_EQ(b.vectors[0], (Vec{2, -3}));
  EXPECT_TRUE(upper_subdiff_sample(Objective::abs_coord(2, 0), Vec{0, 0}).vectors.empty());
  EXPECT_TRUE(upper_subdiff_sample(Objective::norm(2), Vec{0, 0}).vectors.empty());
}

TEST(UpperSubdiff, ConcaveKinkHasBothSlopes) {
  // -|x1| has upper subgradients (t, 0) for t in [-1, 1]; the sample holds the ends.
  auto f = Objective::custom("neg_abs", 2, Objective::Kind::Lipschitz, [](const Vec& x) { return -std::abs(x[0]); });
  auto s = upper_subdiff_sample(f, Vec{0, 0});
  EXPECT_TRUE(contains_vec(s.vectors, Vec{0, 0}, 0.0));
  EXPECT_TRUE(contains_vec(s.vectors, Vec{1, 0}, 1e-6));
  EXPECT_TRUE(contains_vec(s.vectors, Vec{-1, 0}, 1e-6));
}

TEST(Lipschitz, Estimates) {
  auto n = lipschitz_estimate(Objective::norm(2), Vec{0, 0});
  EXPECT_TRUE(n.finite);
  EXPECT_NEAR(n.value, 1.0, 1e-12);
  auto s = lipschitz_estimate(Objective::sqrt_abs_coord(2, 0), Vec{0, 0});
  EXPECT_FALSE(s.finite);
}

TEST(SIP, PassScenario) {
  SIPProblem p{Objective::linear(Vec{0, 1}), upper_halfplane()};
  auto rep = check_sip(p);
  EXPECT_EQ(rep.upper.verdict, Verdict::Pass);
  EXPECT_FALSE(rep.upper.vacuous);
  EXPECT_EQ(rep.lower.verdict, Verdict::Pass);
  EXPECT_EQ(rep.verdict(), Verdict::Pass);
  EXPECT_TRUE(local_minimum_probe(p));
}

TEST(SIP, FailScenarioOnExampleFamily) {
  SIPProblem p{Objective::linear(Vec{1, 1}), IndexedFamily::k_m_parabolas(4.0), example_indices()};
  auto rep = check_sip(p);
  EXPECT_EQ(rep.verdict(), Verdict::Fail);
  ASSERT_EQ(rep.upper.candidates.size(), 1u);
  for (double d : rep.upper.candidates[0].distances) EXPECT_GE(d, 1.0 - 1e-9);
  EXPECT_FALSE(local_minimum_probe(p));
}

TEST(SIP, PassScenarioOnExampleFamily) {
  SIPProblem p{Objective::linear(Vec{-1, 1}), IndexedFamily::k_m_parabolas(4.0), example_indices()};
  auto rep = check_sip(p);
  EXPECT_EQ(rep.verdict(), Verdict::Pass) << rep.to_json().dump();
}

TEST(SIP, InconclusiveScenario) {
  SIPProblem p{Objective::sqrt_abs_coord(2, 0), upper_halfplane()};
  auto rep = check_sip(p);
  EXPECT_TRUE(rep.upper.vacuous);
  EXPECT_EQ(rep.lower.verdict, Verdict::Inconclusive);
  EXPECT_EQ(rep.verdict(), Verdict::Inconclusive);
  EXPECT_EQ(std::string(to_string(rep.verdict())), "inconclusive");
}

TEST(SIP, NormOverHalfplanePasses) {
  SIPProblem p{Objective::norm(2), upper_halfplane()};
  auto rep = check_sip(p);
  EXPECT_TRUE(rep.upper.vacuous);
  EXPECT_EQ(rep.lower.verdict, Verdict::Pass);
  EXPECT_EQ(rep.verdict(), Verdict::Pass);
}

TEST(SIP, WrongSideHalfplaneFails) {
  SIPProblem p{Objective::linear(Vec{0, 1}), lower_halfplane()};
  auto rep = check_sip(p);
  EXPECT_EQ(rep.lower.verdict, Verdict::Fail);
  EXPECT_EQ(rep.verdict(), Verdict::Fail);
}

TEST(SIP, ConvexHullSearch) {
  // phi = |x1| + x2 over R x R_+: 0 = (t, 1) + (0, -1) with t = 0 inside the hull.
  SIPProblem p{Objective::max_affine({{Vec{1, 1}, 0.0}, {Vec{-1, 1}, 0.0}}), upper_halfplane()};
  auto rep = check_lower_condition(p);
  EXPECT_EQ(rep.verdict, Verdict::Pass) << rep.to_json().dump();
  EXPECT_TRUE(local_minimum_probe(p));
}

TEST(SIP, InfeasibleBaseRejected) {
  SIPProblem p{Objective::linear(Vec{0, 1}), IndexedFamily::padded({halfspace(Vec{0, 1}, -1.0)}, {0, 0})};
  EXPECT_THROW(check_sip(p), PreconditionError);
}

TEST(Properties, SmoothSpecializationAgrees) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 20; ++i) {
    Vec a{u(gen), u(gen)}, b{u(gen), u(gen)};
    auto fam = IndexedFamily::padded({halfspace(a, 0.0), halfspace(b, 0.0)}, {0, 0});
    Vec c{u(gen), u(gen)};
    Objective f = i % 2 == 0 ? Objective::linear(c) : Objective::quadratic({Vec{1, 0}, Vec{0, 2}}, c);
    SIPProblem p{f, fam, {1, 2}};
    auto up = check_upper_condition(p);
    auto lo = check_lower_condition(p);
    EXPECT_EQ(up.verdict, lo.verdict) << i;
    // Closed form: -c lies in cone{a, b} iff the verdict is pass.
    auto coef = solvers::nnls({a, b}, -1.0 * c);
    double d = dist(coef[0] * a + coef[1] * b, -1.0 * c);
    if (d < 1e-3) EXPECT_EQ(lo.verdict, Verdict::Pass) << i;
    if (d > 0.2) EXPECT_EQ(lo.verdict, Verdict::Fail) << i;
  }
}

TEST(Properties, SingleSetMatchesConeMembership) {
  std::vector<std::pair<Objective, Set>> catalog{
      {Objective::linear(Vec{0, 1}), halfplane_product(true)},
      {Objective::linear(Vec{0, 1}), halfplane_product(false)},
      {Objective::linear(Vec{1, 0}), halfplane_product(true)},
      {Objective::linear(Vec{-1, -1}), halfspace(Vec{1, 1}, 0.0)},
      {Objective::norm_sq(2), halfspace(Vec{1, 0}, 0.0)},
  };
  for (const auto& [f, s] : catalog) {
    SIPProblem p{f, IndexedFamily::padded({s}, {0, 0})};
    auto lo = check_lower_condition(p);
    auto cone = limiting_cone_sample(s, Vec{0, 0});
    Vec v = -1.0 * f.gradient(Vec{0, 0});
    bool member = norm(v) == 0.0 || cone_membership(cone, v, 0.02);
    EXPECT_EQ(lo.verdict == Verdict::Pass, member);
  }
}

TEST(Properties, LocalMinimaNeverFail) {
  std::vector<SIPProblem> cases{
      {Objective::linear(Vec{0, 1}), upper_halfplane()},
      {Objective::norm(2), upper_halfplane()},
      {Objective::norm_sq(2), lower_halfplane()},
      {Objective::max_affine({{Vec{1, 1}, 0.0}, {Vec{-1, 1}, 0.0}}), upper_halfplane()},
  };
  for (const auto& p : cases) {
    ASSERT_TRUE(local_minimum_probe(p));
    EXPECT_NE(check_lower_condition(p).verdict, Verdict::Fail);
  }
}
