#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "epl/intersection_calculus.hpp"

using namespace epl;

namespace {

const double kS2 = std::sqrt(2.0);

IndexedFamily corner_family() {
  return IndexedFamily::padded({halfspace(Vec{0, 1}, 0.0), halfspace(Vec{1, 0}, 0.0)}, {0, 0}, "corner");
}

IndexedFamily opposite_halfplanes() {
  return IndexedFamily::padded({halfplane_product(false), halfplane_product(true)}, {0, 0});
}

const std::vector<double> kExampleRadii{1e-2, 1e-3, 1e-4};

int example_k0(double r) { return smallest_power_index(1.0 / (4.0 * std::pow(r, 2.1)), 4.0); }

RNormalQuery example_query(Vec xstar) {
  RNormalQuery q;
  q.xstar = std::move(xstar);
  q.R = RateFunction::power(1.0, 0.9);
  q.selection = SelectionRule::prefix(kExampleRadii, q.R, example_k0);
  return q;
}

RNormalQuery finite_query(Vec xstar, int size, const RateFunction& R) {
  RNormalQuery q;
  q.xstar = std::move(xstar);
  q.R = R;
  q.selection = SelectionRule::prefix({1e-2, 1e-3, 1e-4}, R, [size](double) { return size; });
  return q;
}

// sup over t >= 0 of -r k^4 t^2 + t on a fine grid around the vertex.
double scan_sup(double r, int k0) {
  double peak = 1.0 / (2.0 * r * std::pow(k0, 4.0));
  double best = -1.0;
  for (int i = 0; i <= 200000; ++i) {
    double t = 2.0 * peak * i / 200000.0;
    best = std::max(best, -r * std::pow(k0, 4.0) * t * t + t);
  }
  return best;
}

}  // namespace

TEST(RNormal, ExampleLadderPasses) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  auto q = example_query(Vec{1, 0});
  auto rep = verify_r_normal(fam, q);
  ASSERT_EQ(rep.rungs.size(), 3u);
  EXPECT_TRUE(rep.pass);
  for (const auto& g : rep.rungs) {
    int k0 = static_cast<int>(g.size);
    double bound = 1.0 / (4.0 * g.r * std::pow(k0, 4.0));
    EXPECT_NEAR(scan_sup(g.r, k0), bound, 1e-3 * bound);
    EXPECT_LE(bound, g.r);
    EXPECT_LE(g.max_lhs, bound * (1 + 1e-9));
    EXPECT_FALSE(g.vacuous);
  }
  EXPECT_EQ(rep.rungs[1].size, 27u);
  EXPECT_NEAR(1.0 / (4.0 * 1e-3 * std::pow(27.0, 4.0)), 4.704e-4, 5e-7);
  EXPECT_GT(rep.rungs[0].ratio, rep.rungs[1].ratio);
  EXPECT_GT(rep.rungs[1].ratio, rep.rungs[2].ratio);
}

TEST(RNormal, ZeroFunctionalPasses) {
  auto rep = verify_r_normal(IndexedFamily::k_m_parabolas(4.0), example_query(Vec{0, 0}));
  EXPECT_TRUE(rep.pass);
  for (const auto& g : rep.rungs) EXPECT_LT(g.max_lhs, 0.0);
}

TEST(RNormal, UpwardFunctionalFailsEveryRung) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  auto rep = verify_r_normal(fam, example_query(Vec{0, 1}));
  EXPECT_FALSE(rep.pass);
  for (const auto& g : rep.rungs) {
    ASSERT_TRUE(g.violation);
    EXPECT_TRUE(fam.truncation({1, 2}).contains(*g.violation, 1e-9));
    EXPECT_GE(r_normal_lhs(Vec{0, 1}, *g.violation, fam.xbar, g.r), g.r * (1 - 1e-9));
  }
}

TEST(RNormal, DownwardNormalPasses) {
  EXPECT_TRUE(verify_r_normal(IndexedFamily::k_m_parabolas(4.0), example_query(Vec{0, -1})).pass);
}

TEST(RNormal, GrowthViolationRejected) {
  auto q = example_query(Vec{1, 0});
  q.selection = SelectionRule::prefix(kExampleRadii, q.R, [](double r) { return r < 5e-4 ? 5000 : 2; });
  EXPECT_THROW(verify_r_normal(IndexedFamily::k_m_parabolas(4.0), q), InputError);
}

TEST(RNormal, CsvColumns) {
  auto rep = verify_r_normal(IndexedFamily::k_m_parabolas(4.0), example_query(Vec{1, 0}));
  auto csv = rep.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "r,size,R_r,ratio,margin,verdict");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find(",27,"), std::string::npos);
}

TEST(RNormal, PerturbedVariantMatchesAtZeroShift) {
  auto fam = corner_family();
  auto q = finite_query(Vec{1, 1}, 2, RateFunction::power(1.0, 0.5));
  auto plain = verify_r_normal(fam, q);
  q.perturbation = [](int) { return Vec{0, 0}; };
  auto shifted = verify_r_normal(fam, q);
  ASSERT_EQ(plain.rungs.size(), shifted.rungs.size());
  for (std::size_t k = 0; k < plain.rungs.size(); ++k)
    EXPECT_DOUBLE_EQ(plain.rungs[k].max_lhs, shifted.rungs[k].max_lhs);
  q.perturbation = [](int) { return Vec{1, 1}; };
  EXPECT_THROW(verify_r_normal(fam, q), PreconditionError);
}

TEST(RNormal, PerturbedVariantShiftsTheSets) {
  // Shifting both halfspaces to a common boundary point keeps the corner cone.
  auto fam = IndexedFamily::padded({halfspace(Vec{0, 1}, -1.0), halfspace(Vec{1, 0}, -1.0)}, {0, 0});
  auto q = finite_query(Vec{1, 1}, 2, RateFunction::power(1.0, 0.5));
  EXPECT_THROW(verify_r_normal(fam, q), PreconditionError);
  q.perturbation = [](int) { return Vec{-1, -1}; };
  EXPECT_TRUE(verify_r_normal(fam, q).pass);
}

TEST(RNormal, ScalingKeepsMarginPointwise) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1, 1), lam(0.01, 1.0), rr(1e-4, 1e-1);
  for (int i = 0; i < 2000; ++i) {
    Vec xs{u(gen), u(gen)}, x{u(gen), u(gen)}, xbar{0, 0};
    double r = rr(gen), l = lam(gen);
    double m = r - r_normal_lhs(xs, x, xbar, r);
    if (m <= 0) continue;
    double m2 = r - r_normal_lhs(xs * l, x, xbar, r);
    EXPECT_GE(m2, std::min(m, r) - 1e-15);
  }
}

TEST(Consistency, ExampleFamilyForward) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  auto c = r_normal_frechet_consistency(fam, example_query(Vec{1, 0}));
  EXPECT_TRUE(c.r_normal);
  EXPECT_TRUE(c.frechet_accepted);
  EXPECT_LE(c.frechet_residual, 1e-3);
  EXPECT_TRUE(c.forward_ok);
  EXPECT_FALSE(c.converse_ok.has_value());
}

TEST(Consistency, CornerConverse) {
  auto c = r_normal_frechet_consistency(corner_family(),
                                        finite_query(Vec{1 / kS2, 1 / kS2}, 2, RateFunction::power(1.0, 0.5)));
  EXPECT_TRUE(c.frechet_accepted);
  ASSERT_TRUE(c.converse_ok.has_value());
  EXPECT_TRUE(*c.converse_ok);
  EXPECT_TRUE(c.forward_ok);
}

TEST(Consistency, RejectedIsVacuous) {
  auto c = r_normal_frechet_consistency(IndexedFamily::k_m_parabolas(4.0), example_query(Vec{0, 1}));
  EXPECT_FALSE(c.r_normal);
  EXPECT_TRUE(c.forward_vacuous);
  EXPECT_TRUE(c.forward_ok);
}

TEST(Fuzzy, CornerClosedForm) {
  Vec xs{0.5, 0.5};
  // lambda^2 (1 + |x*|^2) + 2 (lambda/2)^2 = 1.
  double lambda = 1.0 / std::sqrt(1.0 + norm_sq(xs) + 0.5);
  EXPECT_NEAR(lambda, 1 / kS2, 1e-15);
  FuzzyCertificate c{lambda, 0.05, {1, 2}, {Vec{0, 0}, Vec{0, 0}}, {Vec{0, lambda / 2}, Vec{lambda / 2, 0}}};
  EXPECT_LE(c.identity_defect(xs), 1e-15);
  EXPECT_LE(c.inclusion_gap(xs), 1e-15);
  auto rep = fuzzy_certificate_check(c, xs, corner_family());
  EXPECT_TRUE(rep.pass) << rep.to_json().dump();
}

TEST(Fuzzy, LambdaZeroFromAntipodalNormals) {
  auto fam = IndexedFamily::padded(
      {hypograph(Function1d::parabola(1.0)), epigraph(Function1d::parabola(-1.0))}, {0, 0});
  FuzzyCertificate c{0.0, 0.05, {1, 2}, {Vec{0, 0}, Vec{0, 0}}, {Vec{0, 1 / kS2}, Vec{0, -1 / kS2}}};
  EXPECT_LE(c.identity_defect(Vec{1, 0}), 1e-15);
  EXPECT_TRUE(fuzzy_certificate_check(c, Vec{1, 0}, fam).pass);
}

TEST(Fuzzy, IdentityDefectFails) {
  FuzzyCertificate c{0.0, 0.05, {1, 2}, {Vec{0, 0}, Vec{0, 0}}, {Vec{0, std::sqrt(0.35)}, Vec{0, -std::sqrt(0.35)}}};
  EXPECT_NEAR(c.identity_defect(Vec{1, 0}), 0.3, 1e-12);
  auto rep = fuzzy_certificate_check(c, Vec{1, 0}, opposite_halfplanes());
  EXPECT_FALSE(rep.pass);
}

TEST(Fuzzy, DefectsRecomputeFromFields) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    Vec xs{u(gen), u(gen)};
    FuzzyCertificate c{std::abs(u(gen)), 0.1, {1, 2}, {Vec{0, 0}, Vec{0, 0}}, {Vec{u(gen), u(gen)}, Vec{u(gen), u(gen)}}};
    double s = c.lambda * c.lambda * (1 + xs[0] * xs[0] + xs[1] * xs[1]);
    Vec sum{0, 0};
    for (const auto& d : c.duals) {
      s += d[0] * d[0] + d[1] * d[1];
      sum += d;
    }
    EXPECT_NEAR(c.identity_defect(xs), std::abs(s - 1.0), 1e-14);
    double gap = std::hypot(c.lambda * xs[0] - sum[0], c.lambda * xs[1] - sum[1]);
    EXPECT_NEAR(c.inclusion_defect(xs), std::max(0.0, gap - 0.1), 1e-15);
    auto j = c.to_json(xs);
    EXPECT_EQ(j["residuals"]["identity_defect"].get<double>(), c.identity_defect(xs));
  }
}

TEST(Fuzzy, SearchCorner) {
  auto fam = corner_family();
  Vec xs{1 / kS2, 1 / kS2};
  auto res = search_fuzzy_certificate(fam, xs, 0.05);
  ASSERT_TRUE(res.found);
  EXPECT_GT(res.certificate.lambda, 0.0);
  EXPECT_NEAR(res.certificate.lambda, 1.0 / std::sqrt(1.0 + 2.0 * norm_sq(xs)), 1e-6);
  auto rep = fuzzy_certificate_check(res.certificate, xs, fam);
  EXPECT_TRUE(rep.pass) << rep.to_json().dump();
  EXPECT_LE(res.certificate.identity_defect(xs), 1e-9);
}

TEST(Fuzzy, SearchExampleFamily) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  Vec xs{1, 0};
  FuzzySearchConfig cfg;
  cfg.indices.clear();
  for (int k = 1; k <= 27; ++k) cfg.indices.push_back(k);
  auto res = search_fuzzy_certificate(fam, xs, 0.05, cfg);
  ASSERT_TRUE(res.found) << res.best_residual;
  auto rep = fuzzy_certificate_check(res.certificate, xs, fam);
  EXPECT_TRUE(rep.pass) << rep.to_json().dump();
  EXPECT_LE(res.certificate.identity_defect(xs), 1e-9);
  // Every dual is a positive multiple of xi_k at its point.
  for (std::size_t i = 0; i < res.certificate.duals.size(); ++i) {
    Vec xi = IndexedFamily::km_normal(res.certificate.indices[i], 4.0, res.certificate.points[i]);
    EXPECT_LT(angle_between(res.certificate.duals[i], xi), 1e-3);
  }
}

TEST(Fuzzy, SearchFailsAwayFromNormals) {
  auto res = search_fuzzy_certificate(corner_family(), Vec{0, -1}, 0.05);
  EXPECT_FALSE(res.found);
  EXPECT_GT(res.best_residual, 0.5);
}

TEST(AQC, ExampleFamilyPasses) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  AQCProbe probe;
  for (double eps : default_eps_ladder()) {
    AQCRung g{eps, {}, {}, {}};
    for (int k = 1; k <= 3; ++k) {
      double x1 = 0.5 * eps / (k * k);
      Vec x{x1, std::pow(k, 4.0) * x1 * x1};
      if (norm(x) > eps) continue;
      g.indices.push_back(k);
      g.points.push_back(x);
      g.duals.push_back(IndexedFamily::km_normal(k, 4.0, x) * eps);
    }
    probe.rungs.push_back(g);
  }
  auto rep = aqc_check(fam, probe);
  EXPECT_TRUE(rep.antecedent);
  EXPECT_TRUE(rep.pass) << rep.to_json().dump();
}

TEST(AQC, AdversarialProbeOnExampleFamily) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  auto probe = adversarial_aqc_probe(fam, {1, 2, 3, 4});
  ASSERT_EQ(probe.rungs.size(), 6u);
  // All normals share the pointed cone {v1 >= 0, v2 < 0}, so nothing cancels.
  for (const auto& g : probe.rungs)
    for (const auto& d : g.duals) {
      EXPECT_GE(d[0], -1e-12);
      EXPECT_LT(d[1], 0.0);
    }
  auto rep = aqc_check(fam, probe);
  EXPECT_FALSE(rep.antecedent);
  EXPECT_TRUE(rep.pass);
}

TEST(AQC, OppositeHalfplanesFail) {
  auto fam = opposite_halfplanes();
  auto probe = adversarial_aqc_probe(fam, {1, 2});
  auto rep = aqc_check(fam, probe);
  EXPECT_TRUE(rep.antecedent);
  EXPECT_FALSE(rep.pass);
  ASSERT_TRUE(rep.violating_eps);
  for (double s : rep.sum_norms) EXPECT_LE(s, 1e-12);
  for (double s : rep.square_sums) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(AQC, ZeroDualsPassVacuously) {
  AQCProbe probe;
  for (double eps : default_eps_ladder()) probe.rungs.push_back({eps, {1, 2}, {Vec{0, 0}, Vec{0, 0}}, {Vec{0, 0}, Vec{0, 0}}});
  auto rep = aqc_check(opposite_halfplanes(), probe);
  EXPECT_TRUE(rep.pass);
}

TEST(AQC, InputErrors) {
  auto fam = opposite_halfplanes();
  AQCProbe big{{{0.1, {1}, {Vec{0, 0}}, {Vec{0, 2}}}}};
  EXPECT_THROW(aqc_check(fam, big), InputError);
  AQCProbe far{{{0.1, {1}, {Vec{1, 0}}, {Vec{0, 1}}}}};
  EXPECT_THROW(aqc_check(fam, far), InputError);
  EXPECT_THROW(aqc_check(fam, AQCProbe{}), InputError);
  AQCProbe empty{{{0.1, {}, {}, {}}}};
  EXPECT_THROW(aqc_check(fam, empty), InputError);
}

TEST(Equicontinuity, NormalFieldIsNot) {
  VectorFieldFamily xi = [](int k, const Vec& x) { return IndexedFamily::km_normal(k, 4.0, x); };
  auto res = equicontinuity_probe(xi, Vec{0, 0}, 0.5, {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}, 1000);
  EXPECT_FALSE(res.equicontinuous);
  double sq = res.witness_value * res.witness_value;
  EXPECT_GE(sq, 1.9);
  // Closed form at the witness: 2 - 2/d with d = sqrt(4 k^8 x1^2 + 1).
  double d = std::sqrt(4.0 * std::pow(res.witness_k, 8.0) * res.witness_x[0] * res.witness_x[0] + 1.0);
  EXPECT_NEAR(sq, 2.0 - 2.0 / d, 1e-12);
  EXPECT_LE(norm(res.witness_x), 1e-6 * (1 + 1e-12));
}

TEST(Equicontinuity, GradientFieldIsNot) {
  VectorFieldFamily grad = [](int k, const Vec& x) {
    return x[0] > 0 ? Vec{2.0 * std::pow(k, 4.0) * x[0], -1.0} : Vec{0.0, -1.0};
  };
  auto res = equicontinuity_probe(grad, Vec{0, 0}, 0.5, {1e-1, 1e-3, 1e-6}, 1000);
  EXPECT_FALSE(res.equicontinuous);
  EXPECT_GE(res.witness_value, 0.5);
}

TEST(Equicontinuity, ConstantFieldIs) {
  VectorFieldFamily c = [](int, const Vec&) { return Vec{3, -1}; };
  auto res = equicontinuity_probe(c, Vec{0, 0}, 1e-3, {1e-1}, 50);
  EXPECT_TRUE(res.equicontinuous);
  EXPECT_EQ(res.delta, 1e-1);
}

TEST(Representation, ExampleFamilyNormal) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  RepresentationConfig cfg;
  cfg.indices.clear();
  for (int k = 1; k <= 27; ++k) cfg.indices.push_back(k);
  auto res = limiting_rnormal_representation_check(Vec{1, 0}, fam, 0.05, cfg);
  EXPECT_TRUE(res.pass) << res.distance;
  Vec sum{0, 0};
  for (const auto& v : res.normals) sum += v;
  EXPECT_NEAR(dist(sum, Vec{1, 0}), res.distance, 1e-9);
  EXPECT_TRUE(res.assumptions["aqc"].get<bool>());
}

TEST(Representation, NonNormalFails) {
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  RepresentationConfig cfg;
  cfg.indices = {1, 2, 3, 4, 5, 6, 7, 8};
  auto res = limiting_rnormal_representation_check(Vec{0, 1}, fam, 0.05, cfg);
  EXPECT_FALSE(res.pass);
  EXPECT_GE(res.distance, 0.9);
}

TEST(Representation, ConeSpecialization) {
  auto fam = IndexedFamily::padded({halfspace(Vec{1, 2}, 0.0), halfspace(Vec{-3, 1}, 0.0)}, {0, 0});
  RepresentationConfig cfg;
  cfg.pool.base_point_only = true;
  Vec xs = normalized(Vec{1, 2}) * 0.7 + normalized(Vec{-3, 1}) * 1.3;
  auto res = limiting_rnormal_representation_check(xs, fam, 0.01, cfg);
  EXPECT_TRUE(res.pass) << res.distance;
  EXPECT_LE(res.distance, 1e-6);
  for (const auto& p : res.points) EXPECT_EQ(p, (Vec{0, 0}));
}

TEST(Properties, RNormalImpliesFrechet) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1, 1);
  auto fam = IndexedFamily::k_m_parabolas(4.0);
  int accepted = 0;
  for (int i = 0; i < 30; ++i) {
    Vec xs{u(gen), u(gen)};
    auto c = r_normal_frechet_consistency(fam, example_query(xs));
    if (!c.r_normal) continue;
    ++accepted;
    EXPECT_TRUE(c.forward_ok) << xs[0] << ' ' << xs[1] << ' ' << c.frechet_residual;
  }
  EXPECT_GT(accepted, 3);
}
