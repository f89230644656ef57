#include "wwb/fractal.hpp"
#include "wwb/gaussian_paths.hpp"
#include "wwb/variation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace wwb;

namespace {

GridPath linear_path(const BadicGrid& g) {
  return GridPath::from_function(g, [](double t) { return t; });
}

GridPath ww_path(const WWParams& p, unsigned depth, std::uint64_t seed, std::uint64_t rep) {
  const BadicGrid g(p.b(), depth);
  const FbmSampler s(p.hurst(), g, SamplerMethod::CirculantEmbedding);
  return convolve_bridge(to_bridge(s.sample(seed, rep), KappaSpec::standard(), p.hurst()), p.alpha());
}

// Every digit sequence of length m, with R_m running over 0..b^m - 1.
DigitSequence digits_of(unsigned b, unsigned m, index_t r) {
  std::vector<unsigned> d(m);
  for (unsigned j = 0; j < m; ++j) {
    d[j] = static_cast<unsigned>(r % b);
    r /= b;
  }
  return DigitSequence(b, std::move(d));
}

}  // namespace

TEST(PthVariation, LinearPathClosedForms) {
  const BadicGrid g(3, 6);
  const auto c1 = pth_variation_curve(linear_path(g), 1.0);
  const auto c2 = pth_variation_curve(linear_path(g), 2.0);
  ASSERT_EQ(c1.levels.size(), 6U);
  for (unsigned n = 1; n <= 6; ++n) {
    EXPECT_NEAR(c1.at(n).v, 1.0, 1e-12);
    EXPECT_NEAR(c2.at(n).v, std::pow(3.0, -static_cast<double>(n)), 1e-15);
  }
  EXPECT_THROW(pth_variation_curve(linear_path(g), 0.9), std::invalid_argument);
  EXPECT_THROW(pth_variation_curve(linear_path(g), 2.0, 0.0), std::invalid_argument);
}

TEST(PthVariation, PartialIntervalIncludesFloorIndex) {
  // k runs over 0..floor(t b^n): 5 increments of 1/8 at t = 1/2, n = 3.
  const auto c = pth_variation_curve(linear_path(BadicGrid(2, 3)), 1.0, 0.5);
  EXPECT_NEAR(c.at(3).v, 5.0 / 8.0, 1e-15);
  EXPECT_NEAR(c.at(1).v, 1.0, 1e-15);  // capped at b^n - 1
  const auto third = pth_variation_curve(linear_path(BadicGrid(3, 4)), 1.0, 1.0 / 3.0);
  EXPECT_NEAR(third.at(4).v, 28.0 / 81.0, 1e-15);
}

TEST(PthVariation, LevelsComeFromRestriction) {
  const auto x = ww_path(WWParams(0.5, 2, 0.5), 10, 4, 0);
  const auto c = pth_variation_curve(x, 2.0);
  for (unsigned n = 1; n <= 10; ++n)
    EXPECT_EQ(c.at(n).v, pth_variation_curve(dyadic_refine(x, n), 2.0).top().v);
}

TEST(NormalizedQv, ZeroPathAndWarning) {
  const auto d = normalized_qv(GridPath::zeros(BadicGrid(2, 8)), 1.0, WWParams::exact_critical(2, 0.5));
  for (const auto& l : d.quadratic.levels) EXPECT_EQ(*l.v_over_n, 0.0);
  EXPECT_FALSE(d.warning.has_value());
  EXPECT_EQ(d.below.p, 1.8);
  EXPECT_EQ(d.above.p, 2.2);
  EXPECT_TRUE(normalized_qv(GridPath::zeros(BadicGrid(2, 8)), 1.0, WWParams(0.5, 2, 0.5)).warning.has_value());
}

TEST(PhiVariation, ClosedFormForLinearPath) {
  const double h = 0.5;
  const BadicGrid g(2, 12);
  const auto c = phi_variation(linear_path(g), h);
  for (unsigned n = 2; n <= 12; ++n) {
    const double expected =
        std::pow(n * std::log(2.0), -1.0 / (2.0 * h)) * std::pow(2.0, n * (1.0 - 1.0 / h));
    EXPECT_NEAR(c.at(n).v, expected, 1e-14 * std::max(1.0, expected));
    EXPECT_EQ(c.at(n).excluded, 0U);
  }
  // At n = 1 both increments are 1/2 >= 1/e.
  EXPECT_EQ(c.at(1).excluded, 2U);
  EXPECT_EQ(c.at(1).v, 0.0);
  for (const auto& l : phi_variation(GridPath::zeros(g), 0.3).levels) EXPECT_EQ(l.v, 0.0);
}

TEST(Roughness, SmoothPathsGiveSentinel) {
  // f(t) = t has V_n(2) = b^-n: slope -1 gives exactly 1 without the flag.
  const auto r = roughness_estimate(linear_path(BadicGrid(2, 10)));
  EXPECT_FALSE(r.smooth);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  const auto c = roughness_estimate(GridPath::from_function(BadicGrid(3, 7), [](double) { return 4.0; }));
  EXPECT_TRUE(c.smooth);
  EXPECT_EQ(c.value, 1.0);
  const auto q = roughness_estimate(GridPath::from_function(BadicGrid(2, 12), [](double t) { return t * t; }));
  EXPECT_FALSE(q.smooth);
  EXPECT_NEAR(q.value, 1.0, 0.01);
  EXPECT_THROW(roughness_estimate(linear_path(BadicGrid(2, 5))), std::invalid_argument);
}

TEST(Roughness, RecoversFbmHurst) {
  const BadicGrid g(2, 14);
  const FbmSampler s(0.3, g, SamplerMethod::CirculantEmbedding);
  for (std::uint64_t r = 0; r < 5; ++r) {
    const auto est = roughness_estimate(s.sample(21, r));
    EXPECT_GE(est.value, 0.25);
    EXPECT_LE(est.value, 0.35);
    EXPECT_EQ(est.first_level, 8U);
    EXPECT_EQ(est.last_level, 14U);
  }
}

TEST(DigitSequence, RecursiveInvariants) {
  const auto d = DigitSequence::sample(5, 20, 9, 1);
  const auto x = d.left_points();
  for (unsigned j = 1; j <= 20; ++j) {
    const index_t r = d.r(j);
    EXPECT_LT(r, checked_pow(5, j));
    if (j > 1) EXPECT_EQ(r % checked_pow(5, j - 1), d.r(j - 1));
    EXPECT_NEAR(x[j - 1], static_cast<double>(r) / std::pow(5.0, j), 1e-15);
  }
  EXPECT_THROW(DigitSequence(3, {0, 3}), std::invalid_argument);
}

TEST(DigitSequence, StreamIsSeparateFromGaussian) {
  const auto a = DigitSequence::sample(2, 64, 5, 0);
  RandomStream g(5, StreamKind::Gaussian, 0);
  std::vector<unsigned> same_engine(64);
  for (auto& u : same_engine) u = g.digit(2);
  EXPECT_NE(a.digits(), same_engine);
}

TEST(ZRepresentation, ExhaustiveDigitsReproduceDeterministicVariation) {
  // V_n = (alpha^p b)^n E_R |Z_n|^p with the expectation over all b^n sequences.
  for (unsigned b : {2U, 3U}) {
    const unsigned n = b == 2 ? 10 : 6;
    const DeterministicFractal f(BaseFunction::weierstrass_sin(), 0.8, b);
    const double p = 2.5;
    const auto path = eval_deterministic_on_grid(f, BadicGrid(b, n));
    double mean = 0.0;
    const index_t count = checked_pow(b, n);
    for (index_t r = 0; r < count; ++r)
      mean += std::pow(std::abs(z_from_increments(cell_increments(f.base, digits_of(b, n, r)), f.alpha)), p);
    mean /= static_cast<double>(count);
    const double expected = std::pow(std::pow(f.alpha, p) * b, n) * mean;
    EXPECT_NEAR(level_variation(path, n, p), expected, 1e-10 * expected) << "b=" << b;
  }
}

TEST(ZRepresentation, ExhaustiveDigitsReproducePathVariation) {
  const WWParams params = WWParams::from_roughness(0.5, 2, 0.7);
  const BadicGrid g(2, 9);
  const FbmSampler s(0.7, g, SamplerMethod::Cholesky);
  const auto bridge = to_bridge(s.sample(3, 0), KappaSpec::standard(), 0.7);
  const auto x = convolve_bridge(bridge, params.alpha());
  const double p = 2.0;
  double mean = 0.0;
  for (index_t r = 0; r < g.cells(); ++r)
    mean += std::pow(z_from_increments(path_cell_increments(bridge, digits_of(2, 9, r)), params.alpha()), 2);
  mean /= static_cast<double>(g.cells());
  const double expected = std::pow(params.alpha() * params.alpha() * 2.0, 9) * mean;
  EXPECT_NEAR(level_variation(x, 9, p), expected, 1e-10 * expected);
}

TEST(ZRepresentation, TentSamplesRespectLipschitzBound) {
  const DeterministicFractal f(BaseFunction::tent(), 0.75, 2);
  const auto z = z_samples(f, 40, 20000, 7);
  for (double v : z) ASSERT_LE(std::abs(v), 1.0 / (0.75 * 2.0 - 1.0));
  const auto est = z_moment(f, f.critical_p(), 40, 2000, 7);
  EXPECT_NEAR(est.tail_bound, std::pow(1.5, -40.0) / 0.5, 1e-20);
  EXPECT_GT(est.estimate, 0.0);
}

TEST(ZRepresentation, HypothesisAndDepthErrors) {
  EXPECT_THROW(z_moment(DeterministicFractal(BaseFunction::tent(), 0.4, 2), 2.0, 10, 10, 1), std::invalid_argument);
  EXPECT_THROW(z_moment(GridPath::zeros(BadicGrid(2, 6)), 0.5, 2.0, 7, 10, 1), std::invalid_argument);
  const BadicGrid g(2, 4);
  std::vector<double> v(g.point_count());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::min(g.point(k), 1.0 - g.point(k));
  const DeterministicFractal tab(BaseFunction::table(g, v), 0.75, 2);
  EXPECT_NO_THROW(z_moment(tab, 2.0, 4, 10, 1));
  EXPECT_THROW(z_moment(tab, 2.0, 5, 10, 1), std::invalid_argument);
}

TEST(ZRepresentation, TableBaseMatchesAnalyticTent) {
  const BadicGrid g(2, 12);
  std::vector<double> v(g.point_count());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::min(g.point(k), 1.0 - g.point(k));
  const auto table = BaseFunction::table(g, v);
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto d = DigitSequence::sample(2, 12, 3, r);
    EXPECT_NEAR(z_from_increments(cell_increments(table, d), 0.75),
                z_from_increments(cell_increments(BaseFunction::tent(), d), 0.75), 1e-12);
  }
}

TEST(ZRepresentation, ThreadCountDoesNotChangeEstimate) {
  const DeterministicFractal f(BaseFunction::weierstrass_cos(), 0.7, 2);
  const auto a = z_moment(f, f.critical_p(), 30, 3000, 11, 1);
  const auto b = z_moment(f, f.critical_p(), 30, 3000, 11, 8);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.se, b.se);
}

TEST(ZRepresentation, KernelIdentityAtFiniteDepthAgainstPsiTable) {
  // Z of psi computed from tabulated psi values must equal the increment formula.
  const double alpha = 0.75, beta = 0.3;
  const BadicGrid g(2, 14);
  const auto psi = kernel_psi(BaseFunction::tent(), beta, 2, g);
  const auto psi_base = BaseFunction::table(g, std::vector<double>(psi.values().begin(), psi.values().end()));
  for (std::uint64_t r = 0; r < 300; ++r) {
    const auto d = DigitSequence::sample(2, 14, 5, r);
    const double from_table = z_from_increments(cell_increments(psi_base, d), alpha);
    const double from_formula = z_kernel_from_increments(cell_increments(BaseFunction::tent(), d), alpha, beta);
    EXPECT_NEAR(from_table, from_formula, 1e-12);
  }
}

TEST(Validity, KnownBases) {
  EXPECT_TRUE(validity_check(BaseFunction::tent(), 2));
  EXPECT_EQ(validity_variant(BaseFunction::tent(), 2), ValidityVariant::Direct);
  EXPECT_EQ(validity_variant(BaseFunction::weierstrass_cos(), 2), ValidityVariant::Negated);
  const BadicGrid g(2, 3);
  EXPECT_FALSE(validity_check(BaseFunction::table(g, std::vector<double>(g.point_count(), 0.0)), 2));
}

TEST(Dichotomy, NeighbouringExponentsAroundStableVariation) {
  // H = 1/2 < K = 1: V_n(2) stabilizes, V_n(2.4) falls and V_n(1.6) grows.
  const auto x = ww_path(WWParams(0.5, 2, 0.5), 14, 8, 0);
  const auto mid = pth_variation_curve(x, 2.0);
  const auto hi = pth_variation_curve(x, 2.4);
  const auto lo = pth_variation_curve(x, 1.6);
  for (unsigned n = 11; n <= 14; ++n) {
    EXPECT_GT(mid.at(n).v, 0.5);
    EXPECT_LT(mid.at(n).v, 5.0);
  }
  for (unsigned n = 12; n <= 14; ++n) {
    EXPECT_LT(hi.at(n).v, hi.at(n - 1).v);
    EXPECT_GT(lo.at(n).v, lo.at(n - 1).v);
  }
}

TEST(Dichotomy, SmoothPerturbationOfCriticalPath) {
  // Minkowski: |sqrt(V(g+h)) - sqrt(V(h))| <= sqrt(V(g)) at every level.
  const auto h = ww_path(WWParams::exact_critical(2, 0.5), 14, 31, 0);
  const auto g = eval_deterministic_on_grid(DeterministicFractal(BaseFunction::tent(), 0.5, 2), h.grid());
  std::vector<double> sum(h.size());
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = g[k] + h[k];
  const GridPath gh(h.grid(), std::move(sum));
  const auto vg = pth_variation_curve(g, 2.0), vh = pth_variation_curve(h, 2.0), vgh = pth_variation_curve(gh, 2.0);
  for (unsigned n = 1; n <= 14; ++n) {
    const double a = std::sqrt(*vh.at(n).v_over_n), e = std::sqrt(*vg.at(n).v_over_n);
    EXPECT_LE(*vgh.at(n).v_over_n, (a + e) * (a + e) * (1 + 1e-12));
    EXPECT_GE(*vgh.at(n).v_over_n, (a - e) * (a - e) * (1 - 1e-12));
  }
  // The smooth part contributes a vanishing share at the top level.
  EXPECT_LT(*vg.at(14).v_over_n, 0.01 * *vh.at(14).v_over_n);
}
