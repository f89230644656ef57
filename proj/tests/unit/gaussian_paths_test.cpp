#include "wwb/gaussian_paths.hpp"
#include "wwb/linalg.hpp"
#include "wwb/parallel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace wwb;

namespace {

// Empirical covariance of paths at all grid points, with 5-se bands
// computed from the sample variance of the products.
struct CovCheck {
  double worst_z = 0.0;
  std::size_t violations = 0;
};

template <class Sample, class Exact>
CovCheck compare_covariance(std::size_t reps, std::size_t points, Sample&& sample, Exact&& exact,
                            std::size_t step = 1) {
  std::vector<std::vector<double>> paths(reps);
  for (std::size_t r = 0; r < reps; ++r) paths[r] = sample(r);
  CovCheck out;
  std::vector<double> prod(reps);
  for (std::size_t i = step; i < points - 1; i += step)
    for (std::size_t j = i; j < points - 1; j += step) {
      for (std::size_t r = 0; r < reps; ++r) prod[r] = paths[r][i] * paths[r][j];
      const SampleSummary s = summarize(prod);
      const double z = std::abs(s.mean - exact(i, j)) / s.se;
      out.worst_z = std::max(out.worst_z, z);
      if (z > 5.0) ++out.violations;
    }
  return out;
}

}  // namespace

TEST(FgnAutocovariance, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(fgn_autocovariance(0.5, 0), 1.0);
  EXPECT_NEAR(fgn_autocovariance(0.5, 3), 0.0, 1e-15);
  EXPECT_NEAR(fgn_autocovariance(0.7, 1), 0.5 * (std::pow(2.0, 1.4) - 2.0), 1e-15);
  EXPECT_NEAR(fgn_autocovariance(0.7, 1), 0.31951, 1e-5);
}

TEST(FgnAutocovariance, SignDependsOnHurst) {
  for (std::uint64_t k = 1; k <= 10000; ++k) {
    ASSERT_LE(fgn_autocovariance(0.3, k), 0.0) << k;
    ASSERT_GE(fgn_autocovariance(0.8, k), 0.0) << k;
  }
}

TEST(Kappa, StandardAndLinearValues) {
  EXPECT_DOUBLE_EQ(kappa_eval(KappaSpec::standard(), 0.5, 0.3), 0.3);
  EXPECT_DOUBLE_EQ(kappa_eval(KappaSpec::standard(), 0.8, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(kappa_eval(KappaSpec::standard(), 0.7, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(kappa_eval(KappaSpec::linear(), 0.7, 0.25), 0.25);
}

TEST(Kappa, TableRequiresGridPointsAndEndpoints) {
  const BadicGrid g(2, 2);
  const auto spec = KappaSpec::table(g, {0.0, 0.1, 0.5, 0.9, 1.0}, 0.9);
  EXPECT_DOUBLE_EQ(kappa_eval(spec, 0.5, 0.75), 0.9);
  EXPECT_THROW(kappa_eval(spec, 0.5, 0.3), std::domain_error);
  EXPECT_THROW(KappaSpec::table(g, {0.0, 0.1, 0.5, 0.9, 0.99}), std::invalid_argument);
  EXPECT_TRUE(spec.holder_certified(0.5) == false);
  EXPECT_TRUE(spec.holder_warning(0.5).has_value());
}

TEST(Kappa, IntegratedDensityPrefixSums) {
  const BadicGrid cells(2, 2);
  const auto spec = KappaSpec::integrated_density(cells, {2.0, 2.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(kappa_eval(spec, 0.5, 0.25), 0.5);
  EXPECT_DOUBLE_EQ(kappa_eval(spec, 0.5, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(kappa_eval(spec, 0.5, 0.75), 1.0);
  EXPECT_DOUBLE_EQ(kappa_eval(spec, 0.5, 0.125), 0.25);
  EXPECT_THROW(KappaSpec::integrated_density(cells, {0.0, 0.0, 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(KappaSpec::integrated_density(cells, {1.0, -1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST(BridgeCovariance, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(bridge_covariance(0.5, KappaSpec::standard(), 0.5, 0.5), 0.25);
  EXPECT_EQ(bridge_covariance(0.7, KappaSpec::standard(), 0.0, 0.7), 0.0);
  EXPECT_EQ(bridge_covariance(0.3, KappaSpec::linear(), 1.0, 0.2), 0.0);
}

TEST(BridgeCovariance, StandardFormAgreesWithGeneralForm) {
  for (double h : {0.2, 0.5, 0.7, 0.9})
    for (int i = 0; i <= 32; ++i)
      for (int j = 0; j <= 32; ++j) {
        const double s = i / 32.0, t = j / 32.0;
        EXPECT_NEAR(bridge_covariance(h, KappaSpec::standard(), s, t),
                    bridge_covariance_general(h, KappaSpec::standard(), s, t), 1e-12);
      }
}

TEST(BridgeCovariance, SymmetricBitForBit) {
  const auto tab = KappaSpec::table(BadicGrid(2, 3), {0, 0.1, 0.2, 0.4, 0.5, 0.6, 0.8, 0.9, 1}, 1.0);
  for (const auto& spec : {KappaSpec::standard(), KappaSpec::linear(), tab})
    for (int i = 0; i <= 8; ++i)
      for (int j = 0; j <= 8; ++j)
        EXPECT_EQ(bridge_covariance(0.35, spec, i / 8.0, j / 8.0), bridge_covariance(0.35, spec, j / 8.0, i / 8.0));
}

TEST(BridgeCovariance, InteriorMatrixIsPsd) {
  for (double h : {0.3, 0.5, 0.7})
    for (unsigned n : {4U, 8U}) {
      const BadicGrid g(2, n);
      const auto dim = static_cast<Eigen::Index>(g.cells() - 1);
      Matrix m(dim, dim);
      for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
          m(i, j) = bridge_covariance(h, KappaSpec::standard(), g.point(i + 1), g.point(j + 1));
      EXPECT_TRUE(is_psd_with_jitter(m, 1e-10)) << "H=" << h << " N=" << n;
    }
}

TEST(Sampler, DepthZeroGivesSingleIncrement) {
  const auto w = sample_fbm(0.5, BadicGrid(2, 0), SamplerConfig{SamplerMethod::CirculantEmbedding, 5, 0});
  ASSERT_EQ(w.size(), 2U);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NE(w[1], 0.0);
  const auto c = sample_fbm(0.5, BadicGrid(2, 0), SamplerConfig{SamplerMethod::Cholesky, 5, 0});
  EXPECT_EQ(c.size(), 2U);
}

TEST(Sampler, CholeskyGuard) {
  EXPECT_THROW(FbmSampler(0.5, BadicGrid(2, 13), SamplerMethod::Cholesky), std::invalid_argument);
  EXPECT_NO_THROW(FbmSampler(0.5, BadicGrid(2, 12), SamplerMethod::Cholesky));
}

TEST(Sampler, SameStreamSameBits) {
  const FbmSampler s(0.7, BadicGrid(2, 10), SamplerMethod::CirculantEmbedding);
  const auto a = s.sample(11, 3);
  const auto b = s.sample(11, 3);
  const auto c = s.sample(11, 4);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
}

TEST(Sampler, ThreadCountDoesNotChangePaths) {
  const FbmSampler s(0.3, BadicGrid(2, 10), SamplerMethod::CirculantEmbedding);
  auto run = [&](unsigned threads) {
    std::vector<std::vector<double>> out(64);
    parallel_for(out.size(), threads, [&](std::size_t r) {
      auto p = s.sample(99, r);
      out[r].assign(p.values().begin(), p.values().end());
    });
    return out;
  };
  EXPECT_EQ(run(1), run(8));
}

TEST(Sampler, BrownianCovarianceMatchesMinimum) {
  const BadicGrid g(2, 10);
  const FbmSampler s(0.5, g, SamplerMethod::CirculantEmbedding);
  const auto check = compare_covariance(
      2000, g.point_count(),
      [&](std::size_t r) {
        auto p = s.sample(1, r);
        return std::vector<double>(p.values().begin(), p.values().end());
      },
      [&](std::size_t i, std::size_t j) { return std::min(g.point(i), g.point(j)); }, 64);
  EXPECT_EQ(check.violations, 0U) << "worst z " << check.worst_z;
}

TEST(Sampler, BrownianBridgeCovariance) {
  const BadicGrid g(2, 10);
  const FbmSampler s(0.5, g, SamplerMethod::CirculantEmbedding);
  const auto check = compare_covariance(
      2000, g.point_count(),
      [&](std::size_t r) {
        auto b = to_bridge(s.sample(2, r), KappaSpec::linear(), 0.5);
        return std::vector<double>(b.values().begin(), b.values().end());
      },
      [&](std::size_t i, std::size_t j) {
        const double a = g.point(i), c = g.point(j);
        return std::min(a, c) - a * c;
      },
      64);
  EXPECT_EQ(check.violations, 0U) << "worst z " << check.worst_z;
}

TEST(Sampler, FractionalBridgeCovarianceAtQuarterPoints) {
  const BadicGrid g(2, 6);
  const FbmSampler s(0.7, g, SamplerMethod::CirculantEmbedding);
  std::vector<double> prod(5000);
  for (std::size_t r = 0; r < prod.size(); ++r) {
    const auto b = to_bridge(s.sample(3, r), KappaSpec::standard(), 0.7);
    prod[r] = b[16] * b[48];
  }
  const SampleSummary sum = summarize(prod);
  const double exact = bridge_covariance(0.7, KappaSpec::standard(), 0.25, 0.75);
  EXPECT_LT(std::abs(sum.mean - exact), 5.0 * sum.se);
}

TEST(ToBridge, PinsEndpointsAndKillsKappaMultiples) {
  const BadicGrid g(3, 3);
  const auto zero = to_bridge(GridPath::zeros(g), KappaSpec::standard(), 0.4);
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  const auto k = GridPath::from_function(g, [](double t) { return 3.0 * kappa_eval(KappaSpec::standard(), 0.4, t); });
  const auto b = to_bridge(k, KappaSpec::standard(), 0.4);
  for (double v : b.values()) EXPECT_NEAR(v, 0.0, 1e-15);
  EXPECT_EQ(b.values().front(), 0.0);
  EXPECT_EQ(b.values().back(), 0.0);
}

TEST(TimeChangedBm, IncrementVariancesFollowDensity) {
  const BadicGrid cells(2, 1);
  const auto spec = KappaSpec::integrated_density(cells, {2.0, 0.0});
  const BadicGrid g(2, 4);
  std::vector<double> late(4000), early(4000);
  for (std::size_t r = 0; r < late.size(); ++r) {
    const auto m = sample_time_changed_bm(spec, g, 8, r);
    early[r] = m[8] * m[8];
    late[r] = m[16] - m[8];
  }
  const auto se = summarize(early);
  EXPECT_LT(std::abs(se.mean - 1.0), 5.0 * se.se);
  for (double v : late) EXPECT_EQ(v, 0.0);
}
