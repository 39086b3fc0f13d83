#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "epibound/divergences.hpp"
#include "epibound/errors.hpp"

using namespace epibound;

namespace {

FOD cat(std::vector<double> p) { return FOD::categorical(std::move(p)); }

// Independent reference: TV as the largest event gap, by enumeration.
double tv_by_events(const FOD& p, const FOD& q) {
  const std::size_t m = p.outcomes();
  double best = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
    const auto e = EventSet::from_mask(mask, m);
    best = std::max(best, std::abs(p.probability(e) - q.probability(e)));
  }
  return best;
}

std::vector<double> random_vector(Rng& rng, std::size_t m, double floor = 0.0) {
  auto p = sample_flat_simplex(rng, m);
  if (floor > 0.0) {
    for (double& v : p) v = floor + (1.0 - m * floor) * v;
  }
  return p;
}

}  // namespace

TEST(Divergences, TvExamples) {
  EXPECT_NEAR(tv_exact(cat({0.3, 0.7}), cat({0.5, 0.5})), 0.2, 1e-15);
  EXPECT_EQ(tv_exact(cat({0.3, 0.7}), cat({0.3, 0.7})), 0.0);
  EXPECT_NEAR(tv_exact(FOD::gaussian(0, 1), FOD::gaussian(2, 1)), 2 * normal_cdf(1.0) - 1, 1e-15);
  EXPECT_NEAR(tv_exact(FOD::gaussian(0, 1), FOD::gaussian(2, 1)), 0.6827, 1e-4);
  EXPECT_EQ(tv_exact_result(FOD::gaussian(0, 1), FOD::gaussian(2, 1)).method, DivergenceMethod::gaussian_closed_form);
  EXPECT_THROW(tv_exact(cat({0.5, 0.5}), cat({0.2, 0.3, 0.5})), EventMismatch);
  EXPECT_THROW(tv_exact(cat({0.5, 0.5}), FOD::gaussian(0, 1)), EventMismatch);
}

TEST(Divergences, TvQuadratureAgreesWithClosedForm) {
  // Mixture with a single component exercises the quadrature path.
  const FOD a = FOD::mixture({1.0}, {0.0}, {1.0});
  const FOD b = FOD::mixture({1.0}, {2.0}, {1.0});
  const auto r = tv_exact_result(a, b);
  EXPECT_EQ(r.method, DivergenceMethod::quadrature);
  EXPECT_NEAR(r.value, 2 * normal_cdf(1.0) - 1, 1e-8);
  // Unequal variances: TV from the two crossing points of the densities.
  const FOD p = FOD::gaussian(0, 1), q = FOD::gaussian(0, 2);
  const double x = std::sqrt(8.0 * std::log(2.0) / 3.0);
  const double expected = 2 * (normal_cdf(x) - normal_cdf(x / 2));
  EXPECT_NEAR(tv_exact(p, q), expected, 1e-8);
}

TEST(Divergences, KlExamples) {
  const auto r = kl_exact(cat({0.3, 0.7}), cat({0.5, 0.5}));
  EXPECT_NEAR(r.value, 0.3 * std::log(0.6) + 0.7 * std::log(1.4), 1e-15);
  EXPECT_NEAR(r.value, 0.082282, 1e-6);
  EXPECT_EQ(kl_exact(cat({0.3, 0.7}), cat({0.3, 0.7})).value, 0.0);
  EXPECT_NEAR(kl_exact(FOD::gaussian(0, 1), FOD::gaussian(1, 1)).value, 0.5, 1e-15);
  const auto mc = kl_mc(FOD::gaussian(0, 1), FOD::gaussian(1, 1), 400, 3);
  ASSERT_TRUE(mc.stderr_estimate);
  EXPECT_EQ(*mc.mc_samples, 400u);
  EXPECT_LE(std::abs(mc.value - 0.5), 3 * *mc.stderr_estimate);
  EXPECT_THROW(kl_exact(cat({0.5, 0.5}), cat({1.0, 0.0})), SupportViolation);
  EXPECT_NO_THROW(kl_exact(cat({1.0, 0.0}), cat({0.5, 0.5})));
}

TEST(Divergences, KlQuadratureMatchesClosedForm) {
  const FOD a = FOD::mixture({1.0}, {0.0}, {1.0});
  const FOD b = FOD::mixture({1.0}, {1.0}, {2.0});
  const double expected = std::log(2.0) + (1.0 + 1.0) / 8.0 - 0.5;
  EXPECT_NEAR(kl_exact(a, b).value, expected, 1e-8);
  EXPECT_NEAR(kl_exact(FOD::gaussian(0, 1), FOD::gaussian(1, 2)).value, expected, 1e-14);
}

TEST(Divergences, PinskerExamples) {
  const auto r = tv_upper_pinsker(cat({0.3, 0.7}), cat({0.5, 0.5}));
  EXPECT_NEAR(r.value, std::sqrt((0.3 * std::log(0.6) + 0.7 * std::log(1.4)) / 2), 1e-15);
  EXPECT_NEAR(r.value, 0.2028, 1e-4);
  EXPECT_GE(r.value, 0.2);
  EXPECT_EQ(tv_upper_pinsker(cat({0.3, 0.7}), cat({0.3, 0.7})).value, 0.0);
  const auto g = tv_upper_pinsker(FOD::gaussian(0, 1), FOD::gaussian(1, 1));
  EXPECT_NEAR(g.value, 0.5, 1e-15);
  EXPECT_GE(g.value, tv_exact(FOD::gaussian(0, 1), FOD::gaussian(1, 1)));
  EXPECT_NEAR(tv_exact(FOD::gaussian(0, 1), FOD::gaussian(1, 1)), 0.3829, 1e-4);
}

TEST(Divergences, PinskerMcClampsNegativeEstimates) {
  // Nearly identical Gaussians: some seeds give a negative KL estimate.
  bool saw_clamp = false;
  for (std::uint64_t s = 0; s < 200 && !saw_clamp; ++s) {
    const auto r = tv_upper_pinsker(FOD::gaussian(0, 1), FOD::gaussian(0.0, 1.01), 50, s);
    EXPECT_GE(r.value, 0.0);
    EXPECT_EQ(r.method, DivergenceMethod::pinsker_upper);
    if (r.clamped) {
      saw_clamp = true;
      EXPECT_EQ(r.value, 0.0);
    }
  }
  EXPECT_TRUE(saw_clamp);
}

TEST(Divergences, LossExamples) {
  EXPECT_NEAR(entropy(cat({0.5, 0.5})), std::log(2.0), 1e-15);
  EXPECT_NEAR(l1_distance(cat({0.3, 0.7}), cat({0.5, 0.5})), 0.4, 1e-15);
  const double h = 0.5 * (std::pow(std::sqrt(0.3) - std::sqrt(0.5), 2) + std::pow(std::sqrt(0.7) - std::sqrt(0.5), 2));
  EXPECT_NEAR(hellinger_sq(cat({0.3, 0.7}), cat({0.5, 0.5})), h, 1e-15);
  EXPECT_NEAR(h, 0.0211, 1e-4);
  EXPECT_NEAR(entropy(FOD::gaussian(0, 2)), 0.5 * std::log(2 * M_PI * M_E * 4), 1e-14);
  // Gaussian Hellinger closed form for equal variances: 1 - exp(-dmu^2 / 8).
  EXPECT_NEAR(hellinger_sq(FOD::gaussian(0, 1), FOD::gaussian(1, 1)), 1 - std::exp(-1.0 / 8), 1e-8);
}

TEST(Divergences, CrossEntropyIdentity) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const FOD p = cat(random_vector(rng, 4));
    const FOD q = cat(random_vector(rng, 4, 0.01));
    EXPECT_NEAR(cross_entropy(p, q), entropy(p) + kl_exact(p, q).value, 1e-12);
  }
  EXPECT_NEAR(cross_entropy(FOD::gaussian(0, 1), FOD::gaussian(1, 2)),
              entropy(FOD::gaussian(0, 1)) + kl_exact(FOD::gaussian(0, 1), FOD::gaussian(1, 2)).value, 1e-8);
}

TEST(DivergenceProperties, TvIsAMetric) {
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = 2 + i % 6;
    const FOD a = cat(random_vector(rng, m)), b = cat(random_vector(rng, m)), c = cat(random_vector(rng, m));
    const double ab = tv_exact(a, b);
    EXPECT_NEAR(ab, tv_exact(b, a), 1e-12);
    EXPECT_LE(ab, tv_exact(a, c) + tv_exact(c, b) + 1e-12);
    EXPECT_EQ(tv_exact(a, a), 0.0);
    EXPECT_GT(ab, 0.0);
    if (i < 500) EXPECT_NEAR(ab, tv_by_events(a, b), 1e-12);
  }
}

TEST(DivergenceProperties, GaussianMcKlIsUnbiased) {
  int within = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto r = kl_mc(FOD::gaussian(0, 1), FOD::gaussian(0.7, 1.3), 400, s);
    within += std::abs(r.value - kl_exact(FOD::gaussian(0, 1), FOD::gaussian(0.7, 1.3)).value) <=
              3 * *r.stderr_estimate;
  }
  EXPECT_GE(within, 190);
}
