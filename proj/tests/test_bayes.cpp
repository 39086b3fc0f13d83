#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "epibound/bayes.hpp"
#include "epibound/divergences.hpp"
#include "epibound/errors.hpp"
#include "epibound/experiments.hpp"
#include "epibound/oracle.hpp"
#include "grid_posterior.hpp"

using namespace epibound;

TEST(Bayes, EmptyDataGivesPrior) {
  const NIGModel m;
  const auto post = posterior_update(m, SourceDataset());
  EXPECT_EQ(post.mean(), Vec2::Zero());
  EXPECT_TRUE(post.covariance().isApprox(Mat2::Identity()));
  EXPECT_NEAR(m.noise_variance_mean(), 10.0 / 19.0, 1e-15);
}

TEST(Bayes, OneRowMatchesClosedFormAndGrid) {
  const NIGModel m;
  const SourceDataset d({{1, Vec2(1.0, 0.0), 1.0}});
  const auto post = posterior_update(m, d);
  // Only the first coordinate is informed: mean 1 / (1 + s2), variance s2 / (1 + s2).
  const double s2 = 10.0 / 19.0;
  EXPECT_NEAR(post.mean()(0), 1.0 / (1.0 + s2), 1e-14);
  EXPECT_NEAR(post.mean()(0), 19.0 / 29.0, 1e-14);
  EXPECT_NEAR(post.mean()(1), 0.0, 1e-15);
  EXPECT_NEAR(post.covariance()(0, 0), s2 / (1.0 + s2), 1e-14);
  EXPECT_NEAR(post.covariance()(1, 1), 1.0, 1e-14);
  const auto g = reference::grid_posterior(m, d);
  EXPECT_NEAR(g.mean(0), post.mean()(0), 2e-3);
  EXPECT_NEAR(g.cov(0, 0), post.covariance()(0, 0), 2e-3);
}

TEST(Bayes, GridOracleAgreement) {
  Rng rng(8);
  const NIGModel m;
  for (int k = 0; k < 10; ++k) {
    const auto d = reference::random_dataset(rng);
    const auto post = posterior_update(m, d);
    const auto g = reference::grid_posterior(m, d);
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(g.mean(i), post.mean()(i), 2e-3);
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(g.cov(i, j), post.covariance()(i, j), 2e-3);
    }
  }
}

TEST(Bayes, ConsistencyForLargeSamples) {
  ExperimentConfig cfg = scenario_config(Scenario::negative_transfer_pos);
  const Vec2 beta = cfg.beta_S;
  // Along the weakly identified direction the posterior sd at n = 500 is
  // about 0.11, so the 0.05 check is made where the sd is below 0.01.
  const auto big = posterior_update(cfg.model, sample_source_data(cfg, 100000, 21));
  EXPECT_LT((big.mean() - beta).cwiseAbs().maxCoeff(), 0.05);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto post = posterior_update(cfg.model, sample_source_data(cfg, 500, s));
    const Vec2 e = post.mean() - beta;
    const double mahalanobis = e.dot(post.covariance().inverse() * e);
    EXPECT_LT(mahalanobis, 25.0) << s;
    EXPECT_LT(std::abs(e.sum()), 0.25) << s;
  }
}

TEST(Bayes, PredictiveExamples) {
  const NIGModel m;
  const double s2 = 10.0 / 19.0;
  const FOD p = posterior_predictive(prior_param_dist(m), Vec2(1, 1), s2);
  EXPECT_NEAR(p.mean(), 0.0, 1e-15);
  EXPECT_NEAR(p.variance(), 2.0 + s2, 1e-14);
  const auto point = best_param_dist(Vec2(0, 1), 1e-14);
  const FOD q = posterior_predictive(point, Vec2(1, 1), s2);
  EXPECT_NEAR(q.mean(), 1.0, 1e-15);
  EXPECT_NEAR(q.variance(), s2, 1e-12);
  const GaussianParamDist post(Vec2(0.3, -0.7), Mat2::Identity() * 0.1);
  EXPECT_NEAR(posterior_predictive(post, Vec2(2, 4), s2).mean(), 2 * posterior_predictive(post, Vec2(1, 2), s2).mean(),
              1e-14);
  EXPECT_GE(posterior_predictive(post, Vec2(0.1, 0.2), s2).variance(), s2);
}

TEST(Bayes, ParamTvExamples) {
  const GaussianParamDist a(Vec2(0, 0), Mat2::Identity());
  EXPECT_EQ(param_tv_upper(a, a), 0.0);
  EXPECT_NEAR(param_tv_upper(a, GaussianParamDist(Vec2(1, 0), Mat2::Identity())), 0.5, 1e-14);
  double prev = -1.0;
  for (double scale : {1.0, 0.5, 0.25, 0.1, 0.01}) {
    const double v = param_tv_upper(GaussianParamDist(Vec2(0.2, 0.1), Mat2::Identity() * scale), a);
    EXPECT_GT(v, prev);
    prev = v;
  }
  Mat2 bad;
  bad << 1, 2, 2, 1;
  EXPECT_THROW(GaussianParamDist(Vec2::Zero(), bad), NumericalFailure);
}

TEST(Bayes, PosteriorMassExamples) {
  const GaussianParamDist a(Vec2(0, 0), Mat2::Identity());
  EXPECT_NEAR(posterior_mass_near(a, Vec2(0, 0), 1.0), std::pow(2 * normal_cdf(1.0) - 1, 2), 1e-6);
  EXPECT_NEAR(posterior_mass_near(a, Vec2(0, 0), 1.0), 0.4660, 1e-4);
  EXPECT_NEAR(posterior_mass_near(a, Vec2(0, 0), 100.0), 1.0, 1e-9);
  EXPECT_NEAR(posterior_mass_near(a, Vec2(0, 0), 1e-8), 0.0, 1e-9);
  EXPECT_THROW(posterior_mass_near(a, Vec2(0, 0), 0.0), InvalidArgument);
  // Correlated case against a 2-D grid sum.
  Mat2 cov;
  cov << 0.5, 0.35, 0.35, 0.4;
  const GaussianParamDist c(Vec2(0.1, 0.2), cov);
  const Mat2 inv = cov.inverse();
  const double norm = 1.0 / (2 * M_PI * std::sqrt(cov.determinant()));
  const int n = 2000;
  const double h = 0.5 / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 x(-0.25 + (i + 0.5) * h, -0.25 + (j + 0.5) * h);
      const Vec2 d = x - c.mean();
      sum += norm * std::exp(-0.5 * d.dot(inv * d)) * h * h;
    }
  }
  EXPECT_NEAR(posterior_mass_near(c, Vec2(0, 0), 0.25), sum, 1e-6);
}

TEST(Bayes, StudentTPolicyIsCloseToPlugIn) {
  ExperimentConfig cfg = scenario_config(Scenario::negative_transfer_pos);
  const auto d = sample_source_data(cfg, 20, 3);
  const auto a = posterior_update(cfg.model, d);
  const auto b = posterior_update(cfg.model, d, NoiseVariancePolicy::marginal_student_t);
  EXPECT_LT((a.mean() - b.mean()).norm(), 0.1);
  EXPECT_LT((a.covariance() - b.covariance()).norm(), 0.05);
}

TEST(Bayes, FiniteParameterConvergenceGap) {
  std::size_t checked = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    OracleConfig cfg;
    cfg.bayesian = true;
    const auto inst = generate_instance(derive_seed(4, s), cfg);
    ASSERT_TRUE(inst.bayes);
    const auto& toy = *inst.bayes;
    const FOD post = toy.param_dists[toy.posterior_index];
    const FOD bary = barycenter(inst.source);
    const auto best = best_approximation(inst.model, bary);
    const FOD& star = toy.param_dists[best.index];
    EXPECT_LE(convergence_gap(finite_predictive(toy.likelihoods, post), finite_predictive(toy.likelihoods, star)),
              tv_exact(post, star) + 1e-12);
    ++checked;
  }
  EXPECT_EQ(checked, 10000u);
}

TEST(Bayes, DatasetCsvRoundTrip) {
  const SourceDataset d({{1, Vec2(0.25, 0.5), 1.125}, {2, Vec2(0.1, 0.9), -0.3}});
  std::stringstream ss;
  d.write_csv(ss);
  const auto back = SourceDataset::read_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.rows()[1].x, -0.3);
  std::stringstream bad("task,xi1,xi2,x\n1,0.1,zz,3\n");
  EXPECT_THROW(SourceDataset::read_csv(bad), InvalidArgument);
  EXPECT_THROW(SourceDataset({{2, Vec2(0, 0), 0.0}}), InvalidArgument);
}
