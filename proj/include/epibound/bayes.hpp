#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epibound/distributions.hpp"

namespace epibound {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Normal-Inverse-Gamma linear model x = xi^T beta + noise, noise ~ N(0, s2),
/// beta ~ N(beta0, sigma0_sq I), s2 ~ InverseGamma(alpha0, delta0).
struct NIGModel {
  Vec2 beta0 = Vec2::Zero();
  /// Prior variance of each beta coordinate. Not pinned down by the model
  /// description; 1.0 is the default.
  double sigma0_sq = 1.0;
  double alpha0 = 20.0;
  double delta0 = 10.0;

  /// Throws InvalidArgument on a non-positive parameter.
  void validate() const;
  /// Prior mean of the noise variance, delta0 / (alpha0 - 1). Needs alpha0 > 1.
  double noise_variance_mean() const;
};

/// Gaussian distribution over beta.
class GaussianParamDist {
 public:
  /// Throws NumericalFailure unless cov is symmetric (1e-12) and positive definite.
  GaussianParamDist(Vec2 mean, Mat2 cov);

  const Vec2& mean() const { return mean_; }
  const Mat2& covariance() const { return cov_; }

 private:
  Vec2 mean_;
  Mat2 cov_;
};

struct Observation {
  std::size_t task;  // 1-based
  Vec2 xi;
  double x;
};

/// Pooled source data x_(1:n); rows carry their task index.
class SourceDataset {
 public:
  SourceDataset() = default;
  /// Throws InvalidArgument unless task indices are exactly 1..k for some k.
  explicit SourceDataset(std::vector<Observation> rows);

  const std::vector<Observation>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }
  std::size_t task_count() const { return counts_.size(); }
  /// Observations per task, index 0 holding task 1.
  const std::vector<std::size_t>& counts() const { return counts_; }

  /// CSV with header task,xi1,xi2,x.
  static SourceDataset read_csv(std::istream& in);
  static SourceDataset read_csv_file(const std::string& path);
  void write_csv(std::ostream& out) const;

 private:
  std::vector<Observation> rows_;
  std::vector<std::size_t> counts_;
};

enum class NoiseVariancePolicy {
  /// Condition on s2 fixed at its prior mean.
  plug_in,
  /// Integrate s2 out per task under its inverse-gamma prior (Student-t
  /// likelihood) and summarize the resulting posterior by its first two
  /// moments, computed on a 2-D grid.
  marginal_student_t,
};

GaussianParamDist prior_param_dist(const NIGModel& model);

GaussianParamDist posterior_update(const NIGModel& model, const SourceDataset& data,
                                   NoiseVariancePolicy policy = NoiseVariancePolicy::plug_in);

/// N(xi^T mu, xi^T Sigma xi + noise_variance).
FOD posterior_predictive(const GaussianParamDist& post, const Vec2& xi, double noise_variance);

/// KL(p || q) between bivariate Gaussians.
double gaussian_kl(const GaussianParamDist& p, const GaussianParamDist& q);

/// sqrt(KL / 2), an upper bound on tv(p1, p2).
double param_tv_upper(const GaussianParamDist& p1, const GaussianParamDist& p2);

/// Probability of the square center +/- radius (both coordinates).
double posterior_mass_near(const GaussianParamDist& post, const Vec2& center, double radius);

/// N(beta_s, scale I): the concentrated parameter distribution around the
/// source data-generating value.
GaussianParamDist best_param_dist(const Vec2& beta_s, double scale = 1e-6);

}  // namespace epibound
