#include "epibound/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "epibound/errors.hpp"
#include "epibound/numerics.hpp"

namespace epibound {

void NIGModel::validate() const {
  if (!(sigma0_sq > 0.0) || !(alpha0 > 0.0) || !(delta0 > 0.0) || !beta0.allFinite()) {
    throw InvalidArgument("NIG model: sigma0_sq, alpha0 and delta0 must be > 0");
  }
}

double NIGModel::noise_variance_mean() const {
  validate();
  if (!(alpha0 > 1.0)) throw InvalidArgument("NIG model: noise variance mean needs alpha0 > 1");
  return delta0 / (alpha0 - 1.0);
}

GaussianParamDist::GaussianParamDist(Vec2 mean, Mat2 cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (!mean_.allFinite() || !cov_.allFinite()) {
    throw NumericalFailure("parameter distribution: non-finite mean or covariance");
  }
  if (std::abs(cov_(0, 1) - cov_(1, 0)) > 1e-12) {
    throw NumericalFailure("parameter distribution: covariance is not symmetric");
  }
  cov_(1, 0) = cov_(0, 1);
  const double det = cov_.determinant();
  if (!(cov_(0, 0) > 0.0) || !(det > 0.0)) {
    throw NumericalFailure("parameter distribution: covariance is not positive definite");
  }
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

SourceDataset::SourceDataset(std::vector<Observation> rows) : rows_(std::move(rows)) {
  std::size_t k = 0;
  for (const auto& r : rows_) {
    if (r.task == 0) throw InvalidArgument("source dataset: task indices start at 1");
    k = std::max(k, r.task);
    if (!r.xi.allFinite() || !std::isfinite(r.x)) {
      throw InvalidArgument("source dataset: non-finite value");
    }
  }
  counts_.assign(k, 0);
  for (const auto& r : rows_) ++counts_[r.task - 1];
  for (std::size_t s = 0; s < k; ++s) {
    if (counts_[s] == 0) {
      throw InvalidArgument("source dataset: task indices are not contiguous (missing " +
                            std::to_string(s + 1) + ")");
    }
  }
}

SourceDataset SourceDataset::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("source dataset: empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "task,xi1,xi2,x") {
    throw InvalidArgument("source dataset: expected header task,xi1,xi2,x");
  }
  std::vector<Observation> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    long long task = 0;
    double a = 0, b = 0, x = 0;
    std::string extra;
    if (!(fields >> task >> a >> b >> x) || (fields >> extra) || task < 1) {
      throw InvalidArgument("source dataset: malformed row at line " + std::to_string(lineno));
    }
    rows.push_back({static_cast<std::size_t>(task), Vec2(a, b), x});
  }
  return SourceDataset(std::move(rows));
}

SourceDataset SourceDataset::read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_csv(in);
}

void SourceDataset::write_csv(std::ostream& out) const {
  out << "task,xi1,xi2,x\n";
  out.precision(17);
  for (const auto& r : rows_) {
    out << r.task << ',' << r.xi(0) << ',' << r.xi(1) << ',' << r.x << '\n';
  }
}

// ---------------------------------------------------------------------------
// Posterior
// ---------------------------------------------------------------------------

GaussianParamDist prior_param_dist(const NIGModel& model) {
  model.validate();
  return GaussianParamDist(model.beta0, model.sigma0_sq * Mat2::Identity());
}

namespace {

GaussianParamDist plug_in_posterior(const NIGModel& model, const SourceDataset& data) {
  const double s2 = model.noise_variance_mean();
  Mat2 xtx = Mat2::Zero();
  Vec2 xty = Vec2::Zero();
  for (const auto& r : data.rows()) {
    xtx.noalias() += r.xi * r.xi.transpose();
    xty += r.xi * r.x;
  }
  const Mat2 precision = Mat2::Identity() / model.sigma0_sq + xtx / s2;
  Eigen::LDLT<Mat2> ldlt(precision);
  if (ldlt.info() != Eigen::Success || !(precision.determinant() > 0.0)) {
    throw NumericalFailure("posterior_update: singular posterior precision");
  }
  Mat2 cov = ldlt.solve(Mat2::Identity());
  cov = 0.5 * (cov + cov.transpose());
  const Vec2 mean = cov * (model.beta0 / model.sigma0_sq + xty / s2);
  return GaussianParamDist(mean, cov);
}

// Per-task Student-t likelihood, posterior moments by quadrature on a grid
// spanning the plug-in posterior +/- 10 sd.
GaussianParamDist marginal_t_posterior(const NIGModel& model, const SourceDataset& data) {
  const GaussianParamDist guide = plug_in_posterior(model, data);
  constexpr int kPoints = 241;
  const Vec2 sd(std::sqrt(guide.covariance()(0, 0)), std::sqrt(guide.covariance()(1, 1)));
  const Vec2 lo = guide.mean() - 10.0 * sd;
  const Vec2 step = 20.0 * sd / (kPoints - 1);

  // Per-task sufficient statistics for ||y_s - X_s b||^2.
  struct TaskStats {
    Mat2 xtx = Mat2::Zero();
    Vec2 xty = Vec2::Zero();
    double yty = 0.0;
    double k = 0.0;
  };
  std::vector<TaskStats> stats(data.task_count());
  for (const auto& r : data.rows()) {
    auto& t = stats[r.task - 1];
    t.xtx.noalias() += r.xi * r.xi.transpose();
    t.xty += r.xi * r.x;
    t.yty += r.x * r.x;
    t.k += 1.0;
  }

  std::vector<double> logw(static_cast<std::size_t>(kPoints) * kPoints);
  for (int i = 0; i < kPoints; ++i) {
    for (int j = 0; j < kPoints; ++j) {
      const Vec2 b(lo(0) + i * step(0), lo(1) + j * step(1));
      double lw = -(b - model.beta0).squaredNorm() / (2.0 * model.sigma0_sq);
      for (const auto& t : stats) {
        const double rss = std::max(t.yty - 2.0 * b.dot(t.xty) + b.dot(t.xtx * b), 0.0);
        lw -= (model.alpha0 + 0.5 * t.k) * std::log(model.delta0 + 0.5 * rss);
      }
      logw[static_cast<std::size_t>(i) * kPoints + j] = lw;
    }
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  Vec2 m = Vec2::Zero();
  Mat2 s = Mat2::Zero();
  for (int i = 0; i < kPoints; ++i) {
    for (int j = 0; j < kPoints; ++j) {
      const double w = std::exp(logw[static_cast<std::size_t>(i) * kPoints + j] - mx);
      const Vec2 b(lo(0) + i * step(0), lo(1) + j * step(1));
      z += w;
      m += w * b;
      s.noalias() += w * b * b.transpose();
    }
  }
  m /= z;
  Mat2 cov = s / z - m * m.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return GaussianParamDist(m, cov);
}

}  // namespace

GaussianParamDist posterior_update(const NIGModel& model, const SourceDataset& data,
                                   NoiseVariancePolicy policy) {
  model.validate();
  if (data.empty()) return prior_param_dist(model);
  if (policy == NoiseVariancePolicy::marginal_student_t) return marginal_t_posterior(model, data);
  return plug_in_posterior(model, data);
}

FOD posterior_predictive(const GaussianParamDist& post, const Vec2& xi, double noise_variance) {
  const double mean = xi.dot(post.mean());
  const double var = xi.dot(post.covariance() * xi) + noise_variance;
  return FOD::gaussian(mean, std::sqrt(var));
}

double gaussian_kl(const GaussianParamDist& p, const GaussianParamDist& q) {
  Eigen::LLT<Mat2> lq(q.covariance());
  Eigen::LLT<Mat2> lp(p.covariance());
  if (lq.info() != Eigen::Success || lp.info() != Eigen::Success) {
    throw NumericalFailure("gaussian_kl: covariance is not positive definite");
  }
  const Mat2 q_inv = lq.solve(Mat2::Identity());
  const Vec2 d = q.mean() - p.mean();
  const Mat2 fq = lq.matrixLLT();
  const Mat2 fp = lp.matrixLLT();
  const double log_det_q = 2.0 * (std::log(fq(0, 0)) + std::log(fq(1, 1)));
  const double log_det_p = 2.0 * (std::log(fp(0, 0)) + std::log(fp(1, 1)));
  const double kl = 0.5 * ((q_inv * p.covariance()).trace() + d.dot(q_inv * d) - 2.0 +
                           log_det_q - log_det_p);
  return std::max(kl, 0.0);
}

double param_tv_upper(const GaussianParamDist& p1, const GaussianParamDist& p2) {
  return std::sqrt(gaussian_kl(p1, p2) / 2.0);
}

double posterior_mass_near(const GaussianParamDist& post, const Vec2& center, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("posterior_mass_near: radius must be > 0");
  const Vec2& m = post.mean();
  const Mat2& s = post.covariance();
  const double sd1 = std::sqrt(s(0, 0));
  const double slope = s(0, 1) / s(0, 0);
  const double cond_sd = std::sqrt(std::max(s(1, 1) - s(0, 1) * slope, 0.0));

  // Clip the outer range to where the first marginal has mass.
  const double a = std::max(center(0) - radius, m(0) - 40.0 * sd1);
  const double b = std::min(center(0) + radius, m(0) + 40.0 * sd1);
  if (!(a < b)) return 0.0;
  const double lo2 = center(1) - radius;
  const double hi2 = center(1) + radius;

  auto inner = [&](double x1) {
    const double cm = m(1) + slope * (x1 - m(0));
    double p;
    if (cond_sd > 0.0) {
      p = normal_cdf((hi2 - cm) / cond_sd) - normal_cdf((lo2 - cm) / cond_sd);
    } else {
      p = (cm > lo2 && cm <= hi2) ? 1.0 : 0.0;
    }
    return normal_pdf((x1 - m(0)) / sd1) / sd1 * p;
  };
  // Panels keep a narrow marginal from being stepped over.
  const int panels = static_cast<int>(std::clamp((b - a) / sd1, 1.0, 400.0));
  const double v = integrate_panels(inner, a, b, panels, 1e-9);
  return std::clamp(v, 0.0, 1.0);
}

GaussianParamDist best_param_dist(const Vec2& beta_s, double scale) {
  return GaussianParamDist(beta_s, scale * Mat2::Identity());
}

}  // namespace epibound
