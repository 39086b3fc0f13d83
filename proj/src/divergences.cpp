#include "epibound/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "epibound/errors.hpp"

namespace epibound {

std::string_view to_string(DivergenceMethod m) {
  switch (m) {
    case DivergenceMethod::exact_discrete: return "exact_discrete";
    case DivergenceMethod::gaussian_closed_form: return "gaussian_closed_form";
    case DivergenceMethod::quadrature: return "quadrature";
    case DivergenceMethod::monte_carlo: return "monte_carlo";
    case DivergenceMethod::pinsker_upper: return "pinsker_upper";
  }
  return "unknown";
}

namespace {

constexpr int kPanels = 64;

struct Range {
  double lo;
  double hi;
};

// Pooled mean +/- 10 pooled stddev of the equal mixture of p and q.
Range integration_range(const FOD& p, const FOD& q) {
  const double mp = p.mean();
  const double mq = q.mean();
  const double mu = 0.5 * (mp + mq);
  const double var = 0.5 * (p.variance() + q.variance()) + 0.25 * (mp - mq) * (mp - mq);
  const double sd = std::sqrt(var);
  return {mu - 10.0 * sd, mu + 10.0 * sd};
}

double integrate_pair(const FOD& p, const FOD& q, const std::function<double(double)>& f) {
  const Range r = integration_range(p, q);
  return integrate_panels(f, r.lo, r.hi, kPanels, kQuadratureTolerance);
}

const Gaussian* both_gaussian(const FOD& p, const FOD& q, const Gaussian*& other) {
  other = q.as_gaussian();
  return other ? p.as_gaussian() : nullptr;
}

}  // namespace

DivergenceResult tv_exact_result(const FOD& p, const FOD& q) {
  require_same_space(p, q, "tv_exact");
  if (const auto* cp = p.as_categorical()) {
    const auto& a = cp->p;
    const auto& b = q.as_categorical()->p;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return {std::min(0.5 * s, 1.0), DivergenceMethod::exact_discrete};
  }
  const Gaussian* gq = nullptr;
  if (const Gaussian* gp = both_gaussian(p, q, gq); gp && gp->stddev == gq->stddev) {
    const double z = std::abs(gp->mean - gq->mean) / (2.0 * gp->stddev);
    // 2 Phi(z) - 1 = erf(z / sqrt 2), accurate for small z.
    return {std::erf(z / std::numbers::sqrt2), DivergenceMethod::gaussian_closed_form};
  }
  const double v = integrate_pair(p, q, [&](double x) {
    return 0.5 * std::abs(p.pdf(x) - q.pdf(x));
  });
  return {std::clamp(v, 0.0, 1.0), DivergenceMethod::quadrature};
}

double tv_exact(const FOD& p, const FOD& q) { return tv_exact_result(p, q).value; }

Divergence tv_divergence() {
  return [](const FOD& a, const FOD& b) { return tv_exact(a, b); };
}

DivergenceResult kl_exact(const FOD& p, const FOD& q) {
  require_same_space(p, q, "kl_exact");
  if (const auto* cp = p.as_categorical()) {
    const auto& a = cp->p;
    const auto& b = q.as_categorical()->p;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] <= 0.0) continue;
      if (b[i] <= 0.0) {
        throw SupportViolation("kl_exact: q has zero mass at outcome " + std::to_string(i));
      }
      s += a[i] * std::log(a[i] / b[i]);
    }
    return {std::max(s, 0.0), DivergenceMethod::exact_discrete};
  }
  const Gaussian* gq = nullptr;
  if (const Gaussian* gp = both_gaussian(p, q, gq)) {
    const double d = gp->mean - gq->mean;
    const double vp = gp->stddev * gp->stddev;
    const double vq = gq->stddev * gq->stddev;
    const double kl = std::log(gq->stddev / gp->stddev) + (vp + d * d) / (2.0 * vq) - 0.5;
    return {std::max(kl, 0.0), DivergenceMethod::gaussian_closed_form};
  }
  const double v = integrate_pair(p, q, [&](double x) {
    const double lp = p.log_pdf(x);
    if (!std::isfinite(lp)) return 0.0;
    return std::exp(lp) * (lp - q.log_pdf(x));
  });
  return {std::max(v, 0.0), DivergenceMethod::quadrature};
}

DivergenceResult kl_mc(const FOD& p, const FOD& q, std::size_t n_samples, std::uint64_t seed) {
  require_same_space(p, q, "kl_mc");
  if (n_samples == 0) throw InvalidArgument("kl_mc: n_samples must be >= 1");
  Rng rng(seed);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double x = draw(p, rng);
    const double lq = q.log_density(x);
    if (!std::isfinite(lq)) {
      throw SupportViolation("kl_mc: q has zero density at a sampled point");
    }
    const double term = p.log_density(x) - lq;
    sum += term;
    sum_sq += term * term;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = n > 1.0 ? std::max(sum_sq - n * mean * mean, 0.0) / (n - 1.0) : 0.0;
  DivergenceResult r;
  r.value = mean;
  r.method = DivergenceMethod::monte_carlo;
  r.mc_samples = n_samples;
  r.stderr_estimate = std::sqrt(var / n);
  return r;
}

DivergenceResult tv_upper_pinsker(const FOD& p, const FOD& q) {
  const DivergenceResult kl = kl_exact(p, q);
  DivergenceResult r;
  r.value = std::sqrt(std::max(kl.value, 0.0) / 2.0);
  r.method = DivergenceMethod::pinsker_upper;
  r.kl_method = kl.method;
  return r;
}

DivergenceResult tv_upper_pinsker(const FOD& p, const FOD& q, std::size_t n_samples,
                                  std::uint64_t seed) {
  const DivergenceResult kl = kl_mc(p, q, n_samples, seed);
  DivergenceResult r;
  r.method = DivergenceMethod::pinsker_upper;
  r.kl_method = DivergenceMethod::monte_carlo;
  r.mc_samples = n_samples;
  r.clamped = kl.value < 0.0;
  const double k = std::max(kl.value, 0.0);
  r.value = std::sqrt(k / 2.0);
  // Delta method: d sqrt(k/2) / dk = 1 / (4 sqrt(k/2)).
  const double se = *kl.stderr_estimate;
  r.stderr_estimate = r.value > 0.0 ? se / (4.0 * r.value) : std::sqrt(se / 2.0);
  return r;
}

double entropy(const FOD& p) {
  if (const auto* c = p.as_categorical()) {
    double h = 0.0;
    for (double x : c->p) {
      if (x > 0.0) h -= x * std::log(x);
    }
    return h;
  }
  if (const auto* g = p.as_gaussian()) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * g->stddev * g->stddev);
  }
  return integrate_pair(p, p, [&](double x) {
    const double lp = p.log_pdf(x);
    if (!std::isfinite(lp)) return 0.0;
    return -std::exp(lp) * lp;
  });
}

double cross_entropy(const FOD& p, const FOD& q) {
  require_same_space(p, q, "cross_entropy");
  if (const auto* cp = p.as_categorical()) {
    const auto& a = cp->p;
    const auto& b = q.as_categorical()->p;
    double h = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] <= 0.0) continue;
      if (b[i] <= 0.0) {
        throw SupportViolation("cross_entropy: q has zero mass at outcome " + std::to_string(i));
      }
      h -= a[i] * std::log(b[i]);
    }
    return h;
  }
  const Gaussian* gq = nullptr;
  if (const Gaussian* gp = both_gaussian(p, q, gq)) {
    const double d = gp->mean - gq->mean;
    const double vq = gq->stddev * gq->stddev;
    return 0.5 * std::log(2.0 * std::numbers::pi * vq) +
           (gp->stddev * gp->stddev + d * d) / (2.0 * vq);
  }
  return integrate_pair(p, q, [&](double x) {
    const double lp = p.log_pdf(x);
    if (!std::isfinite(lp)) return 0.0;
    return -std::exp(lp) * q.log_pdf(x);
  });
}

double l1_distance(const FOD& p, const FOD& q) {
  require_same_space(p, q, "l1_distance");
  if (const auto* cp = p.as_categorical()) {
    const auto& a = cp->p;
    const auto& b = q.as_categorical()->p;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
  }
  return integrate_pair(p, q, [&](double x) { return std::abs(p.pdf(x) - q.pdf(x)); });
}

double hellinger_sq(const FOD& p, const FOD& q) {
  require_same_space(p, q, "hellinger_sq");
  if (const auto* cp = p.as_categorical()) {
    const auto& a = cp->p;
    const auto& b = q.as_categorical()->p;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = std::sqrt(a[i]) - std::sqrt(b[i]);
      s += d * d;
    }
    return std::clamp(0.5 * s, 0.0, 1.0);
  }
  const Gaussian* gq = nullptr;
  if (const Gaussian* gp = both_gaussian(p, q, gq)) {
    const double vp = gp->stddev * gp->stddev;
    const double vq = gq->stddev * gq->stddev;
    const double d = gp->mean - gq->mean;
    const double bc = std::sqrt(2.0 * gp->stddev * gq->stddev / (vp + vq)) *
                      std::exp(-d * d / (4.0 * (vp + vq)));
    return std::clamp(1.0 - bc, 0.0, 1.0);
  }
  const double v = integrate_pair(p, q, [&](double x) {
    const double d = std::sqrt(p.pdf(x)) - std::sqrt(q.pdf(x));
    return 0.5 * d * d;
  });
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace epibound
