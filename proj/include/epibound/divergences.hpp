#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "epibound/distributions.hpp"

namespace epibound {

/// Sample count used by the Monte Carlo KL estimator unless overridden.
inline constexpr std::size_t kDefaultKlSamples = 400;

/// Absolute tolerance for quadrature-backed divergences.
inline constexpr double kQuadratureTolerance = 1e-9;

enum class DivergenceMethod {
  exact_discrete,
  gaussian_closed_form,
  quadrature,
  monte_carlo,
  pinsker_upper,
};

std::string_view to_string(DivergenceMethod m);

struct DivergenceResult {
  double value = 0.0;
  DivergenceMethod method = DivergenceMethod::exact_discrete;
  /// Set for Monte Carlo estimates (and Pinsker bounds built on them).
  std::optional<std::size_t> mc_samples;
  std::optional<double> stderr_estimate;
  /// For pinsker_upper: how the underlying KL was obtained.
  std::optional<DivergenceMethod> kl_method;
  /// A negative Monte Carlo KL estimate was clamped to zero.
  bool clamped = false;
};

/// Total variation distance sup_a |P(a) - Q(a)|. Categoricals: half the L1
/// distance; equal-variance Gaussians: 2 Phi(|dmu| / (2 sigma)) - 1;
/// otherwise adaptive quadrature of |p - q| / 2.
double tv_exact(const FOD& p, const FOD& q);

/// TV together with the method that produced it.
DivergenceResult tv_exact_result(const FOD& p, const FOD& q);

/// KL(p || q) by exact summation (categorical), closed form (Gaussian
/// pair) or quadrature. Throws SupportViolation if p charges a q-null set.
DivergenceResult kl_exact(const FOD& p, const FOD& q);

/// Mean of log(p(x) / q(x)) over n_samples draws x ~ p.
DivergenceResult kl_mc(const FOD& p, const FOD& q, std::size_t n_samples = kDefaultKlSamples,
                       std::uint64_t seed = 0);

/// sqrt(KL / 2) with the exact KL.
DivergenceResult tv_upper_pinsker(const FOD& p, const FOD& q);

/// sqrt(max(KL_mc, 0) / 2); a negative estimate is clamped and flagged.
DivergenceResult tv_upper_pinsker(const FOD& p, const FOD& q, std::size_t n_samples,
                                  std::uint64_t seed);

double entropy(const FOD& p);
/// -E_p[log q].
double cross_entropy(const FOD& p, const FOD& q);
double l1_distance(const FOD& p, const FOD& q);
/// (1/2) int (sqrt p - sqrt q)^2, in [0, 1].
double hellinger_sq(const FOD& p, const FOD& q);

/// Plug-in form of tv_exact for callers taking a Divergence.
Divergence tv_divergence();

}  // namespace epibound
