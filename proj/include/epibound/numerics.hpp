#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace epibound {

// ---------------------------------------------------------------------------
// Standard normal helpers
// ---------------------------------------------------------------------------

double normal_pdf(double z);
double normal_log_pdf(double z);
double normal_cdf(double z);

/// Inverse of the standard normal CDF. Acklam's rational approximation
/// polished with two Halley steps; relative error near machine precision
/// on (1e-300, 1 - 1e-16). Throws InvalidArgument outside (0, 1).
double normal_quantile(double p);

double log_sum_exp(std::span<const double> values);

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Adaptive 7/15-point Gauss-Kronrod on [a, b]. Bisects until the
/// Kronrod/Gauss difference of every accepted panel is below its share of
/// abs_tol. Throws NumericalFailure if max_depth is exhausted with the
/// estimate still above tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-9, int max_depth = 40);

/// Same, after splitting [a, b] into `panels` equal pieces (each with
/// abs_tol / panels). Useful when the integrand is concentrated.
double integrate_panels(const std::function<double(double)>& f, double a,
                        double b, int panels, double abs_tol = 1e-9);

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Deterministic child seed for a (parent, a, b) key.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                          std::uint64_t b = 0);

double uniform01(Rng& rng);
double standard_normal(Rng& rng);

/// Draw from the inverse-gamma distribution with the given shape
/// (concentration) and rate (scale of 1/X); mean rate / (shape - 1).
double sample_inverse_gamma(Rng& rng, double shape, double rate);

/// Flat Dirichlet(1, ..., 1) draw of dimension `dim`.
std::vector<double> sample_flat_simplex(Rng& rng, std::size_t dim);

// ---------------------------------------------------------------------------
// Parallel loop
// ---------------------------------------------------------------------------

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 means
/// hardware concurrency). Each index runs exactly once; the first exception
/// thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace epibound
