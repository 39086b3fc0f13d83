#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "epibound/numerics.hpp"

namespace epibound {

/// Tolerance for probability vectors and weight vectors summing to one.
inline constexpr double kNormalizationTolerance = 1e-12;

struct Categorical {
  std::vector<double> p;
};

struct Gaussian {
  double mean = 0.0;
  double stddev = 1.0;
};

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stddevs;
};

enum class SpaceKind { categorical, real_line };

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

/// Subset of outcome indices of a categorical space.
struct OutcomeSet {
  std::vector<std::size_t> indices;
};

/// Half-open interval (lower, upper] of the real line; lower may be -inf.
struct Interval {
  double lower;
  double upper;
};

class EventSet {
 public:
  static EventSet outcomes(std::vector<std::size_t> indices);
  /// Subset encoded as a bitmask over m outcomes.
  static EventSet from_mask(std::uint64_t mask, std::size_t m);
  static EventSet interval(double lower, double upper);
  static EventSet half_line(double upper);

  bool is_outcome_set() const { return std::holds_alternative<OutcomeSet>(repr_); }
  const OutcomeSet* outcome_set() const { return std::get_if<OutcomeSet>(&repr_); }
  const Interval* interval_set() const { return std::get_if<Interval>(&repr_); }

 private:
  explicit EventSet(std::variant<OutcomeSet, Interval> r) : repr_(std::move(r)) {}
  std::variant<OutcomeSet, Interval> repr_;
};

// ---------------------------------------------------------------------------
// First-order distributions
// ---------------------------------------------------------------------------

/// A distribution over the sample space: a task, a predictor, a barycenter.
/// Immutable after construction; factories validate their invariants and
/// throw InvalidDistribution (inputs are never renormalized).
class FirstOrderDistribution {
 public:
  using Repr = std::variant<Categorical, Gaussian, GaussianMixture>;

  static FirstOrderDistribution categorical(std::vector<double> p);
  static FirstOrderDistribution gaussian(double mean, double stddev);
  static FirstOrderDistribution mixture(std::vector<double> weights,
                                        std::vector<double> means,
                                        std::vector<double> stddevs);

  const Repr& repr() const { return repr_; }
  const Categorical* as_categorical() const { return std::get_if<Categorical>(&repr_); }
  const Gaussian* as_gaussian() const { return std::get_if<Gaussian>(&repr_); }
  const GaussianMixture* as_mixture() const { return std::get_if<GaussianMixture>(&repr_); }

  SpaceKind space() const;
  /// Number of outcomes for categorical spaces, 0 on the real line.
  std::size_t outcomes() const;

  /// Probability of an event. Throws EventMismatch for an event of the
  /// other space kind or indices outside [0, m).
  double probability(const EventSet& event) const;

  // Continuous-only accessors; throw EventMismatch on categoricals.
  double pdf(double x) const;
  double log_pdf(double x) const;
  double cdf(double x) const;
  double mean() const;
  double variance() const;

  /// Probability mass of outcome i (categorical only).
  double mass(std::size_t i) const;

  /// Log mass or log density at a sample value (outcome index encoded as a
  /// double for categoricals). -inf where the distribution puts no mass.
  double log_density(double value) const;

 private:
  explicit FirstOrderDistribution(Repr r) : repr_(std::move(r)) {}
  Repr repr_;
};

using FOD = FirstOrderDistribution;

/// True when both live on the same space (same outcome count for categoricals).
bool same_space(const FOD& a, const FOD& b);

/// Throws EventMismatch unless same_space(a, b).
void require_same_space(const FOD& a, const FOD& b, const char* what);

/// Structural near-equality: identical kind and parameters within tol.
bool approx_equal(const FOD& a, const FOD& b, double tol = kNormalizationTolerance);

// ---------------------------------------------------------------------------
// Second-order (task) distributions
// ---------------------------------------------------------------------------

struct WeightedTask {
  FOD dist;
  double weight;
};

/// Gaussian tasks N(mean, sigma^2) with sigma^2 ~ InverseGamma(shape, rate).
struct InverseGammaGaussianTasks {
  double mean = 0.0;
  double shape = 20.0;
  double rate = 10.0;
};

/// Options for turning a parametric task distribution into a finite one.
struct ReificationOptions {
  std::size_t components = 256;
  std::uint64_t seed = 0;
};

class TaskDistribution {
 public:
  static TaskDistribution finite(std::vector<WeightedTask> tasks);
  static TaskDistribution point_mass(FOD task);
  static TaskDistribution parametric(InverseGammaGaussianTasks spec);

  bool is_finite() const { return std::holds_alternative<std::vector<WeightedTask>>(repr_); }
  /// Throws InvalidTaskDistribution for parametric distributions.
  const std::vector<WeightedTask>& tasks() const;
  const InverseGammaGaussianTasks& parametric_spec() const;

  SpaceKind space() const;
  std::size_t outcomes() const;

  /// Finite approximation: parametric distributions become `components`
  /// equally weighted sampled tasks; finite ones are returned unchanged.
  TaskDistribution reify(const ReificationOptions& options = {}) const;

 private:
  using Repr = std::variant<std::vector<WeightedTask>, InverseGammaGaussianTasks>;
  explicit TaskDistribution(Repr r) : repr_(std::move(r)) {}
  Repr repr_;
};

/// Same tasks (pairwise approx_equal, same order) with weights within tol.
bool approx_equal(const TaskDistribution& a, const TaskDistribution& b,
                  double tol = kNormalizationTolerance);

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

/// Event family over which suprema are taken on the real line: half-lines
/// (-inf, t_k] with t_k evenly spaced over pooled mean +/- span_sd pooled sd.
struct IntervalGrid {
  std::size_t points = 401;
  double span_sd = 6.0;
};

/// Largest categorical space for which events are enumerated exhaustively.
inline constexpr std::size_t kMaxEnumeratedOutcomes = 12;

/// Mixture assigning each event the task-weighted average probability.
/// Categorical tasks give the averaged probability vector (exact).
FOD barycenter(const TaskDistribution& tasks, const ReificationOptions& options = {});

/// E_Q[(Q(event) - bary(event))^2].
double variance_at(const TaskDistribution& tasks, const EventSet& event,
                   const ReificationOptions& options = {});

/// The events over which sup_variance ranges: all 2^m subsets for
/// categorical spaces (m <= 12, InvalidArgument otherwise) or the interval
/// grid on the real line.
std::vector<EventSet> event_family(const TaskDistribution& tasks,
                                   const IntervalGrid& grid = {},
                                   const ReificationOptions& options = {});

double sup_variance(const TaskDistribution& tasks, const IntervalGrid& grid = {},
                    const ReificationOptions& options = {});

using Divergence = std::function<double(const FOD&, const FOD&)>;

/// Maximum pairwise divergence over the support.
double diameter(const TaskDistribution& tasks, const Divergence& tv,
                const ReificationOptions& options = {});

struct Boundedness {
  bool first_order = false;
  bool second_order = false;
};

Boundedness check_boundedness(const TaskDistribution& tasks, double b);

/// Largest b with every support weight in [b, 1 - b] (0 if none).
double first_order_bound(const TaskDistribution& tasks);

/// Largest b with every task giving every nonempty proper subset of its
/// support probability in [b, 1 - b]; 0 if some task has a single-outcome
/// support or lives on the real line.
double second_order_bound(const TaskDistribution& tasks);

/// One draw using the caller's generator.
double draw(const FOD& dist, Rng& rng);

/// Deterministic draws; categorical samples are outcome indices.
std::vector<double> sample(const FOD& dist, std::size_t count, std::uint64_t seed);

FOD sample_task(const TaskDistribution& tasks, std::uint64_t seed);

}  // namespace epibound
