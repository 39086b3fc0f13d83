#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epibound/bounds.hpp"
#include "epibound/distributions.hpp"

namespace epibound {

/// Structural constraint imposed on a generated instance.
enum class InstanceConstraint {
  none,
  no_shift,
  /// no_shift with the predictor set to the source barycenter.
  perfect_learning,
  task_neighborhood,
  distribution_neighborhood,
};

std::string_view to_string(InstanceConstraint c);

struct OracleConfig {
  std::size_t min_outcomes = 2;
  std::size_t max_outcomes = 6;
  std::size_t min_tasks = 2;
  std::size_t max_tasks = 6;
  std::size_t min_model = 3;
  std::size_t max_model = 20;
  InstanceConstraint constraint = InstanceConstraint::none;
  /// Neighborhood size; drawn uniformly from [eps_lo, eps_hi] when unset.
  std::optional<double> epsilon;
  double eps_lo = 0.01;
  double eps_hi = 0.5;
  /// Build a finite-parameter Bayesian learner: the model class is the set
  /// of predictives of a few parameter distributions and the predictor is
  /// the posterior predictive.
  bool bayesian = false;
  std::size_t max_parameters = 8;
};

/// Finite parameter space: likelihoods[k] is p(. | theta_k); parameter
/// distributions are categoricals over the parameter indices.
struct FiniteBayesToy {
  std::vector<FOD> likelihoods;
  std::vector<FOD> param_dists;  // param_dists[i] has predictive model.member(i)
  std::size_t posterior_index = 0;
};

struct OracleInstance {
  std::uint64_t seed = 0;
  std::size_t outcomes = 2;
  TaskDistribution source;
  TaskDistribution target;
  ModelClass model;
  FOD predictor;
  InstanceConstraint constraint = InstanceConstraint::none;
  std::optional<double> epsilon;
  double b_S = 0.0;  // min(first, second)-order bound of the source
  double b_T = 0.0;  // first-order bound of the target
  std::optional<FiniteBayesToy> bayes;
};

/// Deterministic from (seed, config). Throws GenerationFailure if no valid
/// instance is found within 1000 attempts.
OracleInstance generate_instance(std::uint64_t seed, const OracleConfig& config = {});

/// Mixture predictive sum_k P(theta_k) p(. | theta_k).
FOD finite_predictive(const std::vector<FOD>& likelihoods, const FOD& param_dist);

/// BoundInputs for a statement on an instance (epsilon, params filled in).
BoundInputs bound_inputs(const OracleInstance& instance, double alpha);

struct StatementCheck {
  Statement statement = Statement::thm1;
  double alpha = 0.0;
  bool skipped = false;
  std::string skip_reason;
  BoundReport report;
  /// Exact P(loss >= margin) over the finite target.
  double exceedance = 0.0;
  double slack = 0.0;  // delta - exceedance
  bool violated = false;
};

/// Exact check of one statement at one alpha. Preconditions that fail mark
/// the check skipped.
StatementCheck verify_statement(const OracleInstance& instance, Statement statement, double alpha);

/// Exact exceedance probability sum_t w_t [loss_t >= margin_t].
double exact_exceedance(const OracleInstance& instance, const BoundReport& report);

/// Weighted mean over the target support of tv(pred, Q^t) - (C + D).
double looseness(const OracleInstance& instance);

/// Inequalities from the decomposition that hold deterministically on every
/// instance satisfying their hypotheses; slack = rhs - lhs.
struct LemmaCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
};

std::vector<LemmaCheck> check_lemmas(const OracleInstance& instance);

// ---------------------------------------------------------------------------
// Negative-transfer families
// ---------------------------------------------------------------------------

enum class TransferGeometry {
  /// Target beyond the source barycenter: moving toward it helps.
  positive,
  /// Target beyond the naive predictor: moving toward the barycenter hurts.
  negative,
};

struct TransferFamilyResult {
  std::vector<double> lambdas;
  std::vector<double> errors;
  /// Adjacent pairs breaking strict monotonicity in the expected direction.
  std::size_t violations = 0;
};

/// Predictors (1 - l) P0 + l bary^S for `points` values of l in [0, 1],
/// evaluated against a target placed on the line through P0 and bary^S.
TransferFamilyResult transfer_family(const OracleInstance& instance, std::uint64_t seed,
                                     TransferGeometry geometry, std::size_t points = 101);

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

struct CheckStats {
  std::size_t trials = 0;
  std::size_t skipped = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
  double max_slack = 0.0;
  double looseness_sum = 0.0;
  std::size_t looseness_count = 0;
  /// Largest violation seen (exceedance - delta or lhs - rhs).
  double worst_excess = 0.0;
  std::uint64_t worst_seed = 0;
  double worst_alpha = 0.0;

  void record(double slack, bool violated, std::uint64_t seed, double alpha);
  void merge(const CheckStats& other);
  double mean_looseness() const;
};

struct OracleRunConfig {
  std::size_t instances = 10000;
  std::uint64_t seed = 1;
  std::vector<double> alphas = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  std::size_t max_outcomes = 6;
  unsigned threads = 0;
  std::size_t transfer_instances = 100;
  std::size_t transfer_points = 101;
};

struct OracleReport {
  OracleRunConfig config;
  /// Keyed by statement id, lemma name, or transfer family name.
  std::map<std::string, CheckStats> checks;
  std::size_t total_violations() const;
};

/// Tolerance allowed on lemma inequalities and exceedance - delta.
inline constexpr double kOracleTolerance = 1e-10;

OracleReport run_oracle(const OracleRunConfig& config);

}  // namespace epibound
