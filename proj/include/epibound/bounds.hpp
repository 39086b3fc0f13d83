#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "epibound/distributions.hpp"

namespace epibound {

// ---------------------------------------------------------------------------
// Model classes
// ---------------------------------------------------------------------------

/// All probability vectors over `outcomes` whose entries are multiples of
/// 1 / resolution, in lexicographic order of the leading coordinates
/// (ascending).
struct CategoricalGrid {
  std::size_t outcomes = 2;
  std::size_t resolution = 4;
};

/// Gaussians on a (mean, stddev) box; means vary fastest.
struct GaussianGrid {
  double mean_lo = 0.0;
  double mean_hi = 0.0;
  double mean_step = 1.0;
  double sd_lo = 1.0;
  double sd_hi = 1.0;
  double sd_step = 1.0;
};

/// The learner's set of candidate predictors. Members are enumerated in a
/// fixed order that is part of the definition (argmin ties go to the lowest
/// index).
class ModelClass {
 public:
  static ModelClass explicit_members(std::vector<FOD> members);
  static ModelClass grid(CategoricalGrid grid);
  static ModelClass grid(GaussianGrid grid);

  std::size_t size() const;
  FOD member(std::size_t index) const;
  void for_each(const std::function<void(std::size_t, const FOD&)>& visit) const;
  /// Index of a member within tol in TV-free structural comparison.
  std::optional<std::size_t> find(const FOD& dist, double tol = kNormalizationTolerance) const;

  using Repr = std::variant<std::vector<FOD>, CategoricalGrid, GaussianGrid>;
  const Repr& repr() const { return repr_; }

 private:
  explicit ModelClass(Repr r) : repr_(std::move(r)) {}
  Repr repr_;
};

// ---------------------------------------------------------------------------
// Decomposition terms
// ---------------------------------------------------------------------------

struct BestApproximation {
  FOD member;
  std::size_t index;
  double bias;  // tv(member, target); B when target is the source barycenter
};

/// argmin over the model class of tv(member, target); lowest index wins ties.
BestApproximation best_approximation(const ModelClass& model, const FOD& target);

/// Lack of convergence C: tv(predictor, best).
double convergence_gap(const FOD& predictor, const FOD& best);

/// Extent of distribution shift D: tv between the two barycenters.
double distribution_shift(const TaskDistribution& source, const TaskDistribution& target,
                          const ReificationOptions& options = {});

/// Learner-perceived shift: tv(best, target_bary) - bias. May be negative.
double distribution_shift_learner(const FOD& best, const FOD& target_bary, double bias);

/// tv(predictor, target_task).
double epistemic_error(const FOD& predictor, const FOD& target_task);

/// sup_variance(tasks) / alpha^2, unclipped.
double chebyshev_delta(const TaskDistribution& tasks, double alpha,
                       const IntervalGrid& grid = {}, const ReificationOptions& options = {});

/// tv between two finite task distributions, merging tasks that are
/// approx_equal so that identical tasks listed twice count once.
double task_distribution_tv(const TaskDistribution& a, const TaskDistribution& b);

/// Smallest eps such that every target support task lies within eps (TV)
/// of some source support task.
double task_neighborhood_radius(const TaskDistribution& source, const TaskDistribution& target);

// ---------------------------------------------------------------------------
// Bound statements
// ---------------------------------------------------------------------------

enum class Statement {
  lemma1,
  lemma2,
  thm1,
  thm2,
  cor_bayesian,
  cor_eps,
  cor_eps_dist,
  cor_bayes_eps,
  cor_bayes_eps_dist,
  cor_ce,
  cor_l1,
  cor_hellinger,
};

inline constexpr Statement kAllStatements[] = {
    Statement::lemma1,        Statement::lemma2,        Statement::thm1,
    Statement::thm2,          Statement::cor_bayesian,  Statement::cor_eps,
    Statement::cor_eps_dist,  Statement::cor_bayes_eps, Statement::cor_bayes_eps_dist,
    Statement::cor_ce,        Statement::cor_l1,        Statement::cor_hellinger,
};

std::string_view to_string(Statement s);
/// Throws InvalidArgument on an unknown id.
Statement statement_from_string(std::string_view id);

/// Posterior and best approximate parameter distribution over a finite
/// parameter space (categoricals over parameter indices).
struct ParameterDistributions {
  FOD posterior;
  FOD best;
};

struct BoundInputs {
  ModelClass model;
  FOD predictor;
  TaskDistribution source;
  TaskDistribution target;
  double alpha = 0.1;
  std::optional<double> epsilon;
  std::optional<double> b_S;
  std::optional<double> b_T;
  std::optional<double> b_pred;
  /// tv(P1, P*) over the parameter space, if already known.
  std::optional<double> param_tv;
  std::optional<ParameterDistributions> params;
  /// Record (rather than reject) a second-order boundedness failure; for
  /// continuous settings where the assumption cannot hold.
  bool allow_unbounded_tasks = false;
  IntervalGrid grid;
  ReificationOptions reify;
};

/// One evaluated bound: P(loss >= margin) <= delta.
struct BoundReport {
  Statement statement = Statement::thm1;
  double alpha = 0.0;
  double B = 0.0;
  double C = 0.0;
  double D = 0.0;
  double D_learner = 0.0;
  double margin = 0.0;
  double delta = 0.0;
  /// Statement-specific inputs: b_S, b_T, epsilon, diam, sup_var_source,
  /// sup_var_target, param_tv, b_pred, entropy_E.
  std::map<std::string, double> extras;
};

/// Evaluates a statement after validating its hypotheses. Throws
/// PreconditionViolated naming the failed assumption.
BoundReport evaluate_bound(Statement statement, const BoundInputs& inputs);

/// The statement's margin formula applied to the stored components.
double recompute_margin(const BoundReport& report);

/// The loss each statement bounds: TV for most, L1 for cor_l1, squared
/// Hellinger for cor_hellinger, cross-entropy of the task to the predictor
/// for cor_ce.
double statement_loss(Statement statement, const FOD& predictor, const FOD& target_task);

/// Margin applicable to a specific realized task (differs from
/// report.margin only for cor_ce, whose margin contains the task entropy).
double margin_for_task(const BoundReport& report, const FOD& target_task);

/// loss >= margin for this task, with a 1e-12 allowance counted against the
/// bound.
bool exceeds_margin(const BoundReport& report, const FOD& predictor, const FOD& target_task);

}  // namespace epibound
