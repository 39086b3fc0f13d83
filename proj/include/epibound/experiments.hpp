#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "epibound/bayes.hpp"
#include "epibound/bounds.hpp"
#include "epibound/distributions.hpp"

namespace epibound {

enum class Scenario {
  neighborhood,
  negative_transfer_pos,
  negative_transfer_neg,
  negative_transfer_posneg,
  custom,
};

std::string_view to_string(Scenario s);
/// Accepts the enum names plus the short forms pos, neg, posneg.
Scenario scenario_from_string(std::string_view id);

struct InverseGammaParams {
  double shape = 20.0;
  double rate = 10.0;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::custom;
  Vec2 beta_S = Vec2(0.0, 1.0);
  Vec2 beta_T = Vec2(1.0, 1.0);
  InverseGammaParams ig_source;
  InverseGammaParams ig_target;
  /// Neighborhood sizes (neighborhood scenario).
  std::vector<double> epsilon_grid = {0.05, 0.15, 0.3, 0.5};
  /// Source sample sizes (negative-transfer scenarios).
  std::vector<std::size_t> n_grid = {1, 2, 5, 10, 20, 50};
  std::size_t sims = 500;
  std::size_t kl_samples = 400;
  std::size_t barycenter_components = 256;
  /// Source tasks per simulation in the neighborhood scenario.
  std::size_t neighborhood_tasks = 10;
  /// Half-width of the box around beta_S used for posterior_mass.
  double mass_radius = 0.25;
  /// Covariates at which the target task is observed.
  Vec2 target_xi = Vec2(1.0, 1.0);
  NIGModel model;
  NoiseVariancePolicy noise_policy = NoiseVariancePolicy::plug_in;
  /// Share per-simulation random streams across grid points, so grid
  /// points differ only in the swept parameter.
  bool common_random_numbers = true;
  std::uint64_t master_seed = 0;
  unsigned threads = 0;
  /// Record wall-clock time per row (makes output non-reproducible).
  bool timing = false;

  /// Throws InvalidArgument on an empty grid, sims == 0 or bad IG parameters.
  void validate() const;
};

/// Preset betas for a scenario (everything else default).
ExperimentConfig scenario_config(Scenario s);

struct ExperimentRecord {
  std::size_t sim = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n;
  std::optional<double> epsilon;
  double epistemic_error = 0.0;
  std::optional<double> C;
  std::optional<double> D;
  std::optional<double> looseness;
  std::optional<double> posterior_mass;
  std::optional<double> runtime_ms;
};

struct DroppedRow {
  std::size_t grid_index;
  std::size_t sim;
  std::string reason;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ExperimentRecord> records;
  std::vector<DroppedRow> dropped;
};

/// n single-observation source tasks: s2_i ~ IG(source), xi ~ U(0,1)^2,
/// x ~ N(beta_S . xi, s2_i).
SourceDataset sample_source_data(const ExperimentConfig& config, std::size_t n, std::uint64_t seed);

/// Same, also returning the drawn noise variances.
SourceDataset sample_source_data(const ExperimentConfig& config, std::size_t n, std::uint64_t seed,
                                 std::vector<double>* variances);

/// N(beta_T . target_xi, s2) with s2 ~ IG(target).
FOD target_task(const ExperimentConfig& config, std::uint64_t seed);

/// Same variance, mean shifted so that tv(source_task, result) = eps_tilde.
/// direction (+1 or -1) sets the sign of the shift.
FOD neighborhood_target(const FOD& source_task, double eps_tilde, int direction = 1);

/// Task distribution at target_xi implied by the source (or target) side.
TaskDistribution source_task_distribution(const ExperimentConfig& config);
TaskDistribution target_task_distribution(const ExperimentConfig& config);

/// The learner's posterior, its predictor and the realized target task of
/// one row, regenerated from the row's seed.
struct RowTasks {
  GaussianParamDist posterior;
  FOD predictor;
  FOD target;
};

RowTasks row_tasks(const ExperimentConfig& config, std::size_t grid_index, std::size_t sim);

ExperimentResult run_neighborhood_experiment(const ExperimentConfig& config);
ExperimentResult run_negative_transfer_experiment(const ExperimentConfig& config);

/// Header: sim,seed,n,epsilon,epistemic_error,C,D,looseness,posterior_mass,runtime_ms
void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);

// ---------------------------------------------------------------------------
// Monte Carlo verification
// ---------------------------------------------------------------------------

struct MonteCarloResult {
  BoundReport report;
  std::size_t trials = 0;
  std::size_t exceedances = 0;
  double empirical_freq = 0.0;
  double delta = 0.0;
  double stderr_estimate = 0.0;
  bool vacuous = false;
  bool pass = false;
};

/// Draws `trials` target tasks and counts margin exceedances. Passes when
/// the frequency is within 2 binomial standard errors of delta (or delta >= 1).
MonteCarloResult monte_carlo_verify(const BoundInputs& inputs, Statement statement,
                                    std::size_t trials, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

/// Ranks with ties averaged, 1-based.
std::vector<double> average_ranks(const std::vector<double>& values);

/// Spearman rank correlation; NaN if either input is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct GroupSummary {
  double key = 0.0;  // n or epsilon
  std::size_t count = 0;
  double mean_error = 0.0;
  double stderr_error = 0.0;
  double mean_C = 0.0;
  double mean_looseness = 0.0;
  /// Spearman(posterior_mass, epistemic_error) within the group.
  double mass_error_spearman = 0.0;
};

/// Per grid point (n for negative transfer, epsilon for neighborhood), in
/// grid order.
std::vector<GroupSummary> summarize(const ExperimentResult& result);

}  // namespace epibound
