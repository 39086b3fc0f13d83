#include "epibound/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "epibound/divergences.hpp"
#include "epibound/errors.hpp"
#include "epibound/numerics.hpp"

namespace epibound {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::neighborhood: return "neighborhood";
    case Scenario::negative_transfer_pos: return "negative_transfer_pos";
    case Scenario::negative_transfer_neg: return "negative_transfer_neg";
    case Scenario::negative_transfer_posneg: return "negative_transfer_posneg";
    case Scenario::custom: return "custom";
  }
  return "unknown";
}

Scenario scenario_from_string(std::string_view id) {
  if (id == "pos") return Scenario::negative_transfer_pos;
  if (id == "neg") return Scenario::negative_transfer_neg;
  if (id == "posneg") return Scenario::negative_transfer_posneg;
  for (Scenario s : {Scenario::neighborhood, Scenario::negative_transfer_pos,
                     Scenario::negative_transfer_neg, Scenario::negative_transfer_posneg,
                     Scenario::custom}) {
    if (to_string(s) == id) return s;
  }
  throw InvalidArgument("unknown scenario '" + std::string(id) + "'");
}

void ExperimentConfig::validate() const {
  if (sims == 0) throw InvalidArgument("experiment: sims must be >= 1");
  if (kl_samples == 0) throw InvalidArgument("experiment: kl_samples must be >= 1");
  if (barycenter_components == 0) throw InvalidArgument("experiment: barycenter_components must be >= 1");
  for (const auto& ig : {ig_source, ig_target}) {
    if (!(ig.shape > 0.0) || !(ig.rate > 0.0)) {
      throw InvalidArgument("experiment: inverse-gamma parameters must be > 0");
    }
  }
  if (!(mass_radius > 0.0)) throw InvalidArgument("experiment: mass_radius must be > 0");
  model.validate();
  if (scenario == Scenario::neighborhood) {
    if (epsilon_grid.empty()) throw InvalidArgument("experiment: epsilon grid is empty");
    for (double e : epsilon_grid) {
      if (!(e >= 0.0 && e < 1.0)) throw InvalidArgument("experiment: epsilons must lie in [0, 1)");
    }
    if (neighborhood_tasks == 0) throw InvalidArgument("experiment: need >= 1 source task");
  } else if (n_grid.empty()) {
    throw InvalidArgument("experiment: n grid is empty");
  }
}

ExperimentConfig scenario_config(Scenario s) {
  ExperimentConfig c;
  c.scenario = s;
  switch (s) {
    case Scenario::neighborhood:
      c.beta_S = Vec2(0.0, 1.0);
      c.beta_T = c.beta_S;
      break;
    case Scenario::negative_transfer_pos:
      c.beta_S = Vec2(0.0, 1.0);
      c.beta_T = Vec2(1.0, 1.0);
      break;
    case Scenario::negative_transfer_neg:
      c.beta_S = Vec2(-1.0, 0.0);
      c.beta_T = Vec2(1.0, 0.0);
      break;
    case Scenario::negative_transfer_posneg:
      c.beta_S = Vec2(0.0, 2.0);
      c.beta_T = Vec2(0.0, 1.0);
      break;
    case Scenario::custom:
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

SourceDataset sample_source_data(const ExperimentConfig& config, std::size_t n, std::uint64_t seed,
                                 std::vector<double>* variances) {
  Rng rng(seed);
  std::vector<Observation> rows;
  rows.reserve(n);
  if (variances) variances->clear();
  for (std::size_t i = 0; i < n; ++i) {
    const double s2 = sample_inverse_gamma(rng, config.ig_source.shape, config.ig_source.rate);
    const Vec2 xi(uniform01(rng), uniform01(rng));
    const double x = config.beta_S.dot(xi) + std::sqrt(s2) * standard_normal(rng);
    rows.push_back({i + 1, xi, x});
    if (variances) variances->push_back(s2);
  }
  return SourceDataset(std::move(rows));
}

SourceDataset sample_source_data(const ExperimentConfig& config, std::size_t n, std::uint64_t seed) {
  return sample_source_data(config, n, seed, nullptr);
}

FOD target_task(const ExperimentConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  const double s2 = sample_inverse_gamma(rng, config.ig_target.shape, config.ig_target.rate);
  return FOD::gaussian(config.beta_T.dot(config.target_xi), std::sqrt(s2));
}

FOD neighborhood_target(const FOD& source_task, double eps_tilde, int direction) {
  const Gaussian* g = source_task.as_gaussian();
  if (!g) throw InvalidArgument("neighborhood_target: source task must be Gaussian");
  if (!(eps_tilde >= 0.0 && eps_tilde < 1.0)) {
    throw InvalidArgument("neighborhood_target: eps_tilde must lie in [0, 1)");
  }
  if (direction != 1 && direction != -1) {
    throw InvalidArgument("neighborhood_target: direction must be +1 or -1");
  }
  // 2 Phi(dmu / (2 sigma)) - 1 = eps_tilde.
  const double shift = 2.0 * g->stddev * normal_quantile(0.5 * (1.0 + eps_tilde));
  return FOD::gaussian(g->mean + direction * shift, g->stddev);
}

TaskDistribution source_task_distribution(const ExperimentConfig& config) {
  return TaskDistribution::parametric(InverseGammaGaussianTasks{
      config.beta_S.dot(config.target_xi), config.ig_source.shape, config.ig_source.rate});
}

TaskDistribution target_task_distribution(const ExperimentConfig& config) {
  return TaskDistribution::parametric(InverseGammaGaussianTasks{
      config.beta_T.dot(config.target_xi), config.ig_target.shape, config.ig_target.rate});
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

namespace {

std::uint64_t row_seed(const ExperimentConfig& c, std::size_t grid_index, std::size_t sim) {
  return derive_seed(c.master_seed, c.common_random_numbers ? 0 : grid_index + 1, sim);
}

double tv_proxy(const ExperimentConfig& c, const FOD& p, const FOD& q, std::uint64_t seed) {
  return tv_upper_pinsker(p, q, c.kl_samples, seed).value;
}

struct RowOutcome {
  std::optional<ExperimentRecord> record;
  std::string reason;
};

template <class Body>
ExperimentResult run_rows(const ExperimentConfig& config, std::size_t grid_size, Body body) {
  const std::size_t total = grid_size * config.sims;
  std::vector<RowOutcome> rows(total);
  parallel_for(total, config.threads, [&](std::size_t i) {
    const std::size_t g = i / config.sims;
    const std::size_t sim = i % config.sims;
    const auto start = std::chrono::steady_clock::now();
    try {
      ExperimentRecord r = body(g, sim, row_seed(config, g, sim));
      r.sim = sim;
      r.seed = row_seed(config, g, sim);
      if (config.timing) {
        r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      rows[i].record = std::move(r);
    } catch (const Error& e) {
      rows[i].reason = e.what();
    }
  });
  ExperimentResult result;
  result.config = config;
  for (std::size_t i = 0; i < total; ++i) {
    if (rows[i].record) {
      result.records.push_back(std::move(*rows[i].record));
    } else {
      result.dropped.push_back({i / config.sims, i % config.sims, rows[i].reason});
    }
  }
  return result;
}

}  // namespace

namespace {

RowTasks neighborhood_tasks(const ExperimentConfig& config, double eps, std::uint64_t seed) {
  std::vector<double> variances;
  const SourceDataset data = sample_source_data(config, config.neighborhood_tasks, derive_seed(seed, 1), &variances);
  GaussianParamDist post = posterior_update(config.model, data, config.noise_policy);
  FOD predictor = posterior_predictive(post, config.target_xi, config.model.noise_variance_mean());

  Rng rng(derive_seed(seed, 2));
  const std::size_t i = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(variances.size())),
                                 variances.size() - 1);
  const double eps_tilde = eps * uniform01(rng);
  const FOD source_i = FOD::gaussian(config.beta_S.dot(config.target_xi), std::sqrt(variances[i]));
  return RowTasks{std::move(post), std::move(predictor), neighborhood_target(source_i, eps_tilde)};
}

RowTasks transfer_tasks(const ExperimentConfig& config, std::size_t n, std::uint64_t seed) {
  const SourceDataset data = sample_source_data(config, n, derive_seed(seed, 1));
  GaussianParamDist post = posterior_update(config.model, data, config.noise_policy);
  FOD predictor = posterior_predictive(post, config.target_xi, config.model.noise_variance_mean());
  return RowTasks{std::move(post), std::move(predictor), target_task(config, derive_seed(seed, 2))};
}

}  // namespace

RowTasks row_tasks(const ExperimentConfig& config, std::size_t grid_index, std::size_t sim) {
  const std::uint64_t seed = row_seed(config, grid_index, sim);
  if (config.scenario == Scenario::neighborhood) {
    if (grid_index >= config.epsilon_grid.size()) throw InvalidArgument("row_tasks: grid index out of range");
    return neighborhood_tasks(config, config.epsilon_grid[grid_index], seed);
  }
  if (grid_index >= config.n_grid.size()) throw InvalidArgument("row_tasks: grid index out of range");
  return transfer_tasks(config, config.n_grid[grid_index], seed);
}

ExperimentResult run_neighborhood_experiment(const ExperimentConfig& config) {
  config.validate();
  const TaskDistribution source_tasks = source_task_distribution(config);
  return run_rows(config, config.epsilon_grid.size(), [&](std::size_t g, std::size_t, std::uint64_t seed) {
    const double eps = config.epsilon_grid[g];
    const RowTasks t = neighborhood_tasks(config, eps, seed);
    const FOD bary_s = barycenter(
        source_tasks, ReificationOptions{config.barycenter_components, derive_seed(seed, 3)});

    ExperimentRecord r;
    r.epsilon = eps;
    r.epistemic_error = tv_proxy(config, t.predictor, t.target, derive_seed(seed, 4));
    r.C = tv_proxy(config, t.predictor, bary_s, derive_seed(seed, 5));
    r.posterior_mass = posterior_mass_near(t.posterior, config.beta_S, config.mass_radius);
    return r;
  });
}

ExperimentResult run_negative_transfer_experiment(const ExperimentConfig& config) {
  config.validate();
  const TaskDistribution source_tasks = source_task_distribution(config);
  const TaskDistribution target_tasks = target_task_distribution(config);
  return run_rows(config, config.n_grid.size(), [&](std::size_t g, std::size_t, std::uint64_t seed) {
    const std::size_t n = config.n_grid[g];
    const RowTasks t = transfer_tasks(config, n, seed);
    const FOD bary_s = barycenter(
        source_tasks, ReificationOptions{config.barycenter_components, derive_seed(seed, 3)});
    const FOD bary_t = barycenter(
        target_tasks, ReificationOptions{config.barycenter_components, derive_seed(seed, 4)});

    ExperimentRecord r;
    r.n = n;
    r.epistemic_error = tv_proxy(config, t.predictor, t.target, derive_seed(seed, 5));
    // No approximation bias: the source barycenter is the best approximation.
    r.C = tv_proxy(config, t.predictor, bary_s, derive_seed(seed, 6));
    r.D = tv_proxy(config, bary_s, bary_t, derive_seed(seed, 7));
    r.looseness = r.epistemic_error - (*r.C + *r.D);
    r.posterior_mass = posterior_mass_near(t.posterior, config.beta_S, config.mass_radius);
    return r;
  });
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string opt(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) {
    return fmt(*v);
  } else {
    return std::to_string(*v);
  }
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << "sim,seed,n,epsilon,epistemic_error,C,D,looseness,posterior_mass,runtime_ms\n";
  for (const auto& r : records) {
    out << r.sim << ',' << r.seed << ',' << opt(r.n) << ',' << opt(r.epsilon) << ','
        << fmt(r.epistemic_error) << ',' << opt(r.C) << ',' << opt(r.D) << ',' << opt(r.looseness)
        << ',' << opt(r.posterior_mass) << ',' << opt(r.runtime_ms) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo verification
// ---------------------------------------------------------------------------

MonteCarloResult monte_carlo_verify(const BoundInputs& inputs, Statement statement,
                                    std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw InvalidArgument("monte_carlo_verify: trials must be >= 1");
  MonteCarloResult r;
  r.report = evaluate_bound(statement, inputs);
  r.trials = trials;
  r.delta = r.report.delta;
  for (std::size_t i = 0; i < trials; ++i) {
    const FOD task = sample_task(inputs.target, derive_seed(seed, i));
    if (exceeds_margin(r.report, inputs.predictor, task)) ++r.exceedances;
  }
  const double t = static_cast<double>(trials);
  r.empirical_freq = static_cast<double>(r.exceedances) / t;
  const double d = std::clamp(r.delta, 0.0, 1.0);
  r.stderr_estimate = std::sqrt(d * (1.0 - d) / t);
  r.vacuous = r.delta >= 1.0;
  r.pass = r.vacuous || r.empirical_freq <= r.delta + 2.0 * r.stderr_estimate;
  return r;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

std::vector<GroupSummary> summarize(const ExperimentResult& result) {
  const bool by_eps = result.config.scenario == Scenario::neighborhood;
  std::vector<double> keys;
  if (by_eps) {
    keys = result.config.epsilon_grid;
  } else {
    for (std::size_t n : result.config.n_grid) keys.push_back(static_cast<double>(n));
  }
  std::vector<GroupSummary> out;
  for (double key : keys) {
    GroupSummary g;
    g.key = key;
    std::vector<double> err, mass;
    double c_sum = 0.0, l_sum = 0.0;
    for (const auto& r : result.records) {
      const double k = by_eps ? r.epsilon.value_or(-1.0) : static_cast<double>(r.n.value_or(0));
      if (k != key) continue;
      err.push_back(r.epistemic_error);
      mass.push_back(r.posterior_mass.value_or(0.0));
      c_sum += r.C.value_or(0.0);
      l_sum += r.looseness.value_or(0.0);
    }
    g.count = err.size();
    if (g.count > 0) {
      const double n = static_cast<double>(g.count);
      g.mean_error = std::accumulate(err.begin(), err.end(), 0.0) / n;
      double ss = 0.0;
      for (double e : err) ss += (e - g.mean_error) * (e - g.mean_error);
      g.stderr_error = g.count > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
      g.mean_C = c_sum / n;
      g.mean_looseness = l_sum / n;
      g.mass_error_spearman = spearman(mass, err);
    }
    out.push_back(g);
  }
  return out;
}

}  // namespace epibound
