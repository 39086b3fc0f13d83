#include "epibound/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epibound/divergences.hpp"
#include "epibound/errors.hpp"
#include "epibound/numerics.hpp"

namespace epibound {

std::string_view to_string(InstanceConstraint c) {
  switch (c) {
    case InstanceConstraint::none: return "none";
    case InstanceConstraint::no_shift: return "no_shift";
    case InstanceConstraint::perfect_learning: return "perfect_learning";
    case InstanceConstraint::task_neighborhood: return "task_neighborhood";
    case InstanceConstraint::distribution_neighborhood: return "distribution_neighborhood";
  }
  return "unknown";
}

namespace {

constexpr int kMaxAttempts = 1000;

// Uniform integer in [lo, hi]; avoids std::uniform_int_distribution, whose
// output differs between standard libraries.
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  const double span = static_cast<double>(hi - lo + 1);
  return lo + std::min(static_cast<std::size_t>(uniform01(rng) * span), hi - lo);
}

FOD random_categorical(Rng& rng, std::size_t m) {
  return FOD::categorical(sample_flat_simplex(rng, m));
}

std::vector<WeightedTask> random_tasks(Rng& rng, std::size_t m, std::size_t k) {
  const std::vector<double> w = sample_flat_simplex(rng, k);
  std::vector<WeightedTask> tasks;
  for (std::size_t i = 0; i < k; ++i) tasks.push_back({random_categorical(rng, m), w[i]});
  return tasks;
}

std::vector<FOD> members_of(const ModelClass& model) {
  std::vector<FOD> out;
  model.for_each([&](std::size_t, const FOD& m) { out.push_back(m); });
  return out;
}

ModelClass random_model(Rng& rng, std::size_t m, const OracleConfig& cfg) {
  std::vector<std::size_t> fitting;
  for (std::size_t r = 1; r <= 64; ++r) {
    const std::size_t size = ModelClass::grid(CategoricalGrid{m, r}).size();
    if (size > cfg.max_model) break;
    if (size >= cfg.min_model) fitting.push_back(r);
  }
  if (!fitting.empty() && uniform01(rng) < 0.5) {
    return ModelClass::grid(CategoricalGrid{m, fitting[pick(rng, 0, fitting.size() - 1)]});
  }
  std::vector<FOD> members;
  const std::size_t count = pick(rng, cfg.min_model, cfg.max_model);
  for (std::size_t i = 0; i < count; ++i) members.push_back(random_categorical(rng, m));
  return ModelClass::explicit_members(std::move(members));
}

// Moves t toward s along the segment so that tv(s, result) <= eps.
FOD pull_within(const FOD& s, const FOD& t, double eps) {
  const double d = tv_exact(s, t);
  if (d <= eps) return t;
  const double lambda = eps / d;
  const auto& a = s.as_categorical()->p;
  const auto& b = t.as_categorical()->p;
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = a[i] + lambda * (b[i] - a[i]);
  return FOD::categorical(std::move(p));
}

TaskDistribution constrained_target(Rng& rng, const TaskDistribution& source, std::size_t m,
                                    const OracleConfig& cfg, InstanceConstraint c, double eps) {
  switch (c) {
    case InstanceConstraint::none:
      return TaskDistribution::finite(random_tasks(rng, m, pick(rng, cfg.min_tasks, cfg.max_tasks)));
    case InstanceConstraint::no_shift:
    case InstanceConstraint::perfect_learning:
      return source;
    case InstanceConstraint::task_neighborhood: {
      const std::size_t k = pick(rng, cfg.min_tasks, cfg.max_tasks);
      const std::vector<double> w = sample_flat_simplex(rng, k);
      const auto& src = source.tasks();
      std::vector<WeightedTask> tasks;
      for (std::size_t i = 0; i < k; ++i) {
        const FOD& anchor = src[pick(rng, 0, src.size() - 1)].dist;
        tasks.push_back({pull_within(anchor, random_categorical(rng, m), eps), w[i]});
      }
      return TaskDistribution::finite(std::move(tasks));
    }
    case InstanceConstraint::distribution_neighborhood: {
      const auto& src = source.tasks();
      const std::vector<double> v = sample_flat_simplex(rng, src.size());
      // tv(w_S, w_T) = lambda tv(w_S, v) <= lambda <= eps.
      const double lambda = eps * uniform01(rng);
      std::vector<WeightedTask> tasks;
      for (std::size_t i = 0; i < src.size(); ++i) {
        tasks.push_back({src[i].dist, (1.0 - lambda) * src[i].weight + lambda * v[i]});
      }
      return TaskDistribution::finite(std::move(tasks));
    }
  }
  return source;
}

FOD posterior_over(const std::vector<FOD>& likelihoods, const FOD& prior,
                   const std::vector<std::size_t>& observations) {
  std::vector<double> p = prior.as_categorical()->p;
  for (std::size_t obs : observations) {
    double z = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] *= likelihoods[k].mass(obs);
      z += p[k];
    }
    for (double& x : p) x /= z;
  }
  // Renormalize once more so the sum is 1 to rounding.
  double z = 0.0;
  for (double x : p) z += x;
  for (double& x : p) x /= z;
  return FOD::categorical(std::move(p));
}

bool instance_ok(const OracleInstance& inst, double eps) {
  switch (inst.constraint) {
    case InstanceConstraint::task_neighborhood:
      return task_neighborhood_radius(inst.source, inst.target) <= eps;
    case InstanceConstraint::distribution_neighborhood:
      return task_distribution_tv(inst.source, inst.target) <= eps;
    default:
      return true;
  }
}

}  // namespace

FOD finite_predictive(const std::vector<FOD>& likelihoods, const FOD& param_dist) {
  const auto& w = param_dist.as_categorical()->p;
  if (w.size() != likelihoods.size()) {
    throw EventMismatch("finite_predictive: parameter distribution size mismatch");
  }
  const std::size_t m = likelihoods.front().outcomes();
  std::vector<double> p(m, 0.0);
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (std::size_t i = 0; i < m; ++i) p[i] += w[k] * likelihoods[k].mass(i);
  }
  return FOD::categorical(std::move(p));
}

OracleInstance generate_instance(std::uint64_t seed, const OracleConfig& cfg) {
  if (cfg.min_outcomes < 2 || cfg.min_outcomes > cfg.max_outcomes ||
      cfg.max_outcomes > kMaxEnumeratedOutcomes || cfg.min_tasks < 1 ||
      cfg.min_tasks > cfg.max_tasks || cfg.min_model < 1 || cfg.min_model > cfg.max_model ||
      cfg.max_parameters < 2) {
    throw GenerationFailure("oracle config: inconsistent size ranges");
  }
  const bool neighborhood = cfg.constraint == InstanceConstraint::task_neighborhood ||
                            cfg.constraint == InstanceConstraint::distribution_neighborhood;
  if (neighborhood) {
    const bool bad_eps = cfg.epsilon ? !(*cfg.epsilon > 0.0 && *cfg.epsilon < 1.0)
                                     : !(cfg.eps_lo > 0.0 && cfg.eps_lo <= cfg.eps_hi && cfg.eps_hi < 1.0);
    if (bad_eps) throw GenerationFailure("oracle config: epsilon must lie in (0, 1)");
    if (cfg.min_tasks < 2) {
      throw GenerationFailure("oracle config: neighborhood instances need >= 2 tasks per side");
    }
  }

  Rng rng(mix_seed(seed));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::size_t m = pick(rng, cfg.min_outcomes, cfg.max_outcomes);
    TaskDistribution source =
        TaskDistribution::finite(random_tasks(rng, m, pick(rng, cfg.min_tasks, cfg.max_tasks)));
    std::optional<double> eps;
    if (neighborhood) {
      eps = cfg.epsilon ? *cfg.epsilon : cfg.eps_lo + (cfg.eps_hi - cfg.eps_lo) * uniform01(rng);
    }
    TaskDistribution target = constrained_target(rng, source, m, cfg, cfg.constraint, eps.value_or(0.0));

    std::optional<FiniteBayesToy> toy;
    std::vector<FOD> members;
    FOD predictor = FOD::categorical(std::vector<double>(m, 1.0 / static_cast<double>(m)));
    if (cfg.bayesian) {
      FiniteBayesToy t;
      const std::size_t k = pick(rng, 2, cfg.max_parameters);
      for (std::size_t i = 0; i < k; ++i) t.likelihoods.push_back(random_categorical(rng, m));
      const FOD prior = random_categorical(rng, k);
      const FOD data_task = sample_task(source, derive_seed(seed, static_cast<std::uint64_t>(attempt), 7));
      const std::vector<double> obs_raw =
          sample(data_task, pick(rng, 1, 5), derive_seed(seed, static_cast<std::uint64_t>(attempt), 8));
      std::vector<std::size_t> obs;
      for (double o : obs_raw) obs.push_back(static_cast<std::size_t>(o));
      const FOD posterior = posterior_over(t.likelihoods, prior, obs);
      const std::size_t count = pick(rng, std::max<std::size_t>(cfg.min_model, 2), std::min<std::size_t>(cfg.max_model, 10));
      for (std::size_t i = 0; i + 1 < count; ++i) t.param_dists.push_back(random_categorical(rng, k));
      t.posterior_index = pick(rng, 0, t.param_dists.size());
      t.param_dists.insert(t.param_dists.begin() + static_cast<std::ptrdiff_t>(t.posterior_index), posterior);
      for (const auto& pd : t.param_dists) members.push_back(finite_predictive(t.likelihoods, pd));
      predictor = members[t.posterior_index];
      toy = std::move(t);
    } else {
      ModelClass base = random_model(rng, m, cfg);
      members = members_of(base);
      if (cfg.constraint == InstanceConstraint::perfect_learning) {
        predictor = barycenter(source);
        members.push_back(predictor);
      } else if (uniform01(rng) < 0.5) {
        predictor = members[pick(rng, 0, members.size() - 1)];
      } else {
        predictor = random_categorical(rng, m);
        members.push_back(predictor);
      }
    }

    OracleInstance inst{
        .seed = seed,
        .outcomes = m,
        .source = std::move(source),
        .target = std::move(target),
        .model = ModelClass::explicit_members(std::move(members)),
        .predictor = std::move(predictor),
        .constraint = cfg.constraint,
        .epsilon = eps,
        .b_S = 0.0,
        .b_T = 0.0,
        .bayes = std::move(toy),
    };
    inst.b_S = std::min(first_order_bound(inst.source), second_order_bound(inst.source));
    inst.b_T = first_order_bound(inst.target);
    if (instance_ok(inst, eps.value_or(0.0))) return inst;
  }
  throw GenerationFailure("generate_instance: no valid instance after 1000 attempts (seed " +
                          std::to_string(seed) + ")");
}

BoundInputs bound_inputs(const OracleInstance& inst, double alpha) {
  BoundInputs in{
      .model = inst.model,
      .predictor = inst.predictor,
      .source = inst.source,
      .target = inst.target,
      .alpha = alpha,
      .epsilon = inst.epsilon,
  };
  if (inst.bayes) {
    const BestApproximation best = best_approximation(inst.model, barycenter(inst.source));
    in.params = ParameterDistributions{inst.bayes->param_dists[inst.bayes->posterior_index],
                                       inst.bayes->param_dists[best.index]};
  }
  return in;
}

double exact_exceedance(const OracleInstance& inst, const BoundReport& report) {
  double p = 0.0;
  for (const auto& t : inst.target.tasks()) {
    if (t.weight > 0.0 && exceeds_margin(report, inst.predictor, t.dist)) p += t.weight;
  }
  return p;
}

StatementCheck verify_statement(const OracleInstance& inst, Statement statement, double alpha) {
  StatementCheck c;
  c.statement = statement;
  c.alpha = alpha;
  try {
    c.report = evaluate_bound(statement, bound_inputs(inst, alpha));
  } catch (const PreconditionViolated& e) {
    c.skipped = true;
    c.skip_reason = e.what();
    return c;
  }
  c.exceedance = exact_exceedance(inst, c.report);
  c.slack = c.report.delta - c.exceedance;
  c.violated = c.exceedance - c.report.delta > kOracleTolerance;
  return c;
}

double looseness(const OracleInstance& inst) {
  const FOD bary_s = barycenter(inst.source);
  const FOD bary_t = barycenter(inst.target);
  const BestApproximation best = best_approximation(inst.model, bary_s);
  const double c = convergence_gap(inst.predictor, best.member);
  const double d = tv_exact(bary_s, bary_t);
  double sum = 0.0;
  for (const auto& t : inst.target.tasks()) {
    sum += t.weight * (epistemic_error(inst.predictor, t.dist) - (c + d));
  }
  return sum;
}

std::vector<LemmaCheck> check_lemmas(const OracleInstance& inst) {
  std::vector<LemmaCheck> out;
  auto add = [&](std::string name, double lhs, double rhs) {
    out.push_back({std::move(name), lhs, rhs, rhs - lhs});
  };
  const FOD bary_s = barycenter(inst.source);
  const FOD bary_t = barycenter(inst.target);
  const BestApproximation best = best_approximation(inst.model, bary_s);
  const double B = best.bias;
  const double C = convergence_gap(inst.predictor, best.member);
  const double D = tv_exact(bary_s, bary_t);
  const double DL = distribution_shift_learner(best.member, bary_t, B);

  add("learner_shift_le_shift", DL, D);
  add("triangle_source", tv_exact(inst.predictor, bary_s), B + C);
  add("triangle_target", tv_exact(inst.predictor, bary_t), B + C + DL);

  if (inst.bayes) {
    const FOD& post = inst.bayes->param_dists[inst.bayes->posterior_index];
    add("param_tv_ge_c", C, tv_exact(post, inst.bayes->param_dists[best.index]));
  }

  const double b_s1 = first_order_bound(inst.source);
  const double b_t1 = first_order_bound(inst.target);
  auto variance_check = [&](std::string name, double shift_sq) {
    if (!(b_s1 > 0.0) || !(b_t1 > 0.0)) return;
    const double scale = (1.0 - b_t1) / b_s1;
    LemmaCheck worst{name, 0.0, 0.0, std::numeric_limits<double>::infinity()};
    for (const auto& ev : event_family(inst.source)) {
      const double lhs = variance_at(inst.target, ev);
      const double rhs = scale * (variance_at(inst.source, ev) + shift_sq);
      if (rhs - lhs < worst.slack) worst = {name, lhs, rhs, rhs - lhs};
    }
    out.push_back(worst);
  };

  if (inst.constraint == InstanceConstraint::task_neighborhood && inst.epsilon) {
    const double diam = diameter(inst.source, tv_divergence());
    add("shift_task_neighborhood", D, diam + *inst.epsilon);
    variance_check("variance_task_neighborhood", (diam + *inst.epsilon) * (diam + *inst.epsilon));
  }
  if (inst.constraint == InstanceConstraint::distribution_neighborhood && inst.epsilon) {
    add("shift_distribution_neighborhood", D, *inst.epsilon);
    variance_check("variance_with_shift", D * D);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transfer families
// ---------------------------------------------------------------------------

TransferFamilyResult transfer_family(const OracleInstance& inst, std::uint64_t seed,
                                     TransferGeometry geometry, std::size_t points) {
  if (points < 2) throw InvalidArgument("transfer_family: need at least 2 points");
  const std::vector<double> b = barycenter(inst.source).as_categorical()->p;
  const std::size_t m = b.size();
  Rng rng(mix_seed(seed));
  std::vector<double> p0;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxAttempts) {
      throw GenerationFailure("transfer_family: naive predictor coincides with the barycenter");
    }
    p0 = sample_flat_simplex(rng, m);
    if (tv_exact(FOD::categorical(p0), FOD::categorical(b)) > 1e-3) break;
  }

  // Target on the line through p0 and b, past b (positive) or past p0
  // (negative), at a fraction of the largest step keeping it a distribution.
  const std::vector<double>& from = geometry == TransferGeometry::positive ? p0 : b;
  const std::vector<double>& to = geometry == TransferGeometry::positive ? b : p0;
  double t_max = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = to[i] - from[i];
    if (d < 0.0) t_max = std::min(t_max, to[i] / -d);
  }
  const double t = 0.5 * t_max * uniform01(rng);
  std::vector<double> q(m);
  for (std::size_t i = 0; i < m; ++i) q[i] = to[i] + t * (to[i] - from[i]);
  const FOD target = FOD::categorical(q);

  TransferFamilyResult r;
  for (std::size_t k = 0; k < points; ++k) {
    const double lambda = static_cast<double>(k) / static_cast<double>(points - 1);
    std::vector<double> p(m);
    for (std::size_t i = 0; i < m; ++i) p[i] = (1.0 - lambda) * p0[i] + lambda * b[i];
    r.lambdas.push_back(lambda);
    r.errors.push_back(epistemic_error(FOD::categorical(std::move(p)), target));
    if (k > 0) {
      const double step = r.errors[k] - r.errors[k - 1];
      const bool ok = geometry == TransferGeometry::positive ? step < 0.0 : step > 0.0;
      if (!ok) ++r.violations;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

void CheckStats::record(double slack, bool violated, std::uint64_t seed, double alpha) {
  if (trials == 0) {
    min_slack = max_slack = slack;
  } else {
    min_slack = std::min(min_slack, slack);
    max_slack = std::max(max_slack, slack);
  }
  ++trials;
  if (violated) {
    ++violations;
    if (-slack > worst_excess) {
      worst_excess = -slack;
      worst_seed = seed;
      worst_alpha = alpha;
    }
  }
}

void CheckStats::merge(const CheckStats& o) {
  if (o.trials > 0) {
    if (trials == 0) {
      min_slack = o.min_slack;
      max_slack = o.max_slack;
    } else {
      min_slack = std::min(min_slack, o.min_slack);
      max_slack = std::max(max_slack, o.max_slack);
    }
  }
  trials += o.trials;
  skipped += o.skipped;
  violations += o.violations;
  looseness_sum += o.looseness_sum;
  looseness_count += o.looseness_count;
  if (o.worst_excess > worst_excess) {
    worst_excess = o.worst_excess;
    worst_seed = o.worst_seed;
    worst_alpha = o.worst_alpha;
  }
}

double CheckStats::mean_looseness() const {
  return looseness_count ? looseness_sum / static_cast<double>(looseness_count) : 0.0;
}

std::size_t OracleReport::total_violations() const {
  std::size_t v = 0;
  for (const auto& [name, s] : checks) v += s.violations;
  return v;
}

namespace {

struct Variant {
  InstanceConstraint constraint;
  bool bayesian;
  std::vector<Statement> statements;
};

const std::vector<Variant>& variants() {
  static const std::vector<Variant> v = {
      {InstanceConstraint::none, false,
       {Statement::thm1, Statement::thm2, Statement::cor_ce, Statement::cor_l1,
        Statement::cor_hellinger}},
      {InstanceConstraint::no_shift, false, {Statement::lemma2}},
      {InstanceConstraint::perfect_learning, false, {Statement::lemma1}},
      {InstanceConstraint::task_neighborhood, false, {Statement::cor_eps}},
      {InstanceConstraint::distribution_neighborhood, false, {Statement::cor_eps_dist}},
      {InstanceConstraint::none, true, {Statement::cor_bayesian}},
      {InstanceConstraint::task_neighborhood, true, {Statement::cor_bayes_eps}},
      {InstanceConstraint::distribution_neighborhood, true, {Statement::cor_bayes_eps_dist}},
  };
  return v;
}

using StatsMap = std::map<std::string, CheckStats>;

StatsMap run_instance(const OracleRunConfig& cfg, std::size_t index) {
  StatsMap stats;
  const auto& vs = variants();
  for (std::size_t vi = 0; vi < vs.size(); ++vi) {
    const Variant& v = vs[vi];
    OracleConfig oc;
    oc.max_outcomes = cfg.max_outcomes;
    oc.constraint = v.constraint;
    oc.bayesian = v.bayesian;
    const std::uint64_t seed = derive_seed(cfg.seed, index, vi);
    const OracleInstance inst = generate_instance(seed, oc);

    for (Statement s : v.statements) {
      CheckStats& st = stats[std::string(to_string(s))];
      bool evaluated = false;
      for (double alpha : cfg.alphas) {
        const StatementCheck c = verify_statement(inst, s, alpha);
        if (c.skipped) {
          ++st.skipped;
          continue;
        }
        evaluated = true;
        st.record(c.slack, c.violated, seed, alpha);
      }
      if (evaluated) {
        st.looseness_sum += looseness(inst);
        ++st.looseness_count;
      }
    }
    for (const LemmaCheck& l : check_lemmas(inst)) {
      // Lemma duplicates across variants are pooled by name.
      stats[l.name].record(l.slack, l.slack < -kOracleTolerance, seed, 0.0);
    }
  }
  return stats;
}

StatsMap run_transfer(const OracleRunConfig& cfg, std::size_t index) {
  StatsMap stats;
  const std::uint64_t seed = derive_seed(cfg.seed, index, 1000);
  const OracleInstance inst = generate_instance(seed, OracleConfig{.max_outcomes = cfg.max_outcomes});
  const std::pair<TransferGeometry, const char*> geos[] = {
      {TransferGeometry::positive, "transfer_positive"},
      {TransferGeometry::negative, "transfer_negative"},
  };
  for (const auto& [g, name] : geos) {
    const TransferFamilyResult r =
        transfer_family(inst, derive_seed(seed, static_cast<std::uint64_t>(g), 1), g, cfg.transfer_points);
    CheckStats& st = stats[name];
    for (std::size_t k = 1; k < r.errors.size(); ++k) {
      const double step = r.errors[k] - r.errors[k - 1];
      const double slack = g == TransferGeometry::positive ? -step : step;
      st.record(slack, !(slack > 0.0), seed, r.lambdas[k]);
    }
  }
  return stats;
}

}  // namespace

OracleReport run_oracle(const OracleRunConfig& cfg) {
  if (cfg.alphas.empty()) throw InvalidArgument("run_oracle: alpha grid is empty");
  for (double a : cfg.alphas) {
    if (!(a > 0.0)) throw InvalidArgument("run_oracle: alphas must be > 0");
  }
  const std::size_t total = cfg.instances + cfg.transfer_instances;
  std::vector<StatsMap> parts(total);
  parallel_for(total, cfg.threads, [&](std::size_t i) {
    parts[i] = i < cfg.instances ? run_instance(cfg, i) : run_transfer(cfg, i - cfg.instances);
  });
  OracleReport report;
  report.config = cfg;
  for (const auto& part : parts) {
    for (const auto& [name, s] : part) report.checks[name].merge(s);
  }
  return report;
}

}  // namespace epibound
