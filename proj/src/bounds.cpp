#include "epibound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epibound/divergences.hpp"
#include "epibound/errors.hpp"

namespace epibound {

namespace {

constexpr double kExactTol = 1e-12;

// Visits compositions of `resolution` into `outcomes` parts in lexicographic
// order; stops when visit returns false.
bool enumerate_compositions(std::size_t outcomes, std::size_t resolution,
                            const std::function<bool(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> parts(outcomes, 0);
  std::function<bool(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t left) {
    if (pos + 1 == outcomes) {
      parts[pos] = left;
      return visit(parts);
    }
    for (std::size_t k = 0; k <= left; ++k) {
      parts[pos] = k;
      if (!rec(pos + 1, left - k)) return false;
    }
    return true;
  };
  return rec(0, resolution);
}

FOD grid_member(const std::vector<std::size_t>& parts, std::size_t resolution) {
  std::vector<double> p(parts.size());
  const double r = static_cast<double>(resolution);
  for (std::size_t i = 0; i < parts.size(); ++i) p[i] = static_cast<double>(parts[i]) / r;
  return FOD::categorical(std::move(p));
}

std::size_t axis_count(double lo, double hi, double step) {
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return std::round(r);
}

void validate(const CategoricalGrid& g) {
  if (g.outcomes < 2) throw InvalidModelClass("categorical grid: need at least 2 outcomes");
  if (g.resolution < 1) throw InvalidModelClass("categorical grid: resolution must be >= 1");
}

void validate(const GaussianGrid& g) {
  if (!(g.mean_step > 0.0) || !(g.sd_step > 0.0) || !(g.mean_hi >= g.mean_lo) ||
      !(g.sd_hi >= g.sd_lo) || !(g.sd_lo > 0.0)) {
    throw InvalidModelClass("gaussian grid: need positive steps, lo <= hi and sd_lo > 0");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelClass
// ---------------------------------------------------------------------------

ModelClass ModelClass::explicit_members(std::vector<FOD> members) {
  if (members.empty()) throw InvalidModelClass("model class: no members");
  for (const auto& m : members) {
    if (!same_space(m, members.front())) {
      throw InvalidModelClass("model class: members live on different sample spaces");
    }
  }
  return ModelClass(std::move(members));
}

ModelClass ModelClass::grid(CategoricalGrid g) {
  validate(g);
  return ModelClass(g);
}

ModelClass ModelClass::grid(GaussianGrid g) {
  validate(g);
  return ModelClass(g);
}

std::size_t ModelClass::size() const {
  if (const auto* v = std::get_if<std::vector<FOD>>(&repr_)) return v->size();
  if (const auto* c = std::get_if<CategoricalGrid>(&repr_)) {
    return static_cast<std::size_t>(binomial(c->resolution + c->outcomes - 1, c->outcomes - 1));
  }
  const auto& g = std::get<GaussianGrid>(repr_);
  return axis_count(g.mean_lo, g.mean_hi, g.mean_step) * axis_count(g.sd_lo, g.sd_hi, g.sd_step);
}

FOD ModelClass::member(std::size_t index) const {
  if (index >= size()) throw InvalidArgument("model class: member index out of range");
  if (const auto* v = std::get_if<std::vector<FOD>>(&repr_)) return (*v)[index];
  if (const auto* c = std::get_if<CategoricalGrid>(&repr_)) {
    std::size_t i = 0;
    std::vector<std::size_t> found;
    enumerate_compositions(c->outcomes, c->resolution, [&](const auto& parts) {
      if (i++ == index) {
        found = parts;
        return false;
      }
      return true;
    });
    return grid_member(found, c->resolution);
  }
  const auto& g = std::get<GaussianGrid>(repr_);
  const std::size_t nm = axis_count(g.mean_lo, g.mean_hi, g.mean_step);
  return FOD::gaussian(g.mean_lo + static_cast<double>(index % nm) * g.mean_step,
                       g.sd_lo + static_cast<double>(index / nm) * g.sd_step);
}

void ModelClass::for_each(const std::function<void(std::size_t, const FOD&)>& visit) const {
  if (const auto* v = std::get_if<std::vector<FOD>>(&repr_)) {
    for (std::size_t i = 0; i < v->size(); ++i) visit(i, (*v)[i]);
    return;
  }
  if (const auto* c = std::get_if<CategoricalGrid>(&repr_)) {
    std::size_t i = 0;
    enumerate_compositions(c->outcomes, c->resolution, [&](const auto& parts) {
      visit(i++, grid_member(parts, c->resolution));
      return true;
    });
    return;
  }
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) visit(i, member(i));
}

std::optional<std::size_t> ModelClass::find(const FOD& dist, double tol) const {
  std::optional<std::size_t> hit;
  for_each([&](std::size_t i, const FOD& m) {
    if (!hit && approx_equal(m, dist, tol)) hit = i;
  });
  return hit;
}

// ---------------------------------------------------------------------------
// Terms
// ---------------------------------------------------------------------------

BestApproximation best_approximation(const ModelClass& model, const FOD& target) {
  std::optional<BestApproximation> best;
  model.for_each([&](std::size_t i, const FOD& m) {
    const double d = tv_exact(m, target);
    if (!best || d < best->bias) best = BestApproximation{m, i, d};
  });
  if (!best) throw InvalidModelClass("best_approximation: empty model class");
  return *best;
}

double convergence_gap(const FOD& predictor, const FOD& best) { return tv_exact(predictor, best); }

double distribution_shift(const TaskDistribution& source, const TaskDistribution& target,
                          const ReificationOptions& options) {
  return tv_exact(barycenter(source, options), barycenter(target, options));
}

double distribution_shift_learner(const FOD& best, const FOD& target_bary, double bias) {
  return tv_exact(best, target_bary) - bias;
}

double epistemic_error(const FOD& predictor, const FOD& target_task) {
  return tv_exact(predictor, target_task);
}

double chebyshev_delta(const TaskDistribution& tasks, double alpha, const IntervalGrid& grid,
                       const ReificationOptions& options) {
  if (!(alpha > 0.0)) throw InvalidArgument("chebyshev_delta: alpha must be > 0");
  return sup_variance(tasks, grid, options) / (alpha * alpha);
}

double task_distribution_tv(const TaskDistribution& a, const TaskDistribution& b) {
  if (!a.is_finite() || !b.is_finite()) {
    throw InvalidTaskDistribution("task_distribution_tv: finite task distributions required");
  }
  // Merged support with signed weight differences.
  std::vector<FOD> support;
  std::vector<double> diff;
  auto add = [&](const WeightedTask& t, double sign) {
    for (std::size_t i = 0; i < support.size(); ++i) {
      if (approx_equal(support[i], t.dist)) {
        diff[i] += sign * t.weight;
        return;
      }
    }
    support.push_back(t.dist);
    diff.push_back(sign * t.weight);
  };
  for (const auto& t : a.tasks()) add(t, 1.0);
  for (const auto& t : b.tasks()) add(t, -1.0);
  double s = 0.0;
  for (double d : diff) s += std::abs(d);
  return std::min(0.5 * s, 1.0);
}

double task_neighborhood_radius(const TaskDistribution& source, const TaskDistribution& target) {
  if (!source.is_finite() || !target.is_finite()) {
    throw InvalidTaskDistribution("task_neighborhood_radius: finite task distributions required");
  }
  double radius = 0.0;
  for (const auto& t : target.tasks()) {
    if (t.weight <= 0.0) continue;
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& s : source.tasks()) {
      if (s.weight <= 0.0) continue;
      nearest = std::min(nearest, tv_exact(t.dist, s.dist));
    }
    radius = std::max(radius, nearest);
  }
  return radius;
}

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

std::string_view to_string(Statement s) {
  switch (s) {
    case Statement::lemma1: return "lemma1";
    case Statement::lemma2: return "lemma2";
    case Statement::thm1: return "thm1";
    case Statement::thm2: return "thm2";
    case Statement::cor_bayesian: return "cor_bayesian";
    case Statement::cor_eps: return "cor_eps";
    case Statement::cor_eps_dist: return "cor_eps_dist";
    case Statement::cor_bayes_eps: return "cor_bayes_eps";
    case Statement::cor_bayes_eps_dist: return "cor_bayes_eps_dist";
    case Statement::cor_ce: return "cor_ce";
    case Statement::cor_l1: return "cor_l1";
    case Statement::cor_hellinger: return "cor_hellinger";
  }
  return "unknown";
}

Statement statement_from_string(std::string_view id) {
  for (Statement s : kAllStatements) {
    if (to_string(s) == id) return s;
  }
  throw InvalidArgument("unknown statement id '" + std::string(id) + "'");
}

namespace {

bool is_bayesian(Statement s) {
  return s == Statement::cor_bayesian || s == Statement::cor_bayes_eps ||
         s == Statement::cor_bayes_eps_dist;
}

bool is_neighborhood(Statement s) {
  return s == Statement::cor_eps || s == Statement::cor_bayes_eps;
}

double get_extra(const BoundReport& r, const char* key) {
  auto it = r.extras.find(key);
  if (it == r.extras.end()) {
    throw InvalidArgument(std::string("bound report: missing extra '") + key + "'");
  }
  return it->second;
}

double min_support_probability(const FOD& p) {
  double b = 1.0;
  for (double x : p.as_categorical()->p) {
    if (x > 0.0) b = std::min(b, x);
  }
  return b;
}

void require_second_order(const TaskDistribution& tasks, Assumption which, const char* who,
                          const BoundInputs& in, BoundReport& report) {
  const double b = second_order_bound(tasks);
  report.extras[which == Assumption::second_order_bounded_source ? "b2_source" : "b2_target"] = b;
  if (b > 0.0) return;
  if (in.allow_unbounded_tasks) {
    report.extras["unbounded_tasks"] = 1.0;
    return;
  }
  throw PreconditionViolated(which, std::string(who) + " task distribution is not second-order bounded");
}

}  // namespace

BoundReport evaluate_bound(Statement statement, const BoundInputs& in) {
  if (!(in.alpha > 0.0)) throw InvalidArgument("evaluate_bound: alpha must be > 0");
  if (in.source.space() != in.target.space() || in.source.outcomes() != in.target.outcomes()) {
    throw EventMismatch("evaluate_bound: source and target live on different sample spaces");
  }

  const TaskDistribution source = in.source.reify(in.reify);
  const TaskDistribution target = in.target.reify(in.reify);
  const FOD bary_s = barycenter(source);
  const FOD bary_t = barycenter(target);
  require_same_space(in.predictor, bary_s, "evaluate_bound: predictor");

  BoundReport r;
  r.statement = statement;
  r.alpha = in.alpha;

  const BestApproximation best = best_approximation(in.model, bary_s);
  require_same_space(best.member, bary_s, "evaluate_bound: model class");
  r.B = best.bias;
  r.C = convergence_gap(in.predictor, best.member);
  r.D = tv_exact(bary_s, bary_t);
  r.D_learner = distribution_shift_learner(best.member, bary_t, r.B);

  if (!is_bayesian(statement) && !in.model.find(in.predictor)) {
    throw PreconditionViolated(Assumption::predictor_in_model,
                               "predictor is not a member of the model class");
  }

  const double sup_var_t = sup_variance(target, in.grid);
  r.extras["sup_var_target"] = sup_var_t;
  const double a2 = in.alpha * in.alpha;

  switch (statement) {
    case Statement::lemma1:
    case Statement::lemma2: {
      require_second_order(source, Assumption::second_order_bounded_source, "source", in, r);
      if (r.D > kExactTol) {
        throw PreconditionViolated(Assumption::no_shift,
                                   "source and target barycenters differ (D = " +
                                       std::to_string(r.D) + ")");
      }
      if (statement == Statement::lemma1 && tv_exact(in.predictor, bary_s) > kExactTol) {
        throw PreconditionViolated(Assumption::perfect_learning,
                                   "predictor differs from the source barycenter");
      }
      r.delta = sup_var_t / a2;
      break;
    }
    case Statement::thm1:
    case Statement::thm2:
    case Statement::cor_l1:
    case Statement::cor_hellinger:
    case Statement::cor_bayesian:
      require_second_order(target, Assumption::second_order_bounded_target, "target", in, r);
      r.delta = sup_var_t / a2;
      break;
    case Statement::cor_ce: {
      require_second_order(target, Assumption::second_order_bounded_target, "target", in, r);
      if (in.predictor.space() != SpaceKind::categorical) {
        throw PreconditionViolated(Assumption::finite_sample_space,
                                   "cross-entropy bound needs a finite sample space");
      }
      const double b_pred = in.b_pred ? *in.b_pred : min_support_probability(in.predictor);
      const auto& p = in.predictor.as_categorical()->p;
      const bool full = std::all_of(p.begin(), p.end(), [&](double x) { return x >= b_pred; });
      if (!(b_pred > 0.0) || !full) {
        throw PreconditionViolated(Assumption::bounded_predictor,
                                   "predictor must give every outcome at least b_pred > 0");
      }
      double e = 0.0;
      for (const auto& t : target.tasks()) e += t.weight * entropy(t.dist);
      r.extras["b_pred"] = b_pred;
      r.extras["entropy_E"] = e;
      r.delta = sup_var_t / a2;
      break;
    }
    case Statement::cor_eps:
    case Statement::cor_eps_dist:
    case Statement::cor_bayes_eps:
    case Statement::cor_bayes_eps_dist: {
      if (!in.epsilon) {
        throw PreconditionViolated(Assumption::missing_input, "epsilon is required");
      }
      const double eps = *in.epsilon;
      if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("epsilon must lie in (0, 1)");
      const double b_s_avail = std::min(first_order_bound(source), second_order_bound(source));
      const double b_t_avail = first_order_bound(target);
      const double b_s = in.b_S ? *in.b_S : b_s_avail;
      const double b_t = in.b_T ? *in.b_T : b_t_avail;
      if (!(b_s > 0.0) || b_s >= 1.0 || !check_boundedness(source, b_s).first_order) {
        throw PreconditionViolated(Assumption::first_order_bounded_source,
                                   "source is not first-order b_S-bounded");
      }
      if (!check_boundedness(source, b_s).second_order) {
        throw PreconditionViolated(Assumption::second_order_bounded_source,
                                   "source is not second-order b_S-bounded");
      }
      if (!(b_t > 0.0) || b_t >= 1.0 || !check_boundedness(target, b_t).first_order) {
        throw PreconditionViolated(Assumption::first_order_bounded_target,
                                   "target is not first-order b_T-bounded");
      }
      const double sup_var_s = sup_variance(source, in.grid);
      r.extras["epsilon"] = eps;
      r.extras["b_S"] = b_s;
      r.extras["b_T"] = b_t;
      r.extras["sup_var_source"] = sup_var_s;
      const double scale = (1.0 - b_t) / (b_s * a2);
      if (is_neighborhood(statement)) {
        const double radius = task_neighborhood_radius(source, target);
        r.extras["neighborhood_radius"] = radius;
        if (radius > eps + kExactTol) {
          throw PreconditionViolated(Assumption::task_neighborhood,
                                     "a target task lies farther than epsilon from every source task");
        }
        const double diam = diameter(source, tv_divergence());
        r.extras["diam"] = diam;
        r.delta = scale * (sup_var_s + (diam + eps) * (diam + eps));
      } else {
        const double dist = task_distribution_tv(source, target);
        r.extras["task_distribution_tv"] = dist;
        if (dist > eps + kExactTol) {
          throw PreconditionViolated(Assumption::distribution_neighborhood,
                                     "source and target task distributions are farther than epsilon");
        }
        r.delta = scale * (sup_var_s + eps * eps);
      }
      break;
    }
  }

  if (is_bayesian(statement)) {
    double ptv = 0.0;
    if (in.param_tv) {
      ptv = *in.param_tv;
    } else if (in.params) {
      ptv = tv_exact(in.params->posterior, in.params->best);
    } else {
      throw PreconditionViolated(Assumption::parameter_distributions,
                                 "posterior and best parameter distributions are required");
    }
    r.extras["param_tv"] = ptv;
  }

  r.margin = recompute_margin(r);
  return r;
}

double recompute_margin(const BoundReport& r) {
  const double full = r.alpha + r.B + r.C + r.D;
  switch (r.statement) {
    case Statement::lemma1: return r.alpha;
    case Statement::lemma2: return r.alpha + r.B + r.C;
    case Statement::thm1:
    case Statement::cor_eps:
    case Statement::cor_eps_dist:
    case Statement::cor_hellinger: return full;
    case Statement::thm2: return r.alpha + r.B + r.C + r.D_learner;
    case Statement::cor_bayesian:
    case Statement::cor_bayes_eps:
    case Statement::cor_bayes_eps_dist:
      return r.alpha + r.B + get_extra(r, "param_tv") + r.D;
    case Statement::cor_ce:
      return 2.0 / get_extra(r, "b_pred") * full * full + get_extra(r, "entropy_E");
    case Statement::cor_l1: return 2.0 * full;
  }
  return full;
}

double statement_loss(Statement statement, const FOD& predictor, const FOD& target_task) {
  switch (statement) {
    case Statement::cor_l1: return l1_distance(predictor, target_task);
    case Statement::cor_hellinger: return hellinger_sq(predictor, target_task);
    case Statement::cor_ce: return cross_entropy(target_task, predictor);
    default: return tv_exact(predictor, target_task);
  }
}

double margin_for_task(const BoundReport& report, const FOD& target_task) {
  if (report.statement != Statement::cor_ce) return report.margin;
  const double full = report.alpha + report.B + report.C + report.D;
  return 2.0 / get_extra(report, "b_pred") * full * full + entropy(target_task);
}

bool exceeds_margin(const BoundReport& report, const FOD& predictor, const FOD& target_task) {
  return statement_loss(report.statement, predictor, target_task) >=
         margin_for_task(report, target_task) - kExactTol;
}

}  // namespace epibound
