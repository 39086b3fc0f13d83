#include "epibound/distributions.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "epibound/errors.hpp"

namespace epibound {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_simplex(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw InvalidDistribution(std::string(what) + ": empty vector");
  double total = 0.0;
  for (double x : v) {
    if (!std::isfinite(x) || x < 0.0) {
      throw InvalidDistribution(std::string(what) + ": entries must be finite and nonnegative");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw InvalidDistribution(std::string(what) + ": entries sum to " +
                              std::to_string(total) + ", not 1");
  }
}

double mixture_cdf(const GaussianMixture& m, double x) {
  double c = 0.0;
  for (std::size_t k = 0; k < m.weights.size(); ++k) {
    c += m.weights[k] * normal_cdf((x - m.means[k]) / m.stddevs[k]);
  }
  return c;
}

double gaussian_log_pdf(double x, double mean, double sd) {
  return normal_log_pdf((x - mean) / sd) - std::log(sd);
}

}  // namespace

// ---------------------------------------------------------------------------
// EventSet
// ---------------------------------------------------------------------------

EventSet EventSet::outcomes(std::vector<std::size_t> indices) {
  std::set<std::size_t> seen(indices.begin(), indices.end());
  if (seen.size() != indices.size()) {
    throw EventMismatch("event: outcome indices must be unique");
  }
  return EventSet(OutcomeSet{std::move(indices)});
}

EventSet EventSet::from_mask(std::uint64_t mask, std::size_t m) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m; ++i) {
    if ((mask >> i) & 1ULL) idx.push_back(i);
  }
  return EventSet(OutcomeSet{std::move(idx)});
}

EventSet EventSet::interval(double lower, double upper) {
  if (!(lower <= upper)) throw EventMismatch("event: interval endpoints out of order");
  return EventSet(Interval{lower, upper});
}

EventSet EventSet::half_line(double upper) { return interval(-kInf, upper); }

// ---------------------------------------------------------------------------
// FirstOrderDistribution
// ---------------------------------------------------------------------------

FOD FOD::categorical(std::vector<double> p) {
  validate_simplex(p, "categorical");
  return FOD(Categorical{std::move(p)});
}

FOD FOD::gaussian(double mean, double stddev) {
  if (!std::isfinite(mean) || !std::isfinite(stddev) || !(stddev > 0.0)) {
    throw InvalidDistribution("gaussian: stddev must be finite and > 0");
  }
  return FOD(Gaussian{mean, stddev});
}

FOD FOD::mixture(std::vector<double> weights, std::vector<double> means,
                 std::vector<double> stddevs) {
  if (weights.size() != means.size() || weights.size() != stddevs.size()) {
    throw InvalidDistribution("mixture: weights, means and stddevs differ in length");
  }
  validate_simplex(weights, "mixture weights");
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (!std::isfinite(means[k]) || !std::isfinite(stddevs[k]) || !(stddevs[k] > 0.0)) {
      throw InvalidDistribution("mixture: component stddev must be finite and > 0");
    }
  }
  return FOD(GaussianMixture{std::move(weights), std::move(means), std::move(stddevs)});
}

SpaceKind FOD::space() const {
  return as_categorical() ? SpaceKind::categorical : SpaceKind::real_line;
}

std::size_t FOD::outcomes() const {
  const auto* c = as_categorical();
  return c ? c->p.size() : 0;
}

double FOD::mass(std::size_t i) const {
  const auto* c = as_categorical();
  if (!c) throw EventMismatch("mass: distribution is not categorical");
  if (i >= c->p.size()) throw EventMismatch("mass: outcome index out of range");
  return c->p[i];
}

double FOD::probability(const EventSet& event) const {
  if (const auto* c = as_categorical()) {
    const auto* set = event.outcome_set();
    if (!set) throw EventMismatch("probability: interval event on a categorical space");
    double total = 0.0;
    for (std::size_t i : set->indices) {
      if (i >= c->p.size()) throw EventMismatch("probability: outcome index out of range");
      total += c->p[i];
    }
    return std::min(total, 1.0);
  }
  const auto* iv = event.interval_set();
  if (!iv) throw EventMismatch("probability: outcome-set event on the real line");
  return std::max(0.0, cdf(iv->upper) - cdf(iv->lower));
}

double FOD::cdf(double x) const {
  return std::visit(
      Overloaded{
          [](const Categorical&) -> double {
            throw EventMismatch("cdf: categorical distribution");
          },
          [x](const Gaussian& g) { return normal_cdf((x - g.mean) / g.stddev); },
          [x](const GaussianMixture& m) { return mixture_cdf(m, x); },
      },
      repr_);
}

double FOD::log_pdf(double x) const {
  return std::visit(
      Overloaded{
          [](const Categorical&) -> double {
            throw EventMismatch("log_pdf: categorical distribution");
          },
          [x](const Gaussian& g) { return gaussian_log_pdf(x, g.mean, g.stddev); },
          [x](const GaussianMixture& m) {
            // Two-pass log-sum-exp without a scratch buffer.
            double top = -kInf;
            for (std::size_t k = 0; k < m.weights.size(); ++k) {
              if (m.weights[k] > 0.0) {
                top = std::max(top, std::log(m.weights[k]) +
                                        gaussian_log_pdf(x, m.means[k], m.stddevs[k]));
              }
            }
            if (!std::isfinite(top)) return top;
            double sum = 0.0;
            for (std::size_t k = 0; k < m.weights.size(); ++k) {
              if (m.weights[k] > 0.0) {
                sum += std::exp(std::log(m.weights[k]) +
                                gaussian_log_pdf(x, m.means[k], m.stddevs[k]) - top);
              }
            }
            return top + std::log(sum);
          },
      },
      repr_);
}

double FOD::pdf(double x) const { return std::exp(log_pdf(x)); }

double FOD::mean() const {
  return std::visit(
      Overloaded{
          [](const Categorical&) -> double {
            throw EventMismatch("mean: categorical distribution");
          },
          [](const Gaussian& g) { return g.mean; },
          [](const GaussianMixture& m) {
            double mu = 0.0;
            for (std::size_t k = 0; k < m.weights.size(); ++k) mu += m.weights[k] * m.means[k];
            return mu;
          },
      },
      repr_);
}

double FOD::variance() const {
  return std::visit(
      Overloaded{
          [](const Categorical&) -> double {
            throw EventMismatch("variance: categorical distribution");
          },
          [](const Gaussian& g) { return g.stddev * g.stddev; },
          [](const GaussianMixture& m) {
            double mu = 0.0;
            double second = 0.0;
            for (std::size_t k = 0; k < m.weights.size(); ++k) {
              mu += m.weights[k] * m.means[k];
              second += m.weights[k] * (m.stddevs[k] * m.stddevs[k] + m.means[k] * m.means[k]);
            }
            return std::max(second - mu * mu, 0.0);
          },
      },
      repr_);
}

double FOD::log_density(double value) const {
  if (const auto* c = as_categorical()) {
    const auto i = static_cast<std::size_t>(value);
    if (value < 0.0 || i >= c->p.size()) return -kInf;
    return c->p[i] > 0.0 ? std::log(c->p[i]) : -kInf;
  }
  return log_pdf(value);
}

bool same_space(const FOD& a, const FOD& b) {
  if (a.space() != b.space()) return false;
  return a.outcomes() == b.outcomes();
}

void require_same_space(const FOD& a, const FOD& b, const char* what) {
  if (!same_space(a, b)) {
    throw EventMismatch(std::string(what) + ": distributions live on different sample spaces");
  }
}

namespace {

bool close_vectors(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

}  // namespace

bool approx_equal(const FOD& a, const FOD& b, double tol) {
  if (a.repr().index() != b.repr().index()) return false;
  if (const auto* ca = a.as_categorical()) {
    return close_vectors(ca->p, b.as_categorical()->p, tol);
  }
  if (const auto* ga = a.as_gaussian()) {
    const auto* gb = b.as_gaussian();
    return std::abs(ga->mean - gb->mean) <= tol && std::abs(ga->stddev - gb->stddev) <= tol;
  }
  const auto* ma = a.as_mixture();
  const auto* mb = b.as_mixture();
  return close_vectors(ma->weights, mb->weights, tol) &&
         close_vectors(ma->means, mb->means, tol) &&
         close_vectors(ma->stddevs, mb->stddevs, tol);
}

// ---------------------------------------------------------------------------
// TaskDistribution
// ---------------------------------------------------------------------------

TaskDistribution TaskDistribution::finite(std::vector<WeightedTask> tasks) {
  if (tasks.empty()) throw InvalidTaskDistribution("task distribution: empty task list");
  std::vector<double> w;
  w.reserve(tasks.size());
  for (const auto& t : tasks) w.push_back(t.weight);
  try {
    validate_simplex(w, "task weights");
  } catch (const InvalidDistribution& e) {
    throw InvalidTaskDistribution(e.what());
  }
  for (const auto& t : tasks) {
    if (!same_space(t.dist, tasks.front().dist)) {
      throw InvalidTaskDistribution("task distribution: tasks live on different sample spaces");
    }
  }
  return TaskDistribution(std::move(tasks));
}

TaskDistribution TaskDistribution::point_mass(FOD task) {
  return finite({WeightedTask{std::move(task), 1.0}});
}

TaskDistribution TaskDistribution::parametric(InverseGammaGaussianTasks spec) {
  if (!(spec.shape > 0.0) || !(spec.rate > 0.0) || !std::isfinite(spec.mean)) {
    throw InvalidTaskDistribution("parametric tasks: shape and rate must be > 0");
  }
  return TaskDistribution(spec);
}

const std::vector<WeightedTask>& TaskDistribution::tasks() const {
  const auto* t = std::get_if<std::vector<WeightedTask>>(&repr_);
  if (!t) throw InvalidTaskDistribution("task distribution is parametric; reify it first");
  return *t;
}

const InverseGammaGaussianTasks& TaskDistribution::parametric_spec() const {
  const auto* p = std::get_if<InverseGammaGaussianTasks>(&repr_);
  if (!p) throw InvalidTaskDistribution("task distribution is finite");
  return *p;
}

SpaceKind TaskDistribution::space() const {
  return is_finite() ? tasks().front().dist.space() : SpaceKind::real_line;
}

std::size_t TaskDistribution::outcomes() const {
  return is_finite() ? tasks().front().dist.outcomes() : 0;
}

TaskDistribution TaskDistribution::reify(const ReificationOptions& options) const {
  if (is_finite()) return *this;
  if (options.components == 0) {
    throw InvalidTaskDistribution("reify: component budget must be >= 1");
  }
  const auto& spec = parametric_spec();
  Rng rng(options.seed);
  std::vector<WeightedTask> tasks;
  tasks.reserve(options.components);
  const double w = 1.0 / static_cast<double>(options.components);
  for (std::size_t k = 0; k < options.components; ++k) {
    const double var = sample_inverse_gamma(rng, spec.shape, spec.rate);
    tasks.push_back({FOD::gaussian(spec.mean, std::sqrt(var)), w});
  }
  return finite(std::move(tasks));
}

bool approx_equal(const TaskDistribution& a, const TaskDistribution& b, double tol) {
  if (!a.is_finite() || !b.is_finite()) return false;
  const auto& ta = a.tasks();
  const auto& tb = b.tasks();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (std::abs(ta[i].weight - tb[i].weight) > tol) return false;
    if (!approx_equal(ta[i].dist, tb[i].dist, tol)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

FOD barycenter(const TaskDistribution& tasks, const ReificationOptions& options) {
  const auto finite = tasks.reify(options);
  const auto& list = finite.tasks();
  if (list.front().dist.space() == SpaceKind::categorical) {
    std::vector<double> p(list.front().dist.outcomes(), 0.0);
    for (const auto& t : list) {
      const auto& q = t.dist.as_categorical()->p;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += t.weight * q[i];
    }
    // The weighted average of simplex points is on the simplex up to rounding.
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (std::abs(total - 1.0) > kNormalizationTolerance) {
      throw NumericalFailure("barycenter: averaged probabilities drifted off the simplex");
    }
    return FOD::categorical(std::move(p));
  }

  std::vector<double> w;
  std::vector<double> mu;
  std::vector<double> sd;
  for (const auto& t : list) {
    if (const auto* g = t.dist.as_gaussian()) {
      w.push_back(t.weight);
      mu.push_back(g->mean);
      sd.push_back(g->stddev);
    } else {
      const auto* m = t.dist.as_mixture();
      for (std::size_t k = 0; k < m->weights.size(); ++k) {
        w.push_back(t.weight * m->weights[k]);
        mu.push_back(m->means[k]);
        sd.push_back(m->stddevs[k]);
      }
    }
  }
  if (w.size() == 1) return FOD::gaussian(mu.front(), sd.front());
  return FOD::mixture(std::move(w), std::move(mu), std::move(sd));
}

double variance_at(const TaskDistribution& tasks, const EventSet& event,
                   const ReificationOptions& options) {
  const auto finite = tasks.reify(options);
  const auto& list = finite.tasks();
  double bary = 0.0;
  std::vector<double> probs;
  probs.reserve(list.size());
  for (const auto& t : list) {
    probs.push_back(t.dist.probability(event));
    bary += t.weight * probs.back();
  }
  double var = 0.0;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const double d = probs[k] - bary;
    var += list[k].weight * d * d;
  }
  return var;
}

std::vector<EventSet> event_family(const TaskDistribution& tasks, const IntervalGrid& grid,
                                   const ReificationOptions& options) {
  std::vector<EventSet> events;
  if (tasks.space() == SpaceKind::categorical) {
    const std::size_t m = tasks.outcomes();
    if (m > kMaxEnumeratedOutcomes) {
      throw InvalidArgument("event_family: exhaustive enumeration limited to " +
                            std::to_string(kMaxEnumeratedOutcomes) + " outcomes");
    }
    const std::uint64_t count = 1ULL << m;
    events.reserve(count);
    for (std::uint64_t mask = 0; mask < count; ++mask) events.push_back(EventSet::from_mask(mask, m));
    return events;
  }
  if (grid.points < 2) throw InvalidArgument("event_family: interval grid needs >= 2 points");
  const FOD bary = barycenter(tasks, options);
  const double mu = bary.mean();
  const double sd = std::sqrt(bary.variance());
  const double lo = mu - grid.span_sd * sd;
  const double step = 2.0 * grid.span_sd * sd / static_cast<double>(grid.points - 1);
  events.reserve(grid.points);
  for (std::size_t k = 0; k < grid.points; ++k) {
    events.push_back(EventSet::half_line(lo + step * static_cast<double>(k)));
  }
  return events;
}

double sup_variance(const TaskDistribution& tasks, const IntervalGrid& grid,
                    const ReificationOptions& options) {
  const auto finite = tasks.reify(options);
  const auto& list = finite.tasks();
  if (finite.space() == SpaceKind::categorical) {
    const std::size_t m = finite.outcomes();
    if (m > kMaxEnumeratedOutcomes) {
      throw InvalidArgument("sup_variance: exhaustive enumeration limited to " +
                            std::to_string(kMaxEnumeratedOutcomes) + " outcomes");
    }
    // Subset sums built incrementally: P_k(mask) = P_k(mask minus lowest bit) + p_k[lowest].
    const std::size_t count = std::size_t{1} << m;
    std::vector<std::vector<double>> subset(list.size(), std::vector<double>(count, 0.0));
    for (std::size_t k = 0; k < list.size(); ++k) {
      const auto& p = list[k].dist.as_categorical()->p;
      for (std::size_t mask = 1; mask < count; ++mask) {
        const std::size_t low = static_cast<std::size_t>(std::countr_zero(mask));
        subset[k][mask] = subset[k][mask & (mask - 1)] + p[low];
      }
    }
    double best = 0.0;
    for (std::size_t mask = 1; mask + 1 < count; ++mask) {
      double bary = 0.0;
      for (std::size_t k = 0; k < list.size(); ++k) bary += list[k].weight * subset[k][mask];
      double var = 0.0;
      for (std::size_t k = 0; k < list.size(); ++k) {
        const double d = subset[k][mask] - bary;
        var += list[k].weight * d * d;
      }
      best = std::max(best, var);
    }
    return best;
  }
  double best = 0.0;
  for (const auto& event : event_family(finite, grid, options)) {
    best = std::max(best, variance_at(finite, event, options));
  }
  return best;
}

double diameter(const TaskDistribution& tasks, const Divergence& tv,
                const ReificationOptions& options) {
  const auto finite = tasks.reify(options);
  const auto& list = finite.tasks();
  double best = 0.0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].weight <= 0.0) continue;
    for (std::size_t j = i + 1; j < list.size(); ++j) {
      if (list[j].weight <= 0.0) continue;
      best = std::max(best, tv(list[i].dist, list[j].dist));
    }
  }
  return best;
}

double first_order_bound(const TaskDistribution& tasks) {
  if (!tasks.is_finite()) return 0.0;
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& t : tasks.tasks()) {
    if (t.weight <= 0.0) continue;  // outside the support
    lo = std::min(lo, t.weight);
    hi = std::max(hi, t.weight);
  }
  return std::max(0.0, std::min(lo, 1.0 - hi));
}

double second_order_bound(const TaskDistribution& tasks) {
  if (!tasks.is_finite() || tasks.space() != SpaceKind::categorical) return 0.0;
  double b = 0.5;
  for (const auto& t : tasks.tasks()) {
    if (t.weight <= 0.0) continue;
    const auto& p = t.dist.as_categorical()->p;
    std::size_t support = 0;
    double min_p = 1.0;
    for (double x : p) {
      if (x > 0.0) {
        ++support;
        min_p = std::min(min_p, x);
      }
    }
    if (support < 2) return 0.0;
    // Smallest nonempty proper subset has mass min_p, largest 1 - min_p.
    b = std::min(b, min_p);
  }
  return b;
}

Boundedness check_boundedness(const TaskDistribution& tasks, double b) {
  if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("check_boundedness: b must lie in (0, 1)");
  return {first_order_bound(tasks) >= b, second_order_bound(tasks) >= b};
}

double draw(const FOD& dist, Rng& rng) {
  return std::visit(
      Overloaded{
          [&rng](const Categorical& c) {
            const double u = uniform01(rng);
            double acc = 0.0;
            std::size_t last = 0;
            for (std::size_t i = 0; i < c.p.size(); ++i) {
              if (c.p[i] <= 0.0) continue;
              last = i;
              acc += c.p[i];
              if (u < acc) return static_cast<double>(i);
            }
            return static_cast<double>(last);
          },
          [&rng](const Gaussian& g) { return g.mean + g.stddev * standard_normal(rng); },
          [&rng](const GaussianMixture& m) {
            const double u = uniform01(rng);
            double acc = 0.0;
            std::size_t chosen = 0;
            for (std::size_t k = 0; k < m.weights.size(); ++k) {
              if (m.weights[k] <= 0.0) continue;
              chosen = k;
              acc += m.weights[k];
              if (u < acc) break;
            }
            return m.means[chosen] + m.stddevs[chosen] * standard_normal(rng);
          },
      },
      dist.repr());
}

std::vector<double> sample(const FOD& dist, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(draw(dist, rng));
  return out;
}

FOD sample_task(const TaskDistribution& tasks, std::uint64_t seed) {
  Rng rng(seed);
  if (!tasks.is_finite()) {
    const auto& spec = tasks.parametric_spec();
    const double var = sample_inverse_gamma(rng, spec.shape, spec.rate);
    return FOD::gaussian(spec.mean, std::sqrt(var));
  }
  const auto& list = tasks.tasks();
  const double u = uniform01(rng);
  double acc = 0.0;
  for (const auto& t : list) {
    acc += t.weight;
    if (u < acc && t.weight > 0.0) return t.dist;
  }
  for (auto it = list.rbegin(); it != list.rend(); ++it) {
    if (it->weight > 0.0) return it->dist;
  }
  return list.back().dist;
}

}  // namespace epibound
