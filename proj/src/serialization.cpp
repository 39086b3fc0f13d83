#include "epibound/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "epibound/errors.hpp"

namespace epibound {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw InvalidArgument((where.empty() ? "/" : where) + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double num_field(const Json& j, const char* key, const std::string& where) {
  return number(field(j, key, where), where + "/" + key);
}

std::optional<double> opt_num(const Json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return number(*it, where + "/" + key);
}

std::size_t count_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(where + "/" + key, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<double> numbers(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "/" + std::to_string(i)));
  return out;
}

std::string string_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_string()) fail(where + "/" + key, "expected a string");
  return v.get<std::string>();
}

// Converts library validation errors into located ones.
template <class F>
auto located(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InvalidArgument&) {
    throw;
  } catch (const Error& e) {
    fail(where, e.what());
  }
}

Json vec2(const Vec2& v) { return Json::array({v(0), v(1)}); }

Vec2 vec2_from(const Json& j, const std::string& where) {
  const auto v = numbers(j, where);
  if (v.size() != 2) fail(where, "expected 2 numbers");
  return Vec2(v[0], v[1]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

Json to_json(const FOD& dist) {
  if (const auto* c = dist.as_categorical()) return Json{{"type", "categorical"}, {"p", c->p}};
  if (const auto* g = dist.as_gaussian()) {
    return Json{{"type", "gaussian"}, {"mean", g->mean}, {"stddev", g->stddev}};
  }
  const auto* m = dist.as_mixture();
  return Json{{"type", "gaussian_mixture"},
              {"weights", m->weights},
              {"means", m->means},
              {"stddevs", m->stddevs}};
}

FOD fod_from_json(const Json& j, const std::string& where) {
  const std::string type = string_field(j, "type", where);
  return located(where, [&] {
    if (type == "categorical") return FOD::categorical(numbers(field(j, "p", where), where + "/p"));
    if (type == "gaussian") {
      return FOD::gaussian(num_field(j, "mean", where), num_field(j, "stddev", where));
    }
    if (type == "gaussian_mixture") {
      return FOD::mixture(numbers(field(j, "weights", where), where + "/weights"),
                          numbers(field(j, "means", where), where + "/means"),
                          numbers(field(j, "stddevs", where), where + "/stddevs"));
    }
    fail(where + "/type", "unknown distribution type '" + type + "'");
  });
}

Json to_json(const TaskDistribution& tasks) {
  if (!tasks.is_finite()) {
    const auto& s = tasks.parametric_spec();
    return Json{{"type", "parametric"},
                {"family", "inverse_gamma_gaussian"},
                {"mean", s.mean},
                {"shape", s.shape},
                {"rate", s.rate}};
  }
  Json list = Json::array();
  for (const auto& t : tasks.tasks()) list.push_back(Json{{"weight", t.weight}, {"dist", to_json(t.dist)}});
  return Json{{"type", "finite_tasks"}, {"tasks", list}};
}

TaskDistribution tasks_from_json(const Json& j, const std::string& where) {
  const std::string type = string_field(j, "type", where);
  if (type == "point_mass") {
    FOD task = fod_from_json(field(j, "task", where), where + "/task");
    return TaskDistribution::point_mass(std::move(task));
  }
  if (type == "parametric") {
    const std::string family = string_field(j, "family", where);
    if (family != "inverse_gamma_gaussian") fail(where + "/family", "unknown family '" + family + "'");
    return located(where, [&] {
      return TaskDistribution::parametric(InverseGammaGaussianTasks{
          num_field(j, "mean", where), num_field(j, "shape", where), num_field(j, "rate", where)});
    });
  }
  if (type != "finite_tasks") fail(where + "/type", "unknown task distribution type '" + type + "'");
  const Json& list = field(j, "tasks", where);
  if (!list.is_array()) fail(where + "/tasks", "expected an array");
  std::vector<WeightedTask> tasks;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string w = where + "/tasks/" + std::to_string(i);
    tasks.push_back({fod_from_json(field(list[i], "dist", w), w + "/dist"), num_field(list[i], "weight", w)});
  }
  return located(where, [&] { return TaskDistribution::finite(std::move(tasks)); });
}

Json to_json(const ModelClass& model) {
  if (const auto* v = std::get_if<std::vector<FOD>>(&model.repr())) {
    Json members = Json::array();
    for (const auto& m : *v) members.push_back(to_json(m));
    return Json{{"type", "explicit"}, {"members", members}};
  }
  if (const auto* c = std::get_if<CategoricalGrid>(&model.repr())) {
    return Json{{"type", "categorical_grid"}, {"outcomes", c->outcomes}, {"resolution", c->resolution}};
  }
  const auto& g = std::get<GaussianGrid>(model.repr());
  return Json{{"type", "gaussian_grid"},   {"mean_lo", g.mean_lo}, {"mean_hi", g.mean_hi},
              {"mean_step", g.mean_step}, {"sd_lo", g.sd_lo},     {"sd_hi", g.sd_hi},
              {"sd_step", g.sd_step}};
}

ModelClass model_from_json(const Json& j, const std::string& where) {
  const std::string type = string_field(j, "type", where);
  if (type == "explicit") {
    const Json& list = field(j, "members", where);
    if (!list.is_array()) fail(where + "/members", "expected an array");
    std::vector<FOD> members;
    for (std::size_t i = 0; i < list.size(); ++i) {
      members.push_back(fod_from_json(list[i], where + "/members/" + std::to_string(i)));
    }
    return located(where, [&] { return ModelClass::explicit_members(std::move(members)); });
  }
  if (type == "categorical_grid") {
    return located(where, [&] {
      return ModelClass::grid(CategoricalGrid{count_field(j, "outcomes", where), count_field(j, "resolution", where)});
    });
  }
  if (type == "gaussian_grid") {
    return located(where, [&] {
      return ModelClass::grid(GaussianGrid{num_field(j, "mean_lo", where), num_field(j, "mean_hi", where),
                                           num_field(j, "mean_step", where), num_field(j, "sd_lo", where),
                                           num_field(j, "sd_hi", where), num_field(j, "sd_step", where)});
    });
  }
  fail(where + "/type", "unknown model class type '" + type + "'");
}

Json to_json(const DivergenceResult& r) {
  Json j{{"value", r.value}, {"method", to_string(r.method)}};
  if (r.mc_samples) j["mc_samples"] = *r.mc_samples;
  if (r.stderr_estimate) j["stderr"] = *r.stderr_estimate;
  if (r.kl_method) j["kl_method"] = to_string(*r.kl_method);
  if (r.clamped) j["clamped"] = true;
  return j;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

Json to_json(const BoundReport& r) {
  Json extras = Json::object();
  for (const auto& [k, v] : r.extras) extras[k] = v;
  return Json{{"statement_id", to_string(r.statement)},
              {"alpha", r.alpha},
              {"B", r.B},
              {"C", r.C},
              {"D", r.D},
              {"D_learner", r.D_learner},
              {"margin", r.margin},
              {"delta", r.delta},
              {"extras", extras}};
}

BoundReport report_from_json(const Json& j, const std::string& where) {
  BoundReport r;
  r.statement = located(where, [&] { return statement_from_string(string_field(j, "statement_id", where)); });
  r.alpha = num_field(j, "alpha", where);
  r.B = num_field(j, "B", where);
  r.C = num_field(j, "C", where);
  r.D = num_field(j, "D", where);
  r.D_learner = num_field(j, "D_learner", where);
  r.margin = num_field(j, "margin", where);
  r.delta = num_field(j, "delta", where);
  if (auto it = j.find("extras"); it != j.end()) {
    if (!it->is_object()) fail(where + "/extras", "expected an object");
    for (const auto& [k, v] : it->items()) r.extras[k] = number(v, where + "/extras/" + k);
  }
  return r;
}

void write_reports_csv(std::ostream& out, const std::vector<BoundReport>& reports) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  auto extra = [&](const BoundReport& r, const char* k) {
    auto it = r.extras.find(k);
    return it == r.extras.end() ? std::string() : fmt(it->second);
  };
  out << "statement_id,alpha,B,C,D,D_learner,margin,delta,epsilon,b_S,b_T\n";
  for (const auto& r : reports) {
    out << to_string(r.statement) << ',' << fmt(r.alpha) << ',' << fmt(r.B) << ',' << fmt(r.C) << ','
        << fmt(r.D) << ',' << fmt(r.D_learner) << ',' << fmt(r.margin) << ',' << fmt(r.delta) << ','
        << extra(r, "epsilon") << ',' << extra(r, "b_S") << ',' << extra(r, "b_T") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Instance and setup files
// ---------------------------------------------------------------------------

Json to_json(const BoundInputs& in) {
  Json j{{"model", to_json(in.model)},
         {"predictor", to_json(in.predictor)},
         {"source", to_json(in.source)},
         {"target", to_json(in.target)},
         {"alpha", in.alpha}};
  if (in.epsilon) j["epsilon"] = *in.epsilon;
  if (in.b_S) j["b_S"] = *in.b_S;
  if (in.b_T) j["b_T"] = *in.b_T;
  if (in.b_pred) j["b_pred"] = *in.b_pred;
  if (in.param_tv) j["param_tv"] = *in.param_tv;
  if (in.params) {
    j["params"] = Json{{"posterior", to_json(in.params->posterior)}, {"best", to_json(in.params->best)}};
  }
  if (in.allow_unbounded_tasks) j["allow_unbounded_tasks"] = true;
  j["grid"] = Json{{"points", in.grid.points}, {"span_sd", in.grid.span_sd}};
  j["reify"] = Json{{"components", in.reify.components}, {"seed", in.reify.seed}};
  return j;
}

BoundInputs inputs_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  BoundInputs in{
      .model = model_from_json(field(j, "model", where), where + "/model"),
      .predictor = fod_from_json(field(j, "predictor", where), where + "/predictor"),
      .source = tasks_from_json(field(j, "source", where), where + "/source"),
      .target = tasks_from_json(field(j, "target", where), where + "/target"),
      .alpha = opt_num(j, "alpha", where).value_or(0.1),
  };
  in.epsilon = opt_num(j, "epsilon", where);
  in.b_S = opt_num(j, "b_S", where);
  in.b_T = opt_num(j, "b_T", where);
  in.b_pred = opt_num(j, "b_pred", where);
  in.param_tv = opt_num(j, "param_tv", where);
  if (auto it = j.find("params"); it != j.end()) {
    const std::string w = where + "/params";
    in.params = ParameterDistributions{fod_from_json(field(*it, "posterior", w), w + "/posterior"),
                                       fod_from_json(field(*it, "best", w), w + "/best")};
  }
  if (auto it = j.find("allow_unbounded_tasks"); it != j.end()) {
    if (!it->is_boolean()) fail(where + "/allow_unbounded_tasks", "expected a boolean");
    in.allow_unbounded_tasks = it->get<bool>();
  }
  if (auto it = j.find("grid"); it != j.end()) {
    in.grid.points = count_field(*it, "points", where + "/grid");
    in.grid.span_sd = num_field(*it, "span_sd", where + "/grid");
  }
  if (auto it = j.find("reify"); it != j.end()) {
    in.reify.components = count_field(*it, "components", where + "/reify");
    in.reify.seed = field(*it, "seed", where + "/reify").get<std::uint64_t>();
  }
  return in;
}

Json instance_to_json(const OracleInstance& instance, double alpha) {
  Json j = to_json(bound_inputs(instance, alpha));
  j["instance_seed"] = instance.seed;
  j["constraint"] = to_string(instance.constraint);
  return j;
}

VerifySetup setup_from_json(const Json& j) {
  VerifySetup s{inputs_from_json(j), Statement::thm1};
  s.statement = located("/statement", [&] { return statement_from_string(string_field(j, "statement", "")); });
  if (!j.contains("alpha")) fail("", "missing field 'alpha'");
  return s;
}

// ---------------------------------------------------------------------------
// Oracle report
// ---------------------------------------------------------------------------

Json to_json(const OracleRunConfig& c) {
  return Json{{"instances", c.instances},
              {"seed", c.seed},
              {"alphas", c.alphas},
              {"max_outcomes", c.max_outcomes},
              {"transfer_instances", c.transfer_instances},
              {"transfer_points", c.transfer_points}};
}

Json to_json(const CheckStats& s) {
  Json j{{"trials", s.trials},       {"skipped", s.skipped},     {"violations", s.violations},
         {"min_slack", s.min_slack}, {"max_slack", s.max_slack}};
  if (s.looseness_count > 0) {
    j["mean_looseness"] = s.mean_looseness();
    j["looseness_instances"] = s.looseness_count;
  }
  if (s.violations > 0) {
    j["worst"] = Json{{"excess", s.worst_excess}, {"instance_seed", s.worst_seed}, {"alpha", s.worst_alpha}};
  }
  return j;
}

Json to_json(const OracleReport& r) {
  Json checks = Json::object();
  for (const auto& [name, s] : r.checks) checks[name] = to_json(s);
  return Json{{"version", kVersion},
              {"config", to_json(r.config)},
              {"total_violations", r.total_violations()},
              {"checks", checks}};
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

Json to_json(const NIGModel& m) {
  return Json{{"beta0", vec2(m.beta0)}, {"sigma0_sq", m.sigma0_sq}, {"alpha0", m.alpha0}, {"delta0", m.delta0}};
}

NIGModel nig_from_json(const Json& j, const std::string& where) {
  NIGModel m;
  if (auto it = j.find("beta0"); it != j.end()) m.beta0 = vec2_from(*it, where + "/beta0");
  m.sigma0_sq = opt_num(j, "sigma0_sq", where).value_or(m.sigma0_sq);
  m.alpha0 = opt_num(j, "alpha0", where).value_or(m.alpha0);
  m.delta0 = opt_num(j, "delta0", where).value_or(m.delta0);
  return m;
}

Json to_json(const ExperimentConfig& c) {
  return Json{{"scenario", to_string(c.scenario)},
              {"beta_S", vec2(c.beta_S)},
              {"beta_T", vec2(c.beta_T)},
              {"ig_source", Json{{"shape", c.ig_source.shape}, {"rate", c.ig_source.rate}}},
              {"ig_target", Json{{"shape", c.ig_target.shape}, {"rate", c.ig_target.rate}}},
              {"epsilon_grid", c.epsilon_grid},
              {"n_grid", c.n_grid},
              {"sims", c.sims},
              {"kl_samples", c.kl_samples},
              {"barycenter_components", c.barycenter_components},
              {"neighborhood_tasks", c.neighborhood_tasks},
              {"mass_radius", c.mass_radius},
              {"target_xi", vec2(c.target_xi)},
              {"model", to_json(c.model)},
              {"noise_policy", c.noise_policy == NoiseVariancePolicy::plug_in ? "plug_in" : "marginal_student_t"},
              {"common_random_numbers", c.common_random_numbers},
              {"master_seed", c.master_seed},
              {"timing", c.timing}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  const std::string w;
  if (!j.is_object()) fail(w, "expected an object");
  ExperimentConfig c;
  if (auto it = j.find("scenario"); it != j.end()) {
    c = scenario_config(located("/scenario", [&] { return scenario_from_string(string_field(j, "scenario", w)); }));
  }
  if (auto it = j.find("beta_S"); it != j.end()) c.beta_S = vec2_from(*it, "/beta_S");
  if (auto it = j.find("beta_T"); it != j.end()) c.beta_T = vec2_from(*it, "/beta_T");
  if (auto it = j.find("ig_source"); it != j.end()) {
    c.ig_source = {num_field(*it, "shape", "/ig_source"), num_field(*it, "rate", "/ig_source")};
  }
  if (auto it = j.find("ig_target"); it != j.end()) {
    c.ig_target = {num_field(*it, "shape", "/ig_target"), num_field(*it, "rate", "/ig_target")};
  }
  if (auto it = j.find("epsilon_grid"); it != j.end()) c.epsilon_grid = numbers(*it, "/epsilon_grid");
  if (auto it = j.find("n_grid"); it != j.end()) {
    c.n_grid.clear();
    for (double v : numbers(*it, "/n_grid")) {
      if (!(v >= 0.0) || v != std::floor(v)) fail("/n_grid", "expected non-negative integers");
      c.n_grid.push_back(static_cast<std::size_t>(v));
    }
  }
  if (j.contains("sims")) c.sims = count_field(j, "sims", w);
  if (j.contains("kl_samples")) c.kl_samples = count_field(j, "kl_samples", w);
  if (j.contains("barycenter_components")) c.barycenter_components = count_field(j, "barycenter_components", w);
  if (j.contains("neighborhood_tasks")) c.neighborhood_tasks = count_field(j, "neighborhood_tasks", w);
  c.mass_radius = opt_num(j, "mass_radius", w).value_or(c.mass_radius);
  if (auto it = j.find("target_xi"); it != j.end()) c.target_xi = vec2_from(*it, "/target_xi");
  if (auto it = j.find("model"); it != j.end()) c.model = nig_from_json(*it, "/model");
  if (auto it = j.find("noise_policy"); it != j.end()) {
    const std::string p = string_field(j, "noise_policy", w);
    if (p == "plug_in") {
      c.noise_policy = NoiseVariancePolicy::plug_in;
    } else if (p == "marginal_student_t") {
      c.noise_policy = NoiseVariancePolicy::marginal_student_t;
    } else {
      fail("/noise_policy", "unknown policy '" + p + "'");
    }
  }
  if (auto it = j.find("common_random_numbers"); it != j.end()) {
    if (!it->is_boolean()) fail("/common_random_numbers", "expected a boolean");
    c.common_random_numbers = it->get<bool>();
  }
  if (auto it = j.find("master_seed"); it != j.end()) {
    if (!it->is_number_unsigned()) fail("/master_seed", "expected a non-negative integer");
    c.master_seed = it->get<std::uint64_t>();
  }
  if (auto it = j.find("timing"); it != j.end()) {
    if (!it->is_boolean()) fail("/timing", "expected a boolean");
    c.timing = it->get<bool>();
  }
  located("", [&] { c.validate(); return 0; });
  return c;
}

Json sidecar_json(const ExperimentResult& result) {
  Json groups = Json::array();
  const bool by_eps = result.config.scenario == Scenario::neighborhood;
  for (const auto& g : summarize(result)) {
    Json row{{by_eps ? "epsilon" : "n", g.key},
             {"count", g.count},
             {"mean_epistemic_error", g.mean_error},
             {"stderr_epistemic_error", g.stderr_error},
             {"mean_C", g.mean_C}};
    if (!by_eps) row["mean_looseness"] = g.mean_looseness;
    row["spearman_posterior_mass_error"] = std::isfinite(g.mass_error_spearman) ? Json(g.mass_error_spearman) : Json();
    groups.push_back(row);
  }
  Json dropped = Json::array();
  for (const auto& d : result.dropped) {
    dropped.push_back(Json{{"grid_index", d.grid_index}, {"sim", d.sim}, {"reason", d.reason}});
  }
  return Json{{"version", kVersion},
              {"config", to_json(result.config)},
              {"methods",
               Json{{"epistemic_error", "pinsker_upper"},
                    {"C", "pinsker_upper"},
                    {"D", "pinsker_upper"},
                    {"kl_method", "monte_carlo"},
                    {"kl_samples", result.config.kl_samples}}},
              {"rows", result.records.size()},
              {"dropped", dropped},
              {"groups", groups}};
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

Json parse_json(const std::string& text, const std::string& source_name) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw InvalidArgument(source_name + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": malformed JSON");
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace epibound
