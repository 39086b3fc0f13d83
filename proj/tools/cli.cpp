#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "epibound/errors.hpp"
#include "epibound/experiments.hpp"
#include "epibound/oracle.hpp"
#include "epibound/serialization.hpp"

namespace fs = std::filesystem;

namespace epibound::cli {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

// Output location after the environment override.
fs::path out_dir(const std::string& dir) {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return fs::path(env);
  return fs::path(dir.empty() ? "." : dir);
}

fs::path out_file(const std::string& path) {
  const fs::path p(path);
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return fs::path(env) / p.filename();
  return p;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
  if (!f) throw Error("failed writing " + path.string());
}

// Manifest for a run: canonical arguments (every default spelled out) plus
// the resolved configuration and output files.
void write_manifest(const fs::path& path, const std::vector<std::string>& args, std::uint64_t seed,
                    const Json& config, const std::vector<std::string>& outputs) {
  Json m{{"tool", "epibound"},
         {"version", kVersion},
         {"args", args},
         {"master_seed", seed},
         {"config", config},
         {"outputs", outputs}};
  write_file(path, dump(m));
}

struct Globals {
  unsigned threads = 0;
};

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

struct OracleArgs {
  std::size_t instances = 10000;
  std::size_t max_outcomes = 6;
  std::uint64_t seed = 1;
  std::string alphas = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5";
  std::size_t transfer_instances = 100;
  std::string out = "oracle_report.json";
};

int cmd_oracle(const OracleArgs& a, const Globals& g, std::ostream& out) {
  OracleRunConfig cfg;
  cfg.instances = a.instances;
  cfg.max_outcomes = a.max_outcomes;
  cfg.seed = a.seed;
  cfg.alphas = parse_number_list(a.alphas);
  cfg.transfer_instances = a.transfer_instances;
  cfg.threads = g.threads;
  if (cfg.max_outcomes < 2 || cfg.max_outcomes > kMaxEnumeratedOutcomes) {
    throw InvalidArgument("--max-outcomes must lie in [2, 12]");
  }
  const OracleReport report = run_oracle(cfg);

  const fs::path path = out_file(a.out);
  write_file(path, dump(to_json(report)));
  const std::vector<std::string> args = {
      "oracle", "--instances", std::to_string(a.instances), "--max-outcomes", std::to_string(a.max_outcomes),
      "--seed", std::to_string(a.seed), "--alphas", join(cfg.alphas), "--transfer-instances",
      std::to_string(a.transfer_instances), "--out", a.out};
  write_manifest(fs::path(path.string() + ".manifest.json"), args, a.seed, to_json(cfg),
                 {path.filename().string()});

  out << std::left << std::setw(22) << "check" << std::right << std::setw(10) << "trials" << std::setw(10)
      << "skipped" << std::setw(12) << "violations" << std::setw(14) << "min_slack" << std::setw(14)
      << "looseness" << '\n';
  for (const auto& [name, s] : report.checks) {
    out << std::left << std::setw(22) << name << std::right << std::setw(10) << s.trials << std::setw(10)
        << s.skipped << std::setw(12) << s.violations << std::setw(14) << std::setprecision(4) << s.min_slack
        << std::setw(14);
    if (s.looseness_count) {
      out << s.mean_looseness();
    } else {
      out << "-";
    }
    out << '\n';
  }
  out << "total violations: " << report.total_violations() << '\n';
  return report.total_violations() == 0 ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------
// bound
// ---------------------------------------------------------------------------

struct BoundArgs {
  std::string statement;
  std::string instance;
  double alpha = 0.1;
  std::optional<double> epsilon, b_S, b_T, b_pred;
  std::string out = "bound_report.json";
  std::string csv;
};

int cmd_bound(const BoundArgs& a, std::ostream& out) {
  const Statement statement = statement_from_string(a.statement);
  BoundInputs in = inputs_from_json(read_json_file(a.instance));
  in.alpha = a.alpha;
  if (a.epsilon) in.epsilon = a.epsilon;
  if (a.b_S) in.b_S = a.b_S;
  if (a.b_T) in.b_T = a.b_T;
  if (a.b_pred) in.b_pred = a.b_pred;
  const BoundReport r = evaluate_bound(statement, in);

  const fs::path path = out_file(a.out);
  write_file(path, dump(to_json(r)));
  std::vector<std::string> outputs = {path.filename().string()};
  std::vector<std::string> args = {"bound", "--statement", a.statement, "--instance", a.instance,
                                   "--alpha", fmt(a.alpha)};
  auto add_opt = [&](const char* flag, const std::optional<double>& v) {
    if (v) {
      args.push_back(flag);
      args.push_back(fmt(*v));
    }
  };
  add_opt("--epsilon", a.epsilon);
  add_opt("--bS", a.b_S);
  add_opt("--bT", a.b_T);
  add_opt("--bpred", a.b_pred);
  args.push_back("--out");
  args.push_back(a.out);
  if (!a.csv.empty()) {
    const fs::path csv = out_file(a.csv);
    std::ostringstream ss;
    write_reports_csv(ss, {r});
    write_file(csv, ss.str());
    outputs.push_back(csv.filename().string());
    args.push_back("--csv");
    args.push_back(a.csv);
  }
  write_manifest(fs::path(path.string() + ".manifest.json"), args, 0, to_json(in), outputs);

  out << to_string(r.statement) << ": P(loss >= " << fmt(r.margin) << ") <= " << fmt(r.delta) << '\n'
      << "  alpha=" << fmt(r.alpha) << " B=" << fmt(r.B) << " C=" << fmt(r.C) << " D=" << fmt(r.D)
      << " D_learner=" << fmt(r.D_learner) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::string epsilons;
  std::string scenario = "pos";
  std::string n_grid;
  std::optional<std::size_t> sims;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> kl_samples;
  std::optional<std::size_t> components;
  bool independent_streams = false;
  bool timing = false;
  std::string out = "results";
};

int cmd_experiment(const ExperimentArgs& a, bool neighborhood, const Globals& g, std::ostream& out) {
  ExperimentConfig cfg;
  if (!a.config.empty()) {
    cfg = experiment_config_from_json(read_json_file(a.config));
  } else {
    cfg = scenario_config(neighborhood ? Scenario::neighborhood : scenario_from_string(a.scenario));
  }
  if (neighborhood) {
    cfg.scenario = Scenario::neighborhood;
  } else if (a.config.empty() || cfg.scenario == Scenario::neighborhood) {
    const ExperimentConfig preset = scenario_config(scenario_from_string(a.scenario));
    cfg.scenario = preset.scenario;
    cfg.beta_S = preset.beta_S;
    cfg.beta_T = preset.beta_T;
  }
  if (!a.epsilons.empty()) cfg.epsilon_grid = parse_number_list(a.epsilons);
  if (!a.n_grid.empty()) cfg.n_grid = parse_index_list(a.n_grid);
  if (a.sims) cfg.sims = *a.sims;
  if (a.seed) cfg.master_seed = *a.seed;
  if (a.kl_samples) cfg.kl_samples = *a.kl_samples;
  if (a.components) cfg.barycenter_components = *a.components;
  if (a.independent_streams) cfg.common_random_numbers = false;
  if (a.timing) cfg.timing = true;
  cfg.threads = g.threads;
  cfg.validate();

  const ExperimentResult result =
      neighborhood ? run_neighborhood_experiment(cfg) : run_negative_transfer_experiment(cfg);

  const std::string stem(to_string(cfg.scenario));
  const fs::path dir = out_dir(a.out);
  std::ostringstream csv;
  write_records_csv(csv, result.records);
  write_file(dir / (stem + ".csv"), csv.str());
  write_file(dir / (stem + ".json"), dump(sidecar_json(result)));

  // The resolved config is written out so a replay does not depend on the
  // original config file or on defaults.
  write_file(dir / (stem + ".config.json"), dump(to_json(cfg)));
  std::vector<std::string> args = {"experiment", neighborhood ? "neighborhood" : "negative-transfer",
                                   "--config", (dir / (stem + ".config.json")).string(), "--out", dir.string()};
  write_manifest(dir / (stem + ".manifest.json"), args, cfg.master_seed, to_json(cfg),
                 {stem + ".csv", stem + ".json", stem + ".config.json"});

  for (const auto& s : summarize(result)) {
    out << (neighborhood ? "epsilon=" : "n=") << s.key << "  rows=" << s.count << "  mean_error=" << s.mean_error
        << " (se " << s.stderr_error << ")  mean_C=" << s.mean_C << '\n';
  }
  if (!result.dropped.empty()) out << "dropped rows: " << result.dropped.size() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string setup;
  std::size_t trials = 10000;
  std::uint64_t seed = 0;
  std::string out = "verify_result.json";
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const VerifySetup setup = setup_from_json(read_json_file(a.setup));
  const MonteCarloResult r = monte_carlo_verify(setup.inputs, setup.statement, a.trials, a.seed);
  const Json j{{"statement_id", to_string(setup.statement)},
               {"report", to_json(r.report)},
               {"trials", r.trials},
               {"exceedances", r.exceedances},
               {"empirical_freq", r.empirical_freq},
               {"delta", r.delta},
               {"stderr", r.stderr_estimate},
               {"vacuous", r.vacuous},
               {"pass", r.pass}};
  const fs::path path = out_file(a.out);
  write_file(path, dump(j));
  write_manifest(fs::path(path.string() + ".manifest.json"),
                 {"verify", "--setup", a.setup, "--trials", std::to_string(a.trials), "--seed",
                  std::to_string(a.seed), "--out", a.out},
                 a.seed, to_json(setup.inputs), {path.filename().string()});
  out << to_string(setup.statement) << ": empirical " << fmt(r.empirical_freq) << " vs delta " << fmt(r.delta)
      << (r.vacuous ? " (vacuous)" : "") << " -> " << (r.pass ? "pass" : "FAIL") << '\n';
  return r.pass ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

int cmd_replay(const std::string& manifest, const std::string& out_override, const Globals& g,
               std::ostream& out, std::ostream& err) {
  const Json m = read_json_file(manifest);
  if (!m.contains("args") || !m["args"].is_array()) throw InvalidArgument(manifest + ": missing args");
  std::vector<std::string> args;
  for (const auto& v : m["args"]) {
    if (!v.is_string()) throw InvalidArgument(manifest + ": args must be strings");
    args.push_back(v.get<std::string>());
  }
  if (!out_override.empty()) {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] != "--out") continue;
      const bool is_dir = args.front() == "experiment";
      args[i + 1] = is_dir ? out_override : (fs::path(out_override) / fs::path(args[i + 1]).filename()).string();
    }
  }
  if (g.threads) {
    args.insert(args.begin(), std::to_string(g.threads));
    args.insert(args.begin(), "--threads");
  }
  return run(args, out, err);
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  auto to_index = [&](const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (s.empty() || pos != s.size() || s.front() == '-') throw InvalidArgument("bad index list '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      out.push_back(to_index(item));
      continue;
    }
    const std::size_t lo = to_index(item.substr(0, colon));
    const std::size_t hi = to_index(item.substr(colon + 1));
    if (hi < lo) throw InvalidArgument("bad range '" + item + "'");
    for (std::size_t v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("empty index list");
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (item.empty() || pos != item.size()) throw InvalidArgument("bad number list '" + text + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("empty number list");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Epistemic error bounds: exact oracles, bound evaluation and transfer experiments"};
  app.name("epibound");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  OracleArgs oa;
  auto* oracle = app.add_subcommand("oracle", "Exact verification on random finite instances");
  oracle->add_option("--instances", oa.instances, "Instances per constraint variant");
  oracle->add_option("--max-outcomes", oa.max_outcomes, "Largest sample space");
  oracle->add_option("--seed", oa.seed, "Master seed");
  oracle->add_option("--alphas", oa.alphas, "Comma-separated alpha grid");
  oracle->add_option("--transfer-instances", oa.transfer_instances, "Instances for the transfer families");
  oracle->add_option("--out", oa.out, "Report JSON path");

  BoundArgs ba;
  auto* bound = app.add_subcommand("bound", "Evaluate one bound statement on an instance file");
  bound->add_option("--statement", ba.statement, "Statement id")->required();
  bound->add_option("--instance", ba.instance, "Instance JSON")->required();
  bound->add_option("--alpha", ba.alpha, "Margin slack alpha > 0");
  bound->add_option("--epsilon", ba.epsilon, "Neighborhood size");
  bound->add_option("--bS", ba.b_S, "Source boundedness");
  bound->add_option("--bT", ba.b_T, "Target boundedness");
  bound->add_option("--bpred", ba.b_pred, "Predictor boundedness");
  bound->add_option("--out", ba.out, "Report JSON path");
  bound->add_option("--csv", ba.csv, "Also write a one-row CSV");

  auto* experiment = app.add_subcommand("experiment", "Run a synthetic transfer experiment");
  experiment->require_subcommand(1);
  ExperimentArgs na, ta;
  auto common = [](CLI::App* sub, ExperimentArgs& e) {
    sub->add_option("--config", e.config, "Experiment config JSON");
    sub->add_option("--sims", e.sims, "Simulations per grid point");
    sub->add_option("--seed", e.seed, "Master seed");
    sub->add_option("--kl-samples", e.kl_samples, "Samples per KL estimate");
    sub->add_option("--components", e.components, "Barycenter mixture components");
    sub->add_flag("--independent-streams", e.independent_streams,
                  "Give every grid point its own random streams");
    sub->add_flag("--timing", e.timing, "Record runtime_ms");
    sub->add_option("--out", e.out, "Output directory");
  };
  auto* nb = experiment->add_subcommand("neighborhood", "Epistemic error in TV neighborhoods");
  common(nb, na);
  nb->add_option("--epsilons", na.epsilons, "Comma-separated neighborhood sizes");
  auto* nt = experiment->add_subcommand("negative-transfer", "Epistemic error against source sample size");
  common(nt, ta);
  nt->add_option("--scenario", ta.scenario, "pos, neg or posneg");
  nt->add_option("--n-grid", ta.n_grid, "Sample sizes, e.g. 1:50 or 1,2,5,10");

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Monte Carlo check of a bound");
  verify->add_option("--setup", va.setup, "Setup JSON (instance + statement + alpha)")->required();
  verify->add_option("--trials", va.trials, "Target draws");
  verify->add_option("--seed", va.seed, "Seed");
  verify->add_option("--out", va.out, "Result JSON path");

  std::string manifest, replay_out;
  auto* replay = app.add_subcommand("replay", "Re-run a command from its manifest");
  replay->add_option("--manifest", manifest, "Manifest JSON")->required();
  replay->add_option("--out", replay_out, "Write outputs here instead");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (oracle->parsed()) return cmd_oracle(oa, g, out);
    if (bound->parsed()) return cmd_bound(ba, out);
    if (nb->parsed()) return cmd_experiment(na, true, g, out);
    if (nt->parsed()) return cmd_experiment(ta, false, g, out);
    if (verify->parsed()) return cmd_verify(va, out);
    if (replay->parsed()) return cmd_replay(manifest, replay_out, g, out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PreconditionViolated& e) {
    err << "precondition violated: " << e.what() << '\n';
    return kExitFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace epibound::cli
