#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "epibound/bounds.hpp"
#include "epibound/divergences.hpp"
#include "epibound/experiments.hpp"
#include "epibound/oracle.hpp"

namespace epibound {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kVersion = "0.3.0";

// Parsers throw InvalidArgument with a JSON-pointer style location, e.g.
// "/source/tasks/2/weight: expected a number".

Json to_json(const FOD& dist);
FOD fod_from_json(const Json& j, const std::string& where = "");

Json to_json(const TaskDistribution& tasks);
TaskDistribution tasks_from_json(const Json& j, const std::string& where = "");

Json to_json(const ModelClass& model);
ModelClass model_from_json(const Json& j, const std::string& where = "");

Json to_json(const DivergenceResult& r);

Json to_json(const BoundReport& r);
BoundReport report_from_json(const Json& j, const std::string& where = "");

/// One row per report: statement_id,alpha,B,C,D,D_learner,margin,delta,epsilon,b_S,b_T
void write_reports_csv(std::ostream& out, const std::vector<BoundReport>& reports);

/// Instance file: model, predictor, source, target and optional epsilon,
/// b_S, b_T, b_pred, param_tv, params, allow_unbounded_tasks, grid, reify.
/// The alpha in the result is taken from "alpha" if present, else 0.1.
Json to_json(const BoundInputs& inputs);
BoundInputs inputs_from_json(const Json& j, const std::string& where = "");

/// Instance file for an oracle instance (predictor, model, tasks, epsilon,
/// and parameter distributions for Bayesian instances).
Json instance_to_json(const OracleInstance& instance, double alpha);

struct VerifySetup {
  BoundInputs inputs;
  Statement statement;
};

/// Instance file plus "statement" and "alpha".
VerifySetup setup_from_json(const Json& j);

Json to_json(const OracleRunConfig& c);
Json to_json(const CheckStats& s);
Json to_json(const OracleReport& r);

Json to_json(const NIGModel& m);
NIGModel nig_from_json(const Json& j, const std::string& where = "");

Json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const Json& j);

/// Config, grid summaries, dropped rows and the divergence method tags.
Json sidecar_json(const ExperimentResult& result);

/// Parses text, reporting line and column on syntax errors.
Json parse_json(const std::string& text, const std::string& source_name);
Json read_json_file(const std::string& path);

/// Two-space indented dump with a trailing newline.
std::string dump(const Json& j);

}  // namespace epibound
