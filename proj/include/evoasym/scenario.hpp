#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoasym/asymptotics.hpp"
#include "evoasym/core.hpp"
#include "evoasym/means.hpp"
#include "evoasym/operators.hpp"
#include "evoasym/systems.hpp"

namespace evoasym {

/// Materialized entity tables of a scenario: every named operator, system
/// and curve, fully constructed and immutable.
struct Workspace {
  std::map<std::string, OperatorSpec> operators;
  std::map<std::string, EvolutionSystem> systems;
  std::map<std::string, SampledCurve> curves;
};

/// A validated experiment file: the normalized document plus the
/// materialized entities. Two scenarios are interchangeable iff their
/// normalized documents compare equal.
struct Scenario {
  Eigen::Index dimension = 0;
  std::string output_dir;  // may be empty; resolution happens at run time
  nlohmann::json doc;      // normalized, defaults filled in
  std::shared_ptr<const Workspace> workspace;
};

/// Parses and fully validates a scenario document: every reference must
/// resolve, every mandatory parameter must be present, and every entity is
/// constructed. Throws ParseError (with line/column) for syntax errors,
/// UnresolvedReferenceError for dangling names, InvalidInputError for
/// missing or malformed parameters.
Scenario parse_scenario(const std::string& text);
Scenario parse_scenario_file(const std::string& path);

/// Canonical serialization; parse(serialize(s)) reproduces s exactly.
std::string serialize_scenario(const Scenario& s);

struct ExperimentResult {
  std::string name;
  std::string kind;
  bool completed = false;
  std::string verdict;  // free-form verdict summary; empty when not applicable
  std::string error;    // failure reason when not completed
  std::vector<std::string> csv_files;
  double wall_ms = 0.0;
};

struct RunReport {
  std::vector<ExperimentResult> results;
  bool all_completed = false;
  std::string report_path;
};

struct RunOptions {
  std::string output_dir;  // overrides the scenario's own output_dir
  int jobs = 1;
};

/// Executes the experiments in declaration order, one CSV per experiment
/// (plus auxiliary CSVs where an experiment produces two tables) and a
/// report.txt summarizing verdicts, parameters and wall-clock times.
/// Verdict content never affects completion; a scenario that demonstrates
/// a violated hypothesis is a successful run. Experiments that throw are
/// recorded as failed and the remaining experiments still run.
RunReport run_scenario(const Scenario& s, const RunOptions& options);

/// Derives per-experiment plot-data files (<name>.plot.csv with the x/y
/// columns appropriate to the experiment kind) plus a generic plot_all.py
/// script. Plotting itself needs no toolkit at run time.
void emit_plot_data(const std::string& report_dir);

}  // namespace evoasym
