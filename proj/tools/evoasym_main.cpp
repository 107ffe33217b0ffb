#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>

#include "evoasym/scenario.hpp"

namespace {

int cmd_run(const std::string& scenario_path, const std::string& out_dir, int jobs) {
  const evoasym::Scenario scenario = evoasym::parse_scenario_file(scenario_path);
  evoasym::RunOptions options;
  options.output_dir = out_dir;
  options.jobs = jobs;
  const evoasym::RunReport report = evoasym::run_scenario(scenario, options);
  for (std::size_t i = 0; i < report.results.size(); ++i) {
    const auto& r = report.results[i];
    std::cout << "[" << i << "] " << r.name << " (" << r.kind << "): "
              << (r.completed ? "completed" : "FAILED");
    if (!r.verdict.empty()) std::cout << " | " << r.verdict;
    if (!r.error.empty()) std::cout << " | " << r.error;
    std::cout << "\n";
  }
  std::cout << "report: " << report.report_path << "\n";
  return report.all_completed ? 0 : 1;
}

int cmd_validate(const std::string& scenario_path) {
  const evoasym::Scenario scenario = evoasym::parse_scenario_file(scenario_path);
  std::cout << "valid scenario: dimension " << scenario.dimension << ", "
            << scenario.doc["operators"].size() << " operators, "
            << scenario.doc["systems"].size() << " systems, "
            << scenario.doc["curves"].size() << " curves, "
            << scenario.doc["experiments"].size() << " experiments\n";
  return 0;
}

int cmd_plot(const std::string& report_dir) {
  evoasym::emit_plot_data(report_dir);
  std::cout << "plot data written under " << report_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evoasym: evolution-system asymptotics experiment runner"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  int jobs = 1;

  CLI::App* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--out", out_dir,
                  "output directory (default: scenario output_dir, then $EVOASYM_OUT)");
  run->add_option("--jobs", jobs, "number of concurrent experiments")->default_val(1);

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "parse and validate a scenario file");
  validate->add_option("scenario", validate_path, "scenario file")->required();

  std::string report_dir;
  CLI::App* plot = app.add_subcommand("plot", "derive plot-data files from a report directory");
  plot->add_option("report", report_dir, "report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(scenario_path, out_dir, jobs);
    if (validate->parsed()) return cmd_validate(validate_path);
    if (plot->parsed()) return cmd_plot(report_dir);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
