// celab: batch front-end.
//
//   celab analyze <config.json> [--out DIR] [--workers N]
//   celab report <run-dir> --format json|csv-bundle [--out DIR]
//   celab fixtures list
//   celab fixtures run <name> [--out DIR]
//   celab schema [kind]
//
// Exit codes: 0 ok, 1 configuration or I/O error, 2 at least one task failed.

#include <iostream>

#include "CLI11.hpp"
#include "celab/analysis.hpp"
#include "celab/error.hpp"
#include "celab/fixtures.hpp"

namespace {

using namespace celab;
using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitTask = 2;

void print_summary(const analysis::RunReport& rep) {
  for (const auto& t : rep.tasks) {
    std::cerr << "  " << t.id << " [" << analysis::to_string(t.kind) << " on " << t.map << "] "
              << analysis::to_string(t.status);
    if (!t.error_message.empty()) std::cerr << ": " << t.error_message;
    std::cerr << '\n';
  }
}

int execute(analysis::ExperimentConfig cfg, const std::string& out, int workers) {
  if (!out.empty()) cfg.output_dir = out;
  if (workers >= 0) cfg.workers = workers;
  const auto rep = analysis::run_analysis(cfg);
  if (cfg.output_dir.empty()) {
    std::cout << rep.to_json().dump(2) << '\n';
  } else {
    std::cerr << "wrote " << cfg.output_dir << "/report.json\n";
  }
  print_summary(rep);
  return rep.has_errors() ? kExitTask : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"celab: critical orbit and conjugacy experiments for interval maps"};
  app.require_subcommand(1);

  std::string config_path, out_dir, run_dir, format = "json", fixture, kind;
  int workers = -1;

  auto* analyze = app.add_subcommand("analyze", "Run an experiment configuration");
  analyze->add_option("config", config_path, "Configuration file (JSON)")->required();
  analyze->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  analyze->add_option("--workers", workers, "Concurrent tasks (0: all cores)")->check(CLI::Range(0, 1024));

  auto* report = app.add_subcommand("report", "Re-emit a stored run report");
  report->add_option("run-dir", run_dir, "Directory holding report.json")->required();
  report->add_option("--format", format, "json or csv-bundle")->check(CLI::IsMember({"json", "csv-bundle"}));
  report->add_option("--out", out_dir, "Output directory (default: the run directory)");

  auto* fx = app.add_subcommand("fixtures", "Built-in maps");
  fx->require_subcommand(1);
  fx->add_subcommand("list", "List fixtures");
  auto* fx_run = fx->add_subcommand("run", "Run the standard experiment for a fixture");
  fx_run->add_option("name", fixture, "Fixture name")->required();
  fx_run->add_option("--out", out_dir, "Output directory");
  fx_run->add_option("--workers", workers, "Concurrent tasks (0: all cores)")->check(CLI::Range(0, 1024));

  auto* schema = app.add_subcommand("schema", "Print task parameter schemas");
  schema->add_option("kind", kind, "Task kind");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (analyze->parsed()) {
      return execute(analysis::ExperimentConfig::load(config_path), out_dir, workers);
    }
    if (report->parsed()) {
      const auto rep = analysis::RunReport::load(run_dir);
      const auto dir = out_dir.empty() ? std::filesystem::path(run_dir) : std::filesystem::path(out_dir);
      for (const auto& f : analysis::emit_report(rep, analysis::parse_report_format(format), dir))
        std::cout << f.string() << '\n';
      return kExitOk;
    }
    if (fx->got_subcommand("list")) {
      for (const auto& f : fixtures::catalogue()) std::cout << f.name << "\t" << f.summary << '\n';
      return kExitOk;
    }
    if (fx_run->parsed()) {
      return execute(analysis::ExperimentConfig::from_json(fixtures::experiment(fixture)), out_dir, workers);
    }
    if (schema->parsed()) {
      ordered_json j = ordered_json::object();
      if (kind.empty()) {
        for (auto k : analysis::all_task_kinds()) j[analysis::to_string(k)] = analysis::task_schema(k);
      } else {
        j[kind] = analysis::task_schema(analysis::parse_task_kind(kind));
      }
      std::cout << j.dump(2) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << e.kind() << " error: " << e.what() << '\n';
    return kExitTask;
  }
  return kExitOk;
}
