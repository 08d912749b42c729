#pragma once

// Batch experiments: configuration documents, task execution and reports.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "celab/orbit.hpp"
#include "json.hpp"

namespace celab::analysis {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kConfigVersion = 1;

enum class TaskKind {
  orbit,
  ce,
  periodic,
  recurrence,
  slow_recurrence,
  tce,
  esc,
  koebe,
  quasi_chain,
  shrink_bound,
  conjugacy,
  invariance,
};
std::string to_string(TaskKind k);
TaskKind parse_task_kind(const std::string& s);
const std::vector<TaskKind>& all_task_kinds();

struct MapEntry {
  std::string label;
  std::string source;                 // "inline", "fixture:<name>" or "file:<path>"
  nlohmann::ordered_json definition;  // canonical map document
};

struct TaskConfig {
  std::string id;
  TaskKind kind = TaskKind::ce;
  std::string map;
  nlohmann::ordered_json params;  // every parameter, defaults filled in
};

/// Document layout:
///   {"version": 1, "seed": 1, "workers": 0, "output_dir": "...",
///    "precision": {...}, "maps": [...], "tasks": [...]}
/// A map entry is an inline map definition, {"fixture": name} or
/// {"file": path}, optionally with a "label" override. A task is
/// {"id", "kind", "map", "params"}. Parameters are validated against the
/// per-kind schema; errors name the offending field path.
struct ExperimentConfig {
  uint64_t seed = 1;
  int workers = 0;  // 0: hardware concurrency
  std::string output_dir;
  orbit::PrecisionPolicy policy;
  std::vector<MapEntry> maps;
  std::vector<TaskConfig> tasks;

  /// Relative "file" map references resolve against base_dir.
  static ExperimentConfig from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& file);
  nlohmann::ordered_json to_json() const;
};

/// Parameter schema of a task kind with defaults, for documentation.
nlohmann::ordered_json task_schema(TaskKind kind);

enum class TaskStatus { ok, hypothesis_failed, error };
std::string to_string(TaskStatus s);
TaskStatus parse_task_status(const std::string& s);

/// A column-oriented data series destined for one CSV file. Column types are
/// "int", "binary64" (shortest round-trip double), "decimal" (round-trip text
/// of an extended-precision value, tagged with its bit count) or "text".
struct Series {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::string> types;
  std::vector<std::vector<nlohmann::ordered_json>> rows;

  nlohmann::ordered_json to_json() const;
  static Series from_json(const std::string& name, const nlohmann::ordered_json& j);
  std::string to_csv() const;
};

struct TaskResult {
  std::string id;
  TaskKind kind = TaskKind::ce;
  std::string map;
  uint64_t seed = 0;
  TaskStatus status = TaskStatus::ok;
  nlohmann::ordered_json result;  // null on error
  std::vector<Series> series;
  std::string error_kind, error_message;
};

struct RunReport {
  nlohmann::ordered_json config;
  std::vector<TaskResult> tasks;
  nlohmann::ordered_json telemetry;  // wall clock, timestamps, per-task seconds and precision

  bool has_errors() const;
  /// Stable field order. The telemetry block holds every time-dependent value.
  nlohmann::ordered_json to_json(bool include_telemetry = true) const;
  static RunReport from_json(const nlohmann::ordered_json& j);
  static RunReport load(const std::filesystem::path& run_dir);
};

/// Per-task seed derived from the experiment seed and the task id.
uint64_t task_seed(uint64_t seed, const std::string& task_id);

/// Runs every task; independent tasks run concurrently. A failing task is
/// recorded with status error without affecting the others. When
/// output_dir is set the report and its CSV bundle are written there.
RunReport run_analysis(const ExperimentConfig& config);

enum class ReportFormat { json, csv_bundle };
ReportFormat parse_report_format(const std::string& s);

/// json: <dir>/report.json. csv-bundle: <dir>/<task>.<series>.csv per series.
/// Returns the files written.
std::vector<std::filesystem::path> emit_report(const RunReport& report, ReportFormat format,
                                               const std::filesystem::path& dir);

}  // namespace celab::analysis
