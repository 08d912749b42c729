#include <filesystem>
#include <fstream>
#include <sstream>

#include "celab/analysis.hpp"
#include "celab/error.hpp"
#include "celab/fixtures.hpp"
#include "celab/pullback.hpp"
#include "doctest.h"

using namespace celab;
using namespace celab::analysis;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

ordered_json ulam_config() {
  return ordered_json::parse(R"({
    "seed": 7,
    "maps": [{"label": "F4", "family": "polynomial", "coefficients": ["0", "4", "-4"], "domain": ["0", "1"]}],
    "tasks": [
      {"id": "ce", "kind": "ce", "map": "F4", "params": {"n": 200, "exact_n": 30}},
      {"id": "esc", "kind": "esc", "map": "F4", "params": {"delta": "0.1", "N": 6}},
      {"id": "koebe", "kind": "koebe", "map": "F4", "params": {"samples": 5, "s_max": 6}}
    ]})");
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("celab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

const TaskResult& find(const RunReport& r, const std::string& id) {
  for (const auto& t : r.tasks)
    if (t.id == id) return t;
  throw std::runtime_error("no task " + id);
}

std::string config_error(const ordered_json& j) {
  try {
    ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("config round-trip") {
    const auto cfg = ExperimentConfig::from_json(ulam_config());
    CHECK(cfg.seed == 7);
    REQUIRE(cfg.tasks.size() == 3);
    CHECK(cfg.tasks[0].params.contains("critical"));
    const auto again = ExperimentConfig::from_json(cfg.to_json());
    CHECK(again.to_json() == cfg.to_json());
  }

  TEST_CASE("config errors name the offending field") {
    auto j = ulam_config();
    j["tasks"][0]["map"] = "G";
    CHECK(config_error(j).find("G") != std::string::npos);

    j = ulam_config();
    j["tasks"][1]["params"]["N"] = 99;
    CHECK(config_error(j).find("tasks[1].params.N") != std::string::npos);

    j = ulam_config();
    j["tasks"][0]["params"]["bogus"] = 1;
    CHECK(config_error(j).find("bogus") != std::string::npos);

    j = ulam_config();
    j["tasks"][2]["id"] = "ce";
    CHECK(!config_error(j).empty());

    j = ulam_config();
    j["extra"] = true;
    CHECK(!config_error(j).empty());

    j = ulam_config();
    j["tasks"][0]["kind"] = "nope";
    CHECK(!config_error(j).empty());

    j = ulam_config();
    j["maps"][0]["coefficients"] = {0, 4.1, -4};
    CHECK(!config_error(j).empty());
  }

  TEST_CASE("fixture map references") {
    auto j = ordered_json::parse(R"({"maps": [{"fixture": "ulam", "label": "U"}],
      "tasks": [{"id": "o", "kind": "orbit", "map": "U", "params": {"n": 5}}]})");
    const auto cfg = ExperimentConfig::from_json(j);
    CHECK(cfg.maps[0].source == "fixture:ulam");
    j["maps"][0]["fixture"] = "nonexistent";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }

  TEST_CASE("empty task list") {
    const auto rep = run_analysis(ExperimentConfig::from_json(ordered_json::parse(R"({"maps": [], "tasks": []})")));
    CHECK(rep.tasks.empty());
    CHECK(!rep.has_errors());
    CHECK(rep.to_json()["status"] == "ok");
  }

  TEST_CASE("ce task on F4") {
    const auto rep = run_analysis(ExperimentConfig::from_json(ulam_config()));
    const auto& t = find(rep, "ce");
    REQUIRE(t.status == TaskStatus::ok);
    CHECK(t.result["fit"]["lambda"].get<double>() == doctest::Approx(4).epsilon(1e-6));
    CHECK(t.result["exact"]["derivative_product"] == "1152921504606846976");  // 4^30
    REQUIRE(t.series.size() == 1);
    CHECK(t.series[0].rows.size() == 200);
  }

  TEST_CASE("task errors are isolated") {
    auto j = ulam_config();
    j["tasks"].push_back({{"id", "bad"}, {"kind", "orbit"}, {"map", "F4"}, {"params", {{"critical", 3}}}});
    const auto rep = run_analysis(ExperimentConfig::from_json(j));
    CHECK(rep.has_errors());
    CHECK(find(rep, "bad").status == TaskStatus::error);
    CHECK(!find(rep, "bad").error_kind.empty());
    CHECK(find(rep, "ce").status == TaskStatus::ok);
  }

  TEST_CASE("csv bundle matches the in-memory esc values") {
    auto cfg = ExperimentConfig::from_json(ulam_config());
    const auto rep = run_analysis(cfg);
    const auto dir = scratch("csv");
    const auto files = emit_report(rep, ReportFormat::csv_bundle, dir);
    CHECK(!files.empty());
    const auto rows = read_csv(dir / "esc.max_diameter.csv");
    const auto& params = find(rep, "esc").result;
    const int N = 6;
    const auto fit = pullback::esc_fit(fixtures::map("ulam"), 0.1, N, pullback::default_probes(fixtures::map("ulam"), 0.1));
    REQUIRE(rows.size() == N + 1);
    CHECK(rows[0] == std::vector<std::string>{"depth", "max_diameter", "components"});
    for (int k = 0; k < N; ++k) {
      CHECK(rows[k + 1][1] == fit.max_diameters[k].str());
      CHECK(Real::parse(rows[k + 1][1], fit.max_diameters[k].bits()) == fit.max_diameters[k]);
    }
    CHECK(params.contains("verdict"));
    fs::remove_all(dir);
  }

  TEST_CASE("json report round-trip") {
    const auto rep = run_analysis(ExperimentConfig::from_json(ulam_config()));
    const auto dir = scratch("json");
    emit_report(rep, ReportFormat::json, dir);
    const auto back = RunReport::load(dir);
    CHECK(back.to_json().dump() == rep.to_json().dump());
    fs::remove_all(dir);
  }

  TEST_CASE("unwritable output directory") {
    const auto dir = scratch("blocked");
    fs::create_directories(dir.parent_path());
    std::ofstream(dir) << "a file, not a directory";
    const auto rep = run_analysis(ExperimentConfig::from_json(ordered_json::parse(R"({"maps": [], "tasks": []})")));
    CHECK_THROWS_AS(emit_report(rep, ReportFormat::json, dir / "sub"), IoError);
    fs::remove(dir);
  }

  TEST_CASE("missing run directory") {
    CHECK_THROWS_AS(RunReport::load(scratch("absent")), IoError);
  }

  TEST_CASE("double run is byte-identical without telemetry") {
    auto cfg = ExperimentConfig::from_json(ulam_config());
    cfg.workers = 2;
    const auto a = run_analysis(cfg).to_json(false);
    const auto b = run_analysis(cfg).to_json(false);
    CHECK(a.dump(2) == b.dump(2));
    cfg.workers = 1;
    CHECK(run_analysis(cfg).to_json(false)["tasks"].dump() == a["tasks"].dump());
  }

  TEST_CASE("task seeds") {
    CHECK(task_seed(1, "a") == task_seed(1, "a"));
    CHECK(task_seed(1, "a") != task_seed(2, "a"));
    CHECK(task_seed(1, "a") != task_seed(1, "b"));
  }

  TEST_CASE("every fixture has a runnable configuration") {
    REQUIRE(fixtures::catalogue().size() >= 5);
    for (const auto& f : fixtures::catalogue()) {
      CAPTURE(f.name);
      CHECK_NOTHROW(fixtures::map(f.name));
      CHECK_NOTHROW(ExperimentConfig::from_json(fixtures::experiment(f.name)));
    }
    CHECK_THROWS_AS(fixtures::map("no-such-map"), ConfigError);
  }

  TEST_CASE("schemas and names") {
    for (auto k : all_task_kinds()) {
      CHECK(parse_task_kind(to_string(k)) == k);
      CHECK(task_schema(k).is_array());
      CHECK(!task_schema(k).empty());
    }
    CHECK(parse_report_format("csv-bundle") == ReportFormat::csv_bundle);
    CHECK_THROWS_AS(parse_report_format("xml"), ConfigError);
    CHECK(parse_task_status("hypothesis-failed") == TaskStatus::hypothesis_failed);
  }

  TEST_CASE("series csv text") {
    Series s{"demo", {"n", "v"}, {"int", "binary64"}, {{1, 0.1}, {2, 1e-300}}};
    const auto csv = s.to_csv();
    CHECK(csv.rfind("n,v\n1,", 0) == 0);
    const auto back = Series::from_json("demo", s.to_json());
    CHECK(back.to_csv() == csv);
  }
}
