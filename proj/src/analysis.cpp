#include "celab/analysis.hpp"

#include <gmp.h>
#include <mpfr.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "celab/conjugacy.hpp"
#include "celab/error.hpp"
#include "celab/fixtures.hpp"
#include "celab/hyperbolicity.hpp"
#include "celab/json_util.hpp"
#include "celab/pullback.hpp"

namespace celab::analysis {

namespace fs = std::filesystem;
using mapkit::MapSpec;
using nlohmann::ordered_json;

namespace {

const std::vector<std::pair<TaskKind, const char*>>& kind_names() {
  static const std::vector<std::pair<TaskKind, const char*>> names{
      {TaskKind::orbit, "orbit"},
      {TaskKind::ce, "ce"},
      {TaskKind::periodic, "periodic"},
      {TaskKind::recurrence, "recurrence"},
      {TaskKind::slow_recurrence, "slow-recurrence"},
      {TaskKind::tce, "tce"},
      {TaskKind::esc, "esc"},
      {TaskKind::koebe, "koebe"},
      {TaskKind::quasi_chain, "quasi-chain"},
      {TaskKind::shrink_bound, "shrink-bound"},
      {TaskKind::conjugacy, "conjugacy"},
      {TaskKind::invariance, "invariance"},
  };
  return names;
}

}  // namespace

std::string to_string(TaskKind k) {
  for (const auto& [kind, name] : kind_names())
    if (kind == k) return name;
  return "?";
}

TaskKind parse_task_kind(const std::string& s) {
  for (const auto& [kind, name] : kind_names())
    if (s == name) return kind;
  throw ConfigError("unknown task kind '" + s + "'");
}

const std::vector<TaskKind>& all_task_kinds() {
  static const std::vector<TaskKind> kinds = [] {
    std::vector<TaskKind> v;
    for (const auto& kn : kind_names()) v.push_back(kn.first);
    return v;
  }();
  return kinds;
}

std::string to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::ok:
      return "ok";
    case TaskStatus::hypothesis_failed:
      return "hypothesis-failed";
    case TaskStatus::error:
      return "error";
  }
  return "?";
}

TaskStatus parse_task_status(const std::string& s) {
  if (s == "ok") return TaskStatus::ok;
  if (s == "hypothesis-failed") return TaskStatus::hypothesis_failed;
  if (s == "error") return TaskStatus::error;
  throw ConfigError("unknown task status '" + s + "'");
}

// ---------------------------------------------------------------------------
// Parameter schemas

namespace {

enum class PType { integer, number, rational, text, numbers, texts, map_ref };

struct ParamSpec {
  const char* name;
  PType type;
  ordered_json def;  // null: required
  double lo = -INFINITY, hi = INFINITY;
};

const char* type_name(PType t) {
  switch (t) {
    case PType::integer:
      return "integer";
    case PType::number:
      return "number";
    case PType::rational:
      return "rational";
    case PType::text:
      return "string";
    case PType::numbers:
      return "number list";
    case PType::texts:
      return "string list";
    case PType::map_ref:
      return "map label";
  }
  return "?";
}

const std::vector<ParamSpec>& specs(TaskKind k) {
  using J = ordered_json;
  static const std::map<TaskKind, std::vector<ParamSpec>> table{
      {TaskKind::orbit, {{"critical", PType::integer, 0, 0, 63}, {"n", PType::integer, 200, 1, 20000}}},
      {TaskKind::ce,
       {{"critical", PType::integer, 0, 0, 63},
        {"n", PType::integer, 200, 16, 20000},
        {"exact_n", PType::integer, 0, 0, double(orbit::kExactOrbitCap)}}},
      {TaskKind::periodic, {{"max_period", PType::integer, 8, 1, double(orbit::kDefaultPeriodCap)}}},
      {TaskKind::recurrence,
       {{"critical", PType::integer, 0, 0, 63},
        {"n", PType::integer, 200, 2, 20000},
        {"models", PType::texts, J::array({"SER", "ER", "PR"})},
        {"thresholds", PType::numbers, J::array({0.1, 0.05, 0.01}), 0, 10}}},
      {TaskKind::slow_recurrence,
       {{"critical", PType::integer, 0, 0, 63},
        {"n", PType::integer, 200, 1, 20000},
        {"deltas", PType::numbers, J::array({0.1, 0.05, 0.01}), 0, 1}}},
      {TaskKind::tce,
       {{"x", PType::rational, "0"},
        {"N", PType::integer, 100, 1, 5000},
        {"r", PType::numbers, J::array({0.01, 0.05, 0.1, 0.2}), 0, 10},
        {"D", PType::integer, 1, 0, 1e6}}},
      {TaskKind::esc,
       {{"delta", PType::number, 0.1, 0, 10}, {"N", PType::integer, 10, 1, 16}, {"probes", PType::integer, 20, 1, 1000}}},
      {TaskKind::koebe,
       {{"samples", PType::integer, 50, 1, 1000},
        {"s_max", PType::integer, 25, 1, 60},
        {"rho", PType::number, 0.05, 0, 10},
        {"tau", PType::numbers, J::array({0.5, 1, 2, 4}), 0, 1e3}}},
      {TaskKind::quasi_chain,
       {{"critical", PType::integer, 0, 0, 63},
        {"n", PType::integer, 200, 1, 2000},
        {"eta", PType::number, 0.05, 0, 1},
        {"koebe_C", PType::number, 18, 1, 1e12},
        {"esc_C", PType::number, 0, 0, 1e12},
        {"esc_lambda", PType::number, 0, 0, 1e12},
        {"eta0", PType::number, 0, 0, 1},
        {"esc_depth", PType::integer, 10, 1, 16},
        {"esc_probes", PType::integer, 20, 1, 1000}}},
      {TaskKind::shrink_bound,
       {{"critical", PType::integer, 0, 0, 63},
        {"n", PType::integer, 10, 1, 2000},
        {"C_alpha", PType::number, 1, 0, 1e12},
        {"alpha_rec", PType::number, 0, 0, 100},
        {"lambda", PType::number, 2, 1, 1e6},
        {"M", PType::number, 4, 1, 1e6},
        {"delta0", PType::number, 0.1, 0, 10},
        {"koebe_C", PType::number, 18, 1, 1e12},
        {"esc_C", PType::number, 1, 0, 1e12}}},
      {TaskKind::conjugacy,
       {{"target", PType::map_ref, nullptr}, {"depth", PType::integer, 12, 1, 20}, {"bits", PType::integer, 256, 64, 4096}}},
      {TaskKind::invariance,
       {{"target", PType::map_ref, nullptr},
        {"depth", PType::integer, 12, 1, 20},
        {"bits", PType::integer, 256, 64, 4096},
        {"horizon", PType::integer, 200, 16, 5000},
        {"holder_pairs", PType::integer, 4000, 1000, 1000000},
        {"slow_deltas", PType::numbers, J::array({0.1, 0.05, 0.01}), 0, 1},
        {"slow_eps", PType::numbers, J::array({0.05, 0.1, 0.2}), 0, 100},
        {"tce_radii", PType::numbers, J::array({0.05, 0.1}), 0, 10},
        {"tce_D", PType::integer, 1, 0, 1e6},
        {"tce_horizon", PType::integer, 100, 1, 5000}}},
  };
  return table.at(k);
}

// Numbers are JSON numbers or exact decimal / rational strings.
double read_number(const ordered_json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      return Real(parse_rational(v.get<std::string>()), 53).to_double();
    } catch (const std::exception&) {
    }
  }
  throw ConfigError(path + ": expected a number");
}

void check_range(double x, const ParamSpec& s, const std::string& path) {
  if (!(x > s.lo || (s.type == PType::integer && x >= s.lo)) || x > s.hi) {
    std::ostringstream os;
    os << path << ": " << x << " outside " << (s.type == PType::integer ? "[" : "(") << s.lo << ", " << s.hi << "]";
    throw ConfigError(os.str());
  }
}

ordered_json normalize_value(const ParamSpec& s, const ordered_json& v, const std::string& path) {
  switch (s.type) {
    case PType::integer: {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
      const auto x = v.get<long long>();
      check_range(static_cast<double>(x), s, path);
      return x;
    }
    case PType::number: {
      const double x = read_number(v, path);
      check_range(x, s, path);
      return x;
    }
    case PType::rational: {
      if (!v.is_string() && !v.is_number_integer()) throw ConfigError(path + ": expected an exact decimal or p/q string");
      try {
        return format_rational(parse_rational(v.is_string() ? v.get<std::string>() : v.dump()));
      } catch (const std::exception&) {
        throw ConfigError(path + ": cannot parse '" + (v.is_string() ? v.get<std::string>() : v.dump()) + "'");
      }
    }
    case PType::text:
    case PType::map_ref:
      if (!v.is_string() || v.get<std::string>().empty()) throw ConfigError(path + ": expected a non-empty string");
      return v;
    case PType::numbers: {
      if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a non-empty list of numbers");
      ordered_json out = ordered_json::array();
      for (size_t i = 0; i < v.size(); ++i) {
        const auto p = path + "[" + std::to_string(i) + "]";
        const double x = read_number(v[i], p);
        check_range(x, s, p);
        out.push_back(x);
      }
      return out;
    }
    case PType::texts: {
      if (!v.is_array() || v.empty()) throw ConfigError(path + ": expected a non-empty list of strings");
      for (size_t i = 0; i < v.size(); ++i)
        if (!v[i].is_string()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a string");
      return v;
    }
  }
  return v;
}

ordered_json normalize_params(TaskKind kind, const ordered_json& params, const std::string& path) {
  if (!params.is_null() && !params.is_object()) throw ConfigError(path + ": must be an object");
  const auto& sp = specs(kind);
  if (params.is_object()) {
    for (const auto& [key, _] : params.items()) {
      if (std::none_of(sp.begin(), sp.end(), [&](const ParamSpec& s) { return key == s.name; })) {
        throw ConfigError(path + "." + key + ": unknown parameter for task kind '" + to_string(kind) + "'");
      }
    }
  }
  ordered_json out = ordered_json::object();
  for (const auto& s : sp) {
    const auto p = path + "." + s.name;
    if (params.is_object() && params.contains(s.name)) {
      out[s.name] = normalize_value(s, params[s.name], p);
    } else if (s.def.is_null()) {
      throw ConfigError(p + ": required");
    } else {
      out[s.name] = s.def;
    }
  }
  if (kind == TaskKind::recurrence) {
    for (size_t i = 0; i < out["models"].size(); ++i) {
      try {
        hyperbolicity::parse_model(out["models"][i].get<std::string>());
      } catch (const std::exception&) {
        throw ConfigError(path + ".models[" + std::to_string(i) + "]: expected SER, ER or PR");
      }
    }
  }
  return out;
}

bool valid_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

ordered_json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read '" + file.string() + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

MapEntry read_map_entry(const ordered_json& j, const std::string& path, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError(path + ": must be an object");
  MapEntry e;
  if (j.contains("fixture")) {
    if (!j["fixture"].is_string()) throw ConfigError(path + ".fixture: expected a fixture name");
    const auto name = j["fixture"].get<std::string>();
    try {
      e.definition = fixtures::map(name).to_json();
    } catch (const ConfigError& err) {
      throw ConfigError(path + ".fixture: " + err.what());
    }
    e.source = "fixture:" + name;
  } else if (j.contains("file")) {
    if (!j["file"].is_string()) throw ConfigError(path + ".file: expected a path");
    const auto name = j["file"].get<std::string>();
    fs::path file(name);
    if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
    try {
      e.definition = MapSpec::from_json(read_json_file(file)).to_json();
    } catch (const ConfigError& err) {
      throw ConfigError(path + ".file: " + err.what());
    }
    e.source = "file:" + name;
  } else {
    ordered_json def = j;
    def.erase("source");
    try {
      e.definition = MapSpec::from_json(def).to_json();
    } catch (const ConfigError& err) {
      throw ConfigError(path + ": " + err.what());
    }
    e.source = j.contains("source") && j["source"].is_string() ? j["source"].get<std::string>() : "inline";
  }
  if (j.contains("label") && (j.contains("fixture") || j.contains("file"))) {
    if (!j["label"].is_string() || j["label"].get<std::string>().empty())
      throw ConfigError(path + ".label: expected a non-empty string");
    e.definition["label"] = j["label"];
  }
  e.label = e.definition["label"].get<std::string>();
  return e;
}

}  // namespace

nlohmann::ordered_json task_schema(TaskKind kind) {
  ordered_json out = ordered_json::array();
  for (const auto& s : specs(kind)) {
    ordered_json e{{"name", s.name}, {"type", type_name(s.type)}};
    e["default"] = s.def.is_null() ? ordered_json("required") : s.def;
    if (std::isfinite(s.lo)) e["min"] = s.lo;
    if (std::isfinite(s.hi)) e["max"] = s.hi;
    out.push_back(std::move(e));
  }
  return out;
}

ExperimentConfig ExperimentConfig::from_json(const ordered_json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: must be an object");
  static const std::set<std::string> known{"version", "seed", "workers", "output_dir", "precision", "maps", "tasks"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError(key + ": unknown field");
  if (j.contains("version") && (!j["version"].is_number_integer() || j["version"].get<int>() != kConfigVersion))
    throw ConfigError("version: expected " + std::to_string(kConfigVersion));

  ExperimentConfig c;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<int64_t>() < 0) throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<uint64_t>();
  }
  if (j.contains("workers")) {
    if (!j["workers"].is_number_integer() || j["workers"].get<long>() < 0 || j["workers"].get<long>() > 1024)
      throw ConfigError("workers: expected an integer in [0, 1024]");
    c.workers = j["workers"].get<int>();
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir: expected a path");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("precision")) {
    try {
      c.policy = orbit::PrecisionPolicy::from_json(j["precision"]);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("precision: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("precision: ") + e.what());
    }
  }

  std::set<std::string> labels;
  if (j.contains("maps")) {
    if (!j["maps"].is_array()) throw ConfigError("maps: expected a list");
    for (size_t i = 0; i < j["maps"].size(); ++i) {
      const auto path = "maps[" + std::to_string(i) + "]";
      auto e = read_map_entry(j["maps"][i], path, base_dir);
      if (!labels.insert(e.label).second) throw ConfigError(path + ": duplicate map label '" + e.label + "'");
      c.maps.push_back(std::move(e));
    }
  }

  std::set<std::string> ids;
  if (j.contains("tasks")) {
    if (!j["tasks"].is_array()) throw ConfigError("tasks: expected a list");
    for (size_t i = 0; i < j["tasks"].size(); ++i) {
      const auto path = "tasks[" + std::to_string(i) + "]";
      const auto& t = j["tasks"][i];
      if (!t.is_object()) throw ConfigError(path + ": must be an object");
      for (const auto& [key, _] : t.items())
        if (key != "id" && key != "kind" && key != "map" && key != "params")
          throw ConfigError(path + "." + key + ": unknown field");
      TaskConfig tc;
      if (!t.contains("kind") || !t["kind"].is_string()) throw ConfigError(path + ".kind: required");
      try {
        tc.kind = parse_task_kind(t["kind"].get<std::string>());
      } catch (const ConfigError& e) {
        throw ConfigError(path + ".kind: " + e.what());
      }
      tc.id = t.contains("id") && t["id"].is_string() ? t["id"].get<std::string>() : to_string(tc.kind) + "-" + std::to_string(i);
      if (!valid_id(tc.id)) throw ConfigError(path + ".id: '" + tc.id + "' must be [A-Za-z0-9._-]+");
      if (!ids.insert(tc.id).second) throw ConfigError(path + ".id: duplicate task id '" + tc.id + "'");
      if (!t.contains("map") || !t["map"].is_string()) throw ConfigError(path + ".map: required");
      tc.map = t["map"].get<std::string>();
      if (!labels.count(tc.map)) throw ConfigError(path + ".map: undefined map label '" + tc.map + "'");
      tc.params = normalize_params(tc.kind, t.contains("params") ? t["params"] : ordered_json(), path + ".params");
      if (tc.params.contains("target") && !labels.count(tc.params["target"].get<std::string>())) {
        throw ConfigError(path + ".params.target: undefined map label '" + tc.params["target"].get<std::string>() + "'");
      }
      c.tasks.push_back(std::move(tc));
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& file) {
  return from_json(read_json_file(file), file.parent_path());
}

ordered_json ExperimentConfig::to_json() const {
  ordered_json j;
  j["version"] = kConfigVersion;
  j["seed"] = seed;
  j["workers"] = workers;
  j["output_dir"] = output_dir;
  j["precision"] = policy.to_json();
  ordered_json m = ordered_json::array();
  for (const auto& e : maps) {
    ordered_json d = e.definition;
    d["source"] = e.source;
    m.push_back(std::move(d));
  }
  j["maps"] = std::move(m);
  ordered_json t = ordered_json::array();
  for (const auto& tc : tasks) {
    t.push_back({{"id", tc.id}, {"kind", to_string(tc.kind)}, {"map", tc.map}, {"params", tc.params}});
  }
  j["tasks"] = std::move(t);
  return j;
}

// ---------------------------------------------------------------------------
// Series

ordered_json Series::to_json() const {
  ordered_json r = ordered_json::array();
  for (const auto& row : rows) r.push_back(row);
  return {{"columns", columns}, {"types", types}, {"rows", std::move(r)}};
}

Series Series::from_json(const std::string& name, const ordered_json& j) {
  Series s;
  s.name = name;
  s.columns = j.at("columns").get<std::vector<std::string>>();
  s.types = j.at("types").get<std::vector<std::string>>();
  for (const auto& row : j.at("rows")) s.rows.emplace_back(row.begin(), row.end());
  return s;
}

namespace {

std::string csv_cell(const ordered_json& v) {
  if (!v.is_string()) return v.dump();
  auto s = v.get<std::string>();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace

std::string Series::to_csv() const {
  std::ostringstream os;
  for (size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Task runners

namespace {

struct Output {
  TaskStatus status = TaskStatus::ok;
  ordered_json result;
  std::vector<Series> series;
  ordered_json precision = ordered_json::object();
};

struct Context {
  const TaskConfig& task;
  const MapSpec& map;
  const std::map<std::string, MapSpec>& maps;
  const orbit::PrecisionPolicy& policy;
  uint64_t seed;

  const ordered_json& p(const char* key) const { return task.params.at(key); }
  long integer(const char* key) const { return p(key).get<long>(); }
  double number(const char* key) const { return p(key).get<double>(); }
  std::vector<double> numbers(const char* key) const { return p(key).get<std::vector<double>>(); }
  size_t critical() const {
    const auto c = static_cast<size_t>(integer("critical"));
    if (c >= map.critical_points().size())
      throw ConfigError("map '" + map.label() + "' has no critical point #" + std::to_string(c));
    return c;
  }
  const MapSpec& target() const { return maps.at(p("target").get<std::string>()); }
};

std::string decimal_type(const Real& x) { return "decimal:" + std::to_string(x.bits()); }

ordered_json orbit_precision(const orbit::OrbitRecord& r) {
  return {{"precision_bits", r.precision_bits},
          {"attempts", r.attempts},
          {"min_certified_bits",
           r.certified_bits.empty() ? 0.0 : *std::min_element(r.certified_bits.begin(), r.certified_bits.end())}};
}

Output run_orbit(const Context& c) {
  Output o;
  const auto rec = orbit::critical_orbit(c.map, c.critical(), c.integer("n"), c.policy);
  const auto cum = rec.cumulative_log_derivative();
  o.result = {{"orbit", rec.header()},
              {"hits_critical", rec.hits_critical()},
              {"log_derivative", json_number(cum.empty() ? 0.0 : cum.back())}};
  Series s{"orbit", {"k", "point", "deriv_factor", "certified_bits", "log_derivative"}, {}, {}};
  s.types = {"int", decimal_type(rec.points.front()), decimal_type(rec.deriv_factors.front()), "binary64", "binary64"};
  for (size_t k = 0; k < rec.size(); ++k) {
    s.rows.push_back({static_cast<long>(k), rec.points[k].str(), rec.deriv_factors[k].str(),
                      json_number(rec.certified_bits[k]), json_number(cum[k])});
  }
  o.series.push_back(std::move(s));
  o.precision = orbit_precision(rec);
  return o;
}

Output run_ce(const Context& c) {
  Output o;
  const auto crit = c.critical();
  const auto rec = orbit::critical_orbit(c.map, crit, c.integer("n"), c.policy);
  const auto fit = hyperbolicity::ce_fit(rec);
  o.result = {{"fit", fit.to_json()}, {"orbit", rec.header()}};
  if (const long en = c.integer("exact_n"); en > 0) {
    const auto ex = orbit::critical_orbit_exact(c.map, crit, en);
    o.result["exact"] = {{"n", en}, {"derivative_product", format_rational(abs(ex.derivative_product()))}};
  }
  const auto cum = rec.cumulative_log_derivative();
  Series s{"log_derivative", {"n", "log_abs_Dfn"}, {"int", "binary64"}, {}};
  for (size_t k = 0; k < cum.size(); ++k) s.rows.push_back({static_cast<long>(k + 1), json_number(cum[k])});
  o.series.push_back(std::move(s));
  o.precision = orbit_precision(rec);
  return o;
}

Output run_periodic(const Context& c) {
  Output o;
  const int maxp = static_cast<int>(c.integer("max_period"));
  const auto orbits = orbit::periodic_points(c.map, maxp);
  ordered_json witnesses = ordered_json::array();
  bool all = true;
  Series s{"periodic", {"period", "point", "multiplier", "repelling"}, {"int", "decimal", "decimal", "int"}, {}};
  for (const auto& p : orbits) {
    if (!p.repelling) {
      all = false;
      witnesses.push_back(p.to_json());
    }
    s.rows.push_back({p.period, p.point.str(), p.multiplier.str(), p.repelling ? 1 : 0});
  }
  if (!orbits.empty()) s.types = {"int", decimal_type(orbits[0].point), decimal_type(orbits[0].multiplier), "int"};
  o.result = {{"max_period", maxp}, {"orbits_checked", orbits.size()}, {"all_repelling", all}, {"witnesses", witnesses}};
  o.series.push_back(std::move(s));
  return o;
}

Series distance_series(const hyperbolicity::DistanceSeries& ds) {
  Series s{"d_n", {"n", "d_n", "neg_log_d_n"}, {"int", "decimal", "binary64"}, {}};
  if (!ds.d.empty()) s.types[1] = decimal_type(ds.d[0]);
  const auto nl = ds.neg_log();
  for (size_t k = 0; k < ds.size(); ++k) s.rows.push_back({static_cast<long>(k + 1), ds.d[k].str(), json_number(nl[k])});
  return s;
}

Output run_recurrence(const Context& c) {
  Output o;
  const auto rec = orbit::critical_orbit(c.map, c.critical(), c.integer("n"), c.policy);
  const auto ds = hyperbolicity::recurrence_series(c.map, rec);
  ordered_json fits = ordered_json::object();
  for (const auto& m : c.p("models")) {
    const auto model = hyperbolicity::parse_model(m.get<std::string>());
    fits[m.get<std::string>()] = hyperbolicity::recurrence_fit(ds, model).to_json();
  }
  o.result = {{"has_zero", ds.has_zero},
              {"fits", std::move(fits)},
              {"subexponential", hyperbolicity::subexponential_sweep(ds, c.numbers("thresholds")).to_json()}};
  o.series.push_back(distance_series(ds));
  o.precision = orbit_precision(rec);
  return o;
}

Output run_slow_recurrence(const Context& c) {
  Output o;
  const long n = c.integer("n");
  const auto rec = orbit::critical_orbit(c.map, c.critical(), n, c.policy);
  const auto ds = hyperbolicity::recurrence_series(c.map, rec);
  ordered_json stats = ordered_json::array();
  Series s{"slow_recurrence", {"delta", "value", "hit_count"}, {"binary64", "binary64", "int"}, {}};
  for (double d : c.numbers("deltas")) {
    const auto st = hyperbolicity::slow_recurrence_stat(ds, d, static_cast<long>(ds.size()));
    stats.push_back(st.to_json());
    s.rows.push_back({json_number(d), json_number(st.value), st.hit_count});
  }
  o.result = {{"n", ds.size()}, {"stats", std::move(stats)}};
  o.series.push_back(std::move(s));
  o.series.push_back(distance_series(ds));
  o.precision = orbit_precision(rec);
  return o;
}

Output run_tce(const Context& c) {
  Output o;
  const long N = c.integer("N"), D = c.integer("D");
  const Real x(parse_rational(c.p("x").get<std::string>()), mapkit::kAnalysisBits);
  auto radii = c.numbers("r");
  std::vector<pullback::TceDensity> dens;
  for (double r : radii) dens.push_back(pullback::tce_density(c.map, x, N, r, D, c.policy));

  // criticality at fixed (x, m) cannot decrease as r grows
  std::vector<size_t> order(radii.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return radii[a] < radii[b]; });
  bool monotone = true;
  for (size_t i = 1; i < order.size(); ++i)
    for (long m = 0; m < N; ++m)
      if (dens[order[i]].criticality[m] < dens[order[i - 1]].criticality[m]) monotone = false;

  ordered_json per = ordered_json::array();
  for (const auto& d : dens) {
    auto j = d.to_json();
    j.erase("criticality");
    per.push_back(std::move(j));
  }
  o.result = {{"x", c.p("x")}, {"N", N}, {"D", D}, {"densities", std::move(per)}, {"monotone_in_r", monotone}};
  Series s{"criticality", {"m"}, {"int"}, {}};
  for (double r : radii) {
    s.columns.push_back("r=" + json_number(r).dump());
    s.types.push_back("int");
  }
  for (long m = 0; m < N; ++m) {
    std::vector<ordered_json> row{m + 1};
    for (const auto& d : dens) row.push_back(d.criticality[m]);
    s.rows.push_back(std::move(row));
  }
  o.series.push_back(std::move(s));
  return o;
}

Output run_esc(const Context& c) {
  Output o;
  const double delta = c.number("delta");
  const auto probes = pullback::default_probes(c.map, delta, static_cast<int>(c.integer("probes")));
  const auto fit = pullback::esc_fit(c.map, delta, static_cast<int>(c.integer("N")), probes);
  o.result = fit.to_json();
  Series s{"max_diameter", {"depth", "max_diameter", "components"}, {"int", "decimal", "int"}, {}};
  if (!fit.max_diameters.empty()) s.types[1] = decimal_type(fit.max_diameters[0]);
  for (size_t k = 0; k < fit.max_diameters.size(); ++k) {
    s.rows.push_back({static_cast<long>(k + 1), fit.max_diameters[k].str(), fit.component_counts[k]});
  }
  o.series.push_back(std::move(s));
  o.precision = {{"bits", mapkit::kAnalysisBits}};
  return o;
}

Output run_koebe(const Context& c) {
  Output o;
  const long want = c.integer("samples");
  const int s_max = static_cast<int>(c.integer("s_max"));
  const double rho = c.number("rho");
  const auto taus = c.numbers("tau");
  const double lo = c.map.domain_lo().get_d(), hi = c.map.domain_hi().get_d();

  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> ux(lo, hi);
  std::uniform_int_distribution<int> us(1, s_max);

  std::vector<double> max_ratio(taus.size(), 0), max_upper(taus.size(), 0);
  Series s{"distortion", {"sample", "x", "s", "tau", "ratio", "ratio_upper", "koebe_bound"},
           {"int", "binary64", "int", "binary64", "binary64", "binary64", "binary64"}, {}};
  long accepted = 0, attempts = 0, rejected_probe = 0;
  const long max_attempts = 20 * want;
  while (accepted < want && attempts < max_attempts) {
    ++attempts;
    const double xd = ux(rng);
    const int steps = us(rng);
    const Real x(xd, 64);
    std::vector<pullback::DistortionProbe> probes;
    try {
      for (double tau : taus) {
        const auto ks = pullback::koebe_sample(c.map, x, steps, rho, tau);
        if (!ks.diffeomorphic) break;
        probes.push_back(pullback::koebe_probe(c.map, ks.T, ks.J, steps, tau));
      }
    } catch (const HypothesisError&) {
      ++rejected_probe;
      continue;
    }
    if (probes.size() != taus.size()) continue;
    for (size_t i = 0; i < taus.size(); ++i) {
      max_ratio[i] = std::max(max_ratio[i], probes[i].ratio);
      max_upper[i] = std::max(max_upper[i], probes[i].ratio_upper);
      s.rows.push_back({accepted, json_number(xd), steps, json_number(taus[i]), json_number(probes[i].ratio),
                        json_number(probes[i].ratio_upper), json_number(probes[i].koebe_bound)});
    }
    ++accepted;
  }

  ordered_json per = ordered_json::array();
  for (size_t i = 0; i < taus.size(); ++i) {
    const double kb = std::pow((1 + taus[i]) / taus[i], 2);
    per.push_back({{"tau", taus[i]},
                   {"max_ratio", json_number(max_ratio[i])},
                   {"max_ratio_upper", json_number(max_upper[i])},
                   {"koebe_bound", kb},
                   {"within_koebe_bound", max_upper[i] <= kb}});
  }
  std::vector<size_t> order(taus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return taus[a] < taus[b]; });
  bool nonincreasing = true;
  for (size_t i = 1; i < order.size(); ++i)
    if (max_ratio[order[i]] > max_ratio[order[i - 1]] * 1.05) nonincreasing = false;

  o.result = {{"requested", want},
              {"accepted", accepted},
              {"attempts", attempts},
              {"rejected_probes", rejected_probe},
              {"rho", rho},
              {"s_max", s_max},
              {"per_tau", std::move(per)},
              {"nonincreasing_in_tau", nonincreasing}};
  if (accepted == 0) o.status = TaskStatus::hypothesis_failed;
  o.series.push_back(std::move(s));
  return o;
}

Output run_quasi_chain(const Context& c) {
  Output o;
  pullback::QuasiChainOptions q;
  q.koebe_C = c.number("koebe_C");
  q.esc_C = c.number("esc_C");
  q.esc_lambda = c.number("esc_lambda");
  q.eta0 = c.number("eta0");
  q.esc_depth = static_cast<int>(c.integer("esc_depth"));
  q.esc_probes = static_cast<int>(c.integer("esc_probes"));
  q.policy = c.policy;
  const auto cert = pullback::quasi_chain(c.map, c.critical(), c.integer("n"), c.number("eta"), q);
  o.result = cert.to_json();
  o.result.erase("W");
  if (!cert.hypotheses_verified) o.status = TaskStatus::hypothesis_failed;
  Series s{"chain", {"k", "W_lo", "W_hi"}, {"int", "binary64", "binary64"}, {}};
  for (size_t k = 0; k < cert.W.size(); ++k) {
    s.rows.push_back({static_cast<long>(k), json_number(cert.W[k].lo().to_double()), json_number(cert.W[k].hi().to_double())});
  }
  o.series.push_back(std::move(s));
  return o;
}

Output run_shrink_bound(const Context& c) {
  Output o;
  pullback::ShrinkParams sp;
  sp.C_alpha = c.number("C_alpha");
  sp.alpha_rec = c.number("alpha_rec");
  sp.lambda = c.number("lambda");
  sp.M = c.number("M");
  sp.delta0 = c.number("delta0");
  sp.koebe_C = c.number("koebe_C");
  sp.esc_C = c.number("esc_C");
  sp.policy = c.policy;
  const auto cert = pullback::shrink_to_ce_bound(c.map, c.critical(), c.integer("n"), sp);
  o.result = cert.to_json();
  if (!cert.diffeo_verified) o.status = TaskStatus::hypothesis_failed;
  return o;
}

Series table_series(const conjugacy::ConjugacyTable& t) {
  Series s{"table", {"x", "y", "depth", "address"}, {"decimal", "decimal", "int", "text"}, {}};
  if (t.size()) s.types = {decimal_type(t.x[0]), decimal_type(t.y[0]), "int", "text"};
  for (size_t i = 0; i < t.size(); ++i) s.rows.push_back({t.x[i].str(), t.y[i].str(), t.level[i], t.address[i]});
  return s;
}

Output run_conjugacy(const Context& c) {
  Output o;
  const auto& g = c.target();
  const auto t = conjugacy::build_conjugacy(c.map, g, static_cast<int>(c.integer("depth")),
                                            static_cast<Bits>(c.integer("bits")));
  o.result = {{"table", t.summary()}, {"semiconjugacy_residual", conjugacy::semiconjugacy_residual(c.map, g, t).to_json()}};
  o.series.push_back(table_series(t));
  o.precision = {{"bits", t.bits}, {"max_bracket_width", json_number(t.max_bracket_width)}};
  return o;
}

Output run_invariance(const Context& c) {
  Output o;
  const auto& g = c.target();
  const auto t = conjugacy::build_conjugacy(c.map, g, static_cast<int>(c.integer("depth")),
                                            static_cast<Bits>(c.integer("bits")));
  conjugacy::InvarianceOptions io;
  io.horizon = c.integer("horizon");
  io.holder_pairs = static_cast<size_t>(c.integer("holder_pairs"));
  io.slow_deltas = c.numbers("slow_deltas");
  io.slow_eps = c.numbers("slow_eps");
  io.tce_radii = c.numbers("tce_radii");
  io.tce_D = c.integer("tce_D");
  io.tce_horizon = c.integer("tce_horizon");
  io.seed = c.seed;
  io.policy = c.policy;
  o.result = conjugacy::invariance_report(c.map, g, t, io);
  // the report draws its forward pairs with seed and its backward pairs with seed + 1
  for (auto dir : {conjugacy::Direction::forward, conjugacy::Direction::backward}) {
    const auto seed = dir == conjugacy::Direction::forward ? io.seed : io.seed + 1;
    const auto pairs = conjugacy::sample_table_pairs(t, dir, io.holder_pairs, seed);
    Series s{"holder_" + conjugacy::to_string(dir), {"dx", "dh"}, {"binary64", "binary64"}, {}};
    for (size_t i = 0; i < pairs.dx.size(); ++i) s.rows.push_back({json_number(pairs.dx[i]), json_number(pairs.dh[i])});
    o.series.push_back(std::move(s));
  }
  o.precision = {{"bits", t.bits}, {"max_bracket_width", json_number(t.max_bracket_width)}};
  return o;
}

Output dispatch(const Context& c) {
  switch (c.task.kind) {
    case TaskKind::orbit:
      return run_orbit(c);
    case TaskKind::ce:
      return run_ce(c);
    case TaskKind::periodic:
      return run_periodic(c);
    case TaskKind::recurrence:
      return run_recurrence(c);
    case TaskKind::slow_recurrence:
      return run_slow_recurrence(c);
    case TaskKind::tce:
      return run_tce(c);
    case TaskKind::esc:
      return run_esc(c);
    case TaskKind::koebe:
      return run_koebe(c);
    case TaskKind::quasi_chain:
      return run_quasi_chain(c);
    case TaskKind::shrink_bound:
      return run_shrink_bound(c);
    case TaskKind::conjugacy:
      return run_conjugacy(c);
    case TaskKind::invariance:
      return run_invariance(c);
  }
  throw ConfigError("unhandled task kind");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

uint64_t task_seed(uint64_t seed, const std::string& task_id) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : task_id) h = (h ^ ch) * 1099511628211ULL;
  // splitmix64 finaliser
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RunReport run_analysis(const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto started = utc_timestamp();

  std::map<std::string, MapSpec> maps;
  std::map<std::string, std::string> map_errors;
  for (const auto& e : config.maps) {
    try {
      maps.emplace(e.label, MapSpec::from_json(e.definition));
    } catch (const Error& err) {
      map_errors[e.label] = std::string(err.kind()) + ": " + err.what();
    }
  }

  const size_t n = config.tasks.size();
  std::vector<TaskResult> results(n);
  std::vector<double> seconds(n, 0);
  std::vector<ordered_json> precision(n, ordered_json::object());

  auto run_one = [&](size_t i) {
    const auto& tc = config.tasks[i];
    auto& r = results[i];
    r.id = tc.id;
    r.kind = tc.kind;
    r.map = tc.map;
    r.seed = task_seed(config.seed, tc.id);
    const auto s0 = std::chrono::steady_clock::now();
    try {
      for (const auto& label : {tc.map, tc.params.value("target", std::string{})}) {
        if (auto it = map_errors.find(label); it != map_errors.end())
          throw ConfigError("map '" + label + "' is unusable (" + it->second + ")");
      }
      const Context ctx{tc, maps.at(tc.map), maps, config.policy, r.seed};
      auto out = dispatch(ctx);
      r.status = out.status;
      r.result = std::move(out.result);
      r.series = std::move(out.series);
      precision[i] = std::move(out.precision);
    } catch (const HypothesisError& e) {
      r.status = TaskStatus::hypothesis_failed;
      r.result = {{"hypothesis", e.what()}};
      r.error_kind = e.kind();
      r.error_message = e.what();
    } catch (const Error& e) {
      r.status = TaskStatus::error;
      r.result = nullptr;
      r.error_kind = e.kind();
      r.error_message = e.what();
    } catch (const std::exception& e) {
      r.status = TaskStatus::error;
      r.result = nullptr;
      r.error_kind = "internal";
      r.error_message = e.what();
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
  };

  size_t workers = config.workers > 0 ? static_cast<size_t>(config.workers)
                                      : std::max<size_t>(1, std::thread::hardware_concurrency());
  if (!mpfr_buildopt_tls_p()) workers = 1;
  workers = std::min(workers, std::max<size_t>(n, 1));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i; (i = next.fetch_add(1)) < n;) run_one(i);
        mpfr_free_cache();
      });
    }
    for (auto& t : pool) t.join();
  }

  RunReport rep;
  rep.config = config.to_json();
  rep.tasks = std::move(results);
  ordered_json tt = ordered_json::array();
  for (size_t i = 0; i < n; ++i) {
    tt.push_back({{"id", config.tasks[i].id}, {"seconds", seconds[i]}, {"precision", precision[i]}});
  }
  rep.telemetry = {{"started_at", started},
                   {"wall_clock_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                   {"workers", workers},
                   {"tasks", std::move(tt)}};
  if (!config.output_dir.empty()) {
    emit_report(rep, ReportFormat::json, config.output_dir);
    emit_report(rep, ReportFormat::csv_bundle, config.output_dir);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reports

bool RunReport::has_errors() const {
  return std::any_of(tasks.begin(), tasks.end(), [](const TaskResult& t) { return t.status == TaskStatus::error; });
}

ordered_json RunReport::to_json(bool include_telemetry) const {
  ordered_json j;
  j["format"] = "celab-run-report";
  j["version"] = kConfigVersion;
  j["software"] = {{"celab", kVersion}, {"mpfr", mpfr_get_version()}, {"gmp", gmp_version}};
  j["config"] = config;
  j["status"] = has_errors() ? "error" : "ok";
  ordered_json ts = ordered_json::array();
  for (const auto& t : tasks) {
    ordered_json e{{"id", t.id}, {"kind", to_string(t.kind)}, {"map", t.map}, {"seed", t.seed}, {"status", to_string(t.status)}};
    e["result"] = t.result;
    if (!t.error_kind.empty()) e["error"] = {{"kind", t.error_kind}, {"message", t.error_message}};
    ordered_json s = ordered_json::object();
    for (const auto& x : t.series) s[x.name] = x.to_json();
    e["series"] = std::move(s);
    ts.push_back(std::move(e));
  }
  j["tasks"] = std::move(ts);
  if (include_telemetry) j["telemetry"] = telemetry;
  return j;
}

RunReport RunReport::from_json(const ordered_json& j) {
  if (!j.is_object() || j.value("format", std::string{}) != "celab-run-report") throw ConfigError("not a run report");
  RunReport r;
  try {
    r.config = j.at("config");
    for (const auto& e : j.at("tasks")) {
      TaskResult t;
      t.id = e.at("id").get<std::string>();
      t.kind = parse_task_kind(e.at("kind").get<std::string>());
      t.map = e.at("map").get<std::string>();
      t.seed = e.at("seed").get<uint64_t>();
      t.status = parse_task_status(e.at("status").get<std::string>());
      t.result = e.at("result");
      if (e.contains("error")) {
        t.error_kind = e["error"].at("kind").get<std::string>();
        t.error_message = e["error"].at("message").get<std::string>();
      }
      for (const auto& [name, s] : e.at("series").items()) t.series.push_back(Series::from_json(name, s));
      r.tasks.push_back(std::move(t));
    }
    if (j.contains("telemetry")) r.telemetry = j["telemetry"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run report: ") + e.what());
  }
  return r;
}

RunReport RunReport::load(const fs::path& run_dir) {
  const auto file = fs::is_directory(run_dir) ? run_dir / "report.json" : run_dir;
  std::ifstream in(file);
  if (!in) throw IoError("cannot read '" + file.string() + "'");
  try {
    return from_json(ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv-bundle") return ReportFormat::csv_bundle;
  throw ConfigError("unknown report format '" + s + "' (json, csv-bundle)");
}

namespace {

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << text;
  out.close();
  if (!out) throw IoError("write failed for '" + file.string() + "'");
}

}  // namespace

std::vector<fs::path> emit_report(const RunReport& report, ReportFormat format, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
  std::vector<fs::path> written;
  if (format == ReportFormat::json) {
    written.push_back(dir / "report.json");
    write_file(written.back(), report.to_json().dump(2) + "\n");
    return written;
  }
  for (const auto& t : report.tasks) {
    for (const auto& s : t.series) {
      written.push_back(dir / (t.id + "." + s.name + ".csv"));
      write_file(written.back(), s.to_csv());
    }
  }
  return written;
}

}  // namespace celab::analysis
