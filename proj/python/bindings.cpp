// Python module _celab. Structured values cross the boundary as JSON text;
// the celab package decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "celab/analysis.hpp"
#include "celab/conjugacy.hpp"
#include "celab/error.hpp"
#include "celab/fixtures.hpp"
#include "celab/hyperbolicity.hpp"
#include "celab/pullback.hpp"

namespace py = pybind11;
using namespace celab;
using mapkit::MapSpec;
using nlohmann::ordered_json;

namespace {

MapSpec load_map(const std::string& text) { return MapSpec::from_json(ordered_json::parse(text)); }

std::string critical_orbit(const std::string& map, long n, size_t crit) {
  const auto rec = orbit::critical_orbit(load_map(map), crit, n);
  ordered_json pts = ordered_json::array();
  for (const auto& p : rec.points) pts.push_back(p.to_double());
  ordered_json j = rec.header();
  j["points"] = std::move(pts);
  j["log_derivative"] = rec.cumulative_log_derivative();
  return j.dump();
}

std::string ce_fit(const std::string& map, long n, size_t crit) {
  return hyperbolicity::ce_fit(orbit::critical_orbit(load_map(map), crit, n)).to_json().dump();
}

std::string periodic_points(const std::string& map, int max_period) {
  ordered_json j = ordered_json::array();
  for (const auto& p : orbit::periodic_points(load_map(map), max_period)) j.push_back(p.to_json());
  return j.dump();
}

std::string recurrence_fit(const std::string& map, long n, const std::string& model, size_t crit) {
  const auto m = load_map(map);
  const auto series = hyperbolicity::recurrence_series(m, orbit::critical_orbit(m, crit, n));
  return hyperbolicity::recurrence_fit(series, hyperbolicity::parse_model(model)).to_json().dump();
}

std::string esc_fit(const std::string& map, double delta, int N, int probes) {
  const auto m = load_map(map);
  return pullback::esc_fit(m, delta, N, pullback::default_probes(m, delta, probes)).to_json().dump();
}

std::string quasi_chain(const std::string& map, long n, double eta, size_t crit) {
  auto j = pullback::quasi_chain(load_map(map), crit, n, eta).to_json();
  j.erase("W");
  return j.dump();
}

std::string conjugacy_table(const std::string& f, const std::string& g, int depth) {
  const auto t = conjugacy::build_conjugacy(load_map(f), load_map(g), depth);
  ordered_json j = t.summary();
  ordered_json xs = ordered_json::array(), ys = ordered_json::array();
  for (size_t i = 0; i < t.size(); ++i) {
    xs.push_back(t.x[i].to_double());
    ys.push_back(t.y[i].to_double());
  }
  j["x"] = std::move(xs);
  j["y"] = std::move(ys);
  return j.dump();
}

std::string run_analysis(const std::string& config, bool telemetry) {
  const auto cfg = analysis::ExperimentConfig::from_json(ordered_json::parse(config));
  py::gil_scoped_release release;
  return analysis::run_analysis(cfg).to_json(telemetry).dump();
}

}  // namespace

PYBIND11_MODULE(_celab, m) {
  m.doc() = "Critical orbits, pull-backs and conjugacies of interval maps";
  m.attr("__version__") = analysis::kVersion;

  static py::handle celab_error = py::exception<Error>(m, "CelabError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(celab_error, (std::string(e.kind()) + ": " + e.what()).c_str());
    }
  });

  m.def("fixtures", [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fixtures::catalogue()) out.emplace_back(f.name, f.summary);
    return out;
  });
  m.def("fixture_map", [](const std::string& name) { return fixtures::map(name).to_json().dump(); });
  m.def("fixture_experiment", [](const std::string& name) { return fixtures::experiment(name).dump(); });
  m.def("critical_orbit", &critical_orbit, py::arg("map"), py::arg("n"), py::arg("critical") = 0);
  m.def("ce_fit", &ce_fit, py::arg("map"), py::arg("n"), py::arg("critical") = 0);
  m.def("periodic_points", &periodic_points, py::arg("map"), py::arg("max_period"));
  m.def("recurrence_fit", &recurrence_fit, py::arg("map"), py::arg("n"), py::arg("model"), py::arg("critical") = 0);
  m.def("esc_fit", &esc_fit, py::arg("map"), py::arg("delta"), py::arg("N"), py::arg("probes") = 20);
  m.def("quasi_chain", &quasi_chain, py::arg("map"), py::arg("n"), py::arg("eta"), py::arg("critical") = 0);
  m.def("conjugacy_table", &conjugacy_table, py::arg("f"), py::arg("g"), py::arg("depth"));
  m.def("run_analysis", &run_analysis, py::arg("config"), py::arg("telemetry") = true);
}
