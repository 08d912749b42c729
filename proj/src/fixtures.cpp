#include "celab/fixtures.hpp"

#include <map>

#include "celab/error.hpp"

namespace celab::fixtures {

using mapkit::MapSpec;
using mapkit::Polynomial;
using nlohmann::ordered_json;

const std::vector<FixtureInfo>& catalogue() {
  static const std::vector<FixtureInfo> list{
      {"ulam", "4x(1-x) on [0,1]"},
      {"logistic-3.9", "3.9x(1-x) on [0,1]"},
      {"logistic-3.5", "3.5x(1-x) on [0,1], attracting 4-cycle"},
      {"logistic-2.8", "2.8x(1-x) on [0,1], attracting fixed point"},
      {"a2", "2x(1-x) on [0,1], superattracting fixed point 1/2"},
      {"cubic", "3.8x(1-x)(x-0.1) + 0.02 on [0,1], two critical points"},
      {"quartic", "x^4 on [-1,1], critical order 4"},
      {"sine", "sin(pi x) on [0,1]"},
      {"phi-conjugate", "phi o ulam o phi^-1 with phi(x) = (x + x^2)/2"},
  };
  return list;
}

MapSpec map(const std::string& name) {
  if (name == "ulam") return MapSpec::polynomial("ulam", {0, 4, -4}, 0, 1);
  if (name == "logistic-3.9") return MapSpec::polynomial(name, {0, Rational(39, 10), Rational(-39, 10)}, 0, 1);
  if (name == "logistic-3.5") return MapSpec::polynomial(name, {0, Rational(7, 2), Rational(-7, 2)}, 0, 1);
  if (name == "logistic-2.8") return MapSpec::polynomial(name, {0, Rational(14, 5), Rational(-14, 5)}, 0, 1);
  if (name == "a2") return MapSpec::polynomial("a2", {0, 2, -2}, 0, 1);
  if (name == "cubic") {
    return MapSpec::polynomial("cubic", {Rational(1, 50), Rational(-19, 50), Rational(209, 50), Rational(-19, 5)}, 0, 1);
  }
  if (name == "quartic") return MapSpec::polynomial("quartic", {0, 0, 0, 0, 1}, -1, 1);
  if (name == "sine") return MapSpec::trig_polynomial("sine", 1, {}, {0, 1}, 0, 1);
  if (name == "phi-conjugate") {
    // phi^-1(y) = (s - 1)/2 with s = sqrt(1 + 8y); g is polynomial in y and s
    std::map<int, Polynomial> terms;
    terms[0] = Polynomial{{14, 92, 32}};
    terms[1] = Polynomial{{-14, -32}};
    return MapSpec::radical("phi-conjugate", 1, 8, std::move(terms), 0, 1);
  }
  throw ConfigError("unknown fixture '" + name + "'");
}

namespace {

ordered_json task(const std::string& id, const std::string& kind, const std::string& map_label, ordered_json params) {
  return ordered_json{{"id", id}, {"kind", kind}, {"map", map_label}, {"params", std::move(params)}};
}

ordered_json fixture_ref(const std::string& name) { return ordered_json{{"fixture", name}}; }

}  // namespace

ordered_json experiment(const std::string& name) {
  map(name);  // validates the name
  ordered_json cfg;
  cfg["seed"] = 1;
  cfg["maps"] = ordered_json::array({fixture_ref(name)});
  ordered_json tasks = ordered_json::array();
  const auto lbl = name;
  if (name == "phi-conjugate") {
    cfg["maps"].push_back(fixture_ref("ulam"));
    tasks.push_back(task("ce", "ce", lbl, {{"n", 200}}));
    tasks.push_back(task("recurrence", "recurrence", lbl, {{"n", 200}}));
    tasks.push_back(task("conjugacy", "conjugacy", "ulam", {{"target", lbl}, {"depth", 12}}));
    tasks.push_back(task("invariance", "invariance", "ulam", {{"target", lbl}, {"depth", 12}}));
  } else if (name == "logistic-3.5" || name == "logistic-2.8" || name == "a2") {
    tasks.push_back(task("orbit", "orbit", lbl, {{"n", 100}}));
    tasks.push_back(task("periodic", "periodic", lbl, {{"max_period", 6}}));
    tasks.push_back(task("ce", "ce", lbl, {{"n", 200}}));
  } else {
    tasks.push_back(task("orbit", "orbit", lbl, {{"n", 200}}));
    tasks.push_back(task("ce", "ce", lbl, {{"n", 200}}));
    tasks.push_back(task("periodic", "periodic", lbl, {{"max_period", 6}}));
    // the cubic critical orbits have too few record minima for a recurrence fit
    if (name != "cubic") tasks.push_back(task("recurrence", "recurrence", lbl, {{"n", 200}}));
    tasks.push_back(task("slow-recurrence", "slow-recurrence", lbl, {{"n", 200}}));
    tasks.push_back(task("tce", "tce", lbl, {{"x", "1/3"}, {"N", 100}}));
    tasks.push_back(task("esc", "esc", lbl, {{"delta", 0.1}, {"N", 8}}));
    tasks.push_back(task("koebe", "koebe", lbl, {{"samples", 10}, {"s_max", 10}}));
    tasks.push_back(task("quasi-chain", "quasi-chain", lbl, {{"n", 100}, {"eta", 0.05}}));
    tasks.push_back(task("shrink-bound", "shrink-bound", lbl, {{"n", 10}}));
  }
  cfg["tasks"] = std::move(tasks);
  return cfg;
}

}  // namespace celab::fixtures
