#pragma once

// Named maps used throughout the tests and by `celab fixtures`.

#include <string>
#include <vector>

#include "celab/mapkit.hpp"
#include "json.hpp"

namespace celab::fixtures {

struct FixtureInfo {
  std::string name;
  std::string summary;
};

const std::vector<FixtureInfo>& catalogue();

/// Throws ConfigError for unknown names.
mapkit::MapSpec map(const std::string& name);

/// A ready-to-run experiment configuration exercising the fixture.
nlohmann::ordered_json experiment(const std::string& name);

}  // namespace celab::fixtures
