#pragma once

// Critical orbits and periodic orbits with certified precision.

#include <string>
#include <vector>

#include "celab/error.hpp"
#include "celab/mapkit.hpp"
#include "json.hpp"

namespace celab::orbit {

using mapkit::CriticalPoint;
using mapkit::MapSpec;

struct PrecisionPolicy {
  Bits min_certified_bits = 64;
  Bits guard_bits = 64;
  Bits max_bits = 1 << 15;
  Bits fixed_bits = 0;  // nonzero: use exactly this precision, no growth

  nlohmann::ordered_json to_json() const;
  static PrecisionPolicy from_json(const nlohmann::ordered_json& j);
};

/// ceil(n * log2 M) + guard, where M is the map's sup |Df| estimate.
Bits initial_bits(const MapSpec& map, long n, const PrecisionPolicy& policy);

class PrecisionExhausted : public PrecisionError {
 public:
  PrecisionExhausted(const std::string& what, size_t certified_prefix)
      : PrecisionError(what), prefix_(certified_prefix) {}
  size_t certified_prefix() const { return prefix_; }

 private:
  size_t prefix_;
};

struct OrbitRecord {
  std::string map_label;
  int critical_index = -1;          // -1 for orbits of arbitrary points
  Real start;                       // f(c) for critical orbits
  std::vector<Real> points;         // start, f(start), ...
  std::vector<Interval> enclosures; // certified enclosures of points
  std::vector<Real> deriv_factors;  // |Df(points[k])|
  std::vector<double> certified_bits;
  Bits precision_bits = 0;
  int attempts = 0;
  PrecisionPolicy policy;

  size_t size() const { return points.size(); }
  /// log |Df^n(start)| for n = 1..size() (entry n-1); -inf after a zero factor.
  std::vector<double> cumulative_log_derivative() const;
  std::vector<double> log_factors() const;
  bool hits_critical() const;

  std::string to_csv() const;
  nlohmann::ordered_json header() const;
};

/// Orbit of v = f(c): points[k] = f^k(v), k = 0..max(n,1)-1.
OrbitRecord critical_orbit(const MapSpec& map, size_t crit_index, long n, const PrecisionPolicy& policy = {});
OrbitRecord critical_orbit(const MapSpec& map, const CriticalPoint& c, long n, const PrecisionPolicy& policy = {});
/// Orbit of an arbitrary point (or enclosure): points[k] = f^k(x), k = 0..n.
OrbitRecord point_orbit(const MapSpec& map, const Interval& x, long n, const PrecisionPolicy& policy = {});

struct ExactOrbit {
  std::vector<Rational> points;
  std::vector<Rational> deriv_factors;  // |Df(points[k])|
  Rational derivative_product() const;
};

inline constexpr long kExactOrbitCap = 30;

/// Exact rational critical orbit for polynomial maps whose critical point is
/// rational. n <= kExactOrbitCap.
ExactOrbit critical_orbit_exact(const MapSpec& map, size_t crit_index, long n);

struct PeriodicOrbit {
  int period = 0;
  Real point;               // smallest point of the cycle
  Interval bracket;         // sign change of f^p(x) - x
  std::vector<Real> cycle;  // point, f(point), ...
  Real multiplier;          // Df^p(point), signed
  bool repelling = false;

  nlohmann::ordered_json to_json() const;
};

inline constexpr double kRepellingMargin = 0x1p-20;
inline constexpr int kDefaultPeriodCap = 12;

struct PeriodicOptions {
  int cap = kDefaultPeriodCap;
  bool reverse = false;  // enumerate laps right to left
  Bits bits = 0;         // 0: chosen from the period
};

/// All periodic orbits of least period p <= max_period, ordered by
/// (period, point).
std::vector<PeriodicOrbit> periodic_points(const MapSpec& map, int max_period, const PeriodicOptions& opts = {});

struct RepellingReport {
  bool all_repelling = true;
  size_t orbits_checked = 0;
  std::vector<PeriodicOrbit> witnesses;

  nlohmann::ordered_json to_json() const;
};

RepellingReport repelling_check(const MapSpec& map, int max_period, const PeriodicOptions& opts = {});

}  // namespace celab::orbit
