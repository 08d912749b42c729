#pragma once

// Topological conjugacies between multimodal maps, built by matching
// backward orbits of the critical set through their branch addresses, with
// Hölder constant estimation and invariance reports.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "celab/hyperbolicity.hpp"
#include "celab/orbit.hpp"
#include "json.hpp"

namespace celab::conjugacy {

using mapkit::MapSpec;

/// Branch symbols: L/R for two branches, L/M/R for three, digits otherwise.
/// Critical point j is 'C' for unimodal maps and 'C<j+1>' otherwise.
std::string symbol_text(int symbol, int branch_count, int critical_count);

struct Itinerary {
  std::vector<int> symbols;  // branch index, or -(j+1) at critical point j
  int branch_count = 2;
  int critical_count = 1;

  size_t depth() const { return symbols.size(); }
  std::string word() const;
};

/// Branch of f^k(x) for k = 0..depth-1. An orbit point whose enclosure meets
/// a critical bracket gets the critical marker and the orbit continues with
/// the critical value.
Itinerary itinerary(const MapSpec& map, const Real& x, int depth, const orbit::PrecisionPolicy& policy = {});

inline constexpr size_t kTableCap = 4'000'000;

struct ConjugacyTable {
  std::string source, target;
  int depth = 0;
  Bits bits = 0;
  std::vector<Real> x, y;            // sorted, strictly increasing in both
  std::vector<int> level;            // k with f^k(x) critical
  std::vector<std::string> address;  // branch word ending in the critical marker
  std::vector<long> image;           // index of f(x_i), -1 on level 0
  double max_bracket_width = 0;      // widest root bracket among table points

  size_t size() const { return x.size(); }
  /// Bracketing pair [y_i, y_{i+1}] with x_i <= x <= x_{i+1}; a point when x
  /// is a table point.
  Interval eval(const Real& x) const;
  double max_gap_source() const;
  double max_gap_target() const;
  std::string to_csv() const;  // x,y,depth,address
  nlohmann::ordered_json summary() const;
};

/// Matches the first `depth` levels of backward orbits of the critical sets.
ConjugacyTable build_conjugacy(const MapSpec& f, const MapSpec& g, int depth, Bits bits = 256);

struct SemiconjugacyResidual {
  double source = 0;  // max |f(x_i) - x_image(i)|
  double target = 0;  // max |g(y_i) - y_image(i)|
  nlohmann::ordered_json to_json() const;
};
SemiconjugacyResidual semiconjugacy_residual(const MapSpec& f, const MapSpec& g, const ConjugacyTable& table);

enum class Direction { forward, backward };
std::string to_string(Direction d);

struct PairSample {
  std::vector<double> dx;  // |x - x'|
  std::vector<double> dh;  // |h(x) - h(x')|
  std::string description;
};

struct HolderFit {
  Direction direction = Direction::forward;
  double alpha = 1;
  double K = 0;
  size_t pairs = 0;
  double decades = 0;
  std::vector<double> bin_log_dx, bin_log_dh, residuals;  // envelope points (natural logs)
  std::string description;
  nlohmann::ordered_json to_json() const;
};

/// Exponent from the per-bin maxima of |h(x)-h(x')| over dyadic bins of
/// |x-x'|; K is the smallest constant with |h(x)-h(x')| <= K |x-x'|^alpha on
/// every pair. Needs 1000 pairs spanning 4 decades.
HolderFit holder_fit(const PairSample& sample, Direction direction = Direction::forward);

/// Pairs (x, x + s) with s log-uniform in [min_sep, max_sep]; half of them
/// start at an anchor (pointing into the domain), half at uniform points.
PairSample sample_function_pairs(const std::function<double(double)>& h, double lo, double hi,
                                 std::span<const double> anchors, size_t count, uint64_t seed,
                                 double min_sep = 1e-8, double max_sep = 0.1);
/// Pairs of table points at log-uniform separations; half anchored at
/// critical points. Backward swaps the roles of source and target.
PairSample sample_table_pairs(const ConjugacyTable& table, Direction direction, size_t count, uint64_t seed,
                              double min_sep = 1e-8, double max_sep = 0.1);

struct InvarianceOptions {
  long horizon = 200;
  std::vector<double> slow_deltas{0.1, 0.05, 0.01};
  std::vector<double> slow_eps{0.05, 0.1, 0.2};
  std::vector<double> tce_radii{0.05, 0.1};
  long tce_D = 1;
  long tce_horizon = 100;
  size_t holder_pairs = 4000;
  uint64_t seed = 1;
  orbit::PrecisionPolicy policy;
};

/// Growth and recurrence fits for both maps, Hölder fits of the table, and
/// the transported bounds compared with the target's observed series.
/// Sections thm1..thm4 cover the stretched exponential, subexponential,
/// polynomial and slow recurrence cases.
nlohmann::ordered_json invariance_report(const MapSpec& f, const MapSpec& g, const ConjugacyTable& table,
                                         const InvarianceOptions& opts = {});

}  // namespace celab::conjugacy
