#pragma once

// Pull-backs (components of preimages of intervals), criticality along
// backward chains, shrinking of components, distortion probes and the
// derivative certificates built from chains of pull-backs.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "celab/orbit.hpp"
#include "json.hpp"

namespace celab::pullback {

using mapkit::Dynamics;
using mapkit::MapSpec;

inline constexpr size_t kComponentCap = 1'000'000;

/// One-step inverse images at a fixed precision.
class Puller {
 public:
  Puller(const MapSpec& map, Bits bits);

  const Dynamics& dynamics() const { return dyn_; }
  Bits bits() const { return dyn_.bits(); }

  /// All components of f^-1(W), sorted, pairwise disjoint.
  std::vector<Interval> preimage(const Interval& w) const;
  /// The component of f^-1(W) containing p.
  Interval pull(const Interval& w, const Real& p) const;
  bool meets_critical(const Interval& w) const;
  /// The point of branch `branch` mapped to y; y must lie in the branch image.
  Real invert(int branch, const Real& y, const Real* guess = nullptr) const;

 private:
  struct Piece {
    int branch;
    Real lo, hi;
    bool at_left, at_right;  // touches the branch endpoint
  };
  std::optional<Piece> piece(int branch, const Interval& w, const Real* guess = nullptr) const;

  Dynamics dyn_;
};

struct ComponentTree {
  Interval base;
  std::vector<std::vector<Interval>> levels;  // levels[k]: components of f^-k(J)
  std::vector<std::vector<bool>> flagged;     // below the pruning floor, not expanded
  Bits bits = 0;
  double pruning_floor = 0;

  int depth() const { return static_cast<int>(levels.size()) - 1; }
  size_t component_count() const;
  /// max diameter at depth k, k = 0..depth().
  std::vector<Real> max_diameters() const;
  std::string to_csv() const;  // depth,left,right,flagged
};

class CapacityExceeded : public Error {
 public:
  CapacityExceeded(const std::string& what, ComponentTree partial)
      : Error("capacity", what), partial_(std::move(partial)) {}
  const ComponentTree& partial() const { return partial_; }

 private:
  ComponentTree partial_;
};

/// Components of f^-k(J) for k = 0..depth. Components narrower than
/// 2^-(bits/2) are kept and flagged but not expanded further.
ComponentTree preimage_components(const MapSpec& map, const Interval& J, int depth, Bits bits = mapkit::kAnalysisBits,
                                  size_t cap = kComponentCap);

struct ComponentChain {
  long n = 0;
  Real radius;
  Interval base;          // B(f^n(x), r) clipped to the domain
  bool clipped = false;
  std::vector<Real> orbit;            // f^j(x), j = 0..n
  std::vector<Interval> W;            // W_j, j = 0..n
  std::vector<bool> critical;         // W_j contains a critical point
  Bits bits = 0;

  long criticality() const;  // # j in {0..n-1} with critical[j]
  std::vector<double> diameters() const;
  nlohmann::ordered_json to_json() const;
};

ComponentChain pullback_chain(const MapSpec& map, const Real& x, long n, const Real& r,
                              const orbit::PrecisionPolicy& policy = {});
long criticality_count(const MapSpec& map, const Real& x, long n, const Real& r,
                       const orbit::PrecisionPolicy& policy = {});
/// Criticality of f^m at x for m = 1..N (entry m-1), sharing one orbit.
std::vector<long> criticality_profile(const MapSpec& map, const Real& x, long N, const Real& r,
                                      const orbit::PrecisionPolicy& policy = {});

struct TceDensity {
  long N = 0;
  long D = 0;
  double r = 0;
  std::vector<long> criticality;  // criticality of f^m at x, m = 1..N
  double density = 0;             // #{m <= N : criticality <= D} / N
  double liminf_surrogate = 0;    // min over n in [N/2, N] of the running density
  nlohmann::ordered_json to_json() const;
};

TceDensity tce_density(const MapSpec& map, const Real& x, long N, double r, long D,
                       const orbit::PrecisionPolicy& policy = {});

struct ShrinkingFit {
  double delta = 0;
  int N = 0;
  std::vector<Real> max_diameters;  // depth 1..N
  std::vector<size_t> component_counts;
  double lambda = 1;
  double C = 0;
  bool verdict = false;
  nlohmann::ordered_json to_json() const;
};

/// Probe intervals of length delta centred on a uniform grid of `count`
/// points, clipped to the domain.
std::vector<Interval> default_probes(const MapSpec& map, double delta, int count = 20, Bits bits = mapkit::kAnalysisBits);
ShrinkingFit esc_fit(const MapSpec& map, double delta, int N, std::span<const Interval> probes,
                     Bits bits = mapkit::kAnalysisBits);

struct PullStableResult {
  double kappa = 0;
  int N = 0;
  std::vector<double> deltas;
  std::vector<double> max_diameter;  // per delta
  std::optional<double> best;        // largest passing delta
  nlohmann::ordered_json to_json() const;
};

/// Largest delta in the grid such that every pull-back of every B(x, delta)
/// up to depth N is shorter than kappa. Balls are covered by B(x_i, 1.5 delta)
/// around grid points spaced delta apart.
PullStableResult pull_stable_probe(const MapSpec& map, double kappa, std::span<const double> delta_grid, int N,
                                   Bits bits = mapkit::kAnalysisBits);

struct DistortionProbe {
  Interval T, J;
  int s = 0;
  double tau = 0;
  double image_T_length = 0;
  double image_J_length = 0;
  double margin_left = 0, margin_right = 0;
  bool well_inside = false;
  double xi = 0;
  double ratio = 1;        // sup |Df^s| / inf |Df^s| over J (sampled estimate)
  double ratio_upper = 1;  // certified upper bound from interval enclosures
  double koebe_bound = 0;  // ((1 + tau) / tau)^2
  int cells = 0;
  nlohmann::ordered_json to_json() const;
};

/// Needs f^s injective on T (checked step by step), f^s(J) tau-well inside
/// f^s(T) with margins measured against |f^s(J)|, and |f^s(T)| <= xi.
DistortionProbe koebe_probe(const MapSpec& map, const Interval& T, const Interval& J, int s, double tau,
                            double xi = INFINITY, Bits bits = 256);

/// T and J as pull-backs along x of B(f^s(x), rho) and B(f^s(x), rho / (1 + 2 tau)),
/// so that f^s(J) is tau-well inside f^s(T).
struct KoebeSample {
  Interval T, J;
  bool diffeomorphic = false;
};
KoebeSample koebe_sample(const MapSpec& map, const Real& x, int s, double rho, double tau, Bits bits = 256);

struct QuasiChainOptions {
  double koebe_C = 18;      // distortion constant for tau = 1/2
  double esc_C = 0;         // 0: fitted
  double esc_lambda = 0;    // 0: fitted
  double eta0 = 0;          // 0: eta
  int esc_depth = 10;
  int esc_probes = 20;
  orbit::PrecisionPolicy policy;
};

struct QuasiChainCertificate {
  long n = 0;
  double eta = 0;
  Real v;
  std::vector<long> reset_times;  // n_1 > n_2 > ... > n_m
  long m = 0;
  std::vector<Interval> W;        // hat W_k, k = 0..n
  std::vector<double> block_log_derivative;   // log |Dg^{n_{i-1}-n_i-1}(g^{n_i+1}(v))|, then the final block
  std::vector<long> block_lengths;
  std::vector<double> reset_log_derivative;   // log |Dg(g^{n_i}(v))|
  std::vector<double> reset_distance;         // d(g^{n_i}(v))
  double lambda = 1, esc_C = 0, koebe_C = 0, C1 = 0, L = 1;
  int ell = 2;
  double eta0 = 0;
  double theta_2ell = 0, theta_1ell = 0, eps_star_2ell = 0, eps_star_1ell = 0;
  double log_bound = 0;
  double log_actual = 0;
  bool hypotheses_verified = false;
  std::vector<std::string> hypothesis_notes;
  bool eta_below_inverse_e = false;
  bool nonflat_ok = false;
  bool esc_blocks_ok = false;
  bool slow_recurrence_count_ok = false;  // m <= n eps_* / (-log eta)
  bool violated = false;                  // hypotheses verified but bound > actual
  long certified_prefix = 0;              // < n when precision ran out

  nlohmann::ordered_json to_json() const;
};

/// Rules: hat W_n = B(g^n(v), eta); hat W_k' is the component of g^-1(hat W_{k+1})
/// containing g^k(v); reset hat W_k = B(g^k(v), eta) whenever hat W_k' meets
/// Crit. v = g(c) for critical point crit_index.
QuasiChainCertificate quasi_chain(const MapSpec& map, size_t crit_index, long n, double eta,
                                  const QuasiChainOptions& opts = {});

struct ShrinkParams {
  double C_alpha = 1;
  double alpha_rec = 0;
  double lambda = 2;
  double M = 4;
  double delta0 = 0.1;
  double koebe_C = 18;
  double esc_C = 1;
  orbit::PrecisionPolicy policy;
};

struct ShrinkCertificate {
  long n = 0;
  long m = 0;
  double radius_log = 0;  // log(delta0 M^-m)
  double W0_diameter = 0;
  double log_W0_diameter = 0;
  bool diffeo_verified = false;
  std::vector<long> critical_indices;  // j with W_j meeting Crit
  bool esc_consistent = false;         // |W_0| <= esc_C lambda^-(n+m)
  double log_bound = 0;
  double log_actual = 0;
  bool violated = false;
  nlohmann::ordered_json to_json() const;
};

/// v = f(c) for crit_index; m is the least integer >= 0 with
/// lambda^-m <= C_alpha exp(-alpha_rec (n + 1)).
ShrinkCertificate shrink_to_ce_bound(const MapSpec& map, size_t crit_index, long n, const ShrinkParams& p);

}  // namespace celab::pullback
