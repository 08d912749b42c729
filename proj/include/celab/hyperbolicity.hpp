#pragma once

// Growth and recurrence estimators on orbit data, plus the closed-form
// threshold and transport formulas for recurrence bounds under Hölder
// conjugacies.

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "celab/orbit.hpp"
#include "json.hpp"

namespace celab::hyperbolicity {

using mapkit::MapSpec;
using orbit::OrbitRecord;

inline constexpr double kGrowthTolerance = 1e-3;

struct CEFit {
  double lambda = 1;      // fitted growth rate
  double C = 0;           // largest C with |Df^n(v)| >= C lambda^n for every sampled n
  double log_C = -std::numeric_limits<double>::infinity();
  int n_lo = 0, n_hi = 0; // regression range (1-based n)
  std::vector<double> residuals;
  bool hits_critical = false;
  bool verdict = false;

  nlohmann::ordered_json to_json() const;
};

/// log_factors[k] = log |Df(f^k(v))|, k = 0..N-1; N >= 16.
CEFit ce_fit(std::span<const double> log_factors);
CEFit ce_fit(const OrbitRecord& orbit);

enum class Model { SER, ER, PR };
std::string to_string(Model m);
Model parse_model(const std::string& s);

/// Distances d_1..d_n of a critical orbit to the critical set.
struct DistanceSeries {
  std::vector<Real> d;
  bool has_zero = false;

  size_t size() const { return d.size(); }
  /// -log d_k (+inf for zero entries).
  std::vector<double> neg_log() const;
  std::vector<double> as_double() const;
};

DistanceSeries make_series(std::span<const double> d);
/// d_k = min over critical points c' of |f^k(c) - c'|, computed from the
/// certified orbit; an enclosure meeting a critical bracket counts as 0.
DistanceSeries recurrence_series(const MapSpec& map, const OrbitRecord& orbit);
DistanceSeries recurrence_series(const MapSpec& map, size_t crit_index, long n,
                                 const orbit::PrecisionPolicy& policy = {});

struct RecurrenceFit {
  Model model = Model::ER;
  double beta = 0;
  double C = 0;
  double log_C = -std::numeric_limits<double>::infinity();
  std::vector<size_t> record_indices;  // 1-based n of the record minima used
  std::vector<double> residuals;
  double residual_norm = 0;
  bool has_zero = false;
  bool verdict = false;

  /// log of the model's lower bound at n.
  double log_bound(double n) const;
  nlohmann::ordered_json to_json() const;
};

RecurrenceFit recurrence_fit(const DistanceSeries& series, Model model);

/// ER verdict with beta below each threshold: operational stand-in for
/// "every beta > 0".
struct SubexponentialSweep {
  std::vector<double> thresholds;
  std::vector<bool> passed;
  RecurrenceFit er;
  nlohmann::ordered_json to_json() const;
};
SubexponentialSweep subexponential_sweep(const DistanceSeries& series,
                                         std::vector<double> thresholds = {0.1, 0.05, 0.01});

struct SlowRecurrenceStat {
  double delta = 0;
  long n = 0;
  double value = 0;
  long hit_count = 0;
  bool infinite = false;  // a hit with d_i = 0

  nlohmann::ordered_json to_json() const;
};

SlowRecurrenceStat slow_recurrence_stat(const DistanceSeries& series, double delta, long n);

/// (log lambda)^2 / (2 (log M - log lambda)); needs 1 < lambda < M.
double ce_threshold_beta0(double lambda, double M);

struct TransportParams {
  double K = 1;
  double alpha = 1;
  double C = 1;
  double beta = 0;
};

/// Lower bound on the conjugate map's recurrence at n from the source bound
/// (C, beta) pushed through |h^-1(s) - h^-1(t)| <= K |s - t|^alpha.
double transport_recurrence_bound(const TransportParams& p, long n, Model model);
double transport_recurrence_log_bound(const TransportParams& p, long n, Model model);

/// The transported SER bound rewritten as C' exp(-n^beta') with
/// beta' = (beta + min(1, beta/alpha)) / 2 when that lies in (beta, 1).
struct SerExponent {
  bool rewritten = false;
  double beta_prime = 0;
  double log_C_prime = 0;
  nlohmann::ordered_json to_json() const;
};
SerExponent transported_ser_exponent(const TransportParams& p);

struct SlowRecurrenceTransport {
  double eps_prime = 0;
  double delta0 = 0;
};
/// eps' = alpha eps / (1 + log K), delta0 = (delta1 / K)^(1/alpha).
SlowRecurrenceTransport transport_slow_recurrence_params(double eps, double K, double alpha, double delta1);

/// n eps' / (-log delta1): bound on the number of delta1-close returns when the
/// slow recurrence sum stays below eps'.
double hit_count_bound(long n, double eps_prime, double delta1);

}  // namespace celab::hyperbolicity
