#include "celab/hyperbolicity.hpp"

#include <algorithm>
#include <cmath>

#include "celab/json_util.hpp"
#include "celab/regression.hpp"

namespace celab::hyperbolicity {

using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Collet-Eckmann growth

CEFit ce_fit(std::span<const double> log_factors) {
  const size_t N = log_factors.size();
  if (N < 16) throw InsufficientDataError("ce_fit needs an orbit of length >= 16 (got " + std::to_string(N) + ")");
  CEFit fit;
  fit.n_lo = static_cast<int>(std::max<size_t>(1, N / 2));
  fit.n_hi = static_cast<int>(N);
  std::vector<double> S(N);
  double s = 0;
  for (size_t k = 0; k < N; ++k) {
    if (std::isinf(log_factors[k]) && log_factors[k] < 0) fit.hits_critical = true;
    s += log_factors[k];
    S[k] = s;
  }
  if (fit.hits_critical) {
    fit.lambda = 1;
    fit.C = 0;
    return fit;
  }
  std::vector<double> xs, ys;
  for (int n = fit.n_lo; n <= fit.n_hi; ++n) {
    xs.push_back(n);
    ys.push_back(S[static_cast<size_t>(n) - 1]);
  }
  const Line line = fit_line(xs, ys);
  const double log_lambda = std::max(0.0, line.slope);
  fit.lambda = std::exp(log_lambda);
  for (size_t i = 0; i < xs.size(); ++i) fit.residuals.push_back(ys[i] - (line.slope * xs[i] + line.intercept));
  double log_c = INFINITY;
  for (size_t k = 0; k < N; ++k) log_c = std::min(log_c, S[k] - static_cast<double>(k + 1) * log_lambda);
  fit.log_C = log_c;
  fit.C = std::exp(log_c);
  fit.verdict = fit.lambda > 1.0 + kGrowthTolerance;
  return fit;
}

CEFit ce_fit(const OrbitRecord& orbit) {
  const auto lf = orbit.log_factors();
  return ce_fit(lf);
}

ordered_json CEFit::to_json() const {
  return ordered_json{{"lambda", json_number(lambda)},
                      {"C", json_number(C)},
                      {"log_C", json_number(log_C)},
                      {"n_range", {n_lo, n_hi}},
                      {"residual_rms", json_number(residuals.empty() ? 0.0 : [&] {
                         double s = 0;
                         for (double r : residuals) s += r * r;
                         return std::sqrt(s / static_cast<double>(residuals.size()));
                       }())},
                      {"hits_critical", hits_critical},
                      {"verdict", verdict}};
}

// ---------------------------------------------------------------------------
// Distance series

std::string to_string(Model m) {
  switch (m) {
    case Model::SER: return "SER";
    case Model::ER: return "ER";
    case Model::PR: return "PR";
  }
  return "?";
}

Model parse_model(const std::string& s) {
  if (s == "SER" || s == "ser") return Model::SER;
  if (s == "ER" || s == "er") return Model::ER;
  if (s == "PR" || s == "pr") return Model::PR;
  throw ConfigError("unknown recurrence model '" + s + "' (expected SER, ER or PR)");
}

std::vector<double> DistanceSeries::neg_log() const {
  std::vector<double> out;
  out.reserve(d.size());
  for (const auto& x : d) out.push_back(x.is_zero() ? INFINITY : -x.log_abs());
  return out;
}

std::vector<double> DistanceSeries::as_double() const {
  std::vector<double> out;
  out.reserve(d.size());
  for (const auto& x : d) out.push_back(x.to_double());
  return out;
}

DistanceSeries make_series(std::span<const double> d) {
  DistanceSeries s;
  for (double x : d) {
    if (!(x >= 0) || !std::isfinite(x)) throw DomainError("distances must be finite and nonnegative");
    s.d.emplace_back(x, 53);
    s.has_zero = s.has_zero || x == 0;
  }
  return s;
}

DistanceSeries recurrence_series(const MapSpec& map, const OrbitRecord& orbit) {
  const mapkit::Dynamics dyn(map, orbit.precision_bits);
  DistanceSeries s;
  for (size_t k = 0; k < orbit.size(); ++k) {
    if (dyn.meets_critical(orbit.enclosures[k])) {
      s.d.emplace_back(0L, orbit.precision_bits);
      s.has_zero = true;
    } else {
      s.d.push_back(dyn.distance_to_critical(orbit.points[k]));
    }
  }
  return s;
}

DistanceSeries recurrence_series(const MapSpec& map, size_t crit_index, long n, const orbit::PrecisionPolicy& policy) {
  if (n < 1) throw ConfigError("recurrence series needs n >= 1");
  return recurrence_series(map, orbit::critical_orbit(map, crit_index, n, policy));
}

// ---------------------------------------------------------------------------
// Recurrence fits

namespace {

double penalty(Model m, double beta, double n) {
  switch (m) {
    case Model::SER: return std::pow(n, beta);
    case Model::ER: return beta * n;
    case Model::PR: return beta * std::log(n);
  }
  return 0;
}

// Profile least squares for y = a + n^beta: a is eliminated in closed form.
double ser_profile_sse(const std::vector<double>& n, const std::vector<double>& y, double beta) {
  double a = 0;
  for (size_t i = 0; i < n.size(); ++i) a += y[i] - std::pow(n[i], beta);
  a /= static_cast<double>(n.size());
  double sse = 0;
  for (size_t i = 0; i < n.size(); ++i) {
    const double r = y[i] - a - std::pow(n[i], beta);
    sse += r * r;
  }
  return sse;
}

double fit_ser_beta(const std::vector<double>& n, const std::vector<double>& y) {
  constexpr double kMax = 4.0;
  constexpr int kGrid = 400;
  int best = 0;
  double best_sse = INFINITY;
  for (int i = 0; i <= kGrid; ++i) {
    const double sse = ser_profile_sse(n, y, kMax * i / kGrid);
    if (sse < best_sse) {
      best_sse = sse;
      best = i;
    }
  }
  double lo = kMax * std::max(0, best - 1) / kGrid, hi = kMax * std::min(kGrid, best + 1) / kGrid;
  const double g = (std::sqrt(5.0) - 1) / 2;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = ser_profile_sse(n, y, x1), f2 = ser_profile_sse(n, y, x2);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = ser_profile_sse(n, y, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = ser_profile_sse(n, y, x2);
    }
  }
  const double beta = (lo + hi) / 2;
  return ser_profile_sse(n, y, beta) <= best_sse ? beta : kMax * best / kGrid;
}

}  // namespace

double RecurrenceFit::log_bound(double n) const { return log_C - penalty(model, beta, n); }

RecurrenceFit recurrence_fit(const DistanceSeries& series, Model model) {
  RecurrenceFit fit;
  fit.model = model;
  if (series.has_zero) {
    fit.has_zero = true;
    fit.verdict = false;
    return fit;
  }
  const size_t N = series.size();
  if (N < 16) throw InsufficientDataError("recurrence_fit needs a series of length >= 16 (got " + std::to_string(N) + ")");
  const auto y_all = series.neg_log();

  // Running (non-strict) record minima of d_n, i.e. record maxima of -log d_n.
  std::vector<double> ns, ys;
  double worst = -INFINITY;
  for (size_t i = 0; i < N; ++i) {
    if (y_all[i] >= worst) {
      worst = y_all[i];
      fit.record_indices.push_back(i + 1);
      ns.push_back(static_cast<double>(i + 1));
      ys.push_back(y_all[i]);
    }
  }
  if (ns.size() < 4) {
    throw InsufficientDataError("only " + std::to_string(ns.size()) + " record minima; at least 4 are needed");
  }

  double intercept = 0;
  switch (model) {
    case Model::ER: {
      const Line l = fit_line(ns, ys);
      fit.beta = l.slope;
      intercept = l.intercept;
      break;
    }
    case Model::PR: {
      std::vector<double> ln(ns.size());
      for (size_t i = 0; i < ns.size(); ++i) ln[i] = std::log(ns[i]);
      const Line l = fit_line(ln, ys);
      fit.beta = l.slope;
      intercept = l.intercept;
      break;
    }
    case Model::SER: {
      fit.beta = fit_ser_beta(ns, ys);
      double a = 0;
      for (size_t i = 0; i < ns.size(); ++i) a += ys[i] - std::pow(ns[i], fit.beta);
      intercept = a / static_cast<double>(ns.size());
      break;
    }
  }
  fit.beta = std::max(0.0, fit.beta);
  double ss = 0;
  for (size_t i = 0; i < ns.size(); ++i) {
    const double r = ys[i] - (intercept + penalty(model, fit.beta, ns[i]));
    fit.residuals.push_back(r);
    ss += r * r;
  }
  fit.residual_norm = std::sqrt(ss);
  double log_c = INFINITY;
  for (size_t i = 0; i < N; ++i) log_c = std::min(log_c, -y_all[i] + penalty(model, fit.beta, static_cast<double>(i + 1)));
  fit.log_C = log_c;
  fit.C = std::exp(log_c);
  fit.verdict = model == Model::SER ? fit.beta < 1.0 : true;
  return fit;
}

ordered_json RecurrenceFit::to_json() const {
  ordered_json rec = ordered_json::array();
  for (auto i : record_indices) rec.push_back(i);
  return ordered_json{{"model", to_string(model)},
                      {"beta", json_number(beta)},
                      {"C", json_number(C)},
                      {"log_C", json_number(log_C)},
                      {"record_count", record_indices.size()},
                      {"n_range", record_indices.empty() ? ordered_json::array()
                                                          : ordered_json{record_indices.front(), record_indices.back()}},
                      {"residual_norm", json_number(residual_norm)},
                      {"has_zero", has_zero},
                      {"verdict", verdict}};
}

SubexponentialSweep subexponential_sweep(const DistanceSeries& series, std::vector<double> thresholds) {
  SubexponentialSweep s;
  s.er = recurrence_fit(series, Model::ER);
  s.thresholds = std::move(thresholds);
  for (double t : s.thresholds) s.passed.push_back(s.er.verdict && s.er.beta < t);
  return s;
}

ordered_json SubexponentialSweep::to_json() const {
  ordered_json rows = ordered_json::array();
  for (size_t i = 0; i < thresholds.size(); ++i) rows.push_back({{"threshold", thresholds[i]}, {"passed", static_cast<bool>(passed[i])}});
  return ordered_json{{"er_fit", er.to_json()}, {"sweep", rows}};
}

// ---------------------------------------------------------------------------
// Slow recurrence

SlowRecurrenceStat slow_recurrence_stat(const DistanceSeries& series, double delta, long n) {
  if (!(delta > 0)) throw DomainError("slow recurrence radius must be positive");
  if (n < 1) throw DomainError("slow recurrence horizon must be >= 1");
  if (static_cast<size_t>(n) > series.size()) {
    throw InsufficientDataError("series has " + std::to_string(series.size()) + " entries, horizon is " + std::to_string(n));
  }
  SlowRecurrenceStat st;
  st.delta = delta;
  st.n = n;
  const Real dl(delta, 53);
  double sum = 0;
  for (long i = 0; i < n; ++i) {
    const Real& d = series.d[static_cast<size_t>(i)];
    if (!(d < dl)) continue;
    ++st.hit_count;
    if (d.is_zero()) {
      st.infinite = true;
      continue;
    }
    sum += -d.log_abs();
  }
  st.value = st.infinite ? INFINITY : sum / static_cast<double>(n);
  return st;
}

ordered_json SlowRecurrenceStat::to_json() const {
  return ordered_json{{"delta", json_number(delta)},
                      {"n", n},
                      {"value", json_number(value)},
                      {"hit_count", hit_count},
                      {"infinite", infinite}};
}

// ---------------------------------------------------------------------------
// Closed-form threshold and transport

double ce_threshold_beta0(double lambda, double M) {
  if (!(lambda > 1)) throw DomainError("ce_threshold_beta0 needs lambda > 1");
  if (!(lambda < M)) throw DomainError("ce_threshold_beta0 needs lambda < M");
  const double ll = std::log(lambda);
  return ll * ll / (2 * (std::log(M) - ll));
}

namespace {

void check_transport(const TransportParams& p) {
  if (!(p.alpha > 0 && p.alpha <= 1)) throw DomainError("Hölder exponent alpha must lie in (0, 1]");
  if (!(p.K > 0)) throw DomainError("Hölder constant K must be positive");
  if (!(p.C > 0)) throw DomainError("source constant C must be positive");
  if (!(p.beta >= 0)) throw DomainError("source exponent beta must be nonnegative");
}

}  // namespace

double transport_recurrence_log_bound(const TransportParams& p, long n, Model model) {
  check_transport(p);
  if (n < 1) throw DomainError("transport bound needs n >= 1");
  const double base = (std::log(p.C) - std::log(p.K)) / p.alpha;
  return base - penalty(model, p.beta, static_cast<double>(n)) / p.alpha;
}

double transport_recurrence_bound(const TransportParams& p, long n, Model model) {
  return std::exp(transport_recurrence_log_bound(p, n, model));
}

SerExponent transported_ser_exponent(const TransportParams& p) {
  check_transport(p);
  SerExponent out;
  const double bp = (p.beta + std::min(1.0, p.beta / p.alpha)) / 2;
  if (!(bp > p.beta && bp < 1)) return out;
  out.rewritten = true;
  out.beta_prime = bp;
  // min over n >= 1 of n^bp - n^beta / alpha.
  double nstar = std::pow(p.beta / (p.alpha * bp), 1.0 / (bp - p.beta));
  nstar = std::max(1.0, nstar);
  const double phi = std::pow(nstar, bp) - std::pow(nstar, p.beta) / p.alpha;
  out.log_C_prime = (std::log(p.C) - std::log(p.K)) / p.alpha + phi;
  return out;
}

ordered_json SerExponent::to_json() const {
  return ordered_json{{"rewritten", rewritten}, {"beta_prime", json_number(beta_prime)}, {"log_C_prime", json_number(log_C_prime)}};
}

SlowRecurrenceTransport transport_slow_recurrence_params(double eps, double K, double alpha, double delta1) {
  if (!(eps > 0)) throw DomainError("eps must be positive");
  if (!(delta1 > 0 && delta1 < std::exp(-1.0))) throw DomainError("delta1 must lie in (0, 1/e)");
  if (!(K >= 1)) throw DomainError("Hölder constant K must be >= 1");
  if (!(alpha > 0 && alpha <= 1)) throw DomainError("Hölder exponent alpha must lie in (0, 1]");
  return SlowRecurrenceTransport{alpha * eps / (1 + std::log(K)), std::pow(delta1 / K, 1 / alpha)};
}

double hit_count_bound(long n, double eps_prime, double delta1) {
  if (!(delta1 > 0 && delta1 < 1)) throw DomainError("delta1 must lie in (0, 1)");
  return static_cast<double>(n) * eps_prime / (-std::log(delta1));
}

}  // namespace celab::hyperbolicity
