#include "celab/conjugacy.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "celab/json_util.hpp"
#include "celab/pullback.hpp"
#include "celab/regression.hpp"
#include "celab/roots.hpp"

namespace celab::conjugacy {

using nlohmann::ordered_json;

std::string symbol_text(int symbol, int branch_count, int critical_count) {
  if (symbol < 0) return critical_count == 1 ? "C" : "C" + std::to_string(-symbol);
  if (branch_count == 2) return symbol == 0 ? "L" : "R";
  if (branch_count == 3) return std::string(1, "LMR"[symbol]);
  return std::string(1, static_cast<char>('0' + symbol));
}

std::string Itinerary::word() const {
  std::string w;
  for (int s : symbols) w += symbol_text(s, branch_count, critical_count);
  return w;
}

namespace {

void check_alphabet(const mapkit::Dynamics& dyn) {
  if (dyn.branches().size() > 10) throw ConfigError("symbolic addresses support at most 10 branches");
}

}  // namespace

Itinerary itinerary(const MapSpec& map, const Real& x, int depth, const orbit::PrecisionPolicy& policy) {
  if (depth < 1) throw ConfigError("itinerary depth must be at least 1");
  const auto rec = orbit::point_orbit(map, Interval(x), depth - 1, policy);
  const mapkit::Dynamics dyn(map, rec.precision_bits);
  if (dyn.branches().empty()) throw NotMultimodalError("map '" + map.label() + "' has no critical point");
  check_alphabet(dyn);
  Itinerary it;
  it.branch_count = static_cast<int>(dyn.branches().size());
  it.critical_count = static_cast<int>(dyn.critical_points().size());
  const Real tol = ldexp(Real(1L, rec.precision_bits), -static_cast<long>(policy.min_certified_bits));
  for (size_t k = 0; k < rec.size(); ++k) {
    const Interval& e = rec.enclosures[k];
    int sym = dyn.branch_of(rec.points[k]);
    const auto& crit = dyn.critical_points();
    for (size_t j = 0; j < crit.size(); ++j) {
      if (!crit[j].bracket.intersects(e)) continue;
      if (tol < e.width()) {
        throw PrecisionError("orbit enclosure at step " + std::to_string(k) + " straddles critical point " +
                             std::to_string(j));
      }
      sym = -static_cast<int>(j) - 1;
      break;
    }
    it.symbols.push_back(sym);
  }
  return it;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

struct Node {
  Real x;
  std::string address;
};

struct Tree {
  std::vector<std::vector<Node>> levels;
  double max_width = 0;
};

Tree backward_tree(const MapSpec& map, int depth, Bits bits, size_t cap) {
  const mapkit::Dynamics dyn(map, bits);
  if (dyn.branches().empty()) throw NotMultimodalError("map '" + map.label() + "' has no critical point");
  check_alphabet(dyn);
  const int nb = static_cast<int>(dyn.branches().size());
  const int nc = static_cast<int>(dyn.critical_points().size());
  Tree t;
  std::vector<Node> level;
  for (int j = 0; j < nc; ++j) {
    const auto& c = dyn.critical_points()[static_cast<size_t>(j)];
    level.push_back({c.location, symbol_text(-j - 1, nb, nc)});
    t.max_width = std::max(t.max_width, c.bracket.width().to_double());
  }
  t.levels.push_back(std::move(level));
  size_t total = t.levels.front().size();
  for (int k = 1; k <= depth; ++k) {
    std::vector<Node> next;
    for (const auto& node : t.levels.back()) {
      const Real& y = node.x;
      for (int b = 0; b < nb; ++b) {
        const auto& br = dyn.branches()[static_cast<size_t>(b)];
        if (y < br.image_lo || br.image_hi < y) continue;
        Real x(bits);
        if (y == br.value_left) {
          if (b > 0) continue;  // the critical point itself
          x = br.left;
        } else if (y == br.value_right) {
          if (b + 1 < nb) continue;
          x = br.right;
        } else {
          const auto g = [&](const Real& z, Real& v, Real& d) {
            v = dyn.f(z) - y;
            d = dyn.df(z);
          };
          const Root r = solve_bracketed(g, br.left, br.right, bits);
          t.max_width = std::max(t.max_width, (r.hi - r.lo).to_double());
          x = r.x;
        }
        next.push_back({std::move(x), symbol_text(b, nb, nc) + node.address});
      }
    }
    total += next.size();
    if (total > cap) throw ConfigError("conjugacy table exceeds " + std::to_string(cap) + " points");
    t.levels.push_back(std::move(next));
  }
  return t;
}

void sort_by_address(std::vector<Node>& v) {
  std::sort(v.begin(), v.end(), [](const Node& a, const Node& b) { return a.address < b.address; });
}

std::string first_difference(const std::vector<Node>& a, const std::vector<Node>& b) {
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].address == b[j].address) {
      ++i;
      ++j;
    } else {
      return a[i].address < b[j].address ? a[i].address : b[j].address;
    }
  }
  return i < a.size() ? a[i].address : b[j].address;
}

}  // namespace

ConjugacyTable build_conjugacy(const MapSpec& f, const MapSpec& g, int depth, Bits bits) {
  if (depth < 0) throw ConfigError("depth must be nonnegative");
  const auto& cf = f.critical_points();
  const auto& cg = g.critical_points();
  if (cf.empty() || cg.empty()) throw NotMultimodalError("both maps need a critical point");
  if (cf.size() != cg.size()) {
    throw StructuralError("critical point counts differ: " + std::to_string(cf.size()) + " vs " +
                          std::to_string(cg.size()));
  }
  const auto bf = mapkit::branch_partition(f, bits);
  const auto bg = mapkit::branch_partition(g, bits);
  for (size_t b = 0; b < bf.size(); ++b) {
    if (bf[b].orientation != bg[b].orientation) {
      throw StructuralError("branch " + std::to_string(b) + " has opposite orientation in the two maps");
    }
  }
  for (size_t j = 0; j < cf.size(); ++j) {
    const auto a = itinerary(f, cf[j].location, depth + 1).word();
    const auto b = itinerary(g, cg[j].location, depth + 1).word();
    if (a != b) {
      size_t k = 0;
      while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
      throw NotConjugateError("critical itineraries differ at step " + std::to_string(k), a.substr(0, k + 1));
    }
  }

  auto fut = std::async(std::launch::async, [&] { return backward_tree(g, depth, bits, kTableCap); });
  Tree tf = backward_tree(f, depth, bits, kTableCap);
  Tree tg = fut.get();

  struct Pair {
    Real x, y;
    int level;
    std::string address;
  };
  std::vector<Pair> pairs;
  for (int k = 0; k <= depth; ++k) {
    auto& lf = tf.levels[static_cast<size_t>(k)];
    auto& lg = tg.levels[static_cast<size_t>(k)];
    sort_by_address(lf);
    sort_by_address(lg);
    bool same = lf.size() == lg.size();
    for (size_t i = 0; same && i < lf.size(); ++i) same = lf[i].address == lg[i].address;
    if (!same) {
      const auto w = first_difference(lf, lg);
      throw NotConjugateError("backward orbits of the critical set differ at depth " + std::to_string(k), w);
    }
    for (size_t i = 0; i < lf.size(); ++i) pairs.push_back({lf[i].x, lg[i].x, k, lf[i].address});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.x < b.x; });
  for (size_t i = 1; i < pairs.size(); ++i) {
    if (!(pairs[i - 1].x < pairs[i].x)) throw PrecisionError("table points " + pairs[i].address + " coincide");
    if (!(pairs[i - 1].y < pairs[i].y)) {
      throw NotConjugateError("matching is not order preserving", pairs[i].address);
    }
  }

  ConjugacyTable t;
  t.source = f.label();
  t.target = g.label();
  t.depth = depth;
  t.bits = bits;
  t.max_bracket_width = std::max(tf.max_width, tg.max_width);
  std::unordered_map<std::string, long> index;
  for (size_t i = 0; i < pairs.size(); ++i) index.emplace(pairs[i].address, static_cast<long>(i));
  for (auto& p : pairs) {
    t.image.push_back(p.level == 0 ? -1 : index.at(p.address.substr(1)));
    t.x.push_back(std::move(p.x));
    t.y.push_back(std::move(p.y));
    t.level.push_back(p.level);
    t.address.push_back(std::move(p.address));
  }
  return t;
}

Interval ConjugacyTable::eval(const Real& p) const {
  if (x.empty()) throw InsufficientDataError("empty conjugacy table");
  const auto it = std::lower_bound(x.begin(), x.end(), p, [](const Real& a, const Real& b) { return a < b; });
  const auto i = static_cast<size_t>(it - x.begin());
  if (i < x.size() && x[i] == p) return Interval(y[i]);
  if (i == 0 || i == x.size()) throw DomainError("point outside the table range");
  return Interval(y[i - 1], y[i]);
}

namespace {

double max_gap(const std::vector<Real>& v) {
  double g = 0;
  for (size_t i = 1; i < v.size(); ++i) g = std::max(g, (v[i] - v[i - 1]).to_double());
  return g;
}

}  // namespace

double ConjugacyTable::max_gap_source() const { return max_gap(x); }
double ConjugacyTable::max_gap_target() const { return max_gap(y); }

std::string ConjugacyTable::to_csv() const {
  std::ostringstream os;
  os << "x,y,depth,address\n";
  for (size_t i = 0; i < size(); ++i) os << x[i].str() << ',' << y[i].str() << ',' << level[i] << ',' << address[i] << '\n';
  return os.str();
}

ordered_json ConjugacyTable::summary() const {
  return {{"source", source},
          {"target", target},
          {"depth", depth},
          {"precision_bits", bits},
          {"points", size()},
          {"max_bracket_width", max_bracket_width},
          {"max_gap_source", max_gap_source()},
          {"max_gap_target", max_gap_target()}};
}

ordered_json SemiconjugacyResidual::to_json() const { return {{"source", source}, {"target", target}}; }

SemiconjugacyResidual semiconjugacy_residual(const MapSpec& f, const MapSpec& g, const ConjugacyTable& t) {
  const mapkit::Evaluator ef(f, t.bits), eg(g, t.bits);
  SemiconjugacyResidual r;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t.image[i] < 0) continue;
    const auto j = static_cast<size_t>(t.image[i]);
    r.source = std::max(r.source, abs(ef.value(t.x[i]) - t.x[j]).to_double());
    r.target = std::max(r.target, abs(eg.value(t.y[i]) - t.y[j]).to_double());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Hölder fits

std::string to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

ordered_json HolderFit::to_json() const {
  return {{"direction", to_string(direction)},
          {"alpha", alpha},
          {"K", json_number(K)},
          {"pairs", pairs},
          {"decades", decades},
          {"sample", description},
          {"bin_log_dx", json_numbers(bin_log_dx)},
          {"bin_log_dh", json_numbers(bin_log_dh)},
          {"residuals", json_numbers(residuals)}};
}

HolderFit holder_fit(const PairSample& s, Direction direction) {
  if (s.dx.size() != s.dh.size()) throw ConfigError("pair sample arrays differ in length");
  HolderFit fit;
  fit.direction = direction;
  fit.description = s.description;
  fit.pairs = s.dx.size();
  if (fit.pairs < 1000) throw InsufficientDataError("Hölder fit needs at least 1000 pairs");
  double lo = INFINITY, hi = 0;
  for (double d : s.dx) {
    if (!(d > 0)) throw DomainError("pair distances must be positive");
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  fit.decades = std::log10(hi / lo);
  if (!(fit.decades >= 4)) throw InsufficientDataError("pair distances span fewer than 4 decades");

  std::map<int, std::pair<double, double>> bins;  // floor(log2 dx) -> (log dx, log dh) of the bin maximum
  for (size_t i = 0; i < fit.pairs; ++i) {
    if (!(s.dh[i] > 0)) continue;
    const int key = static_cast<int>(std::floor(std::log2(s.dx[i])));
    const double ldh = std::log(s.dh[i]);
    auto it = bins.find(key);
    if (it == bins.end() || ldh > it->second.second) bins[key] = {std::log(s.dx[i]), ldh};
  }
  for (const auto& [k, v] : bins) {
    fit.bin_log_dx.push_back(v.first);
    fit.bin_log_dh.push_back(v.second);
  }
  const Line line = fit_line(fit.bin_log_dx, fit.bin_log_dh);
  fit.alpha = std::clamp(line.slope, 1e-6, 1.0);
  double log_K = -INFINITY;
  for (size_t i = 0; i < fit.pairs; ++i) {
    if (s.dh[i] > 0) log_K = std::max(log_K, std::log(s.dh[i]) - fit.alpha * std::log(s.dx[i]));
  }
  fit.K = std::exp(log_K);
  for (size_t i = 0; i < fit.bin_log_dx.size(); ++i) {
    fit.residuals.push_back(fit.bin_log_dh[i] - (line.slope * fit.bin_log_dx[i] + line.intercept));
  }
  return fit;
}

PairSample sample_function_pairs(const std::function<double(double)>& h, double lo, double hi,
                                 std::span<const double> anchors, size_t count, uint64_t seed, double min_sep,
                                 double max_sep) {
  if (!(hi - lo > max_sep) || !(min_sep > 0) || !(max_sep > min_sep)) throw DomainError("invalid sampling range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PairSample out;
  const double l0 = std::log(min_sep), l1 = std::log(max_sep);
  for (size_t i = 0; i < count; ++i) {
    const double sep = std::exp(l0 + (l1 - l0) * unit(rng));
    double a, b;
    if (i % 2 == 0 && !anchors.empty()) {
      a = anchors[(i / 2) % anchors.size()];
      b = a + sep <= hi ? a + sep : a - sep;
    } else {
      a = lo + (hi - lo - sep) * unit(rng);
      b = a + sep;
    }
    out.dx.push_back(std::abs(b - a));
    out.dh.push_back(std::abs(h(b) - h(a)));
  }
  std::ostringstream os;
  os << count << " pairs on [" << lo << ", " << hi << "], separations log-uniform in [" << min_sep << ", " << max_sep
     << "], seed " << seed;
  out.description = os.str();
  return out;
}

PairSample sample_table_pairs(const ConjugacyTable& t, Direction direction, size_t count, uint64_t seed,
                              double min_sep, double max_sep) {
  if (t.size() < 2) throw InsufficientDataError("table has fewer than two points");
  const auto& u = direction == Direction::forward ? t.x : t.y;
  const auto& v = direction == Direction::forward ? t.y : t.x;
  std::vector<double> ud;
  for (const auto& r : u) ud.push_back(r.to_double());
  std::vector<size_t> anchors;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t.level[i] == 0) anchors.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<size_t> pick(0, t.size() - 1);
  const double l0 = std::log(min_sep), l1 = std::log(max_sep);
  PairSample out;
  for (size_t n = 0; n < count; ++n) {
    const double sep = std::exp(l0 + (l1 - l0) * unit(rng));
    const size_t i = n % 2 == 0 && !anchors.empty() ? anchors[(n / 2) % anchors.size()] : pick(rng);
    const bool up = unit(rng) < 0.5;
    const double target = up ? ud[i] + sep : ud[i] - sep;
    auto j = static_cast<size_t>(std::lower_bound(ud.begin(), ud.end(), target) - ud.begin());
    if (j >= t.size()) j = t.size() - 1;
    if (j == i) j = i + 1 < t.size() ? i + 1 : i - 1;
    const double dx = abs(u[j] - u[i]).to_double();
    const double dh = abs(v[j] - v[i]).to_double();
    if (dx > 0) {
      out.dx.push_back(dx);
      out.dh.push_back(dh);
    }
  }
  std::ostringstream os;
  os << out.dx.size() << " " << to_string(direction) << " table pairs, separations near [" << min_sep << ", "
     << max_sep << "], seed " << seed;
  out.description = os.str();
  return out;
}

// ---------------------------------------------------------------------------
// Invariance reports

namespace {

using hyperbolicity::DistanceSeries;
using hyperbolicity::Model;
using hyperbolicity::RecurrenceFit;

struct CritData {
  hyperbolicity::CEFit ce;
  DistanceSeries series;
  RecurrenceFit fits[3];
  hyperbolicity::SubexponentialSweep sweep;
};

struct MapData {
  std::vector<CritData> crit;
  ordered_json json;
};

MapData map_bundle(const MapSpec& map, const InvarianceOptions& o) {
  MapData md;
  md.json = {{"label", map.label()}};
  ordered_json crits = ordered_json::array();
  const Model models[3] = {Model::SER, Model::ER, Model::PR};
  for (size_t j = 0; j < map.critical_points().size(); ++j) {
    CritData cd;
    const auto rec = orbit::critical_orbit(map, j, o.horizon, o.policy);
    cd.ce = hyperbolicity::ce_fit(rec);
    cd.series = hyperbolicity::recurrence_series(map, rec);
    ordered_json fits;
    for (int m = 0; m < 3; ++m) {
      cd.fits[m] = hyperbolicity::recurrence_fit(cd.series, models[m]);
      fits[hyperbolicity::to_string(models[m])] = cd.fits[m].to_json();
    }
    cd.sweep = hyperbolicity::subexponential_sweep(cd.series);
    ordered_json slow = ordered_json::array();
    for (double d : o.slow_deltas) {
      slow.push_back(hyperbolicity::slow_recurrence_stat(cd.series, d, static_cast<long>(cd.series.size())).to_json());
    }
    ordered_json tce = ordered_json::array();
    for (double r : o.tce_radii) {
      const auto td = pullback::tce_density(map, rec.points.front(), o.tce_horizon, r, o.tce_D, o.policy);
      tce.push_back({{"r", r}, {"D", o.tce_D}, {"N", o.tce_horizon}, {"density", td.density},
                     {"liminf_surrogate", td.liminf_surrogate}});
    }
    crits.push_back({{"index", j},
                     {"ce", cd.ce.to_json()},
                     {"recurrence", std::move(fits)},
                     {"subexponential", cd.sweep.to_json()},
                     {"slow_recurrence", std::move(slow)},
                     {"tce", std::move(tce)}});
    md.crit.push_back(std::move(cd));
  }
  md.json["critical"] = std::move(crits);
  return md;
}

ordered_json transported_section(const MapData& src, const MapData& dst, int model_slot, Model model, double K,
                                 double alpha, long& violations) {
  ordered_json per = ordered_json::array();
  for (size_t j = 0; j < src.crit.size(); ++j) {
    const auto& fit = src.crit[j].fits[model_slot];
    ordered_json e = {{"index", j}};
    if (!std::isfinite(fit.log_C)) {
      e["status"] = "hypothesis-failed";
      e["reason"] = "source series has a zero distance";
      per.push_back(std::move(e));
      continue;
    }
    hyperbolicity::TransportParams p{K, alpha, fit.C, fit.beta};
    const auto neg = dst.crit[j].series.neg_log();
    std::vector<long> bad;
    double worst_margin = INFINITY;
    for (size_t n = 1; n <= neg.size(); ++n) {
      const double bound = hyperbolicity::transport_recurrence_log_bound(p, static_cast<long>(n), model);
      const double observed = -neg[n - 1];
      worst_margin = std::min(worst_margin, observed - bound);
      if (observed < bound) bad.push_back(static_cast<long>(n));
    }
    violations += static_cast<long>(bad.size());
    e["status"] = "ok";
    e["source_C"] = fit.C;
    e["source_beta"] = fit.beta;
    e["min_log_margin"] = json_number(worst_margin);
    e["violations"] = bad;
    if (model == Model::SER) e["rewritten"] = hyperbolicity::transported_ser_exponent(p).to_json();
    per.push_back(std::move(e));
  }
  return per;
}

bool all_ce(const MapData& m) {
  return std::all_of(m.crit.begin(), m.crit.end(), [](const CritData& c) { return c.ce.verdict; });
}

bool all_fit(const MapData& m, int slot) {
  return std::all_of(m.crit.begin(), m.crit.end(), [&](const CritData& c) { return c.fits[slot].verdict; });
}

bool all_subexp(const MapData& m) {
  return std::all_of(m.crit.begin(), m.crit.end(), [](const CritData& c) {
    return std::all_of(c.sweep.passed.begin(), c.sweep.passed.end(), [](bool b) { return b; });
  });
}

}  // namespace

ordered_json invariance_report(const MapSpec& f, const MapSpec& g, const ConjugacyTable& table,
                               const InvarianceOptions& o) {
  if (o.horizon < 16) throw ConfigError("invariance horizon must be at least 16");
  if (f.critical_points().size() != g.critical_points().size()) throw StructuralError("critical point counts differ");
  const MapData src = map_bundle(f, o);
  const MapData dst = map_bundle(g, o);

  ordered_json holder;
  double K = 1, alpha = 1;
  bool holder_ok = false;
  try {
    const auto fw = holder_fit(sample_table_pairs(table, Direction::forward, o.holder_pairs, o.seed), Direction::forward);
    const auto bw =
        holder_fit(sample_table_pairs(table, Direction::backward, o.holder_pairs, o.seed + 1), Direction::backward);
    holder["forward"] = fw.to_json();
    holder["backward"] = bw.to_json();
    K = std::max(bw.K, 1.0);
    alpha = bw.alpha;
    holder_ok = true;
  } catch (const Error& e) {
    holder["error"] = {{"kind", e.kind()}, {"message", e.what()}};
  }
  holder["transport_K"] = K;
  holder["transport_alpha"] = alpha;

  ordered_json rep;
  rep["assumptions"] = {"both maps are topologically exact (not verified)",
                        "critical points are matched in spatial order"};
  rep["table"] = table.summary();
  rep["semiconjugacy_residual"] = semiconjugacy_residual(f, g, table).to_json();
  rep["source"] = src.json;
  rep["target"] = dst.json;
  rep["holder"] = std::move(holder);

  const struct {
    const char* key;
    int slot;
    Model model;
  } cases[3] = {{"thm1", 0, Model::SER}, {"thm2", 1, Model::ER}, {"thm3", 2, Model::PR}};
  long total = 0;
  for (const auto& c : cases) {
    long violations = 0;
    ordered_json sec;
    const bool src_rec = c.slot == 1 ? all_subexp(src) : all_fit(src, c.slot);
    const bool dst_rec = c.slot == 1 ? all_subexp(dst) : all_fit(dst, c.slot);
    sec["model"] = hyperbolicity::to_string(c.model);
    sec["hypotheses"] = {{"source_ce", all_ce(src)}, {"source_recurrence", src_rec}};
    sec["observed"] = {{"target_ce", all_ce(dst)}, {"target_recurrence", dst_rec}};
    if (holder_ok) {
      sec["transported"] = transported_section(src, dst, c.slot, c.model, K, alpha, violations);
    } else {
      sec["transported"] = "hypothesis-failed";
    }
    sec["violations"] = violations;
    total += violations;
    rep[c.key] = std::move(sec);
  }

  // Slow recurrence: a source sum below eps' at delta0 predicts a target sum
  // below eps at delta1.
  ordered_json slow = ordered_json::array();
  long slow_viol = 0;
  if (holder_ok) {
    for (size_t j = 0; j < src.crit.size(); ++j) {
      const auto& fs = src.crit[j].series;
      const auto& gs = dst.crit[j].series;
      const long n = static_cast<long>(std::min(fs.size(), gs.size()));
      for (double d1 : o.slow_deltas) {
        for (double eps : o.slow_eps) {
          const auto tr = hyperbolicity::transport_slow_recurrence_params(eps, K, alpha, d1);
          const auto sf = hyperbolicity::slow_recurrence_stat(fs, tr.delta0, n);
          const auto sg = hyperbolicity::slow_recurrence_stat(gs, d1, n);
          const bool premise = !sf.infinite && sf.value < tr.eps_prime;
          const bool conclusion = !sg.infinite && sg.value < eps;
          const bool violated = premise && !conclusion;
          slow_viol += violated ? 1 : 0;
          slow.push_back({{"index", j},
                          {"delta1", d1},
                          {"eps", eps},
                          {"eps_prime", tr.eps_prime},
                          {"delta0", tr.delta0},
                          {"source_stat", sf.to_json()},
                          {"target_stat", sg.to_json()},
                          {"premise", premise},
                          {"conclusion", conclusion},
                          {"violated", violated}});
        }
      }
    }
  }
  rep["thm4"] = {{"hypotheses", {{"source_ce", all_ce(src)}}},
                 {"observed", {{"target_ce", all_ce(dst)}}},
                 {"transported", holder_ok ? std::move(slow) : ordered_json("hypothesis-failed")},
                 {"violations", slow_viol}};
  total += slow_viol;
  rep["violations"] = total;
  return rep;
}

}  // namespace celab::conjugacy
