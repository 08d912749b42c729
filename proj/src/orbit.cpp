#include "celab/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "celab/roots.hpp"

namespace celab::orbit {

using mapkit::Dynamics;
using nlohmann::ordered_json;

ordered_json PrecisionPolicy::to_json() const {
  return ordered_json{{"min_certified_bits", min_certified_bits},
                      {"guard_bits", guard_bits},
                      {"max_bits", max_bits},
                      {"fixed_bits", fixed_bits}};
}

PrecisionPolicy PrecisionPolicy::from_json(const ordered_json& j) {
  PrecisionPolicy p;
  if (!j.is_object()) throw ConfigError("precision policy must be an object");
  p.min_certified_bits = j.value("min_certified_bits", p.min_certified_bits);
  p.guard_bits = j.value("guard_bits", p.guard_bits);
  p.max_bits = j.value("max_bits", p.max_bits);
  p.fixed_bits = j.value("fixed_bits", p.fixed_bits);
  if (p.min_certified_bits < 1 || p.guard_bits < 0 || p.max_bits < 53) throw ConfigError("precision policy out of range");
  if (p.fixed_bits != 0 && p.fixed_bits < 53) throw ConfigError("precision policy: fixed_bits must be >= 53");
  return p;
}

Bits initial_bits(const MapSpec& map, long n, const PrecisionPolicy& policy) {
  if (policy.fixed_bits != 0) return policy.fixed_bits;
  const double growth = std::max(0.0, std::log2(map.sup_abs_derivative()));
  const double bits = std::ceil(static_cast<double>(std::max(n, 1L)) * growth) + static_cast<double>(policy.guard_bits) +
                      static_cast<double>(policy.min_certified_bits);
  return static_cast<Bits>(std::min(bits, static_cast<double>(policy.max_bits)));
}

namespace {

double certified_bits_of(const Interval& x, Bits bits) {
  const Real w = x.width();
  if (w.is_zero()) return static_cast<double>(bits);
  return std::min(static_cast<double>(bits), -w.log_abs() / std::log(2.0));
}

// Iterates X_{k+1} = f(X_k) with the centered form. Returns the record with
// the certified prefix (possibly shorter than len).
OrbitRecord iterate(const Dynamics& dyn, Interval x, size_t len, const PrecisionPolicy& policy) {
  OrbitRecord rec;
  rec.map_label = dyn.map().label();
  rec.precision_bits = dyn.bits();
  rec.policy = policy;
  const Interval dom = dyn.eval().domain();
  const auto min_bits = static_cast<double>(policy.min_certified_bits);
  for (size_t k = 0; k < len; ++k) {
    const double cb = certified_bits_of(x, dyn.bits());
    if (cb < min_bits) break;
    Real p = x.mid();
    rec.deriv_factors.push_back(abs(dyn.df(p)));
    rec.points.push_back(std::move(p));
    rec.certified_bits.push_back(cb);
    rec.enclosures.push_back(x);
    if (k + 1 == len) break;
    Interval next = dyn.eval().enclose_centered(x);
    if (!next.intersects(dom)) break;
    x = intersect(next, dom);
  }
  if (!rec.points.empty()) rec.start = rec.points.front();
  return rec;
}

template <class Start>
OrbitRecord with_policy(const MapSpec& map, size_t len, const PrecisionPolicy& policy, const Start& start,
                        int crit_index) {
  Bits bits = initial_bits(map, static_cast<long>(len), policy);
  size_t best = 0;
  for (int attempt = 1;; ++attempt) {
    const Dynamics dyn(map, bits);
    OrbitRecord rec = iterate(dyn, start(dyn), len, policy);
    rec.attempts = attempt;
    rec.critical_index = crit_index;
    if (rec.size() == len) return rec;
    best = std::max(best, rec.size());
    if (policy.fixed_bits != 0 || bits >= policy.max_bits) {
      throw PrecisionExhausted("orbit of '" + map.label() + "' certified only for the first " + std::to_string(best) +
                                   " of " + std::to_string(len) + " points at " + std::to_string(bits) + " bits",
                               best);
    }
    bits = std::min<Bits>(2 * bits, policy.max_bits);
  }
}

}  // namespace

OrbitRecord critical_orbit(const MapSpec& map, size_t crit_index, long n, const PrecisionPolicy& policy) {
  if (crit_index >= map.critical_points().size()) {
    throw ConfigError("map '" + map.label() + "' has no critical point #" + std::to_string(crit_index));
  }
  const size_t len = static_cast<size_t>(std::max(n, 1L));
  return with_policy(
      map, len, policy,
      [&](const Dynamics& dyn) {
        const Interval& c = dyn.critical_points()[crit_index].bracket;
        const Interval v = dyn.eval().enclose_centered(c);
        return intersect(v, dyn.eval().domain());
      },
      static_cast<int>(crit_index));
}

OrbitRecord critical_orbit(const MapSpec& map, const CriticalPoint& c, long n, const PrecisionPolicy& policy) {
  const auto& crit = map.critical_points();
  size_t best = 0;
  for (size_t i = 1; i < crit.size(); ++i) {
    if (abs(crit[i].location - c.location) < abs(crit[best].location - c.location)) best = i;
  }
  if (crit.empty()) throw NotMultimodalError("map '" + map.label() + "' has no critical point");
  return critical_orbit(map, best, n, policy);
}

OrbitRecord point_orbit(const MapSpec& map, const Interval& x, long n, const PrecisionPolicy& policy) {
  if (n < 0) throw ConfigError("orbit length must be nonnegative");
  return with_policy(
      map, static_cast<size_t>(n) + 1, policy,
      [&](const Dynamics& dyn) {
        Interval xx(Real(x.lo(), dyn.bits(), MPFR_RNDD), Real(x.hi(), dyn.bits(), MPFR_RNDU));
        if (!xx.intersects(dyn.eval().domain())) throw DomainError("start point outside the domain");
        return intersect(xx, dyn.eval().domain());
      },
      -1);
}

std::vector<double> OrbitRecord::log_factors() const {
  std::vector<double> out;
  out.reserve(deriv_factors.size());
  for (const auto& d : deriv_factors) out.push_back(d.log_abs());
  return out;
}

std::vector<double> OrbitRecord::cumulative_log_derivative() const {
  std::vector<double> out;
  double s = 0;
  for (const auto& d : deriv_factors) {
    s += d.log_abs();
    out.push_back(s);
  }
  return out;
}

bool OrbitRecord::hits_critical() const {
  return std::any_of(deriv_factors.begin(), deriv_factors.end(), [](const Real& d) { return d.is_zero(); });
}

std::string OrbitRecord::to_csv() const {
  std::ostringstream os;
  os << "index,point,deriv_factor,certified_bits\n";
  for (size_t k = 0; k < points.size(); ++k) {
    os << k << ',' << points[k].str() << ',' << deriv_factors[k].str() << ',' << certified_bits[k] << '\n';
  }
  return os.str();
}

ordered_json OrbitRecord::header() const {
  return ordered_json{{"map", map_label},
                      {"critical_index", critical_index},
                      {"start", start.str()},
                      {"length", points.size()},
                      {"precision_bits", precision_bits},
                      {"attempts", attempts},
                      {"min_certified_bits",
                       certified_bits.empty() ? 0.0 : *std::min_element(certified_bits.begin(), certified_bits.end())},
                      {"policy", policy.to_json()}};
}

// ---------------------------------------------------------------------------
// Exact orbits

Rational ExactOrbit::derivative_product() const {
  Rational p(1);
  for (const auto& d : deriv_factors) p *= d;
  return p;
}

ExactOrbit critical_orbit_exact(const MapSpec& map, size_t crit_index, long n) {
  if (map.family() != mapkit::Family::polynomial) throw ConfigError("exact orbits need a polynomial map");
  if (crit_index >= map.critical_points().size()) throw ConfigError("no critical point #" + std::to_string(crit_index));
  const auto& c = map.critical_points()[crit_index];
  if (!c.exact) throw ConfigError("critical point of '" + map.label() + "' is not rational");
  if (n > kExactOrbitCap) throw ConfigError("exact orbits are capped at n = " + std::to_string(kExactOrbitCap));
  const auto& f = std::get<mapkit::AlgebraicForm>(map.form(0)).terms;
  const auto& df = std::get<mapkit::AlgebraicForm>(map.form(1)).terms;
  auto eval = [](const std::map<int, mapkit::Polynomial>& t, const Rational& x) {
    auto it = t.find(0);
    return it == t.end() ? Rational(0) : it->second.eval(x);
  };
  ExactOrbit out;
  Rational x = eval(f, *c.exact);
  constexpr size_t kMaxBits = size_t{1} << 24;
  for (long k = 0; k < std::max(n, 1L); ++k) {
    if (mpz_sizeinbase(x.get_num_mpz_t(), 2) + mpz_sizeinbase(x.get_den_mpz_t(), 2) > kMaxBits) {
      throw ConfigError("exact orbit of '" + map.label() + "' outgrows the size cap at step " + std::to_string(k));
    }
    out.points.push_back(x);
    out.deriv_factors.push_back(abs(eval(df, x)));
    x = eval(f, x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Periodic orbits

namespace {

// Preimages of y, one per branch whose image contains y.
void preimages(const Dynamics& dyn, const Real& y, std::vector<Real>& out) {
  const Bits bits = dyn.bits();
  for (const auto& br : dyn.branches()) {
    if (y < br.image_lo || y > br.image_hi) continue;
    const Root r = solve_bracketed(
        [&](const Real& x, Real& v, Real& d) {
          v = dyn.f(x) - y;
          d = dyn.df(x);
        },
        br.left, br.right, bits);
    out.push_back(r.x);
  }
}

void sort_dedupe(std::vector<Real>& xs, const Real& tol) {
  std::sort(xs.begin(), xs.end(), [](const Real& a, const Real& b) { return a < b; });
  std::vector<Real> out;
  for (auto& x : xs) {
    if (out.empty() || abs(x - out.back()) > tol) out.push_back(std::move(x));
  }
  xs = std::move(out);
}

struct FoundRoot {
  Real x;
  Interval bracket;
};

}  // namespace

ordered_json PeriodicOrbit::to_json() const {
  ordered_json cyc = ordered_json::array();
  for (const auto& c : cycle) cyc.push_back(c.str(20));
  return ordered_json{{"period", period},
                      {"point", point.str(20)},
                      {"bracket", {bracket.lo().str(20), bracket.hi().str(20)}},
                      {"multiplier", multiplier.str(20)},
                      {"repelling", repelling},
                      {"cycle", cyc}};
}

std::vector<PeriodicOrbit> periodic_points(const MapSpec& map, int max_period, const PeriodicOptions& opts) {
  if (max_period > opts.cap) {
    throw ConfigError("max_period " + std::to_string(max_period) + " exceeds the cap " + std::to_string(opts.cap));
  }
  std::vector<PeriodicOrbit> result;
  if (max_period <= 0) return result;
  const double growth = std::max(1.0, std::log2(map.sup_abs_derivative()));
  const Bits bits = opts.bits != 0 ? opts.bits : static_cast<Bits>(128 + std::ceil(2.0 * max_period * growth));
  const Dynamics dyn(map, bits);
  const Real one(1L, bits);
  const Real tol = ldexp(one, -static_cast<long>(bits) / 2);

  // levels[j]: points x with f^j(x) critical.
  std::vector<std::vector<Real>> levels(1);
  for (const auto& c : dyn.critical_points()) levels[0].push_back(c.location);
  for (int j = 1; j < max_period; ++j) {
    std::vector<Real> next;
    for (const auto& y : levels[static_cast<size_t>(j) - 1]) preimages(dyn, y, next);
    sort_dedupe(next, tol);
    levels.push_back(std::move(next));
  }

  std::vector<FoundRoot> roots;
  for (int p = 1; p <= max_period; ++p) {
    std::vector<Real> turns{dyn.eval().domain_lo(), dyn.eval().domain_hi()};
    for (int j = 0; j < p; ++j) turns.insert(turns.end(), levels[static_cast<size_t>(j)].begin(), levels[static_cast<size_t>(j)].end());
    sort_dedupe(turns, tol);
    auto g = [&](const Real& x, Real& v, Real& d) {
      Real y = x, der(1L, bits);
      for (int i = 0; i < p; ++i) {
        der *= dyn.df(y);
        y = dyn.f(y);
      }
      v = y - x;
      d = der - one;
    };
    std::vector<size_t> laps(turns.size() - 1);
    for (size_t i = 0; i < laps.size(); ++i) laps[i] = opts.reverse ? laps.size() - 1 - i : i;
    constexpr int kSamples = 16;
    for (size_t li : laps) {
      const Real& a = turns[li];
      const Real& b = turns[li + 1];
      std::vector<Real> xs, vs;
      Real v(bits), d(bits);
      for (int s = 0; s <= kSamples; ++s) {
        Real x = s == kSamples ? b : a + (b - a) * Real(static_cast<double>(s) / kSamples, bits);
        g(x, v, d);
        xs.push_back(std::move(x));
        vs.push_back(v);
      }
      for (int s = 0; s <= kSamples; ++s) {
        const auto u = static_cast<size_t>(s);
        if (vs[u].is_zero()) {
          roots.push_back({xs[u], Interval(xs[u])});
        } else if (s < kSamples && vs[u].sign() * vs[u + 1].sign() < 0) {
          Root r = solve_bracketed(g, xs[u], xs[u + 1], bits);
          roots.push_back({r.x, Interval(r.lo, r.hi)});
        }
      }
    }
  }
  std::sort(roots.begin(), roots.end(), [](const FoundRoot& a, const FoundRoot& b) { return a.x < b.x; });
  {
    std::vector<FoundRoot> unique;
    for (auto& r : roots) {
      if (unique.empty() || abs(r.x - unique.back().x) > tol) unique.push_back(std::move(r));
    }
    roots = std::move(unique);
  }

  auto nearest_root = [&](const Real& x) -> const FoundRoot* {
    auto it = std::lower_bound(roots.begin(), roots.end(), x, [](const FoundRoot& r, const Real& v) { return r.x < v; });
    const FoundRoot* best = nullptr;
    for (auto jt : {it, it == roots.begin() ? it : std::prev(it)}) {
      if (jt == roots.end()) continue;
      if (abs(jt->x - x) <= tol && (best == nullptr || abs(jt->x - x) < abs(best->x - x))) best = &*jt;
    }
    return best;
  };

  for (const auto& r : roots) {
    // Least period.
    int period = 0;
    Real y = r.x;
    for (int q = 1; q <= max_period; ++q) {
      y = dyn.f(y);
      if (abs(y - r.x) <= tol) {
        period = q;
        break;
      }
    }
    if (period == 0) continue;
    std::vector<Real> cycle{r.x};
    for (int i = 1; i < period; ++i) cycle.push_back(dyn.f(cycle.back()));
    const auto rep = std::min_element(cycle.begin(), cycle.end(), [](const Real& a, const Real& b) { return a < b; });
    if (rep != cycle.begin()) continue;  // the smallest cycle point carries the orbit
    PeriodicOrbit po;
    po.period = period;
    po.point = r.x;
    po.bracket = r.bracket;
    po.cycle = cycle;
    po.multiplier = Real(1L, bits);
    for (const auto& c : cycle) po.multiplier *= dyn.df(c);
    po.repelling = abs(po.multiplier).to_double() > 1.0 + kRepellingMargin;
    result.push_back(std::move(po));
  }
  // Every cycle point must itself be a root found by the lap scan.
  for (const auto& po : result) {
    for (const auto& c : po.cycle) {
      if (nearest_root(c) == nullptr) {
        throw PrecisionError("periodic point near " + c.str(12) + " of period " + std::to_string(po.period) +
                             " was not resolved by the lap scan");
      }
    }
  }
  std::sort(result.begin(), result.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
    return a.period != b.period ? a.period < b.period : a.point < b.point;
  });
  return result;
}

ordered_json RepellingReport::to_json() const {
  ordered_json w = ordered_json::array();
  for (const auto& o : witnesses) w.push_back(o.to_json());
  return ordered_json{{"all_repelling", all_repelling}, {"orbits_checked", orbits_checked}, {"witnesses", w}};
}

RepellingReport repelling_check(const MapSpec& map, int max_period, const PeriodicOptions& opts) {
  RepellingReport rep;
  for (auto& o : periodic_points(map, max_period, opts)) {
    ++rep.orbits_checked;
    if (!o.repelling) {
      rep.all_repelling = false;
      rep.witnesses.push_back(std::move(o));
    }
  }
  return rep;
}

}  // namespace celab::orbit
