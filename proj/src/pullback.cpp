#include "celab/pullback.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "celab/json_util.hpp"
#include "celab/regression.hpp"
#include "celab/roots.hpp"

namespace celab::pullback {

using nlohmann::ordered_json;

namespace {

ordered_json json_interval(const Interval& w, int digits = 20) { return {w.lo().str(digits), w.hi().str(digits)}; }

Real diameter(const Interval& w) { return w.hi() - w.lo(); }

struct Ball {
  Interval w;
  bool clipped = false;
};

Ball clipped_ball(const Dynamics& dyn, const Real& center, const Real& r) {
  const Bits bits = dyn.bits();
  Real lo = Real(center, bits) - Real(r, bits);
  Real hi = Real(center, bits) + Real(r, bits);
  Ball b;
  const Real dlo = dyn.eval().domain_lo(), dhi = dyn.eval().domain_hi();
  if (lo < dlo) {
    lo = dlo;
    b.clipped = true;
  }
  if (dhi < hi) {
    hi = dhi;
    b.clipped = true;
  }
  b.w = Interval(lo, hi);
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Puller

Puller::Puller(const MapSpec& map, Bits bits) : dyn_(map, bits) {
  if (dyn_.branches().empty()) throw NotMultimodalError("map '" + map.label() + "' has no critical point");
}

Real Puller::invert(int branch, const Real& y, const Real* guess) const {
  const auto& br = dyn_.branches()[static_cast<size_t>(branch)];
  if (y == br.value_left) return br.left;
  if (y == br.value_right) return br.right;
  const Bits bits = dyn_.bits();
  const auto g = [&](const Real& x, Real& v, Real& d) {
    v = dyn_.f(x) - y;
    d = dyn_.df(x);
  };
  return solve_bracketed(g, br.left, br.right, bits, guess).x;
}

std::optional<Puller::Piece> Puller::piece(int branch, const Interval& w, const Real* guess) const {
  const auto& br = dyn_.branches()[static_cast<size_t>(branch)];
  const Real ylo = max(w.lo(), br.image_lo);
  const Real yhi = min(w.hi(), br.image_hi);
  if (yhi < ylo) return std::nullopt;
  Piece p{branch, invert(branch, ylo, guess), invert(branch, yhi, guess), false, false};
  if (p.hi < p.lo) std::swap(p.lo, p.hi);
  p.at_left = p.lo == br.left;
  p.at_right = p.hi == br.right;
  return p;
}

std::vector<Interval> Puller::preimage(const Interval& w) const {
  std::vector<Interval> out;
  bool open = false;  // last piece reaches the right end of its branch
  const int nb = static_cast<int>(dyn_.branches().size());
  for (int b = 0; b < nb; ++b) {
    auto p = piece(b, w);
    if (!p) {
      open = false;
      continue;
    }
    if (open && p->at_left) {
      out.back() = Interval(out.back().lo(), p->hi);
    } else {
      out.emplace_back(p->lo, p->hi);
    }
    open = p->at_right;
  }
  return out;
}

Interval Puller::pull(const Interval& w, const Real& p) const {
  const int b = dyn_.branch_of(p);
  auto mid = piece(b, w, &p);
  if (!mid) {
    throw PrecisionError("no preimage of [" + w.lo().str(12) + ", " + w.hi().str(12) + "] on the branch of " +
                         p.str(12));
  }
  Real lo = mid->lo, hi = mid->hi;
  bool at_left = mid->at_left, at_right = mid->at_right;
  for (int k = b - 1; at_left && k >= 0; --k) {
    auto q = piece(k, w);
    if (!q || !q->at_right) break;
    lo = q->lo;
    at_left = q->at_left;
  }
  const int nb = static_cast<int>(dyn_.branches().size());
  for (int k = b + 1; at_right && k < nb; ++k) {
    auto q = piece(k, w);
    if (!q || !q->at_left) break;
    hi = q->hi;
    at_right = q->at_right;
  }
  return Interval(lo, hi);
}

bool Puller::meets_critical(const Interval& w) const { return dyn_.meets_critical(w); }

// ---------------------------------------------------------------------------
// Component trees

size_t ComponentTree::component_count() const {
  size_t n = 0;
  for (const auto& l : levels) n += l.size();
  return n;
}

std::vector<Real> ComponentTree::max_diameters() const {
  std::vector<Real> out;
  for (const auto& l : levels) {
    Real best(0L, bits);
    for (const auto& w : l) best = max(best, diameter(w));
    out.push_back(best);
  }
  return out;
}

std::string ComponentTree::to_csv() const {
  std::ostringstream os;
  os << "depth,left,right,flagged\n";
  for (size_t k = 0; k < levels.size(); ++k) {
    for (size_t i = 0; i < levels[k].size(); ++i) {
      os << k << ',' << levels[k][i].lo().str() << ',' << levels[k][i].hi().str() << ','
         << (flagged[k][i] ? "true" : "false") << '\n';
    }
  }
  return os.str();
}

ComponentTree preimage_components(const MapSpec& map, const Interval& J, int depth, Bits bits, size_t cap) {
  if (depth < 0) throw ConfigError("depth must be nonnegative");
  const Puller puller(map, bits);
  const Interval dom = puller.dynamics().eval().domain();
  if (!dom.contains(J)) throw DomainError("base interval is not contained in the domain");
  ComponentTree tree;
  tree.bits = bits;
  tree.base = J;
  const Real floor = ldexp(Real(1L, bits), -static_cast<long>(bits) / 2);
  tree.pruning_floor = floor.to_double();
  tree.levels.push_back({J});
  tree.flagged.push_back({diameter(J) < floor});
  size_t total = 1;
  for (int k = 1; k <= depth; ++k) {
    std::vector<Interval> next;
    const auto& prev = tree.levels.back();
    const auto& prev_flags = tree.flagged.back();
    for (size_t i = 0; i < prev.size(); ++i) {
      if (prev_flags[i]) continue;
      auto pre = puller.preimage(prev[i]);
      total += pre.size();
      if (total > cap) {
        throw CapacityExceeded("component tree exceeds " + std::to_string(cap) + " components at depth " +
                                   std::to_string(k),
                               std::move(tree));
      }
      for (auto& w : pre) next.push_back(std::move(w));
    }
    std::sort(next.begin(), next.end(), [](const Interval& a, const Interval& b) { return a.lo() < b.lo(); });
    std::vector<bool> flags;
    for (const auto& w : next) flags.push_back(diameter(w) < floor);
    tree.levels.push_back(std::move(next));
    tree.flagged.push_back(std::move(flags));
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Chains and criticality

long ComponentChain::criticality() const {
  long c = 0;
  for (long j = 0; j < n; ++j) c += critical[static_cast<size_t>(j)] ? 1 : 0;
  return c;
}

std::vector<double> ComponentChain::diameters() const {
  std::vector<double> out;
  for (const auto& w : W) out.push_back(diameter(w).to_double());
  return out;
}

ordered_json ComponentChain::to_json() const {
  ordered_json chain = ordered_json::array();
  for (size_t j = 0; j < W.size(); ++j) {
    chain.push_back({{"j", j},
                     {"point", orbit[j].str(20)},
                     {"interval", json_interval(W[j])},
                     {"diameter", json_number(diameter(W[j]).to_double())},
                     {"critical", static_cast<bool>(critical[j])}});
  }
  return {{"n", n},
          {"radius", radius.str(20)},
          {"base", json_interval(base)},
          {"clipped", clipped},
          {"criticality", criticality()},
          {"precision_bits", bits},
          {"chain", std::move(chain)}};
}

namespace {

// W_j for j = n..0 along orbit[0..n].
ComponentChain build_chain(const Puller& puller, const std::vector<Real>& orbit, long n, const Real& r) {
  ComponentChain ch;
  ch.n = n;
  ch.radius = r;
  ch.bits = puller.bits();
  ch.orbit.assign(orbit.begin(), orbit.begin() + n + 1);
  const Ball ball = clipped_ball(puller.dynamics(), orbit[static_cast<size_t>(n)], r);
  ch.base = ball.w;
  ch.clipped = ball.clipped;
  ch.W.assign(static_cast<size_t>(n) + 1, Interval(puller.bits()));
  ch.critical.assign(static_cast<size_t>(n) + 1, false);
  ch.W[static_cast<size_t>(n)] = ball.w;
  for (long j = n; j >= 0; --j) {
    const auto uj = static_cast<size_t>(j);
    if (j < n) ch.W[uj] = puller.pull(ch.W[uj + 1], orbit[uj]);
    ch.critical[uj] = puller.meets_critical(ch.W[uj]);
  }
  return ch;
}

orbit::OrbitRecord orbit_of(const MapSpec& map, const Real& x, long n, const orbit::PrecisionPolicy& policy) {
  return orbit::point_orbit(map, Interval(x), n, policy);
}

}  // namespace

ComponentChain pullback_chain(const MapSpec& map, const Real& x, long n, const Real& r,
                              const orbit::PrecisionPolicy& policy) {
  if (n < 0) throw ConfigError("chain length must be nonnegative");
  if (r.sign() <= 0) throw DomainError("ball radius must be positive");
  const auto rec = orbit_of(map, x, n, policy);
  const Puller puller(map, rec.precision_bits);
  return build_chain(puller, rec.points, n, r);
}

long criticality_count(const MapSpec& map, const Real& x, long n, const Real& r, const orbit::PrecisionPolicy& policy) {
  return pullback_chain(map, x, n, r, policy).criticality();
}

std::vector<long> criticality_profile(const MapSpec& map, const Real& x, long N, const Real& r,
                                      const orbit::PrecisionPolicy& policy) {
  if (N < 1) throw ConfigError("horizon must be at least 1");
  if (r.sign() <= 0) throw DomainError("ball radius must be positive");
  const auto rec = orbit_of(map, x, N, policy);
  const Puller puller(map, rec.precision_bits);
  std::vector<long> out;
  for (long m = 1; m <= N; ++m) out.push_back(build_chain(puller, rec.points, m, r).criticality());
  return out;
}

ordered_json TceDensity::to_json() const {
  return {{"N", N},         {"D", D}, {"r", r}, {"criticality", criticality}, {"density", density},
          {"liminf_surrogate", liminf_surrogate}};
}

TceDensity tce_density(const MapSpec& map, const Real& x, long N, double r, long D,
                       const orbit::PrecisionPolicy& policy) {
  TceDensity t;
  t.N = N;
  t.D = D;
  t.r = r;
  t.criticality = criticality_profile(map, x, N, Real(r, 53), policy);
  long good = 0;
  t.liminf_surrogate = 1;
  for (long m = 1; m <= N; ++m) {
    if (t.criticality[static_cast<size_t>(m - 1)] <= D) ++good;
    const double running = static_cast<double>(good) / static_cast<double>(m);
    if (2 * m >= N) t.liminf_surrogate = std::min(t.liminf_surrogate, running);
  }
  t.density = static_cast<double>(good) / static_cast<double>(N);
  return t;
}

// ---------------------------------------------------------------------------
// Shrinking of components

ordered_json ShrinkingFit::to_json() const {
  ordered_json d = ordered_json::array();
  for (const auto& x : max_diameters) d.push_back(x.str(20));
  return {{"delta", delta},
          {"N", N},
          {"max_diameters", std::move(d)},
          {"component_counts", component_counts},
          {"lambda", json_number(lambda)},
          {"C", json_number(C)},
          {"verdict", verdict}};
}

std::vector<Interval> default_probes(const MapSpec& map, double delta, int count, Bits bits) {
  if (!(delta > 0)) throw DomainError("probe length must be positive");
  if (count < 1) throw ConfigError("probe count must be positive");
  const Real lo(map.domain_lo(), bits), hi(map.domain_hi(), bits);
  const Real half = Real(delta, bits) / Real(2L, bits);
  std::vector<Interval> out;
  for (int i = 0; i < count; ++i) {
    const Real t = Real(2L * i + 1, bits) / Real(2L * count, bits);
    const Real c = lo + (hi - lo) * t;
    out.emplace_back(max(lo, c - half), min(hi, c + half));
  }
  return out;
}

ShrinkingFit esc_fit(const MapSpec& map, double delta, int N, std::span<const Interval> probes, Bits bits) {
  if (N < 2) throw InsufficientDataError("shrinking fit needs depth at least 2");
  if (probes.empty()) throw ConfigError("no probe intervals");
  const Real cap = Real(delta, bits) * Real(1.0 + 0x1p-40, bits);
  for (const auto& p : probes) {
    if (cap < diameter(p)) {
      throw DomainError("probe [" + p.lo().str(12) + ", " + p.hi().str(12) + "] is longer than " +
                        std::to_string(delta));
    }
  }
  ShrinkingFit fit;
  fit.delta = delta;
  fit.N = N;
  fit.max_diameters.assign(static_cast<size_t>(N), Real(0L, bits));
  fit.component_counts.assign(static_cast<size_t>(N), 0);
  for (const auto& p : probes) {
    const auto tree = preimage_components(map, p, N, bits);
    const auto md = tree.max_diameters();
    for (int k = 1; k <= N; ++k) {
      const auto uk = static_cast<size_t>(k);
      fit.max_diameters[uk - 1] = max(fit.max_diameters[uk - 1], md[uk]);
      fit.component_counts[uk - 1] += tree.levels[uk].size();
    }
  }
  std::vector<double> xs, ys;
  for (int k = 1; k <= N; ++k) {
    xs.push_back(k);
    ys.push_back(fit.max_diameters[static_cast<size_t>(k - 1)].log_abs());
  }
  const Line line = fit_line(xs, ys);
  fit.lambda = std::exp(-line.slope);
  double log_C = -INFINITY;
  for (size_t i = 0; i < xs.size(); ++i) log_C = std::max(log_C, ys[i] + xs[i] * std::log(fit.lambda));
  fit.C = std::exp(log_C);
  fit.verdict = fit.lambda > 1;
  return fit;
}

ordered_json PullStableResult::to_json() const {
  ordered_json j = {{"kappa", kappa}, {"N", N}, {"deltas", deltas}, {"max_diameter", json_numbers(max_diameter)}};
  j["best"] = best ? ordered_json(*best) : ordered_json(nullptr);
  return j;
}

PullStableResult pull_stable_probe(const MapSpec& map, double kappa, std::span<const double> delta_grid, int N,
                                   Bits bits) {
  if (!(kappa > 0)) throw DomainError("kappa must be positive");
  if (N < 1) throw ConfigError("depth must be at least 1");
  PullStableResult res;
  res.kappa = kappa;
  res.N = N;
  const Real lo(map.domain_lo(), bits), hi(map.domain_hi(), bits);
  const Real kap(kappa, bits);
  for (double delta : delta_grid) {
    if (!(delta > 0)) throw DomainError("grid radii must be positive");
    const Real d(delta, bits);
    const Real cover = d * Real(1.5, bits);
    Real worst(0L, bits);
    bool pass = true;
    for (Real x = lo; pass; x += d) {
      const Real c = min(x, hi);
      const Interval base(max(lo, c - cover), min(hi, c + cover));
      const auto tree = preimage_components(map, base, N, bits);
      const auto md = tree.max_diameters();
      for (size_t k = 1; k < md.size(); ++k) worst = max(worst, md[k]);
      if (!(worst < kap)) pass = false;
      if (!(c < hi)) break;
    }
    res.deltas.push_back(delta);
    res.max_diameter.push_back(worst.to_double());
    if (pass && (!res.best || delta > *res.best)) res.best = delta;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Distortion

ordered_json DistortionProbe::to_json() const {
  return {{"T", json_interval(T)},
          {"J", json_interval(J)},
          {"s", s},
          {"tau", tau},
          {"image_T_length", image_T_length},
          {"image_J_length", image_J_length},
          {"margins", {margin_left, margin_right}},
          {"well_inside", well_inside},
          {"xi", json_number(xi)},
          {"ratio", json_number(ratio)},
          {"ratio_upper", json_number(ratio_upper)},
          {"koebe_bound", koebe_bound},
          {"cells", cells}};
}

namespace {

// Image of an interval on which f is monotone.
Interval monotone_image(const Dynamics& dyn, const Interval& w) {
  const Interval a = dyn.eval().enclose(Interval(w.lo()));
  const Interval b = dyn.eval().enclose(Interval(w.hi()));
  return hull(a, b);
}

Real log_abs_deriv(const Dynamics& dyn, Real x, int s) {
  Real acc(0L, dyn.bits());
  for (int k = 0; k < s; ++k) {
    acc += log(abs(dyn.df(x)));
    x = dyn.f(x);
  }
  return acc;
}

// Enclosure of |Df^s| over a cell.
Interval deriv_enclosure(const Dynamics& dyn, Interval x, int s) {
  Interval acc(Real(1L, dyn.bits()));
  const Interval dom = dyn.eval().domain();
  for (int k = 0; k < s; ++k) {
    acc = acc * abs(dyn.eval().enclose(x, 1));
    if (k + 1 < s) {
      Interval nx = dyn.eval().enclose_centered(x);
      x = nx.intersects(dom) ? intersect(nx, dom) : nx;
    }
  }
  return acc;
}

}  // namespace

DistortionProbe koebe_probe(const MapSpec& map, const Interval& T, const Interval& J, int s, double tau, double xi,
                            Bits bits) {
  if (s < 1) throw ConfigError("iterate count must be at least 1");
  if (!(tau > 0)) throw DomainError("tau must be positive");
  if (!T.contains(J)) throw DomainError("J is not contained in T");
  const Dynamics dyn(map, bits);
  DistortionProbe pr;
  pr.T = T;
  pr.J = J;
  pr.s = s;
  pr.tau = tau;
  pr.xi = xi;
  pr.koebe_bound = std::pow((1 + tau) / tau, 2);

  Interval t = T, j = J;
  for (int k = 0; k < s; ++k) {
    if (dyn.meets_critical(t)) {
      throw HypothesisError("f^" + std::to_string(s) + " is not a diffeomorphism on T: step " + std::to_string(k) +
                            " meets a critical point");
    }
    t = monotone_image(dyn, t);
    j = monotone_image(dyn, j);
  }
  pr.image_T_length = diameter(t).to_double();
  pr.image_J_length = diameter(j).to_double();
  pr.margin_left = (j.lo() - t.lo()).to_double();
  pr.margin_right = (t.hi() - j.hi()).to_double();
  const Real need = Real(tau, bits) * diameter(j);
  pr.well_inside = !(j.lo() - t.lo() < need) && !(t.hi() - j.hi() < need);
  if (!pr.well_inside) {
    throw HypothesisError("f^s(J) is not " + std::to_string(tau) + "-well inside f^s(T)");
  }
  if (std::isfinite(xi) && pr.image_T_length > xi) {
    throw HypothesisError("|f^s(T)| = " + std::to_string(pr.image_T_length) + " exceeds xi = " + std::to_string(xi));
  }

  // Adaptive refinement: split cells whose enclosure could still move the
  // extrema by more than half a percent.
  struct Cell {
    Interval x;
    Interval d;
  };
  std::vector<Cell> cells{{J, deriv_enclosure(dyn, J, s)}};
  const double slack = std::log(1.005);
  const size_t max_cells = 1 << 16;
  Real smax(bits), smin(bits);
  bool first = true;
  auto sample = [&](const Real& x) {
    const Real v = log_abs_deriv(dyn, x, s);
    if (first || smax < v) smax = v;
    if (first || v < smin) smin = v;
    first = false;
  };
  sample(J.lo());
  sample(J.hi());
  for (;;) {
    double up = -INFINITY, lo = INFINITY;
    for (const auto& c : cells) {
      up = std::max(up, c.d.hi().log_abs());
      lo = std::min(lo, c.d.lo().log_abs());
    }
    const double s_hi = smax.to_double(), s_lo = smin.to_double();
    pr.ratio = std::exp(s_hi - s_lo);
    pr.ratio_upper = std::exp(up - lo);
    pr.cells = static_cast<int>(cells.size());
    if ((up - s_hi <= slack && s_lo - lo <= slack) || cells.size() >= max_cells) break;
    std::vector<Cell> next;
    for (auto& c : cells) {
      const bool open = c.d.hi().log_abs() - s_hi > slack || s_lo - c.d.lo().log_abs() > slack;
      if (!open) {
        next.push_back(std::move(c));
        continue;
      }
      const Real m = c.x.mid();
      sample(m);
      Interval a(c.x.lo(), m), b(m, c.x.hi());
      next.push_back({a, deriv_enclosure(dyn, a, s)});
      next.push_back({b, deriv_enclosure(dyn, b, s)});
    }
    cells = std::move(next);
  }
  return pr;
}

KoebeSample koebe_sample(const MapSpec& map, const Real& x, int s, double rho, double tau, Bits bits) {
  if (s < 1) throw ConfigError("iterate count must be at least 1");
  if (!(rho > 0) || !(tau > 0)) throw DomainError("rho and tau must be positive");
  const Puller puller(map, bits);
  const Dynamics& dyn = puller.dynamics();
  std::vector<Real> orbit{Real(x, bits)};
  for (int k = 0; k < s; ++k) orbit.push_back(dyn.f(orbit.back()));
  const Real R(rho, bits);
  const Real r = R / Real(1 + 2 * tau + 0x1p-20, bits);
  const Ball outer = clipped_ball(dyn, orbit.back(), R);
  const Ball inner = clipped_ball(dyn, orbit.back(), r);
  KoebeSample ks;
  Interval t = outer.w, j = inner.w;
  bool crit = false;
  for (int k = s - 1; k >= 0; --k) {
    const auto uk = static_cast<size_t>(k);
    t = puller.pull(t, orbit[uk]);
    j = puller.pull(j, orbit[uk]);
    crit = crit || puller.meets_critical(t);
  }
  ks.T = t;
  ks.J = j;
  ks.diffeomorphic = !crit && !outer.clipped;
  return ks;
}

// ---------------------------------------------------------------------------
// Quasi-chains

ordered_json QuasiChainCertificate::to_json() const {
  ordered_json w = ordered_json::array();
  for (const auto& x : W) w.push_back(json_interval(x, 17));
  return {{"n", n},
          {"certified_prefix", certified_prefix},
          {"eta", eta},
          {"v", v.str(20)},
          {"reset_times", reset_times},
          {"m", m},
          {"block_lengths", block_lengths},
          {"block_log_derivative", json_numbers(block_log_derivative)},
          {"reset_log_derivative", json_numbers(reset_log_derivative)},
          {"reset_distance", json_numbers(reset_distance)},
          {"constants",
           {{"lambda", lambda},
            {"esc_C", esc_C},
            {"koebe_C", koebe_C},
            {"C1", C1},
            {"L", L},
            {"ell", ell},
            {"eta0", eta0},
            {"theta_2ell", json_number(theta_2ell)},
            {"theta_1ell", json_number(theta_1ell)},
            {"eps_star_2ell", json_number(eps_star_2ell)},
            {"eps_star_1ell", json_number(eps_star_1ell)}}},
          {"log_bound", json_number(log_bound)},
          {"log_actual", json_number(log_actual)},
          {"hypotheses_verified", hypotheses_verified},
          {"hypothesis_notes", hypothesis_notes},
          {"eta_below_inverse_e", eta_below_inverse_e},
          {"nonflat_ok", nonflat_ok},
          {"esc_blocks_ok", esc_blocks_ok},
          {"slow_recurrence_count_ok", slow_recurrence_count_ok},
          {"violated", violated},
          {"W", std::move(w)}};
}

QuasiChainCertificate quasi_chain(const MapSpec& map, size_t crit_index, long n, double eta,
                                  const QuasiChainOptions& opts) {
  if (n < 1) throw ConfigError("horizon must be at least 1");
  if (!(eta > 0)) throw DomainError("eta must be positive");
  const auto& crit = map.critical_points();
  if (crit_index >= crit.size()) throw ConfigError("no critical point #" + std::to_string(crit_index));

  QuasiChainCertificate q;
  q.n = n;
  q.eta = eta;
  long h = n;
  orbit::OrbitRecord rec;
  try {
    rec = orbit::critical_orbit(map, crit_index, h + 1, opts.policy);
  } catch (const orbit::PrecisionExhausted& e) {
    h = static_cast<long>(e.certified_prefix()) - 1;
    if (h < 1) throw;
    rec = orbit::critical_orbit(map, crit_index, h + 1, opts.policy);
    q.hypothesis_notes.push_back("orbit certified only to n = " + std::to_string(h));
  }
  q.certified_prefix = h;
  q.v = rec.points.front();

  const Puller puller(map, rec.precision_bits);
  const Dynamics& dyn = puller.dynamics();
  const Real R(eta, rec.precision_bits);
  const auto& pts = rec.points;

  // Rules (i)-(iii).
  q.W.assign(static_cast<size_t>(h) + 1, Interval(rec.precision_bits));
  q.W[static_cast<size_t>(h)] = clipped_ball(dyn, pts[static_cast<size_t>(h)], R).w;
  bool final_block_diffeo = true;
  for (long k = h - 1; k >= 0; --k) {
    const auto uk = static_cast<size_t>(k);
    Interval w = puller.pull(q.W[uk + 1], pts[uk]);
    if (puller.meets_critical(w)) {
      if (k >= 1) {
        q.reset_times.push_back(k);
        w = clipped_ball(dyn, pts[uk], R).w;
      } else {
        final_block_diffeo = false;
      }
    }
    q.W[uk] = std::move(w);
  }
  q.m = static_cast<long>(q.reset_times.size());

  // Constants.
  q.koebe_C = opts.koebe_C;
  q.eta0 = opts.eta0 > 0 ? opts.eta0 : eta;
  if (opts.esc_lambda > 0 && opts.esc_C > 0) {
    q.lambda = opts.esc_lambda;
    q.esc_C = opts.esc_C;
  } else {
    const double len = (Real(map.domain_hi(), 53) - Real(map.domain_lo(), 53)).to_double();
    const double delta = std::min(2 * eta, len);
    const auto probes = default_probes(map, delta, opts.esc_probes);
    const auto fit = esc_fit(map, delta, opts.esc_depth, probes);
    q.lambda = opts.esc_lambda > 0 ? opts.esc_lambda : fit.lambda;
    q.esc_C = opts.esc_C > 0 ? opts.esc_C : fit.C;
  }
  q.ell = 2;
  q.L = 1;
  for (const auto& c : crit) {
    q.ell = std::max(q.ell, c.order);
    q.L = std::max(q.L, c.nonflat_L);
  }
  q.C1 = 2 * eta / (q.koebe_C * q.esc_C);
  const double log_lL = std::log(q.lambda * q.L);
  const double head = std::log(2 / (q.koebe_C * q.esc_C));
  q.theta_2ell = head / std::log(q.eta0) + log_lL + 2 * q.ell;
  q.theta_1ell = head / std::log(eta) + log_lL + 1 + q.ell;
  q.eps_star_2ell = std::log(q.lambda) / (2 * q.theta_2ell);
  q.eps_star_1ell = std::log(q.lambda) / (2 * q.theta_1ell);

  // Block decomposition with natural indexing: times n_0 = h > n_1 > ... > n_m.
  const auto logs = rec.log_factors();
  auto sum_logs = [&](long from, long to) {  // sum over k in [from, to)
    double acc = 0;
    for (long k = from; k < to; ++k) acc += logs[static_cast<size_t>(k)];
    return acc;
  };
  q.log_actual = sum_logs(0, h);
  const double log_lambda = std::log(q.lambda);
  q.esc_blocks_ok = true;
  q.nonflat_ok = true;
  double log_bound = (static_cast<double>(q.m) + 1) * std::log(q.C1) + static_cast<double>(h - q.m) * log_lambda -
                     static_cast<double>(q.m) * std::log(q.L);
  long upper = h;
  auto esc_check = [&](long start, long len) {
    const double lw = diameter(q.W[static_cast<size_t>(start)]).log_abs();
    if (lw > std::log(q.esc_C) - static_cast<double>(len) * log_lambda + 1e-12) q.esc_blocks_ok = false;
  };
  for (long ni : q.reset_times) {
    const long len = upper - ni - 1;
    q.block_lengths.push_back(len);
    q.block_log_derivative.push_back(sum_logs(ni + 1, upper));
    esc_check(ni + 1, len);
    const double dlog = logs[static_cast<size_t>(ni)];
    const double d = dyn.distance_to_critical(pts[static_cast<size_t>(ni)]).log_abs();
    q.reset_log_derivative.push_back(dlog);
    q.reset_distance.push_back(std::exp(d));
    if (dlog < q.ell * d - std::log(q.L)) q.nonflat_ok = false;
    log_bound += q.ell * d;
    upper = ni;
  }
  q.block_lengths.push_back(upper);
  q.block_log_derivative.push_back(sum_logs(0, upper));
  esc_check(0, upper);
  q.log_bound = log_bound;

  q.eta_below_inverse_e = eta < std::exp(-1.0);
  q.slow_recurrence_count_ok =
      static_cast<double>(q.m) <= static_cast<double>(h) * q.eps_star_2ell / -std::log(eta);
  if (!q.eta_below_inverse_e) q.hypothesis_notes.push_back("eta is not below 1/e");
  if (!q.nonflat_ok) q.hypothesis_notes.push_back("non-flatness inequality fails at a reset");
  if (!q.esc_blocks_ok) q.hypothesis_notes.push_back("a block pull-back exceeds the shrinking bound");
  if (!(q.lambda > 1)) q.hypothesis_notes.push_back("shrinking rate is not above 1");
  if (!final_block_diffeo) q.hypothesis_notes.push_back("the pull-back at time 0 meets a critical point");
  q.hypotheses_verified =
      q.eta_below_inverse_e && q.nonflat_ok && q.esc_blocks_ok && q.lambda > 1 && final_block_diffeo;
  q.violated = q.hypotheses_verified && q.log_bound > q.log_actual;
  return q;
}

// ---------------------------------------------------------------------------
// Shrinking to a diffeomorphic pull-back

ordered_json ShrinkCertificate::to_json() const {
  return {{"n", n},
          {"m", m},
          {"radius_log", radius_log},
          {"W0_diameter", json_number(W0_diameter)},
          {"log_W0_diameter", json_number(log_W0_diameter)},
          {"diffeo_verified", diffeo_verified},
          {"critical_indices", critical_indices},
          {"esc_consistent", esc_consistent},
          {"log_bound", json_number(log_bound)},
          {"log_actual", json_number(log_actual)},
          {"violated", violated}};
}

ShrinkCertificate shrink_to_ce_bound(const MapSpec& map, size_t crit_index, long n, const ShrinkParams& p) {
  if (n < 1) throw ConfigError("horizon must be at least 1");
  if (!(p.lambda > 1) || !(p.M >= p.lambda)) throw DomainError("need 1 < lambda <= M");
  if (!(p.C_alpha > 0) || !(p.delta0 > 0) || !(p.koebe_C > 0) || !(p.esc_C > 0)) {
    throw DomainError("constants must be positive");
  }
  if (p.alpha_rec < 0) throw DomainError("recurrence exponent must be nonnegative");
  if (crit_index >= map.critical_points().size()) throw ConfigError("no critical point #" + std::to_string(crit_index));

  ShrinkCertificate sc;
  sc.n = n;
  const double ll = std::log(p.lambda), lM = std::log(p.M);
  sc.m = std::max(0L, static_cast<long>(std::ceil((p.alpha_rec * static_cast<double>(n + 1) - std::log(p.C_alpha)) / ll)));
  sc.radius_log = std::log(p.delta0) - static_cast<double>(sc.m) * lM;

  orbit::PrecisionPolicy policy = p.policy;
  if (policy.fixed_bits == 0) {
    policy.guard_bits += static_cast<Bits>(std::ceil(static_cast<double>(sc.m) * lM / std::log(2.0)));
  }
  const auto rec = orbit::critical_orbit(map, crit_index, n + 1, policy);
  const Puller puller(map, rec.precision_bits);
  const Real radius = exp(Real(sc.radius_log, rec.precision_bits));
  const auto ch = build_chain(puller, rec.points, n, radius);
  for (long j = 0; j <= n; ++j) {
    if (ch.critical[static_cast<size_t>(j)]) sc.critical_indices.push_back(j);
  }
  sc.diffeo_verified = sc.critical_indices.empty();
  const Real w0 = diameter(ch.W.front());
  sc.W0_diameter = w0.to_double();
  sc.log_W0_diameter = w0.log_abs();
  sc.esc_consistent = sc.log_W0_diameter <= std::log(p.esc_C) - static_cast<double>(n + sc.m) * ll;

  // Mean value plus distortion: |Df^n(v)| >= |B| / (koebe_C |W_0|), with
  // |W_0| <= esc_C lambda^-(n+m) and |B| the (possibly clipped) ball length.
  sc.log_bound = diameter(ch.base).log_abs() - std::log(p.koebe_C) - std::log(p.esc_C) +
                 static_cast<double>(n + sc.m) * ll;
  const auto logs = rec.log_factors();
  sc.log_actual = 0;
  for (long k = 0; k < n; ++k) sc.log_actual += logs[static_cast<size_t>(k)];
  sc.violated = sc.diffeo_verified && sc.log_bound > sc.log_actual;
  return sc;
}

}  // namespace celab::pullback
