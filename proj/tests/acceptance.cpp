// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "celab/analysis.hpp"
#include "celab/conjugacy.hpp"
#include "celab/error.hpp"
#include "celab/fixtures.hpp"
#include "celab/hyperbolicity.hpp"
#include "celab/pullback.hpp"
#include "oracles.hpp"

using namespace celab;
using mapkit::MapSpec;
using nlohmann::ordered_json;

namespace {

int failures = 0;

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

void run(int id, const char* title, const std::function<void(Check&)>& body, double budget_seconds = 0) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0) c.require(secs < budget_seconds, "over time budget");
  std::printf("%s %2d %s (%.1fs)%s%s\n", c.ok ? "PASS" : "FAIL", id, title, secs, c.ok ? "" : ": ", c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

const MapSpec& F4() {
  static const MapSpec m = fixtures::map("ulam");
  return m;
}

double phi(double x) { return (x + x * x) / 2; }

void ce_exactness(Check& c) {
  Rational p(1);
  for (long n = 1; n <= 30; ++n) {
    p *= 4;
    const auto ex = orbit::critical_orbit_exact(F4(), 0, n);
    c.require(abs(ex.derivative_product()) == p, "exact product differs from 4^n at n = " + std::to_string(n));
  }
  const auto fit = hyperbolicity::ce_fit(orbit::critical_orbit(F4(), 0, 200));
  c.require(std::abs(fit.lambda - 4) <= 4e-6, "lambda = " + std::to_string(fit.lambda));
}

void periodic(Check& c) {
  const auto orbits = orbit::periodic_points(F4(), 8);
  size_t count = 0;
  for (const auto& o : orbits) {
    const double want = std::ldexp(1.0, o.period) * (o.period == 1 && o.point.sign() == 0 ? 2 : 1);
    const double got = std::abs(o.multiplier.to_double());
    c.require(std::abs(got - want) <= 1e-9 * want, "multiplier " + std::to_string(got) + " at period " +
                                                       std::to_string(o.period));
    c.require(o.repelling, "non-repelling orbit");
    ++count;
  }
  // 2^p - (points of smaller period) cycles of period p for the full 2-shift
  c.require(count == 2 + 1 + 2 + 3 + 6 + 9 + 18 + 30, "orbit count " + std::to_string(count));
  const auto rep = orbit::repelling_check(fixtures::map("logistic-2.8"), 8);
  c.require(!rep.all_repelling, "logistic 2.8 reported all repelling");
  bool witness = false;
  for (const auto& w : rep.witnesses) witness |= std::abs(w.multiplier.to_double() + 0.8) <= 1e-9;
  c.require(witness, "no witness with multiplier -0.8");
}

void pullback_correctness(Check& c) {
  const oracle::Quadratic q(4, 256);
  const Interval J(Real(0.2, 256), Real(0.3, 256));
  const auto t = pullback::preimage_components(F4(), J, 6);
  const auto ref = oracle::full_tree(q, {J.lo(), J.hi()}, 1);
  c.require(t.levels[1].size() == ref[1].size(), "depth-1 component count");
  for (size_t i = 0; i < ref[1].size() && i < t.levels[1].size(); ++i) {
    c.require(abs(t.levels[1][i].lo() - ref[1][i].lo).to_double() <= 1e-12 &&
                  abs(t.levels[1][i].hi() - ref[1][i].hi).to_double() <= 1e-12,
              "depth-1 endpoints");
  }
  const int N = 1000000;
  for (int k = 1; k <= 6; ++k) {
    const auto& comps = t.levels[static_cast<size_t>(k)];
    long bad = 0;
    size_t ci = 0;
    for (int i = 0; i < N; ++i) {
      const double x = (i + 0.5) / N;
      while (ci < comps.size() && comps[ci].hi().to_double() < x) ++ci;
      const bool inside = ci < comps.size() && comps[ci].lo().to_double() <= x;
      if (inside == oracle::in_preimage(4, x, 0.2, 0.3, k)) continue;
      double gap = INFINITY;
      for (const auto& w : comps) gap = std::min({gap, std::abs(x - w.lo().to_double()), std::abs(x - w.hi().to_double())});
      if (gap > 1e-12) ++bad;
    }
    c.require(bad == 0, std::to_string(bad) + " grid points misclassified at depth " + std::to_string(k));
  }
}

void tce(Check& c) {
  const Real zero(0L, 256), half(Rational(1, 2), 256);
  const auto prof = pullback::criticality_profile(F4(), zero, 500, Real(0.1, 256));
  for (size_t n = 0; n < prof.size(); ++n) c.require(prof[n] == 0, "criticality at x = 0, n = " + std::to_string(n + 1));
  c.require(pullback::criticality_count(F4(), half, 1, Real(0.1, 256)) == 1, "criticality at x = 1/2");
  const double radii[] = {0.01, 0.05, 0.1, 0.2};
  for (double x : {0.0, 0.13, 0.5, 0.77}) {
    for (long n : {1L, 5L, 20L, 60L}) {
      long prev = -1;
      for (double r : radii) {
        const long cc = pullback::criticality_count(F4(), Real(x, 256), n, Real(r, 256));
        c.require(cc >= prev, "criticality decreases in r");
        prev = cc;
      }
    }
  }
}

void esc(Check& c) {
  const int N = 12;
  const auto probes = pullback::default_probes(F4(), 0.1);
  const auto fit = pullback::esc_fit(F4(), 0.1, N, probes);
  c.require(fit.verdict, "verdict false");
  c.require(fit.lambda >= 1.8 && fit.lambda <= 2.2, "lambda = " + std::to_string(fit.lambda));
  const oracle::Quadratic q(4, mapkit::kAnalysisBits);
  std::vector<Real> best(N, Real(0L, mapkit::kAnalysisBits));
  std::vector<size_t> counts(N, 0);
  for (const auto& p : probes) {
    const auto tree = oracle::full_tree(q, oracle::Piece{p.lo(), p.hi()}, N);
    for (int k = 1; k <= N; ++k) {
      for (const auto& w : tree[static_cast<size_t>(k)]) best[k - 1] = max(best[k - 1], w.hi - w.lo);
      counts[k - 1] += tree[static_cast<size_t>(k)].size();
    }
  }
  for (int k = 0; k < N; ++k) {
    c.require(counts[k] == fit.component_counts[k], "component count at depth " + std::to_string(k + 1));
    c.require(abs(best[k] - fit.max_diameters[k]).to_double() <= 1e-60, "max diameter at depth " + std::to_string(k + 1));
  }
}

void koebe(Check& c) {
  const double taus[] = {0.5, 1, 2, 4};
  std::mt19937_64 rng(20261015);
  std::uniform_real_distribution<double> ux(0, 1);
  std::uniform_int_distribution<int> us(1, 25);
  double max_ratio[4] = {0, 0, 0, 0};
  double uniform = 0;
  int accepted = 0, attempts = 0;
  while (accepted < 50 && attempts < 2000) {
    ++attempts;
    const Real x(ux(rng), 64);
    const int s = us(rng);
    std::vector<pullback::DistortionProbe> probes;
    try {
      for (double tau : taus) {
        const auto ks = pullback::koebe_sample(F4(), x, s, 0.05, tau);
        if (!ks.diffeomorphic) break;
        probes.push_back(pullback::koebe_probe(F4(), ks.T, ks.J, s, tau));
      }
    } catch (const HypothesisError&) {
      continue;
    }
    if (probes.size() != 4) continue;
    for (int i = 0; i < 4; ++i) max_ratio[i] = std::max(max_ratio[i], probes[i].ratio);
    uniform = std::max(uniform, probes[0].ratio_upper);
    ++accepted;
  }
  c.require(accepted == 50, "only " + std::to_string(accepted) + " diffeomorphic samples");
  c.require(uniform <= 9, "tau = 1/2 ratio " + std::to_string(uniform) + " above the Koebe constant 9");
  for (int i = 1; i < 4; ++i) c.require(max_ratio[i] <= max_ratio[i - 1] * 1.05, "max ratio increases along tau");
}

void quasi(Check& c) {
  struct Case {
    const char* map;
    Rational a;
    double eta;
  };
  const Case cases[] = {{"ulam", Rational(4), 0.05}, {"ulam", Rational(4), 0.1}, {"logistic-3.9", Rational(39, 10), 0.05}};
  for (const auto& cs : cases) {
    const auto& m = fixtures::map(cs.map);
    for (long n : {10L, 50L, 100L, 150L, 200L}) {
      const auto cert = pullback::quasi_chain(m, 0, n, cs.eta);
      const std::string tag = std::string(cs.map) + " eta " + std::to_string(cs.eta) + " n " + std::to_string(n);
      c.require(cert.log_bound <= cert.log_actual, "bound above actual: " + tag);
      c.require(!cert.violated, "violation: " + tag);
      const auto o = orbit::critical_orbit(m, 0, n + 1);
      const oracle::Quadratic q(cs.a, o.precision_bits);
      c.require(cert.reset_times == oracle::replay_resets(q, o.points, n, cs.eta), "reset replay differs: " + tag);
    }
  }
}

void shrink(Check& c) {
  c.require(std::abs(hyperbolicity::ce_threshold_beta0(2, 4) - std::log(2.0) / 2) <= 1e-12, "beta0(2, 4)");
  pullback::ShrinkParams p;
  p.C_alpha = 0.5;
  p.alpha_rec = 1e-3;
  for (long n = 1; n <= 30; ++n) {
    const auto cert = pullback::shrink_to_ce_bound(F4(), 0, n, p);
    c.require(cert.diffeo_verified, "not diffeomorphic at n = " + std::to_string(n));
    c.require(cert.log_bound <= n * std::log(4.0) + 1e-9, "bound above 4^n at n = " + std::to_string(n));
    c.require(!cert.violated, "violation at n = " + std::to_string(n));
  }
}

void conjugacy_recovery(Check& c) {
  const auto t = conjugacy::build_conjugacy(F4(), fixtures::map("phi-conjugate"), 18);
  double worst = 0;
  for (size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t.y[i].to_double() - phi(t.x[i].to_double())));
  c.require(worst <= 1e-6, "sup error " + std::to_string(worst));
  const auto id = conjugacy::build_conjugacy(F4(), F4(), 12);
  for (size_t i = 0; i < id.size(); ++i)
    c.require(std::abs((id.x[i] - id.y[i]).to_double()) <= id.max_bracket_width, "identity table off the diagonal");
}

void holder(Check& c) {
  using conjugacy::holder_fit;
  using conjugacy::sample_function_pairs;
  const double both[] = {0.0, 1.0}, left[] = {0.0};
  const double a1 = holder_fit(sample_function_pairs([](double x) { return x; }, 0, 1, both, 4000, 1)).alpha;
  const double a2 = holder_fit(sample_function_pairs([](double x) { return std::sqrt(x); }, 0, 1, left, 4000, 2)).alpha;
  const auto inv = [](double y) { return 2 / M_PI * std::asin(std::sqrt(std::clamp(y, 0.0, 1.0))); };
  const double a3 = holder_fit(sample_function_pairs(inv, 0, 1, both, 4000, 3)).alpha;
  c.require(std::abs(a1 - 1) <= 0.01, "identity alpha " + std::to_string(a1));
  c.require(std::abs(a2 - 0.5) <= 0.03, "sqrt alpha " + std::to_string(a2));
  c.require(std::abs(a3 - 0.5) <= 0.05, "sin^2 inverse alpha " + std::to_string(a3));
}

void transport(Check& c) {
  using hyperbolicity::Model;
  for (double C : {0.5, 1.0, 3.0}) {
    for (double beta : {0.2, 0.5, 0.9}) {
      const hyperbolicity::TransportParams p{1, 1, C, beta};
      for (long n : {1L, 2L, 10L, 200L}) {
        const double dn = static_cast<double>(n);
        c.require(hyperbolicity::transport_recurrence_log_bound(p, n, Model::SER) == std::log(C) - std::pow(dn, beta),
                  "SER identity transport");
        c.require(hyperbolicity::transport_recurrence_log_bound(p, n, Model::ER) == std::log(C) - beta * dn,
                  "ER identity transport");
        c.require(hyperbolicity::transport_recurrence_log_bound(p, n, Model::PR) == std::log(C) - beta * std::log(dn),
                  "PR identity transport");
      }
    }
  }
  for (double eps : {0.05, 0.2}) {
    for (double d1 : {0.01, 0.1}) {
      const auto tr = hyperbolicity::transport_slow_recurrence_params(eps, 1, 1, d1);
      c.require(tr.eps_prime == eps && tr.delta0 == d1, "slow recurrence identity transport");
    }
  }
  const auto& g = fixtures::map("phi-conjugate");
  const auto table = conjugacy::build_conjugacy(F4(), g, 16);
  const auto fw = conjugacy::holder_fit(conjugacy::sample_table_pairs(table, conjugacy::Direction::backward, 4000, 2),
                                        conjugacy::Direction::backward);
  const auto src = hyperbolicity::recurrence_fit(
      hyperbolicity::recurrence_series(F4(), orbit::critical_orbit(F4(), 0, 200)), Model::SER);
  const hyperbolicity::TransportParams p{std::max(fw.K, 1.0), fw.alpha, src.C, src.beta};
  const auto gs = hyperbolicity::recurrence_series(g, orbit::critical_orbit(g, 0, 200));
  const auto neg = gs.neg_log();
  c.require(neg.size() >= 200, "short target series");
  for (size_t n = 1; n <= neg.size() && n <= 200; ++n) {
    const double bound = hyperbolicity::transport_recurrence_log_bound(p, static_cast<long>(n), Model::SER);
    c.require(-neg[n - 1] >= bound, "observed d_n below the transported bound at n = " + std::to_string(n));
  }
}

void reproducibility(Check& c) {
  auto j = fixtures::experiment("logistic-3.9");
  const auto cfg = analysis::ExperimentConfig::from_json(j);
  const auto a = analysis::run_analysis(cfg).to_json(false).dump(2);
  const auto b = analysis::run_analysis(cfg).to_json(false).dump(2);
  c.require(a == b, "reports differ");
}

}  // namespace

int main() {
  run(1, "Ulam-map CE exactness", ce_exactness, 5);
  run(2, "repelling periodic points", periodic, 30);
  run(3, "pull-back correctness", pullback_correctness, 60);
  run(4, "TCE criticality fixtures", tce);
  run(5, "ESC measurement", esc, 120);
  run(6, "Koebe distortion", koebe);
  run(7, "quasi-chain certificate", quasi);
  run(8, "beta0 threshold and shrink bound", shrink);
  run(9, "conjugacy recovery", conjugacy_recovery, 60);
  run(10, "Holder estimator calibration", holder);
  run(11, "transport formulas", transport);
  run(12, "reproducibility", reproducibility);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
