#include <cmath>
#include <random>

#include "celab/conjugacy.hpp"
#include "celab/error.hpp"
#include "celab/fixtures.hpp"
#include "doctest.h"

using namespace celab;
using namespace celab::conjugacy;

namespace {

const MapSpec& ulam() {
  static const MapSpec m = fixtures::map("ulam");
  return m;
}

const MapSpec& phi_conj() {
  static const MapSpec m = fixtures::map("phi-conjugate");
  return m;
}

const ConjugacyTable& phi_table() {
  static const ConjugacyTable t = build_conjugacy(ulam(), phi_conj(), 14);
  return t;
}

double phi(double x) { return (x + x * x) / 2; }

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return v;
}

}  // namespace

TEST_SUITE("conjugacy") {
  TEST_CASE("itineraries of fixed points") {
    CHECK(itinerary(ulam(), Real(0, 256), 5).word() == "LLLLL");
    CHECK(itinerary(ulam(), Real(Rational(3, 4), 256), 4).word() == "RRRR");
  }

  TEST_CASE("critical point itinerary follows the critical value") {
    // 1/2 -> 1 -> 0, and 1 lies in the right branch
    const auto it = itinerary(ulam(), Real(Rational(1, 2), 256), 3);
    CHECK(it.word() == "CRL");
    CHECK(it.symbols[0] == -1);
  }

  TEST_CASE("symbol names") {
    CHECK(symbol_text(0, 2, 1) == "L");
    CHECK(symbol_text(1, 3, 2) == "M");
    CHECK(symbol_text(-2, 3, 2) == "C2");
  }

  TEST_CASE("identity pair gives the identity") {
    for (int depth : {1, 4, 10}) {
      const auto t = build_conjugacy(ulam(), ulam(), depth);
      REQUIRE(t.size() > 0);
      for (size_t i = 0; i < t.size(); ++i) CHECK(std::abs((t.x[i] - t.y[i]).to_double()) <= t.max_bracket_width);
    }
  }

  TEST_CASE("table size counts critical preimages") {
    // 2^k points on level k, k = 0..6
    const auto t = build_conjugacy(ulam(), ulam(), 6);
    CHECK(t.size() == 127);
  }

  TEST_CASE("phi-conjugate table matches phi") {
    const auto& t = phi_table();
    double worst = 0;
    for (size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t.y[i].to_double() - phi(t.x[i].to_double())));
    CHECK(worst <= 1e-8);
  }

  TEST_CASE("strict order preservation") {
    const auto& t = phi_table();
    for (size_t i = 1; i < t.size(); ++i) {
      CHECK(t.x[i - 1] < t.x[i]);
      CHECK(t.y[i - 1] < t.y[i]);
    }
  }

  TEST_CASE("semiconjugacy residual within bracket width") {
    const auto& t = phi_table();
    const auto r = semiconjugacy_residual(ulam(), phi_conj(), t);
    CHECK(r.source <= std::max(t.max_bracket_width, 1e-60) * 16);
    CHECK(r.target <= std::max(t.max_bracket_width, 1e-60) * 16);
  }

  TEST_CASE("deeper tables refine shallower ones") {
    const auto a = build_conjugacy(ulam(), phi_conj(), 9);
    const auto b = build_conjugacy(ulam(), phi_conj(), 10);
    REQUIRE(b.size() > a.size());
    const double tol = std::max(a.max_bracket_width, b.max_bracket_width) * 2;
    size_t j = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      while (j < b.size() && (b.x[j] - a.x[i]).to_double() < -tol) ++j;
      REQUIRE(j < b.size());
      CHECK(std::abs((b.x[j] - a.x[i]).to_double()) <= tol);
      CHECK(std::abs((b.y[j] - a.y[i]).to_double()) <= tol);
      CHECK(b.address[j] == a.address[i]);
    }
  }

  TEST_CASE("evaluation returns a bracketing pair") {
    const auto& t = phi_table();
    const Real x(0.3, 256);
    const auto v = t.eval(x);
    CHECK(v.lo() <= v.hi());
    CHECK(v.lo().to_double() <= phi(0.3));
    CHECK(phi(0.3) <= v.hi().to_double());
    CHECK((v.hi() - v.lo()).to_double() <= t.max_gap_target());
    const auto p = t.eval(t.x[5]);
    CHECK(p.lo() == p.hi());
    CHECK(p.lo() == t.y[5]);
  }

  TEST_CASE("different kneading data is not conjugate") {
    try {
      build_conjugacy(ulam(), fixtures::map("logistic-3.5"), 6);
      FAIL("expected NotConjugateError");
    } catch (const NotConjugateError& e) {
      CHECK(!e.witness().empty());
      CHECK(e.witness().front() == 'C');
    }
  }

  TEST_CASE("critical counts must agree") {
    CHECK_THROWS_AS(build_conjugacy(ulam(), fixtures::map("cubic"), 4), StructuralError);
  }

  TEST_CASE("csv export") {
    const auto t = build_conjugacy(ulam(), ulam(), 2);
    const auto csv = t.to_csv();
    CHECK(csv.rfind("x,y,depth,address\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(t.size()));
  }

  TEST_CASE("holder fit of the identity") {
    const double anchors[] = {0.0, 1.0};
    const auto s = sample_function_pairs([](double x) { return x; }, 0, 1, anchors, 4000, 7);
    const auto f = holder_fit(s);
    CHECK(f.alpha == doctest::Approx(1).epsilon(0.01));
    CHECK(f.K == doctest::Approx(1).epsilon(0.01));
  }

  TEST_CASE("holder fit of the square root") {
    const double anchors[] = {0.0};
    const auto s = sample_function_pairs([](double x) { return std::sqrt(x); }, 0, 1, anchors, 4000, 11);
    const auto f = holder_fit(s);
    CHECK(std::abs(f.alpha - 0.5) <= 0.03);
  }

  TEST_CASE("holder fit of the inverse of sin^2(pi x / 2)") {
    const double anchors[] = {0.0, 1.0};
    const auto h = [](double y) { return 2 / M_PI * std::asin(std::sqrt(std::clamp(y, 0.0, 1.0))); };
    const auto f = holder_fit(sample_function_pairs(h, 0, 1, anchors, 4000, 13));
    CHECK(std::abs(f.alpha - 0.5) <= 0.05);
  }

  TEST_CASE("holder bound covers every sampled pair") {
    for (uint64_t seed : {1u, 2u, 3u}) {
      const double anchors[] = {0.0};
      const auto s = sample_function_pairs([](double x) { return std::cbrt(x) + x; }, 0, 1, anchors, 2000, seed);
      const auto f = holder_fit(s);
      CHECK(f.alpha > 0);
      CHECK(f.alpha <= 1);
      for (size_t i = 0; i < s.dx.size(); ++i) CHECK(s.dh[i] <= f.K * std::pow(s.dx[i], f.alpha) * (1 + 1e-12));
    }
  }

  TEST_CASE("holder fit needs spread data") {
    PairSample s;
    for (int i = 0; i < 2000; ++i) {
      s.dx.push_back(1e-3);
      s.dh.push_back(1e-3);
    }
    CHECK_THROWS_AS(holder_fit(s), InsufficientDataError);
    PairSample few;
    for (double d : log_grid(1e-8, 1e-1, 50)) {
      few.dx.push_back(d);
      few.dh.push_back(d);
    }
    CHECK_THROWS_AS(holder_fit(few), InsufficientDataError);
  }

  TEST_CASE("table pair samples are deterministic") {
    const auto a = sample_table_pairs(phi_table(), Direction::forward, 1000, 5);
    const auto b = sample_table_pairs(phi_table(), Direction::forward, 1000, 5);
    CHECK(a.dx == b.dx);
    CHECK(a.dh == b.dh);
    const auto back = sample_table_pairs(phi_table(), Direction::backward, 1000, 5);
    CHECK(back.dx.size() == back.dh.size());
    for (size_t i = 0; i < back.dx.size(); ++i) {
      CHECK(back.dx[i] > 0);
      CHECK(back.dh[i] > 0);
    }
  }

  TEST_CASE("invariance report on the identity pair") {
    const auto t = build_conjugacy(ulam(), ulam(), 14);
    InvarianceOptions o;
    o.horizon = 100;
    const auto rep = invariance_report(ulam(), ulam(), t, o);
    for (const char* k : {"thm1", "thm2", "thm3", "thm4"}) CHECK(rep.contains(k));
    CHECK(rep["violations"] == 0);
    CHECK(rep["holder"]["transport_alpha"].get<double>() == doctest::Approx(1).epsilon(0.01));
    CHECK(rep["source"]["critical"][0]["recurrence"] == rep["target"]["critical"][0]["recurrence"]);
  }

  TEST_CASE("invariance report on the phi-conjugate pair") {
    InvarianceOptions o;
    o.horizon = 200;
    const auto rep = invariance_report(ulam(), phi_conj(), phi_table(), o);
    const double lambda = rep["target"]["critical"][0]["ce"]["lambda"].get<double>();
    CHECK(std::abs(lambda - 4) <= 0.4);
    CHECK(rep["thm1"]["violations"] == 0);
    CHECK(rep["thm4"]["violations"] == 0);
  }

  TEST_CASE("invariance report rejects short horizons") {
    InvarianceOptions o;
    o.horizon = 8;
    CHECK_THROWS_AS(invariance_report(ulam(), ulam(), build_conjugacy(ulam(), ulam(), 3), o), ConfigError);
  }
}
