#include <cmath>
#include <random>

#include "celab/error.hpp"
#include "celab/fixtures.hpp"
#include "celab/mapkit.hpp"
#include "doctest.h"

using namespace celab;
using namespace celab::mapkit;

namespace {

const MapSpec& ulam() {
  static const MapSpec m = fixtures::map("ulam");
  return m;
}

Real at(const Rational& q) { return Real(q, 256); }

// Df of the cubic fixture in double precision, for an independent root search.
double cubic_df(double x) { return -0.38 + 8.36 * x - 11.4 * x * x; }

double bisect(double (*g)(double), double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((g(lo) < 0) == (g(mid) < 0)) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

Real iterate(const MapSpec& m, Real x, int n, Bits bits) {
  for (int k = 0; k < n; ++k) x = eval_map(m, x, bits);
  return x;
}

}  // namespace

TEST_SUITE("mapkit") {
  TEST_CASE("eval_map on the Ulam map") {
    CHECK(eval_map(ulam(), at(Rational(1, 2)), 256) == 1.0);
    CHECK(eval_map(ulam(), at(1), 256) == 0.0);
    CHECK(eval_map(ulam(), at(Rational(1, 4)), 256) == 0.75);
  }

  TEST_CASE("eval_deriv on the Ulam map") {
    CHECK(eval_deriv(ulam(), at(0), 1, 256) == 4.0);
    CHECK(eval_deriv(ulam(), at(Rational(1, 2)), 1, 256) == 0.0);
    CHECK(eval_deriv(ulam(), at(Rational(1, 2)), 2, 256) == -8.0);
    CHECK(eval_deriv(ulam(), at(Rational(1, 3)), 3, 256) == 0.0);
  }

  TEST_CASE("evaluation errors") {
    CHECK_THROWS_AS(eval_map(ulam(), at(2), 256), DomainError);
    CHECK_THROWS_AS(eval_map(ulam(), at(Rational(1, 2)), 32), ConfigError);
    CHECK_THROWS_AS(eval_deriv(ulam(), at(Rational(1, 2)), 4, 256), ConfigError);
  }

  TEST_CASE("branch partition of the Ulam map") {
    const auto b = branch_partition(ulam());
    REQUIRE(b.size() == 2);
    CHECK(b[0].left == 0.0);
    CHECK(b[0].right == 0.5);
    CHECK(b[0].orientation == Orientation::increasing);
    CHECK(b[1].left == 0.5);
    CHECK(b[1].right == 1.0);
    CHECK(b[1].orientation == Orientation::decreasing);
    CHECK(b[0].image_hi == 1.0);
  }

  TEST_CASE("cubic fixture has three branches at the roots of Df") {
    const auto& cubic = fixtures::map("cubic");
    const auto b = branch_partition(cubic);
    REQUIRE(b.size() == 3);
    // Df changes sign once in [0, 0.3] and once in [0.3, 1]
    const double c1 = bisect(cubic_df, 0.0, 0.3), c2 = bisect(cubic_df, 0.3, 1.0);
    CHECK(b[0].right.to_double() == doctest::Approx(c1).epsilon(1e-14));
    CHECK(b[1].right.to_double() == doctest::Approx(c2).epsilon(1e-14));
    CHECK(b[0].orientation == Orientation::decreasing);
    CHECK(b[1].orientation == Orientation::increasing);
    CHECK(b[2].orientation == Orientation::decreasing);
  }

  TEST_CASE("affine map is not multimodal") {
    CHECK_THROWS_AS(branch_partition(MapSpec::polynomial("affine", {Rational(1, 4), Rational(1, 2)}, 0, 1)),
                    NotMultimodalError);
  }

  TEST_CASE("maps must send the domain into itself") {
    CHECK_THROWS_AS(MapSpec::polynomial("escape", {0, Rational(9, 2), Rational(-9, 2)}, 0, 1), DomainError);
  }

  TEST_CASE("nonflatness probe exponents") {
    const auto& c = ulam().critical_points()[0];
    const auto p = nonflatness_probe(ulam(), c, default_radius_grid(0.25));
    CHECK(p.rounded_exponent == 1);
    CHECK(p.fitted_exponent == doctest::Approx(1).epsilon(1e-9));
    // |Df(x)| = 8|x - 1/2| exactly
    CHECK(p.fitted_L == doctest::Approx(1.0 / 8).epsilon(1e-9));
    CHECK(p.order == 2);

    const auto& q = fixtures::map("quartic");
    const auto pq = nonflatness_probe(q, q.critical_points()[0], default_radius_grid(0.5));
    CHECK(pq.rounded_exponent == 3);
    CHECK(pq.fitted_exponent == doctest::Approx(3).epsilon(1e-9));
    CHECK(q.critical_points()[0].order == 4);
  }

  TEST_CASE("nonflatness grid reaching another critical point") {
    const auto& cubic = fixtures::map("cubic");
    CHECK_THROWS_AS(nonflatness_probe(cubic, cubic.critical_points()[0], default_radius_grid(0.9)), GeometryError);
  }

  TEST_CASE("critical point invariants") {
    for (const auto& name : {"ulam", "logistic-3.9", "cubic", "quartic", "sine", "phi-conjugate"}) {
      const auto& m = fixtures::map(name);
      CAPTURE(name);
      const auto& cps = m.critical_points();
      REQUIRE(!cps.empty());
      for (size_t i = 0; i < cps.size(); ++i) {
        const auto& c = cps[i];
        CHECK(c.bracket.contains(c.location));
        CHECK(c.order >= 2);
        CHECK(c.nonflat_L >= 1);
        CHECK(c.nonflat_radius > 0);
        if (i) CHECK(cps[i - 1].bracket.hi() < c.bracket.lo());
        // Df changes sign across the bracket
        const Real lo = c.bracket.lo() - Real(1e-30, 256), hi = c.bracket.hi() + Real(1e-30, 256);
        CHECK(eval_deriv(m, lo, 1, 256).sign() * eval_deriv(m, hi, 1, 256).sign() < 0);
      }
    }
  }

  TEST_CASE("extended precision agrees with exact rationals on a grid") {
    // oracle: 4q(1-q) evaluated in GMP
    std::mt19937_64 rng(17);
    for (int i = 0; i < 1000; ++i) {
      Rational q(static_cast<long>(rng() % 1000000), 1000000);
      q.canonicalize();
      const Rational exact = 4 * q * (1 - q);
      const Real got = eval_map(ulam(), at(q), 256);
      const Rational err = abs(got.to_rational() - exact);
      CHECK(err <= Rational(1, 1) / Rational(mpz_class(1) << 250));
    }
  }

  TEST_CASE("chain rule matches a high-precision difference quotient") {
    // oracle: symmetric difference of f^n with step 2^-600 at 2048 bits
    const auto& m = fixtures::map("logistic-3.9");
    const Bits bits = 2048;
    for (double x0 : {0.123, 0.31, 0.77}) {
      for (int n : {1, 5, 12, 20}) {
        Real x(x0, bits);
        Real prod(1, bits);
        Real y = x;
        for (int k = 0; k < n; ++k) {
          prod *= eval_deriv(m, y, 1, bits);
          y = eval_map(m, y, bits);
        }
        const Real h = ldexp(Real(1, bits), -600);
        const Real dq = (iterate(m, x + h, n, bits) - iterate(m, x - h, n, bits)) / (Real(2, bits) * h);
        const double rel = (abs(dq - prod) / abs(prod)).to_double();
        CAPTURE(x0);
        CAPTURE(n);
        CHECK(rel < std::ldexp(1.0, -128));
      }
    }
  }

  TEST_CASE("branch images are monotone at interior samples") {
    for (const auto& name : {"ulam", "cubic", "sine", "phi-conjugate"}) {
      const auto& m = fixtures::map(name);
      for (const auto& b : branch_partition(m)) {
        Real prev = eval_map(m, b.left, 256);
        bool ok = true;
        for (int i = 1; i <= 100; ++i) {
          const Real x = b.left + (b.right - b.left) * Real(i / 101.0, 256);
          const Real y = eval_map(m, x, 256);
          if (b.orientation == Orientation::increasing ? !(y > prev) : !(y < prev)) ok = false;
          prev = y;
        }
        CAPTURE(name);
        CHECK(ok);
      }
    }
  }

  TEST_CASE("adjacent branches share exactly a critical point") {
    const auto& m = fixtures::map("cubic");
    const auto b = branch_partition(m);
    for (size_t i = 0; i + 1 < b.size(); ++i) {
      CHECK(b[i].right == b[i + 1].left);
      CHECK(m.critical_points()[i].bracket.contains(b[i].right));
    }
  }

  TEST_CASE("map documents round-trip exactly") {
    for (const auto& f : fixtures::catalogue()) {
      const auto& m = fixtures::map(f.name);
      const auto j = m.to_json();
      const auto back = MapSpec::from_json(j);
      CHECK(back.to_json() == j);
      CHECK(eval_map(back, at(Rational(1, 7)), 256) == eval_map(m, at(Rational(1, 7)), 256));
    }
  }

  TEST_CASE("map documents reject inexact numerics") {
    nlohmann::ordered_json j = {{"label", "x"}, {"family", "polynomial"}, {"domain", {"0", "1"}},
                                {"coefficients", {0, 3.9, -3.9}}};
    CHECK_THROWS_AS(MapSpec::from_json(j), ConfigError);
  }
}
