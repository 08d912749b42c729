#include <cmath>
#include <numbers>

#include "celab/error.hpp"
#include "celab/fixtures.hpp"
#include "celab/hyperbolicity.hpp"
#include "doctest.h"

using namespace celab;
using namespace celab::hyperbolicity;

namespace {

const mapkit::MapSpec& ulam() {
  static const mapkit::MapSpec m = fixtures::map("ulam");
  return m;
}

std::vector<double> generate(Model model, double C, double beta, int n) {
  std::vector<double> d;
  for (int k = 1; k <= n; ++k) {
    switch (model) {
      case Model::SER:
        d.push_back(C * std::exp(-std::pow(k, beta)));
        break;
      case Model::ER:
        d.push_back(C * std::exp(-beta * k));
        break;
      case Model::PR:
        d.push_back(C * std::pow(k, -beta));
        break;
    }
  }
  return d;
}

double source_bound(Model model, double C, double beta, long n) {
  return generate(model, C, beta, static_cast<int>(n)).back();
}

// pointwise re-check of a fit against every entry of the series
bool holds_everywhere(const RecurrenceFit& f, const std::vector<double>& d) {
  for (size_t k = 0; k < d.size(); ++k)
    if (std::log(d[k]) < f.log_bound(static_cast<double>(k + 1)) - 1e-12) return false;
  return true;
}

}  // namespace

TEST_SUITE("hyperbolicity") {
  TEST_CASE("CE fit on the Ulam map") {
    const auto fit = ce_fit(orbit::critical_orbit(ulam(), 0, 200));
    CHECK(fit.lambda == doctest::Approx(4).epsilon(1e-6));
    CHECK(fit.C == doctest::Approx(1).epsilon(1e-9));
    CHECK(fit.verdict);
  }

  TEST_CASE("CE fit without growth") {
    const std::vector<double> zeros(40, 0.0);
    const auto fit = ce_fit(zeros);
    CHECK(fit.lambda == doctest::Approx(1));
    CHECK_FALSE(fit.verdict);
  }

  TEST_CASE("CE fit inputs are the direct derivative products") {
    const auto& m = fixtures::map("logistic-3.9");
    const auto o = orbit::critical_orbit(m, 0, 500);
    const auto lf = o.log_factors();
    REQUIRE(lf.size() == 500);
    std::vector<double> direct;
    for (size_t k = 0; k < o.size(); ++k) {
      direct.push_back(std::log(std::abs(mapkit::eval_deriv(m, o.points[k], 1, o.precision_bits).to_double())));
      CHECK(direct.back() == doctest::Approx(lf[k]).epsilon(1e-12));
    }
    const auto fit = ce_fit(o);
    // independent least squares of the cumulative sum over the fitted range
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cum = 0;
    int cnt = 0;
    for (int n = 1; n <= static_cast<int>(direct.size()); ++n) {
      cum += direct[n - 1];
      if (n < fit.n_lo || n > fit.n_hi) continue;
      sx += n, sy += cum, sxx += double(n) * n, sxy += n * cum, ++cnt;
    }
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    CHECK(fit.lambda == doctest::Approx(std::exp(slope)).epsilon(1e-9));
    CHECK(fit.verdict);
    // the fitted constant makes the bound hold at every n
    cum = 0;
    for (size_t n = 1; n <= direct.size(); ++n) {
      cum += direct[n - 1];
      CHECK(cum >= fit.log_C + n * std::log(fit.lambda) - 1e-9);
    }
  }

  TEST_CASE("Ulam recurrence series is constant 1/2") {
    const auto s = recurrence_series(ulam(), 0, 100);
    REQUIRE(s.size() == 100);
    for (const auto& d : s.d) CHECK(d == 0.5);
    const auto er = recurrence_fit(s, Model::ER);
    CHECK(std::abs(er.beta) < 1e-9);
    CHECK(er.C == doctest::Approx(0.5));
    CHECK(er.verdict);
  }

  TEST_CASE("critical orbit landing on the critical point") {
    const auto s = recurrence_series(fixtures::map("a2"), 0, 20);
    CHECK(s.has_zero);
    for (auto model : {Model::SER, Model::ER, Model::PR}) CHECK_FALSE(recurrence_fit(s, model).verdict);
  }

  TEST_CASE("two critical points: distance is the minimum over both") {
    const auto& m = fixtures::map("cubic");
    const auto o = orbit::critical_orbit(m, 0, 51);
    const auto s = recurrence_series(m, o);
    const auto& cps = m.critical_points();
    for (size_t k = 1; k <= 50 && k <= s.size(); ++k) {
      double best = INFINITY;
      for (const auto& c : cps) best = std::min(best, std::abs(o.points[k - 1].to_double() - c.location.to_double()));
      CHECK(s.d[k - 1].to_double() == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("synthetic series round-trip") {
    struct Case {
      Model model;
      double C, beta;
    };
    for (const auto& c : {Case{Model::SER, 1, 0.5}, Case{Model::SER, 0.3, 0.7}, Case{Model::ER, 0.5, 0.2},
                          Case{Model::PR, 1, 2}, Case{Model::PR, 2, 1.5}}) {
      const auto d = generate(c.model, c.C, c.beta, 200);
      const auto fit = recurrence_fit(make_series(d), c.model);
      CAPTURE(to_string(c.model));
      CHECK(fit.beta == doctest::Approx(c.beta).epsilon(1e-3));
      CHECK(fit.C == doctest::Approx(c.C).epsilon(1e-3));
      CHECK(fit.verdict);
      CHECK(holds_everywhere(fit, d));
    }
  }

  TEST_CASE("verdicts hold pointwise on noisy series") {
    std::vector<double> d;
    for (int k = 1; k <= 300; ++k) d.push_back(0.4 * std::exp(-std::sqrt(k)) * (1.5 + std::sin(k * 1.7)));
    for (auto model : {Model::SER, Model::ER, Model::PR}) {
      const auto fit = recurrence_fit(make_series(d), model);
      if (fit.verdict) CHECK(holds_everywhere(fit, d));
    }
  }

  TEST_CASE("too few record minima") {
    // increasing distances: only n = 1 is a running minimum
    std::vector<double> d;
    for (int k = 1; k <= 30; ++k) d.push_back(0.01 * k);
    CHECK_THROWS_AS(recurrence_fit(make_series(d), Model::SER), InsufficientDataError);
  }

  TEST_CASE("slow recurrence statistic") {
    const auto s = recurrence_series(ulam(), 0, 100);
    const auto st = slow_recurrence_stat(s, 0.25, 100);
    CHECK(st.value == 0);
    CHECK(st.hit_count == 0);

    std::vector<double> d(10, 0.9);
    d[0] = std::exp(-1.0);
    const auto one = slow_recurrence_stat(make_series(d), 0.5, 10);
    CHECK(one.value == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(one.hit_count == 1);
    CHECK(slow_recurrence_stat(make_series(d), 0.3, 10).value == 0);
  }

  TEST_CASE("slow recurrence statistic is monotone in delta") {
    const auto s = recurrence_series(fixtures::map("logistic-3.9"), 0, 400);
    double prev = INFINITY;
    for (double delta : {0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001}) {
      const auto st = slow_recurrence_stat(s, delta, 400);
      CHECK(st.value <= prev);
      CHECK(st.value >= 0);
      CHECK(st.hit_count <= 400);
      CHECK((st.value == 0) == (st.hit_count == 0));
      prev = st.value;
    }
  }

  TEST_CASE("hit count bound follows from the slow recurrence inequality") {
    const auto s = recurrence_series(fixtures::map("logistic-3.9"), 0, 400);
    for (double delta1 : {0.1, 0.05, 0.01}) {
      const auto st = slow_recurrence_stat(s, delta1, 400);
      const double eps = st.value + 0.01;  // the inequality holds with this epsilon
      CHECK(st.hit_count <= hit_count_bound(400, eps, delta1));
    }
  }

  TEST_CASE("beta0 threshold") {
    CHECK(ce_threshold_beta0(2, 4) == doctest::Approx(std::numbers::ln2 / 2).epsilon(1e-12));
    CHECK(ce_threshold_beta0(std::exp(1.0), std::exp(3.0)) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK_THROWS_AS(ce_threshold_beta0(3, 3), DomainError);
    CHECK_THROWS_AS(ce_threshold_beta0(1, 3), DomainError);
    CHECK_THROWS_AS(ce_threshold_beta0(0.5, 3), DomainError);
  }

  TEST_CASE("beta0 monotonicity on a grid") {
    for (double lam = 1.1; lam < 3; lam += 0.1) {
      double prev = INFINITY;
      for (double M = lam + 0.1; M < 8; M += 0.1) {
        const double b = ce_threshold_beta0(lam, M);
        CHECK(b < prev);
        prev = b;
      }
    }
    for (double M = 3; M < 8; M += 0.5) {
      double prev = 0;
      for (double lam = 1.05; lam < M; lam += 0.05) {
        const double b = ce_threshold_beta0(lam, M);
        CHECK(b > prev);
        prev = b;
      }
    }
  }

  TEST_CASE("transported recurrence bounds") {
    CHECK(transport_recurrence_bound({1, 1, 1, 0.5}, 4, Model::SER) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(transport_recurrence_bound({std::exp(1.0), 0.5, 1, 0.5}, 1, Model::SER) ==
          doctest::Approx(std::exp(-4.0)).epsilon(1e-12));
    CHECK(transport_recurrence_bound({1, 0.5, 1, 1}, 10, Model::PR) == doctest::Approx(1e-2).epsilon(1e-12));
    CHECK_THROWS_AS(transport_recurrence_bound({1, 1.5, 1, 0.5}, 4, Model::SER), DomainError);
    CHECK_THROWS_AS(transport_recurrence_bound({1, 0, 1, 0.5}, 4, Model::SER), DomainError);
  }

  TEST_CASE("identity transport leaves every bound unchanged") {
    for (auto model : {Model::SER, Model::ER, Model::PR}) {
      for (double C : {0.1, 0.5, 1.0, 3.0}) {
        for (double beta : {0.1, 0.5, 0.9, 1.5}) {
          for (long n : {1L, 7L, 50L, 200L}) {
            CHECK(transport_recurrence_bound({1, 1, C, beta}, n, model) ==
                  doctest::Approx(source_bound(model, C, beta, n)).epsilon(1e-12));
          }
        }
      }
    }
  }

  TEST_CASE("slow recurrence transport parameters") {
    const auto id = transport_slow_recurrence_params(0.3, 1, 1, 0.1);
    CHECK(id.eps_prime == 0.3);
    CHECK(id.delta0 == 0.1);
    const auto t = transport_slow_recurrence_params(0.2, std::exp(1.0), 0.5, std::exp(-2.0));
    CHECK(t.eps_prime == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(t.delta0 == doctest::Approx(std::exp(-6.0)).epsilon(1e-12));
    CHECK_THROWS(transport_slow_recurrence_params(0.2, 1, 1, 0.5));
  }

  TEST_CASE("transported SER exponent") {
    const auto id = transported_ser_exponent({1, 1, 1, 0.5});
    CHECK_FALSE(id.rewritten);
    const auto t = transported_ser_exponent({2, 0.5, 1, 0.3});
    CHECK(t.rewritten);
    CHECK(t.beta_prime == doctest::Approx(0.45));
    // C' exp(-n^beta') must lie below the transported bound for every n
    for (long n = 1; n <= 500; ++n) {
      CHECK(t.log_C_prime - std::pow(n, t.beta_prime) <=
            transport_recurrence_log_bound({2, 0.5, 1, 0.3}, n, Model::SER) + 1e-9);
    }
  }

  TEST_CASE("subexponential sweep on the Ulam series") {
    const auto sw = subexponential_sweep(recurrence_series(ulam(), 0, 100));
    REQUIRE(sw.passed.size() == 3);
    for (bool p : sw.passed) CHECK(p);
  }
}
