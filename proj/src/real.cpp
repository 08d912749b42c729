#include "celab/real.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "celab/error.hpp"

namespace celab {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

mpz_class pow10(unsigned long e) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), 10, e);
  return r;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  const std::string_view s = trim(text);
  auto fail = [&]() -> Rational { throw ConfigError("not an exact decimal or rational: '" + std::string(text) + "'"); };
  if (s.empty()) return fail();

  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    std::string_view num = s.substr(0, slash), den = s.substr(slash + 1);
    bool neg = false;
    if (!num.empty() && (num[0] == '-' || num[0] == '+')) {
      neg = num[0] == '-';
      num.remove_prefix(1);
    }
    if (!all_digits(num) || !all_digits(den)) return fail();
    mpz_class p(std::string(num), 10), q(std::string(den), 10);
    if (q == 0) return fail();
    Rational r(neg ? mpz_class(-p) : p, q);
    r.canonicalize();
    return r;
  }

  std::string_view rest = s;
  bool neg = false;
  if (rest[0] == '-' || rest[0] == '+') {
    neg = rest[0] == '-';
    rest.remove_prefix(1);
  }
  long exp10 = 0;
  if (auto e = rest.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view ex = rest.substr(e + 1);
    bool eneg = false;
    if (!ex.empty() && (ex[0] == '-' || ex[0] == '+')) {
      eneg = ex[0] == '-';
      ex.remove_prefix(1);
    }
    if (!all_digits(ex) || ex.size() > 6) return fail();
    exp10 = std::stol(std::string(ex));
    if (eneg) exp10 = -exp10;
    rest = rest.substr(0, e);
  }
  std::string digits;
  if (auto dot = rest.find('.'); dot != std::string_view::npos) {
    std::string_view ip = rest.substr(0, dot), fp = rest.substr(dot + 1);
    if ((ip.empty() && fp.empty()) || (!ip.empty() && !all_digits(ip)) || (!fp.empty() && !all_digits(fp))) return fail();
    digits = std::string(ip) + std::string(fp);
    exp10 -= static_cast<long>(fp.size());
  } else {
    if (!all_digits(rest)) return fail();
    digits = std::string(rest);
  }
  mpz_class mant(digits, 10);
  if (neg) mant = -mant;
  Rational r;
  if (exp10 >= 0) {
    r = Rational(mant * pow10(static_cast<unsigned long>(exp10)));
  } else {
    r = Rational(mant, pow10(static_cast<unsigned long>(-exp10)));
  }
  r.canonicalize();
  return r;
}

std::string format_rational(const Rational& q) {
  Rational c(q);
  c.canonicalize();
  if (c.get_den() == 1) return c.get_num().get_str();
  return c.get_num().get_str() + "/" + c.get_den().get_str();
}

// ---------------------------------------------------------------------------
// Real

Real::Real(Bits bits) {
  mpfr_init2(v_, bits);
  mpfr_set_zero(v_, 1);
}

Real::Real(double v, Bits bits) {
  mpfr_init2(v_, bits);
  mpfr_set_d(v_, v, MPFR_RNDN);
}

Real::Real(long v, Bits bits) {
  mpfr_init2(v_, bits);
  mpfr_set_si(v_, v, MPFR_RNDN);
}

Real::Real(const Rational& q, Bits bits, mpfr_rnd_t rnd) {
  mpfr_init2(v_, bits);
  mpfr_set_q(v_, q.get_mpq_t(), rnd);
}

Real::Real(const Real& other, Bits bits, mpfr_rnd_t rnd) {
  mpfr_init2(v_, bits);
  mpfr_set(v_, other.v_, rnd);
}

Real::Real(const Real& other) {
  mpfr_init2(v_, other.bits());
  mpfr_set(v_, other.v_, MPFR_RNDN);
}

Real::Real(Real&& other) noexcept {
  mpfr_init2(v_, MPFR_PREC_MIN);
  mpfr_swap(v_, other.v_);
}

Real& Real::operator=(const Real& other) {
  if (this != &other) {
    mpfr_set_prec(v_, other.bits());
    mpfr_set(v_, other.v_, MPFR_RNDN);
  }
  return *this;
}

Real& Real::operator=(Real&& other) noexcept {
  if (this != &other) mpfr_swap(v_, other.v_);
  return *this;
}

Real::~Real() { mpfr_clear(v_); }

Real Real::parse(std::string_view text, Bits bits) { return Real(parse_rational(text), bits); }

Rational Real::to_rational() const {
  if (!is_finite()) throw DomainError("non-finite value has no rational form");
  mpz_class m;
  const mpfr_exp_t e = mpfr_get_z_2exp(m.get_mpz_t(), v_);
  Rational r(m);
  if (e > 0) {
    mpz_class s;
    mpz_mul_2exp(s.get_mpz_t(), m.get_mpz_t(), static_cast<mp_bitcnt_t>(e));
    r = Rational(s);
  } else if (e < 0) {
    mpz_class d(1);
    mpz_mul_2exp(d.get_mpz_t(), d.get_mpz_t(), static_cast<mp_bitcnt_t>(-e));
    r = Rational(m, d);
  }
  r.canonicalize();
  return r;
}

std::string Real::str(int digits) const {
  if (mpfr_nan_p(v_)) return "nan";
  if (mpfr_inf_p(v_)) return sign() > 0 ? "inf" : "-inf";
  if (is_zero()) return "0";
  if (digits <= 0) digits = static_cast<int>(std::ceil(static_cast<double>(bits()) * 0.30102999566398120)) + 1;
  mpfr_exp_t e = 0;
  char* raw_digits = mpfr_get_str(nullptr, &e, 10, static_cast<size_t>(digits), v_, MPFR_RNDN);
  std::string d(raw_digits);
  mpfr_free_str(raw_digits);
  std::string out;
  if (d[0] == '-') {
    out = "-";
    d.erase(0, 1);
  }
  out += d.substr(0, 1);
  if (d.size() > 1) out += "." + d.substr(1);
  out += "e" + std::to_string(static_cast<long>(e) - 1);
  return out;
}

double Real::log_abs() const {
  if (is_zero()) return -HUGE_VAL;
  long e = 0;
  const double m = mpfr_get_d_2exp(&e, v_, MPFR_RNDN);
  return std::log(std::fabs(m)) + static_cast<double>(e) * 0.69314718055994530942;
}

Real& Real::operator+=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_add(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}
Real& Real::operator-=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_sub(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}
Real& Real::operator*=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_mul(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}
Real& Real::operator/=(const Real& o) {
  if (o.bits() > bits()) mpfr_prec_round(v_, o.bits(), MPFR_RNDN);
  mpfr_div(v_, v_, o.v_, MPFR_RNDN);
  return *this;
}

Real operator+(const Real& a, const Real& b) {
  Real r(std::max(a.bits(), b.bits()));
  mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}
Real operator-(const Real& a, const Real& b) {
  Real r(std::max(a.bits(), b.bits()));
  mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}
Real operator*(const Real& a, const Real& b) {
  Real r(std::max(a.bits(), b.bits()));
  mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}
Real operator/(const Real& a, const Real& b) {
  Real r(std::max(a.bits(), b.bits()));
  mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN);
  return r;
}
Real operator-(const Real& a) {
  Real r(a.bits());
  mpfr_neg(r.v_, a.v_, MPFR_RNDN);
  return r;
}
Real operator*(const Real& a, long k) {
  Real r(a.bits());
  mpfr_mul_si(r.v_, a.v_, k, MPFR_RNDN);
  return r;
}

std::partial_ordering operator<=>(const Real& a, const Real& b) {
  if (mpfr_unordered_p(a.v_, b.v_)) return std::partial_ordering::unordered;
  const int c = mpfr_cmp(a.v_, b.v_);
  return c < 0 ? std::partial_ordering::less : c > 0 ? std::partial_ordering::greater : std::partial_ordering::equivalent;
}

std::partial_ordering operator<=>(const Real& a, double b) {
  if (mpfr_nan_p(a.v_) || std::isnan(b)) return std::partial_ordering::unordered;
  const int c = mpfr_cmp_d(a.v_, b);
  return c < 0 ? std::partial_ordering::less : c > 0 ? std::partial_ordering::greater : std::partial_ordering::equivalent;
}

Real abs(const Real& x) {
  Real r(x.bits());
  mpfr_abs(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}
Real sqrt(const Real& x) {
  Real r(x.bits());
  mpfr_sqrt(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}
Real log(const Real& x) {
  Real r(x.bits());
  mpfr_log(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}
Real exp(const Real& x) {
  Real r(x.bits());
  mpfr_exp(r.raw(), x.raw(), MPFR_RNDN);
  return r;
}
Real pow(const Real& x, const Real& y) {
  Real r(std::max(x.bits(), y.bits()));
  mpfr_pow(r.raw(), x.raw(), y.raw(), MPFR_RNDN);
  return r;
}
Real min(const Real& a, const Real& b) { return b < a ? b : a; }
Real max(const Real& a, const Real& b) { return a < b ? b : a; }
Real ldexp(const Real& x, long e) {
  Real r(x.bits());
  mpfr_mul_2si(r.raw(), x.raw(), e, MPFR_RNDN);
  return r;
}
Real pi(Bits bits, mpfr_rnd_t rnd) {
  Real r(bits);
  mpfr_const_pi(r.raw(), rnd);
  return r;
}
Real midpoint(const Real& a, const Real& b) {
  // One extra bit keeps the midpoint of two representable numbers exact.
  Real r(std::max(a.bits(), b.bits()) + 1);
  mpfr_add(r.raw(), a.raw(), b.raw(), MPFR_RNDN);
  mpfr_div_2ui(r.raw(), r.raw(), 1, MPFR_RNDN);
  mpfr_prec_round(r.raw(), std::max(a.bits(), b.bits()), MPFR_RNDN);
  return r;
}

// ---------------------------------------------------------------------------
// Interval

namespace {

enum class Dir { down, up };

Real rounded_op(int (*op)(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t), const Real& a, const Real& b, Dir d) {
  Real r(std::max(a.bits(), b.bits()));
  op(r.raw(), a.raw(), b.raw(), d == Dir::down ? MPFR_RNDD : MPFR_RNDU);
  return r;
}

}  // namespace

Interval::Interval(Real lo, Real hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (hi_ < lo_) throw DomainError("interval with lo > hi");
}

Interval Interval::enclose(const Rational& q, Bits bits) {
  return Interval(Real(q, bits, MPFR_RNDD), Real(q, bits, MPFR_RNDU));
}

Real Interval::width() const { return rounded_op(mpfr_sub, hi_, lo_, Dir::up); }

Interval operator+(const Interval& a, const Interval& b) {
  return Interval(rounded_op(mpfr_add, a.lo_, b.lo_, Dir::down), rounded_op(mpfr_add, a.hi_, b.hi_, Dir::up));
}

Interval operator-(const Interval& a, const Interval& b) {
  return Interval(rounded_op(mpfr_sub, a.lo_, b.hi_, Dir::down), rounded_op(mpfr_sub, a.hi_, b.lo_, Dir::up));
}

Interval operator-(const Interval& a) { return Interval(-a.hi_, -a.lo_); }

Interval operator*(const Interval& a, const Interval& b) {
  // Sign-case split keeps the common nonnegative case at two products.
  const int al = a.lo_.sign(), ah = a.hi_.sign(), bl = b.lo_.sign(), bh = b.hi_.sign();
  if (al >= 0 && bl >= 0) {
    return Interval(rounded_op(mpfr_mul, a.lo_, b.lo_, Dir::down), rounded_op(mpfr_mul, a.hi_, b.hi_, Dir::up));
  }
  if (ah <= 0 && bh <= 0) {
    return Interval(rounded_op(mpfr_mul, a.hi_, b.hi_, Dir::down), rounded_op(mpfr_mul, a.lo_, b.lo_, Dir::up));
  }
  const Real* pairs[4][2] = {{&a.lo_, &b.lo_}, {&a.lo_, &b.hi_}, {&a.hi_, &b.lo_}, {&a.hi_, &b.hi_}};
  Real lo = rounded_op(mpfr_mul, *pairs[0][0], *pairs[0][1], Dir::down);
  Real hi = rounded_op(mpfr_mul, *pairs[0][0], *pairs[0][1], Dir::up);
  for (int i = 1; i < 4; ++i) {
    Real l = rounded_op(mpfr_mul, *pairs[i][0], *pairs[i][1], Dir::down);
    Real h = rounded_op(mpfr_mul, *pairs[i][0], *pairs[i][1], Dir::up);
    if (l < lo) lo = std::move(l);
    if (hi < h) hi = std::move(h);
  }
  return Interval(std::move(lo), std::move(hi));
}

Interval hull(const Interval& a, const Interval& b) { return Interval(min(a.lo(), b.lo()), max(a.hi(), b.hi())); }

Interval intersect(const Interval& a, const Interval& b) {
  if (!a.intersects(b)) throw DomainError("empty interval intersection");
  return Interval(max(a.lo(), b.lo()), min(a.hi(), b.hi()));
}

Interval abs(const Interval& x) {
  if (x.lo().sign() >= 0) return x;
  if (x.hi().sign() <= 0) return -x;
  return Interval(Real(0L, x.bits()), max(-x.lo(), x.hi()));
}

Interval sqrt(const Interval& x) {
  if (x.hi().sign() < 0) throw DomainError("sqrt of a negative interval");
  Real lo(x.bits()), hi(x.bits());
  if (x.lo().sign() > 0) mpfr_sqrt(lo.raw(), x.lo().raw(), MPFR_RNDD);
  mpfr_sqrt(hi.raw(), x.hi().raw(), MPFR_RNDU);
  return Interval(std::move(lo), std::move(hi));
}

Interval reciprocal(const Interval& x) {
  if (x.contains_zero()) throw DomainError("reciprocal of an interval containing zero");
  Real one(1L, x.bits());
  return Interval(rounded_op(mpfr_div, one, x.hi(), Dir::down), rounded_op(mpfr_div, one, x.lo(), Dir::up));
}

namespace {

// Enclosure of t -> cos(t - phase) where phase is 0 (cos) or pi/2 (sin).
// Extrema sit at phase + k*pi with value (-1)^k.
Interval trig_enclosure(const Interval& x, bool sine) {
  const Bits bits = x.bits();
  auto eval = [&](const Real& t, mpfr_rnd_t rnd) {
    Real r(bits);
    if (sine) {
      mpfr_sin(r.raw(), t.raw(), rnd);
    } else {
      mpfr_cos(r.raw(), t.raw(), rnd);
    }
    return r;
  };
  if (x.width() > 6.0) return Interval(Real(-1L, bits), Real(1L, bits));
  Real lo = min(eval(x.lo(), MPFR_RNDD), eval(x.hi(), MPFR_RNDD));
  Real hi = max(eval(x.lo(), MPFR_RNDU), eval(x.hi(), MPFR_RNDU));

  const Real pi_lo = pi(bits + 8, MPFR_RNDD), pi_hi = pi(bits + 8, MPFR_RNDU);
  const double shift = sine ? 0.5 : 0.0;
  const long k0 = static_cast<long>(std::floor(x.lo().to_double() / M_PI - shift)) - 1;
  const long k1 = static_cast<long>(std::ceil(x.hi().to_double() / M_PI - shift)) + 1;
  for (long k = k0; k <= k1; ++k) {
    // Enclose (k + shift) * pi using 2(k+shift) as an exact integer multiplier.
    const long twice = 2 * k + (sine ? 1 : 0);
    Real a(bits + 8), b(bits + 8);
    mpfr_mul_si(a.raw(), twice >= 0 ? pi_lo.raw() : pi_hi.raw(), twice, MPFR_RNDD);
    mpfr_mul_si(b.raw(), twice >= 0 ? pi_hi.raw() : pi_lo.raw(), twice, MPFR_RNDU);
    mpfr_div_2ui(a.raw(), a.raw(), 1, MPFR_RNDD);
    mpfr_div_2ui(b.raw(), b.raw(), 1, MPFR_RNDU);
    if (Interval(std::move(a), std::move(b)).intersects(x)) {
      if (k % 2 == 0) {
        hi = Real(1L, bits);
      } else {
        lo = Real(-1L, bits);
      }
    }
  }
  return Interval(std::move(lo), std::move(hi));
}

}  // namespace

Interval cos(const Interval& x) { return trig_enclosure(x, false); }
Interval sin(const Interval& x) { return trig_enclosure(x, true); }

}  // namespace celab
