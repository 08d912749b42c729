#pragma once

// Extended-precision reals (MPFR), exact rationals (GMP) and outward-rounded
// intervals. Every Real carries its own precision; there is no global
// precision context.

#include <gmpxx.h>
#include <mpfr.h>

#include <compare>
#include <string>
#include <string_view>

namespace celab {

using Rational = mpq_class;
using Bits = mpfr_prec_t;

/// Parses "3.9", "-7/3", "1e-3", "2.5E+2" into an exact rational.
Rational parse_rational(std::string_view text);
/// Canonical text: "p/q" in lowest terms, or "p" when q == 1. parse_rational
/// inverts it exactly.
std::string format_rational(const Rational& q);

class Real {
 public:
  explicit Real(Bits bits = 53);
  Real(double v, Bits bits);
  Real(long v, Bits bits);
  Real(int v, Bits bits) : Real(static_cast<long>(v), bits) {}
  Real(const Rational& q, Bits bits, mpfr_rnd_t rnd = MPFR_RNDN);
  Real(const Real& other, Bits bits, mpfr_rnd_t rnd = MPFR_RNDN);

  Real(const Real& other);
  Real(Real&& other) noexcept;
  Real& operator=(const Real& other);
  Real& operator=(Real&& other) noexcept;
  ~Real();

  /// Decimal or p/q text, rounded to nearest.
  static Real parse(std::string_view text, Bits bits);

  Bits bits() const { return mpfr_get_prec(v_); }
  mpfr_ptr raw() { return v_; }
  mpfr_srcptr raw() const { return v_; }

  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  /// Exact value as a rational (finite values only).
  Rational to_rational() const;
  /// Scientific notation with `digits` significant digits; 0 selects enough
  /// digits to round-trip at this precision.
  std::string str(int digits = 0) const;

  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  bool is_finite() const { return mpfr_number_p(v_) != 0; }
  int sign() const { return mpfr_sgn(v_); }
  /// floor(log2|x|) + 1 for nonzero x (MPFR exponent).
  long exponent() const { return mpfr_get_exp(v_); }
  /// Natural log of |x| as a double; -inf for zero. Safe for values far
  /// outside double range.
  double log_abs() const;

  Real& operator+=(const Real& o);
  Real& operator-=(const Real& o);
  Real& operator*=(const Real& o);
  Real& operator/=(const Real& o);

  friend Real operator+(const Real& a, const Real& b);
  friend Real operator-(const Real& a, const Real& b);
  friend Real operator*(const Real& a, const Real& b);
  friend Real operator/(const Real& a, const Real& b);
  friend Real operator-(const Real& a);
  friend Real operator*(const Real& a, long k);
  friend Real operator*(long k, const Real& a) { return a * k; }

  friend bool operator==(const Real& a, const Real& b) { return mpfr_equal_p(a.v_, b.v_) != 0; }
  friend std::partial_ordering operator<=>(const Real& a, const Real& b);
  friend bool operator==(const Real& a, double b) { return mpfr_cmp_d(a.v_, b) == 0; }
  friend std::partial_ordering operator<=>(const Real& a, double b);

 private:
  mpfr_t v_;
};

Real abs(const Real& x);
Real sqrt(const Real& x);
Real log(const Real& x);
Real exp(const Real& x);
Real pow(const Real& x, const Real& y);
Real min(const Real& a, const Real& b);
Real max(const Real& a, const Real& b);
/// x * 2^e, exact.
Real ldexp(const Real& x, long e);
/// pi at the given precision (rounded as requested).
Real pi(Bits bits, mpfr_rnd_t rnd = MPFR_RNDN);
/// Midpoint (a+b)/2 at the larger of the two precisions.
Real midpoint(const Real& a, const Real& b);

/// Closed interval [lo, hi] with outward rounding on every operation.
class Interval {
 public:
  explicit Interval(Bits bits = 53) : lo_(bits), hi_(bits) {}
  explicit Interval(const Real& point) : lo_(point), hi_(point) {}
  Interval(Real lo, Real hi);
  /// Tightest outward enclosure of a rational at the given precision.
  static Interval enclose(const Rational& q, Bits bits);

  const Real& lo() const { return lo_; }
  const Real& hi() const { return hi_; }
  Bits bits() const { return std::max(lo_.bits(), hi_.bits()); }
  Real mid() const { return midpoint(lo_, hi_); }
  /// Upper bound on hi - lo.
  Real width() const;
  bool is_point() const { return lo_ == hi_; }
  bool contains(const Real& x) const { return lo_ <= x && x <= hi_; }
  bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool intersects(const Interval& o) const { return !(o.hi_ < lo_ || hi_ < o.lo_); }
  bool contains_zero() const { return lo_.sign() <= 0 && hi_.sign() >= 0; }

  friend Interval operator+(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a, const Interval& b);
  friend Interval operator*(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a);

 private:
  Real lo_, hi_;
};

Interval hull(const Interval& a, const Interval& b);
/// Intersection; the caller must ensure a and b intersect.
Interval intersect(const Interval& a, const Interval& b);
Interval abs(const Interval& x);
Interval sqrt(const Interval& x);
/// 1/x for intervals not containing zero.
Interval reciprocal(const Interval& x);
/// cos and sin over an interval argument, including interior extrema.
Interval cos(const Interval& x);
Interval sin(const Interval& x);

}  // namespace celab
