#include "celab/roots.hpp"

#include "celab/error.hpp"

namespace celab {

namespace {

Real tolerance(const Real& x, Bits bits) {
  const Real floor = ldexp(Real(1L, bits), -2 * static_cast<long>(bits));
  return max(ldexp(abs(x), -(static_cast<long>(bits) - 6)), floor);
}

}  // namespace

Root solve_bracketed(const ValueAndSlope& g, Real lo, Real hi, Bits bits, const Real* guess) {
  lo = Real(lo, bits);
  hi = Real(hi, bits);
  if (hi < lo) std::swap(lo, hi);
  Real v(bits), d(bits);
  g(lo, v, d);
  const int slo = v.sign();
  if (slo == 0) return Root{lo, lo, lo, 0};
  g(hi, v, d);
  const int shi = v.sign();
  if (shi == 0) return Root{hi, hi, hi, 0};
  if (slo == shi) throw DomainError("no sign change on [" + lo.str(12) + ", " + hi.str(12) + "]");

  Real x = guess && lo < *guess && *guess < hi ? Real(*guess, bits) : midpoint(lo, hi);
  Real glo(bits), ghi(bits);
  g(lo, glo, d);
  g(hi, ghi, d);
  Real step = hi - lo, prev_step = step;
  int it = 0, slow = 0;  // slow: consecutive non-Newton steps
  const int max_iter = 4 * static_cast<int>(bits) + 200;
  for (; it < max_iter; ++it) {
    g(x, v, d);
    if (v.is_zero()) return Root{x, x, x, it};
    if (v.sign() == slo) {
      lo = x;
      glo = v;
    } else {
      hi = x;
      ghi = v;
    }
    Real nx(bits);
    bool newton = !d.is_zero();
    if (newton) {
      Real dx = v / d;
      if (abs(dx) <= tolerance(x, bits)) {
        x -= dx;
        break;
      }
      nx = x - dx;
      newton = lo < nx && nx < hi && abs(dx) * 2L <= abs(prev_step);
      if (newton) {
        prev_step = step;
        step = std::move(dx);
        slow = 0;
      }
    }
    if (!newton) {
      // False position, with bisection after repeated slow steps.
      bool accepted = false;
      if (slow < 3) {
        nx = lo - glo * (hi - lo) / (ghi - glo);
        accepted = lo < nx && nx < hi;
      }
      if (!accepted) {
        nx = midpoint(lo, hi);
        slow = 0;
      } else {
        ++slow;
      }
      prev_step = step;
      step = hi - lo;
    }
    const Real tol = tolerance(nx, bits);
    x = std::move(nx);
    if ((newton && abs(step) <= tol) || hi - lo <= tol) break;
  }

  // Tighten to a small verified bracket around x when possible; near a
  // double root x is only accurate to about half the precision.
  for (Real e = tolerance(x, bits) * 4L; e * 2L < hi - lo; e = ldexp(e, 8)) {
    Real a = x - e, b = x + e;
    g(a, v, d);
    const int sa = v.sign();
    g(b, v, d);
    const int sb = v.sign();
    if (sa == slo && sb == shi) {
      lo = std::move(a);
      hi = std::move(b);
      break;
    }
  }
  if (x < lo) x = lo;
  if (hi < x) x = hi;
  return Root{x, lo, hi, it};
}

}  // namespace celab
