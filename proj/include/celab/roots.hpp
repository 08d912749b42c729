#pragma once

#include <functional>

#include "celab/real.hpp"

namespace celab {

struct Root {
  Real x;
  Real lo, hi;  // sign change of g verified at both ends (lo == hi when g(x) == 0)
  int iterations = 0;
};

/// g(x) and g'(x) at a point.
using ValueAndSlope = std::function<void(const Real& x, Real& value, Real& slope)>;

/// Safeguarded Newton on a bracket [lo, hi] where g changes sign, starting
/// from `guess` when it lies inside. Newton steps that leave the bracket or
/// stall fall back to bisection. Stops at relative width 2^-(bits-6). Throws
/// DomainError without a sign change.
Root solve_bracketed(const ValueAndSlope& g, Real lo, Real hi, Bits bits, const Real* guess = nullptr);

}  // namespace celab
