#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "celab/error.hpp"

namespace celab {

struct Line {
  double slope = 0;
  double intercept = 0;
  double rms = 0;  // root mean square residual
};

/// Ordinary least squares y = slope * x + intercept (centered sums).
inline Line fit_line(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size();
  if (n < 2 || y.size() != n) throw InsufficientDataError("line fit needs at least two points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw InsufficientDataError("line fit: all abscissae are equal");
  Line l;
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  double ss = 0;
  for (size_t i = 0; i < n; ++i) {
    const double r = y[i] - (l.slope * x[i] + l.intercept);
    ss += r * r;
  }
  l.rms = n > 0 ? std::sqrt(ss / static_cast<double>(n)) : 0;
  return l;
}

}  // namespace celab
