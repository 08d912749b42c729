#pragma once

// Independent reference computations for quadratic maps f(x) = a x (1 - x)
// on [0, 1]. They use closed-form branch inverses instead of the library's
// root solvers.

#include <algorithm>
#include <cmath>
#include <vector>

#include "celab/real.hpp"

namespace oracle {

using celab::Bits;
using celab::Rational;
using celab::Real;

struct Piece {
  Real lo, hi;
};

class Quadratic {
 public:
  Quadratic(const Rational& a, Bits bits) : bits_(bits), a_(a, bits), cv_(a_ / Real(4, bits)) {}

  Real f(const Real& x) const { return a_ * x * (Real(1, bits_) - x); }
  Real df(const Real& x) const { return a_ * (Real(1, bits_) - Real(2, bits_) * x); }
  Real critical_value() const { return cv_; }
  Bits bits() const { return bits_; }

  // x on the left (right) branch with f(x) = y, y <= a/4
  Real left(const Real& y) const { return (Real(1, bits_) - root(y)) / Real(2, bits_); }
  Real right(const Real& y) const { return (Real(1, bits_) + root(y)) / Real(2, bits_); }

  /// Components of f^-1([lo, hi]).
  std::vector<Piece> preimage(const Piece& w) const {
    if (w.lo > cv_) return {};
    if (w.hi >= cv_) return {{left(w.lo), right(w.lo)}};
    return {{left(w.lo), left(w.hi)}, {right(w.hi), right(w.lo)}};
  }

  /// Component of f^-1(w) containing p.
  Piece pull(const Piece& w, const Real& p) const {
    if (w.hi >= cv_) return {left(w.lo), right(w.lo)};
    if (p <= Real(1, bits_) / Real(2, bits_)) return {left(w.lo), left(w.hi)};
    return {right(w.hi), right(w.lo)};
  }

  Piece ball(const Real& p, double r) const {
    const Real R(r, bits_);
    return {celab::max(Real(0, bits_), p - R), celab::min(Real(1, bits_), p + R)};
  }

 private:
  Real root(const Real& y) const {
    Real t = Real(1, bits_) - Real(4, bits_) * y / a_;
    if (t.sign() < 0) t = Real(0, bits_);
    return celab::sqrt(t);
  }

  Bits bits_;
  Real a_, cv_;
};

/// levels[k] = components of f^-k(J), sorted.
inline std::vector<std::vector<Piece>> full_tree(const Quadratic& q, const Piece& J, int depth) {
  std::vector<std::vector<Piece>> levels{{J}};
  for (int k = 1; k <= depth; ++k) {
    std::vector<Piece> next;
    for (const auto& w : levels.back())
      for (auto& p : q.preimage(w)) next.push_back(std::move(p));
    std::sort(next.begin(), next.end(), [](const Piece& a, const Piece& b) { return a.lo < b.lo; });
    levels.push_back(std::move(next));
  }
  return levels;
}

/// f^depth(x) in J, evaluated in double.
inline bool in_preimage(double a, double x, double lo, double hi, int depth) {
  for (int k = 0; k < depth; ++k) x = a * x * (1 - x);
  return lo <= x && x <= hi;
}

/// Replays the quasi-chain rules along pts (pts[k] = g^k(v), k = 0..h) and
/// returns the reset times in decreasing order.
inline std::vector<long> replay_resets(const Quadratic& q, const std::vector<Real>& pts, long h, double eta,
                                       std::vector<Piece>* chain = nullptr) {
  const Real half = Real(1, q.bits()) / Real(2, q.bits());
  std::vector<long> resets;
  std::vector<Piece> W(static_cast<size_t>(h) + 1);
  W[static_cast<size_t>(h)] = q.ball(Real(pts[static_cast<size_t>(h)], q.bits()), eta);
  for (long k = h - 1; k >= 0; --k) {
    const Real p(pts[static_cast<size_t>(k)], q.bits());
    Piece w = q.pull(W[static_cast<size_t>(k) + 1], p);
    if (w.lo <= half && half <= w.hi && k >= 1) {
      resets.push_back(k);
      w = q.ball(p, eta);
    }
    W[static_cast<size_t>(k)] = w;
  }
  if (chain) *chain = std::move(W);
  return resets;
}

}  // namespace oracle
