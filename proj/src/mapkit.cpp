#include "celab/mapkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "celab/error.hpp"

namespace celab::mapkit {

using nlohmann::ordered_json;

std::string to_string(Family f) {
  switch (f) {
    case Family::polynomial: return "polynomial";
    case Family::trig_polynomial: return "trig_polynomial";
    case Family::radical: return "radical";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Symbolic forms

namespace {

void trim(std::vector<Rational>& c) {
  while (!c.empty() && c.back() == 0) c.pop_back();
}

void add_into(Polynomial& dst, const Polynomial& src, const Rational& scale) {
  if (dst.coeffs.size() < src.coeffs.size()) dst.coeffs.resize(src.coeffs.size(), Rational(0));
  for (size_t i = 0; i < src.coeffs.size(); ++i) dst.coeffs[i] += scale * src.coeffs[i];
}

std::optional<Rational> exact_sqrt(const Rational& q) {
  if (q < 0) return std::nullopt;
  Rational c(q);
  c.canonicalize();
  if (!mpz_perfect_square_p(c.get_num().get_mpz_t()) || !mpz_perfect_square_p(c.get_den().get_mpz_t())) {
    return std::nullopt;
  }
  mpz_class n, d;
  mpz_sqrt(n.get_mpz_t(), c.get_num().get_mpz_t());
  mpz_sqrt(d.get_mpz_t(), c.get_den().get_mpz_t());
  return Rational(n, d);
}

Rational rational_pow(const Rational& base, int e) {
  Rational r(1);
  const int n = e < 0 ? -e : e;
  for (int i = 0; i < n; ++i) r *= base;
  if (e < 0) r = 1 / r;
  return r;
}

// Exact value of an algebraic form, when it is rational.
std::optional<Rational> eval_exact(const Form& f, const Rational& x) {
  const auto* alg = std::get_if<AlgebraicForm>(&f);
  if (alg == nullptr) return std::nullopt;
  std::optional<Rational> s;
  Rational total(0);
  for (const auto& [power, poly] : alg->terms) {
    Rational term = poly.eval(x);
    if (power != 0) {
      if (!s) {
        s = exact_sqrt(alg->alpha + alg->beta * x);
        if (!s || *s == 0) return std::nullopt;
      }
      term *= rational_pow(*s, power);
    }
    total += term;
  }
  return total;
}

}  // namespace

Polynomial Polynomial::derivative() const {
  Polynomial d;
  for (size_t i = 1; i < coeffs.size(); ++i) d.coeffs.push_back(coeffs[i] * static_cast<long>(i));
  trim(d.coeffs);
  return d;
}

bool Polynomial::is_zero() const {
  return std::all_of(coeffs.begin(), coeffs.end(), [](const Rational& c) { return c == 0; });
}

Rational Polynomial::eval(const Rational& x) const {
  Rational acc(0);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

AlgebraicForm AlgebraicForm::derivative() const {
  AlgebraicForm d;
  d.alpha = alpha;
  d.beta = beta;
  for (const auto& [j, q] : terms) {
    add_into(d.terms[j], q.derivative(), Rational(1));
    if (j != 0 && beta != 0) add_into(d.terms[j - 2], q, Rational(j) * beta / 2);
  }
  for (auto it = d.terms.begin(); it != d.terms.end();) {
    trim(it->second.coeffs);
    it = it->second.is_zero() ? d.terms.erase(it) : std::next(it);
  }
  return d;
}

TrigForm TrigForm::derivative() const {
  TrigForm d;
  d.frequency = frequency;
  d.pi_power = pi_power + 1;
  const size_t n = std::max(cos_coeffs.size(), sin_coeffs.size());
  d.cos_coeffs.assign(n, Rational(0));
  d.sin_coeffs.assign(n, Rational(0));
  for (size_t k = 0; k < n; ++k) {
    const Rational a = k < cos_coeffs.size() ? cos_coeffs[k] : Rational(0);
    const Rational b = k < sin_coeffs.size() ? sin_coeffs[k] : Rational(0);
    const Rational kq = frequency * static_cast<long>(k);
    d.cos_coeffs[k] = b * kq;
    d.sin_coeffs[k] = -a * kq;
  }
  return d;
}

Form derivative(const Form& f) {
  return std::visit([](const auto& g) -> Form { return g.derivative(); }, f);
}

// ---------------------------------------------------------------------------
// Numeric forms

struct Evaluator::NumericForm {
  struct Term {
    int power = 0;
    std::vector<Real> c;
    std::vector<Interval> ci;
  };
  bool trig = false;
  bool has_sqrt = false;
  Real alpha, beta;
  Interval alpha_i, beta_i;
  std::vector<Term> terms;

  Real omega, scale;
  Interval omega_i, scale_i;
  std::vector<Real> a, b;
  std::vector<Interval> ai, bi;

  NumericForm(const Form& f, Bits bits)
      : alpha(bits), beta(bits), alpha_i(bits), beta_i(bits), omega(bits), scale(bits), omega_i(bits), scale_i(bits) {
    if (const auto* alg = std::get_if<AlgebraicForm>(&f)) {
      alpha = Real(alg->alpha, bits);
      beta = Real(alg->beta, bits);
      alpha_i = Interval::enclose(alg->alpha, bits);
      beta_i = Interval::enclose(alg->beta, bits);
      for (const auto& [power, poly] : alg->terms) {
        Term t;
        t.power = power;
        has_sqrt = has_sqrt || power != 0;
        for (const auto& q : poly.coeffs) {
          t.c.emplace_back(q, bits);
          t.ci.push_back(Interval::enclose(q, bits));
        }
        terms.push_back(std::move(t));
      }
      return;
    }
    const auto& tf = std::get<TrigForm>(f);
    trig = true;
    const Interval pi_i(pi(bits, MPFR_RNDD), pi(bits, MPFR_RNDU));
    omega = Real(tf.frequency, bits) * pi(bits);
    omega_i = Interval::enclose(tf.frequency, bits) * pi_i;
    scale = Real(1L, bits);
    scale_i = Interval(Real(1L, bits));
    for (int i = 0; i < tf.pi_power; ++i) {
      scale = scale * pi(bits);
      scale_i = scale_i * pi_i;
    }
    for (const auto& q : tf.cos_coeffs) {
      a.emplace_back(q, bits);
      ai.push_back(Interval::enclose(q, bits));
    }
    for (const auto& q : tf.sin_coeffs) {
      b.emplace_back(q, bits);
      bi.push_back(Interval::enclose(q, bits));
    }
  }

  static void horner(Real& acc, const std::vector<Real>& c, const Real& x) {
    mpfr_set_zero(acc.raw(), 1);
    for (auto it = c.rbegin(); it != c.rend(); ++it) mpfr_fma(acc.raw(), acc.raw(), x.raw(), it->raw(), MPFR_RNDN);
  }

  Real value(const Real& x, Bits bits) const {
    Real out(0L, bits);
    if (trig) {
      Real theta = omega * x, kt(bits), s(bits), c(bits);
      const size_t n = std::max(a.size(), b.size());
      for (size_t k = 0; k < n; ++k) {
        mpfr_mul_ui(kt.raw(), theta.raw(), k, MPFR_RNDN);
        mpfr_sin_cos(s.raw(), c.raw(), kt.raw(), MPFR_RNDN);
        if (k < a.size() && !a[k].is_zero()) mpfr_fma(out.raw(), a[k].raw(), c.raw(), out.raw(), MPFR_RNDN);
        if (k < b.size() && !b[k].is_zero()) mpfr_fma(out.raw(), b[k].raw(), s.raw(), out.raw(), MPFR_RNDN);
      }
      return out * scale;
    }
    Real s(bits), p(bits), sp(bits);
    if (has_sqrt) {
      Real rad = alpha + beta * x;
      if (rad.sign() <= 0) throw DomainError("radicand is not positive at x = " + x.str(12));
      s = sqrt(rad);
    }
    for (const auto& t : terms) {
      horner(p, t.c, x);
      if (t.power != 0) {
        mpfr_pow_si(sp.raw(), s.raw(), t.power, MPFR_RNDN);
        p *= sp;
      }
      out += p;
    }
    return out;
  }

  Interval enclose(const Interval& x, Bits bits) const {
    Interval out(Real(0L, bits));
    if (trig) {
      const size_t n = std::max(a.size(), b.size());
      for (size_t k = 0; k < n; ++k) {
        const bool use_a = k < a.size() && !a[k].is_zero();
        const bool use_b = k < b.size() && !b[k].is_zero();
        if (!use_a && !use_b) continue;
        const Interval arg = Interval(Real(static_cast<long>(k), bits)) * omega_i * x;
        if (use_a) out = out + ai[k] * cos(arg);
        if (use_b) out = out + bi[k] * sin(arg);
      }
      return out * scale_i;
    }
    std::optional<Interval> s;
    if (has_sqrt) {
      const Interval rad = alpha_i + beta_i * x;
      if (rad.lo().sign() <= 0) throw DomainError("radicand is not positive on interval");
      s = sqrt(rad);
    }
    for (const auto& t : terms) {
      Interval acc(Real(0L, bits));
      for (auto it = t.ci.rbegin(); it != t.ci.rend(); ++it) acc = acc * x + *it;
      if (t.power != 0) {
        Interval sp = *s;
        const int n = std::abs(t.power);
        for (int i = 1; i < n; ++i) sp = sp * *s;
        if (t.power < 0) sp = reciprocal(sp);
        acc = acc * sp;
      }
      out = out + acc;
    }
    return out;
  }
};

Evaluator::Evaluator(const MapSpec& map, Bits bits, int max_order)
    : map_(std::make_shared<const MapSpec>(map)), bits_(bits) {
  if (bits < 2) throw ConfigError("precision must be at least 2 bits");
  for (int k = 0; k <= max_order; ++k) forms_.push_back(std::make_unique<NumericForm>(map.form_any(k), bits));
}

Evaluator::~Evaluator() = default;
Evaluator::Evaluator(Evaluator&&) noexcept = default;
Evaluator& Evaluator::operator=(Evaluator&&) noexcept = default;

int Evaluator::max_order() const { return static_cast<int>(forms_.size()) - 1; }

Real Evaluator::value(const Real& x, int order) const {
  if (order < 0 || order > max_order()) throw ConfigError("unsupported derivative order " + std::to_string(order));
  const Real xx = x.bits() == bits_ ? x : Real(x, bits_);
  return forms_[static_cast<size_t>(order)]->value(xx, bits_);
}

Interval Evaluator::enclose(const Interval& x, int order) const {
  if (order < 0 || order > max_order()) throw ConfigError("unsupported derivative order " + std::to_string(order));
  return forms_[static_cast<size_t>(order)]->enclose(x, bits_);
}

Interval Evaluator::enclose_centered(const Interval& x) const {
  Interval naive = enclose(x, 0);
  if (x.is_point()) return naive;
  const Real m = x.mid();
  const Interval mi(m);
  const Interval centered = enclose(mi, 0) + enclose(x, 1) * (x - mi);
  if (!centered.intersects(naive)) return naive;
  return intersect(centered, naive);
}

Interval Evaluator::domain() const {
  return Interval(Real(map_->domain_lo(), bits_, MPFR_RNDD), Real(map_->domain_hi(), bits_, MPFR_RNDU));
}

bool Evaluator::in_domain(const Real& x) const {
  return mpfr_cmp_q(x.raw(), map_->domain_lo().get_mpq_t()) >= 0 && mpfr_cmp_q(x.raw(), map_->domain_hi().get_mpq_t()) <= 0;
}

// ---------------------------------------------------------------------------
// Critical points

namespace {

// Sign of D f over a point, or 0 when the enclosure straddles zero.
int certified_sign(const Evaluator& ev, const Real& x) {
  const Interval v = ev.enclose(Interval(x), 1);
  if (v.lo().sign() > 0) return 1;
  if (v.hi().sign() < 0) return -1;
  return 0;
}

std::vector<Rational> convergents(const Rational& r, const mpz_class& max_den) {
  std::vector<Rational> out;
  mpz_class num = r.get_num(), den = r.get_den();
  mpz_class h_prev(1), h_prev2(0), k_prev(0), k_prev2(1);
  while (den != 0) {
    mpz_class a;
    mpz_fdiv_q(a.get_mpz_t(), num.get_mpz_t(), den.get_mpz_t());
    const mpz_class h = a * h_prev + h_prev2;
    const mpz_class k = a * k_prev + k_prev2;
    if (k > max_den) break;
    out.emplace_back(h, k);
    out.back().canonicalize();
    h_prev2 = h_prev;
    h_prev = h;
    k_prev2 = k_prev;
    k_prev = k;
    const mpz_class rem = num - a * den;
    num = den;
    den = rem;
  }
  return out;
}

int resolve_order(const MapSpec& map, const CriticalPoint& cp, Bits bits) {
  constexpr int kMaxOrder = 12;
  for (int k = 2; k <= kMaxOrder; ++k) {
    const Form fk = map.form_any(k);
    if (cp.exact) {
      if (auto v = eval_exact(fk, *cp.exact)) {
        if (*v != 0) return k;
        continue;
      }
    }
    const Evaluator evk(map, bits, k);
    const Interval v = evk.enclose(cp.bracket, k);
    if (!v.contains_zero()) return k;
  }
  throw GeometryError("critical point at " + cp.location.str(12) + " looks flat (no nonzero derivative up to order 12)");
}

void fill_nonflat_constants(const MapSpec& map, CriticalPoint& cp, const std::vector<CriticalPoint>& all) {
  const double c = cp.location.to_double();
  const double lo = map.domain_lo().get_d(), hi = map.domain_hi().get_d();
  double radius = hi - lo;
  for (const auto& other : all) {
    const double d = std::fabs(other.location.to_double() - c);
    if (d > 0) radius = std::min(radius, d / 2);
  }
  cp.nonflat_radius = radius;
  const Evaluator ev(map, kAnalysisBits, 1);
  double L = 1.0;
  for (double r : default_radius_grid(radius)) {
    for (double x : {c - r, c + r}) {
      if (x < lo || x > hi) continue;
      const double df = std::fabs(ev.value(Real(x, kAnalysisBits), 1).to_double());
      const double need = std::pow(r, cp.order - 1);
      if (df > 0) L = std::max(L, need / df);
    }
  }
  cp.nonflat_L = L;
}

}  // namespace

CriticalPoint refine_critical_point(const MapSpec& map, const CriticalPoint& cp, Bits bits) {
  CriticalPoint out = cp;
  if (cp.exact) {
    out.bracket = Interval::enclose(*cp.exact, bits);
    out.location = Real(*cp.exact, bits);
    return out;
  }
  const Evaluator ev(map, bits, 2);
  Real lo(cp.bracket.lo(), bits), hi(cp.bracket.hi(), bits);
  int slo = certified_sign(ev, lo);
  const Real target = ldexp(Real(1L, bits), -(static_cast<long>(bits) - 10));
  for (int it = 0; it < 4 * static_cast<int>(bits) + 64; ++it) {
    Real width = hi - lo;
    Real scale = max(Real(1L, bits), max(abs(lo), abs(hi)));
    if (width <= target * scale) break;
    Real mid = midpoint(lo, hi);
    if (mid == lo || mid == hi) break;
    const int sm = certified_sign(ev, mid);
    if (sm == 0) {
      // The sign is not resolvable at this precision; Df vanishes at mid to
      // working accuracy, so collapse onto it.
      lo = mid;
      hi = mid;
      break;
    }
    if (slo == 0) slo = certified_sign(ev, lo);
    if (sm == slo) {
      lo = std::move(mid);
    } else {
      hi = std::move(mid);
    }
  }
  Real loc = midpoint(lo, hi);
  const Real d2 = ev.value(loc, 2);
  if (!d2.is_zero() && lo < hi) {
    Real newton = loc - ev.value(loc, 1) / d2;
    if (lo <= newton && newton <= hi) loc = std::move(newton);
  }
  out.location = std::move(loc);
  out.bracket = Interval(std::move(lo), std::move(hi));
  return out;
}

// ---------------------------------------------------------------------------
// MapSpec

MapSpec::MapSpec(std::string label, Family family, Form f, Rational lo, Rational hi)
    : label_(std::move(label)), family_(family), lo_(std::move(lo)), hi_(std::move(hi)) {
  if (!(lo_ < hi_)) throw ConfigError("map '" + label_ + "': domain must satisfy lo < hi");
  forms_.push_back(std::move(f));
  for (int k = 1; k <= 4; ++k) forms_.push_back(derivative(forms_.back()));
  analyse();
}

MapSpec MapSpec::polynomial(std::string label, std::vector<Rational> coeffs, Rational lo, Rational hi) {
  trim(coeffs);
  AlgebraicForm f;
  f.terms[0].coeffs = std::move(coeffs);
  if (f.terms[0].is_zero()) f.terms.clear();
  return MapSpec(std::move(label), Family::polynomial, std::move(f), std::move(lo), std::move(hi));
}

MapSpec MapSpec::trig_polynomial(std::string label, Rational frequency, std::vector<Rational> cos_coeffs,
                                 std::vector<Rational> sin_coeffs, Rational lo, Rational hi) {
  if (frequency == 0) throw ConfigError("map '" + label + "': trig frequency must be nonzero");
  TrigForm f;
  f.frequency = std::move(frequency);
  f.cos_coeffs = std::move(cos_coeffs);
  f.sin_coeffs = std::move(sin_coeffs);
  return MapSpec(std::move(label), Family::trig_polynomial, std::move(f), std::move(lo), std::move(hi));
}

MapSpec MapSpec::radical(std::string label, Rational alpha, Rational beta, std::map<int, Polynomial> terms,
                         Rational lo, Rational hi) {
  if (alpha + beta * lo <= 0 || alpha + beta * hi <= 0) {
    throw ConfigError("map '" + label + "': radicand must be positive on the domain");
  }
  AlgebraicForm f;
  f.alpha = std::move(alpha);
  f.beta = std::move(beta);
  for (auto& [k, p] : terms) {
    trim(p.coeffs);
    if (!p.is_zero()) f.terms[k] = std::move(p);
  }
  return MapSpec(std::move(label), Family::radical, std::move(f), std::move(lo), std::move(hi));
}

const Form& MapSpec::form(int order) const {
  if (order < 0 || order >= static_cast<int>(forms_.size())) throw ConfigError("form order out of cached range");
  return forms_[static_cast<size_t>(order)];
}

Form MapSpec::form_any(int order) const {
  if (order < static_cast<int>(forms_.size())) return form(order);
  Form f = forms_.back();
  for (int k = static_cast<int>(forms_.size()) - 1; k < order; ++k) f = derivative(f);
  return f;
}

namespace {

std::vector<Branch> build_branches(const Evaluator& ev, const std::vector<CriticalPoint>& crit) {
  std::vector<Real> ends;
  ends.push_back(ev.domain_lo());
  for (const auto& c : crit) ends.push_back(c.location);
  ends.push_back(ev.domain_hi());
  std::vector<Branch> out;
  for (size_t i = 0; i + 1 < ends.size(); ++i) {
    Branch b;
    b.index = static_cast<int>(i);
    b.left = ends[i];
    b.right = ends[i + 1];
    b.value_left = ev.value(b.left);
    b.value_right = ev.value(b.right);
    b.orientation = b.value_left <= b.value_right ? Orientation::increasing : Orientation::decreasing;
    b.image_lo = min(b.value_left, b.value_right);
    b.image_hi = max(b.value_left, b.value_right);
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

void MapSpec::analyse() {
  const Bits bits = kAnalysisBits;
  const Evaluator ev(*this, bits, 2);
  const Real a = ev.domain_lo(), b = ev.domain_hi();

  constexpr int kCells = 2048;
  std::vector<Real> xs;
  std::vector<int> signs;
  xs.reserve(kCells + 1);
  for (int i = 0; i <= kCells; ++i) {
    Real x = a + (b - a) * Real(static_cast<double>(i) / kCells, bits);
    if (i == kCells) x = b;
    signs.push_back(ev.value(x, 1).sign());
    xs.push_back(std::move(x));
  }
  double sup = 0;
  for (int i = 0; i < kCells; ++i) {
    const Interval cell(xs[static_cast<size_t>(i)], xs[static_cast<size_t>(i) + 1]);
    const Interval d = abs(ev.enclose(cell, 1));
    sup = std::max(sup, d.hi().to_double());
  }
  sup_df_ = sup * (1 + 1e-12);

  std::vector<CriticalPoint> found;
  auto seed = [&](Real lo, Real hi) {
    CriticalPoint cp;
    cp.location = lo;
    cp.bracket = Interval(std::move(lo), std::move(hi));
    found.push_back(std::move(cp));
  };
  for (int i = 1; i < kCells; ++i) {
    const auto u = static_cast<size_t>(i);
    if (signs[u] == 0 && signs[u - 1] * signs[u + 1] < 0) seed(xs[u], xs[u]);
  }
  for (int i = 0; i < kCells; ++i) {
    const auto u = static_cast<size_t>(i);
    if (signs[u] * signs[u + 1] < 0) seed(xs[u], xs[u + 1]);
  }
  std::sort(found.begin(), found.end(), [](const CriticalPoint& p, const CriticalPoint& q) { return p.bracket.lo() < q.bracket.lo(); });

  for (auto& cp : found) {
    cp = refine_critical_point(*this, cp, bits);
    for (const auto& q : convergents(cp.location.to_rational(), mpz_class(1) << 24)) {
      if (!cp.bracket.contains(Real(q, bits + 64))) continue;
      if (auto v = eval_exact(form(1), q); v && *v == 0) {
        cp.exact = q;
        cp.location = Real(q, bits);
        cp.bracket = Interval::enclose(q, bits);
        break;
      }
    }
    cp.order = resolve_order(*this, cp, bits);
  }
  for (auto& cp : found) fill_nonflat_constants(*this, cp, found);
  crit_ = std::move(found);

  // Domain invariance from branch extrema.
  const Real tol = ldexp(Real(1L, bits), -static_cast<long>(bits) / 2);
  for (const auto& br : build_branches(ev, crit_)) {
    if (br.image_lo < a - tol || br.image_hi > b + tol) {
      throw DomainError("map '" + label_ + "' does not send its domain into itself (branch " + std::to_string(br.index) +
                        " image [" + br.image_lo.str(10) + ", " + br.image_hi.str(10) + "])");
    }
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Rational json_rational(const ordered_json& v, const std::string& where) {
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(mpz_class(v.dump(), 10));
  throw ConfigError(where + ": numeric values must be exact decimal strings (e.g. \"3.9\")");
}

std::vector<Rational> json_rationals(const ordered_json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<Rational> out;
  for (const auto& e : v) out.push_back(json_rational(e, where));
  return out;
}

ordered_json rationals_json(const std::vector<Rational>& v) {
  ordered_json a = ordered_json::array();
  for (const auto& q : v) a.push_back(format_rational(q));
  return a;
}

}  // namespace

MapSpec MapSpec::from_json(const ordered_json& j) {
  if (!j.is_object()) throw ConfigError("map definition must be an object");
  const std::string label = j.value("label", std::string{});
  if (label.empty()) throw ConfigError("map definition: missing label");
  const std::string where = "map '" + label + "'";
  if (!j.contains("domain") || !j["domain"].is_array() || j["domain"].size() != 2) {
    throw ConfigError(where + ": domain must be [lo, hi]");
  }
  const Rational lo = json_rational(j["domain"][0], where + ".domain");
  const Rational hi = json_rational(j["domain"][1], where + ".domain");
  const std::string family = j.value("family", std::string{});
  if (family == "polynomial") {
    if (!j.contains("coefficients")) throw ConfigError(where + ": missing coefficients");
    return polynomial(label, json_rationals(j["coefficients"], where + ".coefficients"), lo, hi);
  }
  if (family == "trig_polynomial") {
    const Rational freq = j.contains("frequency") ? json_rational(j["frequency"], where + ".frequency") : Rational(1);
    auto cs = j.contains("cos") ? json_rationals(j["cos"], where + ".cos") : std::vector<Rational>{};
    auto ss = j.contains("sin") ? json_rationals(j["sin"], where + ".sin") : std::vector<Rational>{};
    return trig_polynomial(label, freq, std::move(cs), std::move(ss), lo, hi);
  }
  if (family == "radical") {
    if (!j.contains("radicand") || !j["radicand"].is_array() || j["radicand"].size() != 2) {
      throw ConfigError(where + ": radicand must be [alpha, beta]");
    }
    if (!j.contains("terms") || !j["terms"].is_object()) throw ConfigError(where + ": terms must be an object");
    std::map<int, Polynomial> terms;
    for (const auto& [key, val] : j["terms"].items()) {
      int power = 0;
      try {
        power = std::stoi(key);
      } catch (const std::exception&) {
        throw ConfigError(where + ".terms: key '" + key + "' is not an integer power");
      }
      terms[power].coeffs = json_rationals(val, where + ".terms");
    }
    return radical(label, json_rational(j["radicand"][0], where), json_rational(j["radicand"][1], where),
                   std::move(terms), lo, hi);
  }
  throw ConfigError(where + ": unknown family '" + family + "'");
}

ordered_json MapSpec::to_json() const {
  ordered_json j;
  j["label"] = label_;
  j["family"] = to_string(family_);
  j["domain"] = {format_rational(lo_), format_rational(hi_)};
  if (const auto* alg = std::get_if<AlgebraicForm>(&forms_[0])) {
    if (family_ == Family::polynomial) {
      auto it = alg->terms.find(0);
      j["coefficients"] = rationals_json(it == alg->terms.end() ? std::vector<Rational>{} : it->second.coeffs);
    } else {
      j["radicand"] = {format_rational(alg->alpha), format_rational(alg->beta)};
      ordered_json t = ordered_json::object();
      for (const auto& [k, p] : alg->terms) t[std::to_string(k)] = rationals_json(p.coeffs);
      j["terms"] = t;
    }
  } else {
    const auto& tf = std::get<TrigForm>(forms_[0]);
    j["frequency"] = format_rational(tf.frequency);
    j["cos"] = rationals_json(tf.cos_coeffs);
    j["sin"] = rationals_json(tf.sin_coeffs);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Dynamics

Dynamics::Dynamics(const MapSpec& map, Bits bits) : eval_(map, bits, 3) {
  for (const auto& c : map.critical_points()) {
    crit_.push_back(bits == kAnalysisBits ? c : refine_critical_point(map, c, bits));
  }
  branches_ = build_branches(eval_, crit_);
}

int Dynamics::branch_of(const Real& x) const {
  for (const auto& b : branches_) {
    if (x <= b.right) return b.index;
  }
  return branches_.back().index;
}

Real Dynamics::distance_to_critical(const Real& x) const {
  Real best(bits());
  bool first = true;
  for (const auto& c : crit_) {
    Real d = abs(x - c.location);
    if (first || d < best) best = std::move(d);
    first = false;
  }
  if (first) throw NotMultimodalError("map '" + map().label() + "' has no critical point");
  return best;
}

bool Dynamics::meets_critical(const Interval& w) const {
  return std::any_of(crit_.begin(), crit_.end(), [&](const CriticalPoint& c) { return c.bracket.intersects(w); });
}

// ---------------------------------------------------------------------------
// Operations

namespace {

void check_precision(Bits bits) {
  if (bits < 53) throw ConfigError("precision_bits must be at least 53 (got " + std::to_string(bits) + ")");
}

}  // namespace

Real eval_map(const MapSpec& map, const Real& x, Bits bits) {
  check_precision(bits);
  const Evaluator ev(map, bits, 0);
  if (!ev.in_domain(x)) throw DomainError("x = " + x.str(12) + " outside the domain of '" + map.label() + "'");
  return ev.value(x, 0);
}

Real eval_deriv(const MapSpec& map, const Real& x, int order, Bits bits) {
  check_precision(bits);
  if (order < 1 || order > 3) throw ConfigError("derivative order must be 1, 2 or 3 (got " + std::to_string(order) + ")");
  const Evaluator ev(map, bits, order);
  if (!ev.in_domain(x)) throw DomainError("x = " + x.str(12) + " outside the domain of '" + map.label() + "'");
  return ev.value(x, order);
}

std::vector<Branch> branch_partition(const MapSpec& map, Bits bits) {
  if (!map.is_multimodal()) throw NotMultimodalError("map '" + map.label() + "' has no interior critical point");
  const Real resolution = ldexp(Real(1L, bits), -(static_cast<long>(bits) - 12));
  const Dynamics dyn(map, bits);
  for (const auto& c : dyn.critical_points()) {
    if (c.bracket.width() > resolution * max(Real(1L, bits), abs(c.location))) {
      throw PrecisionError("critical point near " + c.location.str(12) + " not resolved at " + std::to_string(bits) + " bits");
    }
  }
  return dyn.branches();
}

std::vector<double> default_radius_grid(double radius) {
  std::vector<double> g;
  for (int j = 0; j <= 40; ++j) g.push_back(radius * std::pow(2.0, -0.5 * j));
  return g;
}

NonflatnessProbe nonflatness_probe(const MapSpec& map, const CriticalPoint& c, std::span<const double> radius_grid) {
  if (radius_grid.size() < 2) throw InsufficientDataError("nonflatness probe needs at least two radii");
  const Bits bits = kAnalysisBits;
  const Evaluator ev(map, bits, 1);
  const Real cl(c.location, bits);
  const double rmax = *std::max_element(radius_grid.begin(), radius_grid.end());
  for (const auto& other : map.critical_points()) {
    const Real d = abs(other.location - cl);
    if (!d.is_zero() && d <= rmax) {
      throw GeometryError("radius grid around " + cl.str(10) + " reaches the critical point at " + other.location.str(10));
    }
  }
  NonflatnessProbe out;
  out.order = c.order;
  std::vector<double> lx, ly;
  for (double r : radius_grid) {
    if (!(r > 0)) throw DomainError("radius grid entries must be positive");
    for (int side : {-1, 1}) {
      const Real x = cl + Real(side * r, bits);
      if (!ev.in_domain(x)) continue;
      const Real df = abs(ev.value(x, 1));
      const double rr = abs(x - cl).to_double();
      out.radii.push_back(rr);
      out.abs_derivative.push_back(df.to_double());
      lx.push_back(std::log(rr));
      ly.push_back(df.log_abs());
    }
  }
  if (lx.size() < 2) throw DomainError("radius grid lies outside the domain around " + cl.str(10));
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0) throw InsufficientDataError("radius grid has a single distinct radius");
  out.fitted_exponent = sxy / sxx;
  out.rounded_exponent = static_cast<int>(std::lround(out.fitted_exponent));
  double fitted_L = 0, order_L = 1;
  for (size_t i = 0; i < lx.size(); ++i) {
    fitted_L = std::max(fitted_L, std::exp(out.fitted_exponent * lx[i] - ly[i]));
    order_L = std::max(order_L, std::exp(static_cast<double>(c.order) * lx[i] - ly[i]));
  }
  out.fitted_L = fitted_L;
  out.order_form_L = order_L;
  return out;
}

}  // namespace celab::mapkit
