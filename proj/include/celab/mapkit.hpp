#pragma once

// Multimodal interval maps with exact rational coefficients.
//
// Three families are supported, all closed under differentiation so that
// every derivative is symbolic:
//   polynomial       f(x) = sum_k a_k x^k
//   trig_polynomial  f(x) = sum_k a_k cos(k w x) + b_k sin(k w x), w = q*pi
//   radical          f(x) = sum_j Q_j(x) s(x)^j, s(x) = sqrt(alpha + beta x)
// The radical family exists so that smooth conjugates of polynomial maps by
// quadratic coordinate changes stay representable.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "celab/real.hpp"
#include "json.hpp"

namespace celab::mapkit {

/// Precision used when a MapSpec resolves its own critical points.
inline constexpr Bits kAnalysisBits = 256;

enum class Family { polynomial, trig_polynomial, radical };
std::string to_string(Family f);

struct Polynomial {
  std::vector<Rational> coeffs;  // ascending powers

  Polynomial derivative() const;
  bool is_zero() const;
  Rational eval(const Rational& x) const;
};

struct AlgebraicForm {
  Rational alpha{1};
  Rational beta{0};
  std::map<int, Polynomial> terms;  // power of s -> polynomial factor

  AlgebraicForm derivative() const;
};

struct TrigForm {
  Rational frequency{1};  // w = frequency * pi
  int pi_power = 0;       // overall factor pi^pi_power
  std::vector<Rational> cos_coeffs;
  std::vector<Rational> sin_coeffs;

  TrigForm derivative() const;
};

using Form = std::variant<AlgebraicForm, TrigForm>;
Form derivative(const Form& f);

struct CriticalPoint {
  Real location;                  // best estimate inside bracket
  Interval bracket;               // encloses the sign change of Df
  std::optional<Rational> exact;  // set when Df(exact) == 0 was verified exactly
  int order = 2;                  // first non-vanishing derivative order
  double nonflat_L = 1.0;         // |Df(x)| >= |x-c|^(order-1) / L on B(c, radius)
  double nonflat_radius = 0.0;    // kappa_0
};

enum class Orientation { increasing, decreasing };

struct Branch {
  int index = 0;
  Real left, right;          // branch endpoints (critical points or domain ends)
  Orientation orientation = Orientation::increasing;
  Real image_lo, image_hi;   // f-values at the endpoints, sorted
  Real value_left, value_right;

  bool contains(const Real& x) const { return left <= x && x <= right; }
};

class MapSpec {
 public:
  static MapSpec polynomial(std::string label, std::vector<Rational> coeffs, Rational lo, Rational hi);
  static MapSpec trig_polynomial(std::string label, Rational frequency, std::vector<Rational> cos_coeffs,
                                 std::vector<Rational> sin_coeffs, Rational lo, Rational hi);
  static MapSpec radical(std::string label, Rational alpha, Rational beta, std::map<int, Polynomial> terms,
                         Rational lo, Rational hi);

  /// Map definition document: {label, family, domain, coefficients | cos/sin/frequency | radicand/terms}.
  static MapSpec from_json(const nlohmann::ordered_json& j);
  nlohmann::ordered_json to_json() const;

  const std::string& label() const { return label_; }
  Family family() const { return family_; }
  const Rational& domain_lo() const { return lo_; }
  const Rational& domain_hi() const { return hi_; }
  /// Symbolic D^order f.
  const Form& form(int order) const;
  Form form_any(int order) const;

  /// Interior critical points (sign changes of Df), ordered; empty when the
  /// map is monotone.
  const std::vector<CriticalPoint>& critical_points() const { return crit_; }
  bool is_multimodal() const { return !crit_.empty(); }
  /// Rigorous grid upper bound on sup |Df| over the domain.
  double sup_abs_derivative() const { return sup_df_; }

 private:
  MapSpec(std::string label, Family family, Form f, Rational lo, Rational hi);
  void analyse();

  std::string label_;
  Family family_;
  Rational lo_, hi_;
  std::vector<Form> forms_;  // orders 0..4
  std::vector<CriticalPoint> crit_;
  double sup_df_ = 0.0;
};

/// Numeric evaluation of a MapSpec at a fixed precision. Immutable; safe for
/// concurrent use.
class Evaluator {
 public:
  Evaluator(const MapSpec& map, Bits bits, int max_order = 3);
  ~Evaluator();
  Evaluator(Evaluator&&) noexcept;
  Evaluator& operator=(Evaluator&&) noexcept;

  Bits bits() const { return bits_; }
  const MapSpec& map() const { return *map_; }
  int max_order() const;

  /// D^order f(x), round-to-nearest at this precision.
  Real value(const Real& x, int order = 0) const;
  /// Outward enclosure of D^order f over X (naive interval extension).
  Interval enclose(const Interval& x, int order = 0) const;
  /// Mean-value form f(m) + Df(X)(X - m), intersected with the naive enclosure.
  Interval enclose_centered(const Interval& x) const;

  Real domain_lo() const { return Real(map_->domain_lo(), bits_); }
  Real domain_hi() const { return Real(map_->domain_hi(), bits_); }
  Interval domain() const;
  bool in_domain(const Real& x) const;

 private:
  struct NumericForm;
  std::shared_ptr<const MapSpec> map_;
  Bits bits_;
  std::vector<std::unique_ptr<NumericForm>> forms_;
};

/// Critical point bracket shrunk to width 2^-(bits-10) (or exact enclosure).
CriticalPoint refine_critical_point(const MapSpec& map, const CriticalPoint& cp, Bits bits);

/// Evaluator plus critical points and branches resolved at one precision.
class Dynamics {
 public:
  Dynamics(const MapSpec& map, Bits bits);

  Bits bits() const { return eval_.bits(); }
  const MapSpec& map() const { return eval_.map(); }
  const Evaluator& eval() const { return eval_; }
  const std::vector<CriticalPoint>& critical_points() const { return crit_; }
  const std::vector<Branch>& branches() const { return branches_; }

  Real f(const Real& x) const { return eval_.value(x, 0); }
  Real df(const Real& x) const { return eval_.value(x, 1); }
  /// Index of the branch containing x; a point on a shared endpoint belongs to
  /// the left branch.
  int branch_of(const Real& x) const;
  /// min over critical points of |x - c|.
  Real distance_to_critical(const Real& x) const;
  bool meets_critical(const Interval& w) const;

 private:
  Evaluator eval_;
  std::vector<CriticalPoint> crit_;
  std::vector<Branch> branches_;
};

// ---------------------------------------------------------------------------
// Operations

/// f(x). Throws DomainError outside the domain and ConfigError for bits < 53.
Real eval_map(const MapSpec& map, const Real& x, Bits bits);
/// D^order f(x) for order in {1, 2, 3}.
Real eval_deriv(const MapSpec& map, const Real& x, int order, Bits bits);
/// Monotone branches between consecutive critical points. Throws
/// NotMultimodalError when there is no interior critical point.
std::vector<Branch> branch_partition(const MapSpec& map, Bits bits = kAnalysisBits);

struct NonflatnessProbe {
  double fitted_exponent = 0;  // slope of log|Df| vs log|x-c| (the l-1 of the local model)
  int rounded_exponent = 0;
  double fitted_L = 0;         // smallest L with |Df| >= |x-c|^fitted / L on the grid
  int order = 0;               // first non-vanishing derivative order
  double order_form_L = 0;     // smallest L >= 1 with |Df| >= |x-c|^order / L on the grid
  std::vector<double> radii;
  std::vector<double> abs_derivative;  // |Df| at the sampled points (paired with radii, both sides)
};

NonflatnessProbe nonflatness_probe(const MapSpec& map, const CriticalPoint& c, std::span<const double> radius_grid);
/// Default probe grid r_j = radius * 2^(-j/2), j = 0..40.
std::vector<double> default_radius_grid(double radius);

}  // namespace celab::mapkit
