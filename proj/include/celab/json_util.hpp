#pragma once

#include <cmath>
#include <span>
#include <string>

#include "json.hpp"

namespace celab {

/// Doubles serialize as shortest round-trip numbers; non-finite values become
/// the strings "inf", "-inf" or "nan" so the document stays valid JSON.
inline nlohmann::ordered_json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number_from_json(const nlohmann::ordered_json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw nlohmann::ordered_json::type_error::create(302, "expected a number", &j);
}

inline nlohmann::ordered_json json_numbers(std::span<const double> v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

}  // namespace celab
