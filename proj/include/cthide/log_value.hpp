#ifndef CTHIDE_LOG_VALUE_HPP
#define CTHIDE_LOG_VALUE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>

namespace cthide {

/// A positive real kept as its base-10 logarithm. Covers 10^-71 .. 10^21
/// and beyond without under/overflow.
struct LogValue {
  double log10 = -std::numeric_limits<double>::infinity();

  static LogValue from_ln(double ln) { return {ln / std::log(10.0)}; }

  /// Decimal exponent and mantissa in [1, 10).
  int exponent() const { return static_cast<int>(std::floor(log10)); }
  double mantissa() const { return std::pow(10.0, log10 - exponent()); }

  /// Nearest power of ten, as printed in order-of-magnitude tables.
  int order() const { return static_cast<int>(std::lround(log10)); }

  double value() const { return std::pow(10.0, log10); }

  LogValue operator*(LogValue o) const { return {log10 + o.log10}; }

  std::string str() const {
    std::ostringstream out;
    out.precision(3);
    out << mantissa() << "e" << exponent();
    return out.str();
  }
};

/// ln(sum exp(terms)) without overflow.
inline double log_sum_exp(std::span<const double> terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

/// ln(n!)
inline double ln_factorial(double n) { return std::lgamma(n + 1.0); }

}  // namespace cthide

#endif  // CTHIDE_LOG_VALUE_HPP
