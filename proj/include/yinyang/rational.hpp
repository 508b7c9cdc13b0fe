#pragma once

#include <cstdint>
#include <string>

#include <boost/rational.hpp>

namespace yinyang {

// Exact time value in quarter-note units.
using Rational = boost::rational<std::int64_t>;

std::string to_string(const Rational& r);

// Accepts "3", "3/2", "-1/4" and decimal strings such as "0.75".
Rational parse_rational(const std::string& text);

// Best rational approximation with denominator <= max_denominator
// (continued fractions). 0.333333 -> 1/3.
Rational rational_from_double(double value, std::int64_t max_denominator = 96);

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

inline Rational floor_div(const Rational& a, const Rational& b) {
  const Rational q = a / b;
  std::int64_t n = q.numerator() / q.denominator();
  if (q.numerator() < 0 && q.numerator() % q.denominator() != 0) --n;
  return Rational(n);
}

}  // namespace yinyang
