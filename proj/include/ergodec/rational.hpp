#ifndef ERGODEC_RATIONAL_HPP
#define ERGODEC_RATIONAL_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

#include <boost/multiprecision/gmp.hpp>

#include "ergodec/error.hpp"

namespace ergodec {

using Rational = boost::multiprecision::mpq_rational;
using Integer = boost::multiprecision::mpz_int;

template <typename S>
inline constexpr bool is_exact_v = !std::is_floating_point_v<S>;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(double d) { return d; }

template <typename S>
S from_rational(const Rational& r) {
  if constexpr (std::is_same_v<S, Rational>) {
    return r;
  } else {
    return static_cast<S>(to_double(r));
  }
}

// Canonical "p/q" form; integers are written as "p/1".
inline std::string format_rational(const Rational& r) {
  return boost::multiprecision::numerator(r).str() + "/" +
         boost::multiprecision::denominator(r).str();
}

// Shortest round-trip decimal, independent of the global locale.
inline std::string format_double(double d) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  (void)ec;
  return std::string(buf, end);
}

template <typename S>
std::string format_scalar(const S& v) {
  if constexpr (std::is_same_v<S, Rational>) {
    return format_rational(v);
  } else {
    return format_double(v);
  }
}

namespace detail {

// Decimal only: GMP would read a leading 0 as an octal prefix.
inline Integer parse_integer(std::string_view text) {
  std::string s(text);
  std::string sign;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    if (s[0] == '-') sign = "-";
    s.erase(0, 1);
  }
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("not an integer: '" + std::string(text) + "'");
  }
  s.erase(0, std::min(s.find_first_not_of('0'), s.size() - 1));
  return Integer(sign + s);
}

}  // namespace detail

// Accepts "p/q", integers and plain decimals ("0.25" is read as 1/4 exactly).
inline Rational parse_rational(std::string_view text) {
  auto fail = [&] {
    return ConfigError("not a rational number: '" + std::string(text) + "'");
  };
  if (text.empty()) throw fail();
  try {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
      Integer num = detail::parse_integer(text.substr(0, slash));
      Integer den = detail::parse_integer(text.substr(slash + 1));
      if (den == 0) throw fail();
      return Rational(num, den);
    }
    std::string s(text);
    bool negative = false;
    if (s[0] == '-' || s[0] == '+') {
      negative = s[0] == '-';
      s.erase(0, 1);
    }
    auto dot = s.find('.');
    std::string digits = s;
    Integer den = 1;
    if (dot != std::string::npos) {
      digits = s.substr(0, dot) + s.substr(dot + 1);
      for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
    }
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos) {
      throw fail();
    }
    Rational r(detail::parse_integer(digits), den);
    return negative ? Rational(-r) : r;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw fail();
  }
}

}  // namespace ergodec

#endif  // ERGODEC_RATIONAL_HPP
