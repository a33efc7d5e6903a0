#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>

namespace adhoc {

/// Exact rational scalar. Expression templates are disabled so the type
/// composes with Eigen's own expression machinery.
using Rational = boost::multiprecision::number<boost::multiprecision::cpp_rational_backend,
                                               boost::multiprecision::et_off>;
using BigInt = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                             boost::multiprecision::et_off>;

/// Reference time, always exact.
using Time = Rational;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline double to_double(const Rational& q) { return q.convert_to<double>(); }
inline double to_double(double v) { return v; }

/// Exact conversion of a finite double (every finite double is a dyadic rational).
inline Rational to_rational(double v) {
  if (v == 0.0) return Rational(0);
  int exp = 0;
  double mant = std::frexp(v, &exp);
  // 53 significant bits
  auto m = static_cast<std::int64_t>(std::ldexp(mant, 53));
  exp -= 53;
  Rational r(m);
  if (exp > 0) {
    r *= Rational(BigInt(1) << exp);
  } else if (exp < 0) {
    r /= Rational(BigInt(1) << (-exp));
  }
  return r;
}
inline Rational to_rational(const Rational& v) { return v; }

/// Parses "p/q", integers, or decimal literals ("1.25") exactly.
Rational parse_rational(const std::string& text);

std::string to_string(const Rational& q);

inline BigInt floor_int(const Rational& q) {
  BigInt num = boost::multiprecision::numerator(q);
  BigInt den = boost::multiprecision::denominator(q);
  BigInt quo = num / den;
  if (num % den != 0 && num < 0) quo -= 1;
  return quo;
}

inline BigInt ceil_int(const Rational& q) {
  BigInt f = floor_int(q);
  return Rational(f) == q ? f : f + 1;
}

/// Largest multiple of `quantum` not exceeding `value`.
inline Rational quantize_down(const Rational& value, const Rational& quantum) {
  return Rational(floor_int(value / quantum)) * quantum;
}

template <typename Scalar>
Scalar abs_value(const Scalar& v) {
  return v < Scalar(0) ? Scalar(-v) : v;
}

}  // namespace adhoc

namespace Eigen {

template <>
struct NumTraits<adhoc::Rational> : GenericNumTraits<adhoc::Rational> {
  using Real = adhoc::Rational;
  using NonInteger = adhoc::Rational;
  using Nested = adhoc::Rational;
  using Literal = adhoc::Rational;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 20,
    AddCost = 50,
    MulCost = 100
  };
  static inline Real epsilon() { return Real(0); }
  static inline Real dummy_precision() { return Real(0); }
  static inline int digits10() { return 0; }
  static inline Real highest() { return Real(adhoc::BigInt(1) << 512); }
  static inline Real lowest() { return -highest(); }
};

}  // namespace Eigen
