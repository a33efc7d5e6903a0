#include "adhoc/rational.hpp"

#include <stdexcept>

namespace adhoc {

Rational parse_rational(const std::string& text) {
  if (text.empty()) throw std::invalid_argument("empty rational literal");
  if (auto slash = text.find('/'); slash != std::string::npos) {
    BigInt num(text.substr(0, slash));
    BigInt den(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + text + "'");
    return Rational(num) / Rational(den);
  }
  if (auto dot = text.find('.'); dot != std::string::npos) {
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    if (digits.empty() || digits == "-") throw std::invalid_argument("bad literal '" + text + "'");
    BigInt num(digits);
    BigInt den = 1;
    for (std::size_t k = dot + 1; k < text.size(); ++k) den *= 10;
    return Rational(num) / Rational(den);
  }
  try {
    return Rational(BigInt(text));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad literal '" + text + "'");
  }
}

std::string to_string(const Rational& q) {
  BigInt den = boost::multiprecision::denominator(q);
  if (den == 1) return boost::multiprecision::numerator(q).str();
  return boost::multiprecision::numerator(q).str() + "/" + den.str();
}

}  // namespace adhoc
