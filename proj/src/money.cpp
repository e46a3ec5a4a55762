#include "nod/money.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include <cctype>
#include <cmath>
#include <limits>

namespace nod::money {

namespace {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::rational<BigInt>;

Cents round_half_even(const Rational& value) {
  const Rational scaled = value * Rational(100);
  BigInt numerator = scaled.numerator();
  const BigInt denominator = scaled.denominator();  // always positive
  BigInt quotient = numerator / denominator;
  BigInt remainder = numerator % denominator;
  // Truncation toward zero; shift to floor semantics for negatives.
  if (remainder < 0) {
    quotient -= 1;
    remainder += denominator;
  }
  const BigInt twice = remainder * 2;
  if (twice > denominator || (twice == denominator && (quotient % 2 != 0))) {
    quotient += 1;
  }
  if (quotient > std::numeric_limits<std::int64_t>::max() ||
      quotient < std::numeric_limits<std::int64_t>::min()) {
    throw CalculationError("result out of range");
  }
  return Cents(static_cast<std::int64_t>(quotient));
}

class ExpressionParser {
 public:
  explicit ExpressionParser(std::string_view text) : text_(text) {}

  Rational parse() {
    Rational value = expression();
    skip_space();
    if (pos_ != text_.size()) throw CalculationError("unexpected character in expression");
    return value;
  }

 private:
  Rational expression() {
    Rational value = term();
    while (true) {
      skip_space();
      if (consume('+')) {
        value += term();
      } else if (consume('-')) {
        value -= term();
      } else {
        return value;
      }
    }
  }

  Rational term() {
    Rational value = factor();
    while (true) {
      skip_space();
      if (consume('*')) {
        value *= factor();
      } else if (consume('/')) {
        const Rational divisor = factor();
        if (divisor == Rational(0)) throw CalculationError("division by zero");
        value /= divisor;
      } else {
        return value;
      }
    }
  }

  Rational factor() {
    skip_space();
    if (consume('-')) return -factor();
    if (consume('+')) return factor();
    if (consume('(')) {
      Rational value = expression();
      skip_space();
      if (!consume(')')) throw CalculationError("unbalanced parentheses");
      return value;
    }
    return number();
  }

  Rational number() {
    skip_space();
    BigInt digits = 0;
    BigInt scale = 1;
    bool any = false;
    bool fraction = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits = digits * 10 + (c - '0');
        if (fraction) scale *= 10;
        any = true;
        ++pos_;
      } else if (c == '.' && !fraction) {
        fraction = true;
        ++pos_;
      } else {
        break;
      }
    }
    if (!any) throw CalculationError("expected a number");
    return Rational(digits, scale);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Cents from_json(const Json& number) {
  if (number.is_number_integer()) return Cents(number.get<std::int64_t>() * 100);
  if (!number.is_number()) throw MoneyError("amount is not a number: " + number.dump());
  const double value = number.get<double>();
  if (!std::isfinite(value)) throw MoneyError("amount is not finite");
  const double scaled = value * 100.0;
  const double rounded = std::nearbyint(scaled);
  if (std::fabs(scaled - rounded) > 1e-6 * std::max(1.0, std::fabs(scaled))) {
    throw MoneyError("amount has more than two decimal places: " + number.dump());
  }
  return Cents(static_cast<std::int64_t>(rounded));
}

Json to_json(Cents amount) {
  // Integer hundredths divided by 100 is the correctly rounded double of the
  // decimal amount, so its shortest rendering is exactly the 2-place value.
  return Json(static_cast<double>(amount.hundredths()) / 100.0);
}

std::string to_string(Cents amount) {
  const std::int64_t h = amount.hundredths();
  const std::int64_t magnitude = h < 0 ? -h : h;
  std::string out = h < 0 ? "-" : "";
  out += std::to_string(magnitude / 100);
  const std::int64_t frac = magnitude % 100;
  if (frac != 0) {
    out.push_back('.');
    out.push_back(static_cast<char>('0' + frac / 10));
    if (frac % 10 != 0) out.push_back(static_cast<char>('0' + frac % 10));
  }
  return out;
}

Cents parse(std::string_view text) { return evaluate_expression(text); }

Cents evaluate_expression(std::string_view expression) {
  for (const char c : expression) {
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '+' || c == '-' ||
          c == '*' || c == '/' || c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c)))) {
      throw CalculationError("invalid characters in expression");
    }
  }
  return round_half_even(ExpressionParser(expression).parse());
}

}  // namespace nod::money
