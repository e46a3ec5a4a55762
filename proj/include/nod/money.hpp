#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "nod/json_util.hpp"

namespace nod::money {

// Fixed-point amount in hundredths. All money arithmetic in the service
// environment goes through this type; doubles only appear at the JSON edge.
class Cents {
 public:
  constexpr Cents() = default;
  constexpr explicit Cents(std::int64_t hundredths) : value_(hundredths) {}

  constexpr std::int64_t hundredths() const { return value_; }

  constexpr Cents operator+(Cents other) const { return Cents(value_ + other.value_); }
  constexpr Cents operator-(Cents other) const { return Cents(value_ - other.value_); }
  constexpr Cents operator-() const { return Cents(-value_); }
  constexpr Cents& operator+=(Cents other) {
    value_ += other.value_;
    return *this;
  }
  constexpr Cents& operator-=(Cents other) {
    value_ -= other.value_;
    return *this;
  }
  constexpr auto operator<=>(const Cents&) const = default;

 private:
  std::int64_t value_ = 0;
};

constexpr Cents abs(Cents c) { return c.hundredths() < 0 ? -c : c; }

class MoneyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reads a JSON number that must carry at most two decimal places.
Cents from_json(const Json& number);

// The JSON number whose shortest decimal rendering is the 2-place amount.
Json to_json(Cents amount);

// "20.78", "-26.48", "481.5": the shortest decimal rendering.
std::string to_string(Cents amount);

// Parses a decimal literal such as "502.28"; more than two places are
// rounded half-even.
Cents parse(std::string_view text);

class CalculationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluates + - * / and parentheses over decimal literals exactly, then
// rounds half-even to two places.
Cents evaluate_expression(std::string_view expression);

}  // namespace nod::money
