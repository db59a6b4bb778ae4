#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pcqa {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt pow10(int exponent) {
  BigInt r = 1;
  for (int i = 0; i < exponent; ++i) r *= 10;
  return r;
}

// Parses an unsigned decimal literal ("12", "36.6", ".5", "5.") exactly.
// Returns nullopt for anything else, including signs and exponents.
inline std::optional<Rational> parse_unsigned_decimal(std::string_view text) {
  BigInt digits = 0;
  int fraction_digits = 0;
  bool seen_point = false;
  bool seen_digit = false;
  for (char c : text) {
    if (c == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits = digits * 10 + (c - '0');
      seen_digit = true;
      if (seen_point) ++fraction_digits;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit) return std::nullopt;
  return Rational(digits, pow10(fraction_digits));
}

// Number of digits written after the decimal point.
inline int written_fraction_digits(std::string_view text) {
  auto dot = text.find('.');
  if (dot == std::string_view::npos) return 0;
  int n = 0;
  for (std::size_t i = dot + 1; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) ++n;
  return n;
}

// True when text[pos] is a comma with a digit before it and exactly three
// digits before the next non-digit character.
inline bool is_grouping_comma(std::string_view text, std::size_t pos) {
  auto digit = [&](std::size_t k) { return k < text.size() && std::isdigit(static_cast<unsigned char>(text[k])); };
  if (pos == 0 || text[pos] != ',' || !digit(pos - 1)) return false;
  return digit(pos + 1) && digit(pos + 2) && digit(pos + 3) && !digit(pos + 4);
}

// Plain signed number as it appears in gold answers: optional sign, digits
// with optional digit-grouping commas, optional fraction. "$" or "%" make
// the text non-numeric.
inline std::optional<Rational> parse_plain_number(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  std::string cleaned;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == ',') {
      // Grouping comma: digit before, exactly three digits after.
      if (!is_grouping_comma(text, i) || cleaned.find('.') != std::string::npos) return std::nullopt;
      continue;
    }
    cleaned.push_back(c);
  }
  auto value = parse_unsigned_decimal(cleaned);
  if (!value) return std::nullopt;
  return negative ? Rational(-*value) : *value;
}

// Rounds half away from zero at `precision` decimals and drops trailing
// zeros. Negative zero renders as "0".
inline std::string render_decimal(const Rational& value, int precision) {
  if (precision < 0 || precision > 10) throw std::invalid_argument("render precision must be in [0, 10]");
  const BigInt num = boost::multiprecision::numerator(value);
  const BigInt den = boost::multiprecision::denominator(value);
  const bool negative = num < 0;
  const BigInt magnitude = negative ? BigInt(-num) : num;
  const BigInt scale = pow10(precision);
  const BigInt rounded = (2 * magnitude * scale + den) / (2 * den);
  if (rounded == 0) return "0";

  std::string digits = rounded.str();
  if (precision > 0) {
    if (static_cast<int>(digits.size()) <= precision) digits.insert(0, precision + 1 - digits.size(), '0');
    digits.insert(digits.size() - precision, ".");
    while (digits.back() == '0') digits.pop_back();
    if (digits.back() == '.') digits.pop_back();
  }
  return negative ? "-" + digits : digits;
}

inline std::string to_fraction_string(const Rational& value) {
  return boost::multiprecision::numerator(value).str() + "/" + boost::multiprecision::denominator(value).str();
}

}  // namespace pcqa
