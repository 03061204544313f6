#include <cctype>
#include <charconv>
#include <cmath>
#include <string>

#include "pnewton/harness.hpp"

namespace pnewton {

namespace {

class PolyParser {
 public:
  explicit PolyParser(std::string_view text) : s_(text) {}

  // Whitespace is allowed between tokens, never inside a number.
  std::map<int, double> parse() {
    skip_space();
    if (pos_ == s_.size()) fail("empty polynomial");
    std::map<int, double> coeffs;
    bool first = true;
    while (pos_ < s_.size()) {
      double sign = 1.0;
      if (peek() == '+' || peek() == '-') {
        sign = peek() == '-' ? -1.0 : 1.0;
        ++pos_;
        skip_space();
      } else if (!first) {
        fail("expected '+' or '-'");
      }
      first = false;
      const auto [power, coeff] = term();
      coeffs[power] += sign * coeff;
      skip_space();
    }
    for (auto it = coeffs.begin(); it != coeffs.end();) {
      it = it->second == 0.0 ? coeffs.erase(it) : std::next(it);
    }
    return coeffs;
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  void skip_space() {
    while (std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw InvalidArgument("cannot parse polynomial '" + s_ + "' at column " +
                          std::to_string(pos_ + 1) + ": " + why);
  }

  bool starts_number() const {
    const char ch = peek();
    return std::isdigit(static_cast<unsigned char>(ch)) || ch == '.';
  }

  double number() {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc()) fail("bad number");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }

  std::pair<int, double> term() {
    double coeff = 1.0;
    bool have_coeff = false;
    if (starts_number()) {
      coeff = number();
      have_coeff = true;
      skip_space();
      if (peek() == '*') {
        ++pos_;
        skip_space();
        if (peek() != 'x') fail("expected 'x' after '*'");
      }
    }
    if (peek() != 'x') {
      if (!have_coeff) fail("expected a number or 'x'");
      return {0, coeff};
    }
    ++pos_;
    skip_space();
    int power = 1;
    if (peek() == '^') {
      ++pos_;
      skip_space();
      const auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), power);
      if (ec != std::errc() || power < 0) fail("expected a nonnegative integer power");
      pos_ = static_cast<std::size_t>(ptr - s_.data());
    }
    return {power, coeff};
  }

  std::string s_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial Polynomial::parse(std::string_view text) {
  Polynomial p;
  p.coeffs_ = PolyParser(text).parse();
  return p;
}

double Polynomial::operator()(double x) const {
  double sum = 0.0;
  for (const auto& [power, c] : coeffs_) sum += c * std::pow(x, power);
  return sum;
}

Polynomial Polynomial::derivative() const {
  Polynomial d;
  for (const auto& [power, c] : coeffs_) {
    if (power > 0) d.coeffs_[power - 1] = c * power;
  }
  return d;
}

}  // namespace pnewton
