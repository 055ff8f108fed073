// Copyright 2026 The DTM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DTM_RATIONAL_H_
#define DTM_RATIONAL_H_

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace dtm {

// Exact fraction with 64-bit numerator and positive 64-bit denominator,
// always stored in lowest terms. Intermediate products use 128-bit
// arithmetic; a result that does not fit throws std::overflow_error.
//
// Quantities of data (GB) inside the clearing engine are Rationals so that
// equal-share divisions such as 5/3 GB keep conservation exact.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t value) : num_(value), den_(1) {}  // NOLINT
  Rational(std::int64_t num, std::int64_t den);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double ToDouble() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }
  bool IsZero() const { return num_ == 0; }
  bool IsNegative() const { return num_ < 0; }
  bool IsInteger() const { return den_ == 1; }

  // "5/3", "2", "-1/4".
  std::string ToString() const;
  // Fixed-point decimal with `digits` fractional digits (rounded half away
  // from zero).
  std::string ToDecimal(int digits = 6) const;

  // Parses an exact decimal ("2.5", "-3", "1e-3" is rejected) or a fraction
  // ("5/3"). Throws std::invalid_argument on malformed input.
  static Rational Parse(std::string_view text);

  // Nearest fraction with denominator `resolution` (e.g. 1'000'000 for
  // micro-GB resolution). Used when importing floating-point quantities.
  static Rational FromDouble(double value, std::int64_t resolution = 1000000);

  Rational operator-() const;
  Rational& operator+=(const Rational& other);
  Rational& operator-=(const Rational& other);
  Rational& operator*=(const Rational& other);
  Rational& operator/=(const Rational& other);

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a,
                                          const Rational& b);

 private:
  static Rational FromWide(__int128 num, __int128 den);

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline Rational Min(const Rational& a, const Rational& b) {
  return b < a ? b : a;
}
inline Rational Max(const Rational& a, const Rational& b) {
  return a < b ? b : a;
}

}  // namespace dtm

#endif  // DTM_RATIONAL_H_
