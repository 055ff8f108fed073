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

#include "dtm/rational.h"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dtm {
namespace {

__int128 Gcd(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

bool FitsInt64(__int128 v) {
  return v >= std::numeric_limits<std::int64_t>::min() &&
         v <= std::numeric_limits<std::int64_t>::max();
}

std::string WideToString(__int128 v) {
  if (v == 0) return "0";
  bool negative = v < 0;
  if (negative) v = -v;
  std::string out;
  while (v > 0) {
    out.insert(out.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  if (negative) out.insert(out.begin(), '-');
  return out;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  *this = FromWide(num, den);
}

Rational Rational::FromWide(__int128 num, __int128 den) {
  if (den == 0) throw std::domain_error("Rational: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 g = Gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (!FitsInt64(num) || !FitsInt64(den)) {
    throw std::overflow_error("Rational: value exceeds 64-bit range");
  }
  Rational r;
  r.num_ = static_cast<std::int64_t>(num);
  r.den_ = static_cast<std::int64_t>(den);
  return r;
}

Rational Rational::operator-() const {
  return FromWide(-static_cast<__int128>(num_), den_);
}

Rational& Rational::operator+=(const Rational& other) {
  if (den_ == other.den_) {
    *this = FromWide(static_cast<__int128>(num_) + other.num_, den_);
  } else {
    *this = FromWide(static_cast<__int128>(num_) * other.den_ +
                         static_cast<__int128>(other.num_) * den_,
                     static_cast<__int128>(den_) * other.den_);
  }
  return *this;
}

Rational& Rational::operator-=(const Rational& other) {
  return *this += -other;
}

Rational& Rational::operator*=(const Rational& other) {
  *this = FromWide(static_cast<__int128>(num_) * other.num_,
                   static_cast<__int128>(den_) * other.den_);
  return *this;
}

Rational& Rational::operator/=(const Rational& other) {
  if (other.num_ == 0) throw std::domain_error("Rational: division by zero");
  *this = FromWide(static_cast<__int128>(num_) * other.den_,
                   static_cast<__int128>(den_) * other.num_);
  return *this;
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
  __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
  __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

std::string Rational::ToString() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

std::string Rational::ToDecimal(int digits) const {
  __int128 scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  __int128 n = static_cast<__int128>(num_) * scale;
  bool negative = n < 0;
  if (negative) n = -n;
  __int128 q = n / den_;
  if ((n % den_) * 2 >= den_) ++q;
  std::string whole = WideToString(q / scale);
  std::string out = negative && q != 0 ? "-" + whole : whole;
  if (digits > 0) {
    std::string frac = WideToString(q % scale);
    out += "." + std::string(digits - frac.size(), '0') + frac;
  }
  return out;
}

Rational Rational::Parse(std::string_view text) {
  auto bad = [&]() {
    return std::invalid_argument("Rational: cannot parse '" +
                                 std::string(text) + "'");
  };
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
      s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                          s.back() == '\r')) {
      s.remove_suffix(1);
    }
    return s;
  };
  std::string_view s = trim(text);
  if (s.empty()) throw bad();

  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    Rational num = Parse(s.substr(0, slash));
    Rational den = Parse(s.substr(slash + 1));
    if (!num.IsInteger() || !den.IsInteger() || den.IsZero()) throw bad();
    return num / den;
  }

  bool negative = false;
  if (s.front() == '-' || s.front() == '+') {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) throw bad();
  __int128 num = 0;
  __int128 den = 1;
  bool seen_point = false;
  bool seen_digit = false;
  for (char ch : s) {
    if (ch == '.') {
      if (seen_point) throw bad();
      seen_point = true;
      continue;
    }
    if (ch < '0' || ch > '9') throw bad();
    seen_digit = true;
    num = num * 10 + (ch - '0');
    if (seen_point) den *= 10;
    if (num > std::numeric_limits<std::int64_t>::max() ||
        den > std::numeric_limits<std::int64_t>::max()) {
      throw std::overflow_error("Rational: literal too long");
    }
  }
  if (!seen_digit) throw bad();
  return FromWide(negative ? -num : num, den);
}

Rational Rational::FromDouble(double value, std::int64_t resolution) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("Rational: non-finite value");
  }
  double scaled = std::round(value * static_cast<double>(resolution));
  if (std::fabs(scaled) > 9.0e18) {
    throw std::overflow_error("Rational: value exceeds 64-bit range");
  }
  return Rational(static_cast<std::int64_t>(scaled), resolution);
}

}  // namespace dtm
