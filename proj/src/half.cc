// Copyright 2026 The jaggedrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "jaggedrec/half.h"

#include <bit>
#include <cmath>
#include <cstdint>

namespace jaggedrec {

Half ToHalf(double x, bool* saturated) {
  const uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  const double a = std::fabs(x);
  if (std::isnan(x)) return Half{static_cast<uint16_t>(sign | 0x7e00)};
  if (std::isinf(x)) return Half{static_cast<uint16_t>(sign | 0x7c00)};
  // 65520 is the midpoint between kHalfMax and 2^16; it and above round to inf.
  if (a >= 65520.0) {
    if (saturated != nullptr) *saturated = true;
    return Half{static_cast<uint16_t>(sign | 0x7bff)};
  }
  if (a < std::ldexp(1.0, -14)) {
    // Subnormal range: units of 2^-24. A result of 1024 is the smallest normal
    // and encodes correctly without special handling.
    const double m = std::nearbyint(std::ldexp(a, 24));
    return Half{static_cast<uint16_t>(sign | static_cast<uint16_t>(m))};
  }
  // Normal range: keep the top 10 of 52 mantissa bits, round half to even.
  // A carry out of the mantissa correctly bumps the exponent.
  const uint64_t bits = std::bit_cast<uint64_t>(a);
  const int64_t e = static_cast<int64_t>(bits >> 52) - 1023;
  const uint64_t mant = bits & ((uint64_t{1} << 52) - 1);
  uint64_t h = (static_cast<uint64_t>(e + 15) << 10) | (mant >> 42);
  const uint64_t rest = mant & ((uint64_t{1} << 42) - 1);
  const uint64_t half_ulp = uint64_t{1} << 41;
  if (rest > half_ulp || (rest == half_ulp && (h & 1))) ++h;
  return Half{static_cast<uint16_t>(sign | h)};
}

double FromHalf(Half h) {
  const uint64_t sign = static_cast<uint64_t>(h.bits & 0x8000) << 48;
  const int exp = (h.bits >> 10) & 0x1f;
  const uint64_t man = h.bits & 0x3ff;
  if (exp == 0) {
    const double v = std::ldexp(static_cast<double>(man), -24);
    return sign ? -v : v;
  }
  if (exp == 31) {
    const double v = man == 0 ? INFINITY : NAN;
    return sign ? -v : v;
  }
  return std::bit_cast<double>(
      sign | (static_cast<uint64_t>(exp - 15 + 1023) << 52) | (man << 42));
}

}  // namespace jaggedrec
