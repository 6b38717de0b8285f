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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace jaggedrec {
namespace {

// Value of a finite non-negative half pattern from the binary16 definition.
double DecodeOracle(uint16_t bits) {
  const int e = (bits >> 10) & 0x1f;
  const int m = bits & 0x3ff;
  if (e == 0) return m * std::pow(2.0, -24);
  return (1.0 + m / 1024.0) * std::pow(2.0, e - 15);
}

// Nearest finite half to |x| by search over all 31744 non-negative finite
// patterns, ties to the even pattern.
uint16_t NearestOracle(double a, const std::vector<double>& table) {
  auto it = std::lower_bound(table.begin(), table.end(), a);
  if (it == table.end()) return static_cast<uint16_t>(table.size() - 1);
  const size_t hi = it - table.begin();
  if (hi == 0 || *it == a) return static_cast<uint16_t>(hi);
  const size_t lo = hi - 1;
  const double dl = a - table[lo];
  const double dh = table[hi] - a;
  if (dl < dh) return static_cast<uint16_t>(lo);
  if (dh < dl) return static_cast<uint16_t>(hi);
  return static_cast<uint16_t>(lo % 2 == 0 ? lo : hi);
}

TEST(HalfTest, DecodesEveryPattern) {
  for (uint32_t b = 0; b < 0x10000; ++b) {
    const Half h{static_cast<uint16_t>(b)};
    const double got = FromHalf(h);
    const int e = (b >> 10) & 0x1f;
    const double sign = (b & 0x8000) ? -1.0 : 1.0;
    if (e == 31) {
      if ((b & 0x3ff) == 0) {
        EXPECT_EQ(got, sign * INFINITY);
      } else {
        EXPECT_TRUE(std::isnan(got));
      }
      continue;
    }
    ASSERT_EQ(got, sign * DecodeOracle(b & 0x7fff)) << b;
  }
}

TEST(HalfTest, RoundTripsEveryFiniteValue) {
  for (uint32_t b = 0; b < 0x10000; ++b) {
    if (((b >> 10) & 0x1f) == 31) continue;
    const Half h{static_cast<uint16_t>(b)};
    ASSERT_EQ(ToHalf(FromHalf(h)).bits, h.bits) << b;
  }
}

TEST(HalfTest, RoundsToNearestEven) {
  std::vector<double> table;
  for (uint32_t b = 0; b < 0x7c00; ++b) table.push_back(DecodeOracle(b));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200000; ++i) {
    double a;
    if (i % 2 == 0) {
      a = std::ldexp(u(rng), static_cast<int>(rng() % 44) - 28);
    } else {
      // Exact midpoints between neighbours exercise the tie rule.
      const size_t lo = rng() % (table.size() - 1);
      a = 0.5 * (table[lo] + table[lo + 1]);
    }
    if (a >= 65504.0) continue;
    bool sat = false;
    const Half h = ToHalf(a, &sat);
    ASSERT_EQ(h.bits, NearestOracle(a, table)) << a;
    ASSERT_FALSE(sat);
    ASSERT_EQ(ToHalf(-a).bits, h.bits | 0x8000);
  }
}

TEST(HalfTest, SaturatesAtTheTop) {
  bool sat = false;
  EXPECT_EQ(FromHalf(ToHalf(65504.0, &sat)), kHalfMax);
  EXPECT_FALSE(sat);
  EXPECT_EQ(FromHalf(ToHalf(65519.0, &sat)), kHalfMax);
  EXPECT_FALSE(sat);
  EXPECT_EQ(FromHalf(ToHalf(65520.0, &sat)), kHalfMax);
  EXPECT_TRUE(sat);
  sat = false;
  EXPECT_EQ(FromHalf(ToHalf(-1e9, &sat)), -kHalfMax);
  EXPECT_TRUE(sat);
}

TEST(HalfTest, SpecialValues) {
  EXPECT_TRUE(std::isnan(FromHalf(ToHalf(NAN))));
  EXPECT_EQ(FromHalf(ToHalf(INFINITY)), INFINITY);
  EXPECT_EQ(FromHalf(ToHalf(-INFINITY)), -INFINITY);
  EXPECT_EQ(ToHalf(-0.0).bits, 0x8000);
  EXPECT_EQ(ToHalf(1e-30).bits, 0);
  EXPECT_EQ(ToHalf(std::ldexp(1.0, -24)).bits, 1);
}

}  // namespace
}  // namespace jaggedrec
