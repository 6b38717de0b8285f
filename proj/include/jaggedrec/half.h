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
#ifndef JAGGEDREC_HALF_H_
#define JAGGEDREC_HALF_H_

#include <cstdint>

namespace jaggedrec {

// IEEE 754 binary16 bit pattern.
struct Half {
  uint16_t bits = 0;
  friend bool operator==(Half, Half) = default;
};

inline constexpr double kHalfMax = 65504.0;

// Round-to-nearest-even conversion. Finite values whose magnitude would round
// past kHalfMax saturate to +-kHalfMax and set *saturated (when non-null).
Half ToHalf(double x, bool* saturated = nullptr);

double FromHalf(Half h);

}  // namespace jaggedrec

#endif  // JAGGEDREC_HALF_H_
