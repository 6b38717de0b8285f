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
#include "jaggedrec/jagged_tensor.h"

#include <random>

#include "gtest/gtest.h"
#include "jaggedrec/errors.h"

namespace jaggedrec {
namespace {

TEST(OffsetsTest, PrefixSums) {
  const std::vector<int64_t> lengths = {3, 0, 2};
  EXPECT_EQ(OffsetsFromLengths(lengths), (std::vector<int64_t>{0, 3, 3, 5}));
  EXPECT_EQ(OffsetsFromLengths(std::vector<int64_t>{}),
            (std::vector<int64_t>{0}));
}

TEST(OffsetsTest, RejectsNegativeLength) {
  EXPECT_THROW(OffsetsFromLengths(std::vector<int64_t>{1, -1}),
               ValidationError);
}

TEST(JaggedTensorTest, RowsAndItems) {
  JaggedTensor<int64_t> jt({1, 2, 3, 4, 5, 6}, {0, 1, 1, 3}, 2);
  EXPECT_EQ(jt.batch_size(), 3);
  EXPECT_EQ(jt.num_items(), 3);
  EXPECT_EQ(jt.length(0), 1);
  EXPECT_EQ(jt.length(1), 0);
  EXPECT_EQ(jt.max_length(), 2);
  EXPECT_EQ(jt.row(2).size(), 4u);
  EXPECT_EQ(jt.item(2, 1)[0], 5);
  EXPECT_EQ(jt.lengths(), (std::vector<int64_t>{1, 0, 2}));
}

TEST(JaggedTensorTest, ConstructorValidates) {
  EXPECT_THROW(JaggedTensor<int>({1, 2}, {0, 3}), ValidationError);
  EXPECT_THROW(JaggedTensor<int>({1, 2}, {1, 2}), ValidationError);
  EXPECT_THROW(JaggedTensor<int>({1, 2}, {0, 2, 1}), ValidationError);
  EXPECT_THROW(JaggedTensor<int>({1, 2}, {0, 2}, 0), ValidationError);
  EXPECT_THROW(JaggedTensor<int>({}, {}), ValidationError);
}

TEST(JaggedTensorTest, EmptyBatch) {
  JaggedTensor<float> jt;
  EXPECT_EQ(jt.batch_size(), 0);
  EXPECT_EQ(jt.num_items(), 0);
  EXPECT_EQ(jt.max_length(), 0);
}

TEST(JaggedTensorTest, DenseRoundTripProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t b = 1 + rng() % 6;
    const int64_t lmax = 1 + rng() % 9;
    const int64_t d = 1 + rng() % 4;
    std::vector<int64_t> lengths(b);
    for (auto& l : lengths) l = rng() % (lmax + 1);
    int64_t total = 0;
    for (auto l : lengths) total += l;
    std::vector<double> values(total * d);
    for (auto& v : values) v = static_cast<double>(rng() % 1000) / 7.0;
    auto jt = JaggedTensor<double>::FromLengths(values, lengths, d);
    DenseBatch<double> dense = JaggedToDense(jt, lmax, -1.0);
    // Padding cells hold the pad value; valid cells are copied.
    for (int64_t i = 0; i < b; ++i) {
      for (int64_t l = 0; l < lmax; ++l) {
        for (int64_t k = 0; k < d; ++k) {
          if (l >= lengths[i]) {
            EXPECT_EQ(dense.at(i, l, k), -1.0);
          } else {
            EXPECT_EQ(dense.at(i, l, k), jt.item(i, l)[k]);
          }
        }
      }
    }
    EXPECT_EQ(DenseToJagged(dense, lengths), jt);
  }
}

TEST(JaggedTensorTest, DenseConversionRejectsLongRows) {
  auto jt = JaggedTensor<int>::FromLengths({1, 2, 3}, std::vector<int64_t>{3});
  EXPECT_THROW(JaggedToDense(jt, 2, 0), ValidationError);
  DenseBatch<int> dense(1, 2, 1);
  EXPECT_THROW(DenseToJagged(dense, std::vector<int64_t>{3}), ValidationError);
  EXPECT_THROW(DenseToJagged(dense, std::vector<int64_t>{1, 1}),
               ValidationError);
}

TEST(JaggedTensorTest, DebugStringIsJson) {
  JaggedTensor<int64_t> jt({7, 8}, {0, 2});
  const std::string s = DebugString(jt);
  EXPECT_NE(s.find("\"offsets\""), std::string::npos);
  EXPECT_NE(s.find("7"), std::string::npos);
}

}  // namespace
}  // namespace jaggedrec
