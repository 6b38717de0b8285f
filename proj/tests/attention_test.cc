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
#include "jaggedrec/attention.h"

#include <random>

#include "gtest/gtest.h"
#include "jaggedrec/errors.h"
#include "oracles.h"

namespace jaggedrec {
namespace {

const JaggedTensor<double>* const kNoRab = nullptr;

TEST(TimeBucketTest, LogSpaced) {
  EXPECT_EQ(TimeBucket(0, 32), 0);
  EXPECT_EQ(TimeBucket(1, 32), 1);
  EXPECT_EQ(TimeBucket(2, 32), 1);
  EXPECT_EQ(TimeBucket(3, 32), 2);
  EXPECT_EQ(TimeBucket(-3, 32), 2);
  EXPECT_EQ(TimeBucket(1 << 20, 8), 7);
  EXPECT_EQ(TimeBucket(INT64_MIN, 64), 63);
}

TEST(TimeBucketTest, MatchesOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100000; ++i) {
    const int64_t delta = static_cast<int64_t>(rng()) >> (rng() % 64);
    const int64_t buckets = 1 + rng() % 70;
    ASSERT_EQ(TimeBucket(delta, buckets), oracle::TimeBucket(delta, buckets))
        << delta;
  }
}

TEST(PositionBucketTest, ClipsRelativeDistance) {
  EXPECT_EQ(PositionBucket(5, 5, 4), 4);
  EXPECT_EQ(PositionBucket(5, 0, 4), 0);
  EXPECT_EQ(PositionBucket(0, 9, 4), 8);
  EXPECT_EQ(PositionBucket(3, 2, 4), 3);
}

TEST(AttentionTest, SingleTokenReturnsValue) {
  AttentionConfig cfg{2, 2, true};
  auto q = JaggedTensor<double>::FromLengths({1, 2, 3, 4},
                                             std::vector<int64_t>{1}, 4);
  auto v = JaggedTensor<double>::FromLengths({9, 8, 7, 6},
                                             std::vector<int64_t>{1}, 4);
  auto out = JaggedAttention(q, q, v, kNoRab, cfg);
  EXPECT_EQ(out.values(), v.values());
}

TEST(AttentionTest, StatsCountSquaredLengths) {
  AttentionConfig cfg{2, 3, true};
  const std::vector<int64_t> lengths = {3, 0, 5};
  std::vector<double> vals(8 * 6, 0.25);
  auto x = JaggedTensor<double>::FromLengths(vals, lengths, 6);
  std::vector<int64_t> ts(8);
  for (int i = 0; i < 8; ++i) ts[i] = i;
  RabSpec<double> spec;
  spec.time_bucket_table.assign(spec.num_time_buckets, 0.0);
  spec.position_table.assign(2 * spec.max_relative_position + 1, 0.0);
  AttentionStats stats;
  auto rab = ComputeRab(JaggedTensor<int64_t>::FromLengths(ts, lengths), spec,
                        &stats);
  JaggedAttention(x, x, x, &rab, cfg, &stats);
  EXPECT_EQ(stats.score_elements, 9 + 25);
  EXPECT_EQ(stats.rab_elements, 9 + 25);
}

TEST(AttentionTest, RejectsBadShapes) {
  AttentionConfig cfg{2, 2, true};
  auto a = JaggedTensor<double>::FromLengths(std::vector<double>(8, 0.0),
                                             std::vector<int64_t>{2}, 4);
  auto b = JaggedTensor<double>::FromLengths(std::vector<double>(8, 0.0),
                                             std::vector<int64_t>{1, 1}, 4);
  EXPECT_THROW(JaggedAttention(a, b, a, kNoRab, cfg), ValidationError);
  AttentionConfig wide{3, 2, true};
  EXPECT_THROW(JaggedAttention(a, a, a, kNoRab, wide), ValidationError);
  auto bad_rab = JaggedTensor<double>::FromLengths(std::vector<double>(3, 0.0),
                                                   std::vector<int64_t>{3});
  EXPECT_THROW(JaggedAttention(a, a, a, &bad_rab, cfg), ValidationError);
}

TEST(RabTest, RejectsDecreasingTimestamps) {
  RabSpec<double> spec;
  spec.time_bucket_table.assign(spec.num_time_buckets, 0.0);
  spec.position_table.assign(2 * spec.max_relative_position + 1, 0.0);
  auto ts = JaggedTensor<int64_t>::FromLengths({5, 3},
                                               std::vector<int64_t>{2});
  EXPECT_THROW(ComputeRab(ts, spec), ValidationError);
  spec.position_table.pop_back();
  EXPECT_THROW(ComputeRab(ts, spec), ValidationError);
}

TEST(AttentionTest, CausalOutputIgnoresLaterTokens) {
  AttentionConfig cfg{1, 2, true};
  std::vector<double> a = {1, 0, 0, 1, 1, 1};
  std::vector<double> b = {1, 0, 0, 1, -5, 7};
  auto lengths = std::vector<int64_t>{3};
  auto qa = JaggedTensor<double>::FromLengths(a, lengths, 2);
  auto qb = JaggedTensor<double>::FromLengths(b, lengths, 2);
  auto oa = JaggedAttention(qa, qa, qa, kNoRab, cfg);
  auto ob = JaggedAttention(qb, qb, qb, kNoRab, cfg);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(oa.values()[i], ob.values()[i]);
}

TEST(AttentionOracleTest, DoubleMatchesDenseMaskedOracle) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 40; ++i) {
    EXPECT_LE(oracle::AttentionOracleError<double>(rng, i % 2 == 0), 1e-10);
  }
}

TEST(AttentionOracleTest, FloatMatchesDenseMaskedOracle) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 40; ++i) {
    EXPECT_LE(oracle::AttentionOracleError<float>(rng, i % 2 == 1), 1e-5);
  }
}

}  // namespace
}  // namespace jaggedrec
