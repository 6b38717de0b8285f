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
#include "jaggedrec/load_balancer.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "jaggedrec/errors.h"
#include "jaggedrec/workload.h"

namespace jaggedrec {
namespace {

std::vector<SampleMeta> RandomBatch(std::mt19937_64& rng, int64_t n,
                                    int64_t max_tokens) {
  std::vector<SampleMeta> out(n);
  for (int64_t i = 0; i < n; ++i) {
    out[i] = SampleMeta{i, 1 + static_cast<int64_t>(rng() % max_tokens)};
  }
  return out;
}

// LPT by linear scan: descending tokens (stable), least-loaded worker with
// the lowest index.
std::vector<int64_t> LptLoadsOracle(std::vector<SampleMeta> batch, int64_t m) {
  std::stable_sort(batch.begin(), batch.end(), [](auto& a, auto& b) {
    return a.token_count > b.token_count;
  });
  std::vector<int64_t> loads(m, 0);
  for (const auto& s : batch) {
    int64_t best = 0;
    for (int64_t w = 1; w < m; ++w) {
      if (loads[w] < loads[best]) best = w;
    }
    loads[best] += s.token_count;
  }
  return loads;
}

void ExpectPartition(const WorkerAssignment& a,
                     const std::vector<SampleMeta>& batch) {
  std::multiset<int64_t> seen;
  for (size_t w = 0; w < a.samples.size(); ++w) {
    int64_t load = 0;
    for (int64_t id : a.samples[w]) {
      seen.insert(id);
      load += batch[id].token_count;
    }
    EXPECT_EQ(load, a.loads[w]);
  }
  ASSERT_EQ(seen.size(), batch.size());
  for (size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(seen.count(i), 1u);
}

TEST(LptTest, MatchesScanOracleAndBound) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int64_t n = 1 + rng() % 200;
    const int64_t m = 1 + rng() % 20;
    const auto batch = RandomBatch(rng, n, 1 + rng() % 3000);
    const WorkerAssignment a = GlobalTokenReallocate(batch, m);
    ExpectPartition(a, batch);
    EXPECT_EQ(a.loads, LptLoadsOracle(batch, m));
    int64_t total = 0;
    int64_t biggest = 0;
    for (const auto& s : batch) {
      total += s.token_count;
      biggest = std::max(biggest, s.token_count);
    }
    // Greedy list-scheduling bound: makespan <= total / m + largest job.
    const int64_t makespan = *std::max_element(a.loads.begin(), a.loads.end());
    EXPECT_LE(makespan * m, total + m * biggest);
    EXPECT_EQ(a.has_empty_worker, n < m);
  }
}

TEST(LptTest, NeverWorseThanRoundRobinOnMakespanProperty) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const auto batch = RandomBatch(rng, 64, 2048);
    const int64_t m = 2 + rng() % 15;
    const auto lpt = GlobalTokenReallocate(batch, m);
    const auto rr = FixedCountRoundRobin(batch, m);
    ExpectPartition(rr, batch);
    // LPT is within 4/3 of optimal and optimal <= round robin.
    EXPECT_LE(3 * *std::max_element(lpt.loads.begin(), lpt.loads.end()),
              4 * *std::max_element(rr.loads.begin(), rr.loads.end()));
  }
}

TEST(RoundRobinTest, DegenerateSingleSample) {
  const std::vector<SampleMeta> batch = {SampleMeta{0, 777}};
  for (int64_t m : {2, 5, 16}) {
    const auto r = MakeImbalanceReport(FixedCountRoundRobin(batch, m), 1e-3);
    EXPECT_EQ(r.max_token_diff, 777);
    const auto l = MakeImbalanceReport(GlobalTokenReallocate(batch, m), 1e-3);
    EXPECT_EQ(l.max_token_diff, 777);
  }
}

TEST(ImbalanceReportTest, Arithmetic) {
  WorkerAssignment a;
  a.samples = {{0}, {1}};
  a.loads = {100, 60};
  const auto r = MakeImbalanceReport(a, 0.5, SyncModel{10.0});
  EXPECT_EQ(r.max_token_diff, 40);
  EXPECT_DOUBLE_EQ(r.imbalance_delay_s, 20.0);
  EXPECT_DOUBLE_EQ(r.step_latency_s, 60.0);
  EXPECT_DOUBLE_EQ(r.imbalance_ratio, 20.0 / 60.0);
  EXPECT_THROW(MakeImbalanceReport(a, 0.0), ValidationError);
}

TEST(ImbalanceReportTest, CsvRowRecomputable) {
  WorkerAssignment a;
  a.samples = {{0}, {1}};
  a.loads = {300, 100};
  const auto r = MakeImbalanceReport(a, 1e-3);
  const std::string row = ImbalanceCsvRow("x", r);
  EXPECT_EQ(row, "x,200,300.000000,200.000000,66.6667");
  EXPECT_EQ(ImbalanceCsvHeader(),
            "strategy,max_token_diff,step_latency_ms,imbalance_delay_ms,"
            "imbalance_ratio_pct");
}

TEST(WeightedAggregateTest, EqualsFullBatchGradientProperty) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = 1024;
    const int64_t dim = 8;
    std::vector<std::vector<double>> per_sample(n, std::vector<double>(dim));
    for (auto& g : per_sample) {
      for (auto& x : g) x = u(rng);
    }
    std::vector<double> full(dim, 0.0);
    for (const auto& g : per_sample) {
      for (int64_t d = 0; d < dim; ++d) full[d] += g[d];
    }
    for (auto& x : full) x /= n;

    const int64_t m = 2 + rng() % 15;
    std::vector<int64_t> owner(n);
    for (int64_t i = 0; i < n; ++i) owner[i] = i < m ? i : rng() % m;
    std::vector<std::vector<double>> grads(m, std::vector<double>(dim, 0.0));
    std::vector<int64_t> counts(m, 0);
    for (int64_t i = 0; i < n; ++i) {
      ++counts[owner[i]];
      for (int64_t d = 0; d < dim; ++d) grads[owner[i]][d] += per_sample[i][d];
    }
    for (int64_t w = 0; w < m; ++w) {
      for (auto& x : grads[w]) x /= counts[w];
    }
    const auto agg = WeightedGradAggregate(grads, counts);
    for (int64_t d = 0; d < dim; ++d) EXPECT_NEAR(agg[d], full[d], 1e-12);
  }
}

TEST(WeightedAggregateTest, RejectsBadInput) {
  std::vector<std::vector<double>> g = {{1.0}, {2.0, 3.0}};
  EXPECT_THROW(WeightedGradAggregate(g, std::vector<int64_t>{1, 1}),
               ValidationError);
  std::vector<std::vector<double>> h = {{1.0}};
  EXPECT_THROW(WeightedGradAggregate(h, std::vector<int64_t>{0}),
               ValidationError);
  EXPECT_THROW(WeightedGradAggregate(h, std::vector<int64_t>{1, 2}),
               ValidationError);
}

TEST(DynamicBatchTest, RespectsThresholdAndCoversStream) {
  std::mt19937_64 rng(34);
  const auto stream = RandomBatch(rng, 500, 300);
  const int64_t threshold = DefaultTokenThreshold(stream, 8);
  const DynamicBatchPlan plan = DynamicBatchScale(stream, threshold, 4);
  int64_t next = 0;
  for (const auto& step : plan.steps) {
    for (size_t w = 0; w < step.samples.size(); ++w) {
      EXPECT_LE(step.loads[w], threshold);
      for (int64_t id : step.samples[w]) EXPECT_EQ(id, next++);
    }
  }
  EXPECT_EQ(next, 500);
  EXPECT_EQ(plan.max_sample_tokens,
            std::max_element(stream.begin(), stream.end(),
                             [](auto& a, auto& b) {
                               return a.token_count < b.token_count;
                             })
                ->token_count);
  std::vector<SampleMeta> big = {SampleMeta{0, 10}};
  EXPECT_THROW(DynamicBatchScale(big, 9, 1), ValidationError);
}

TEST(DefaultThresholdTest, MeanTimesBatchButAtLeastMax) {
  std::vector<SampleMeta> s = {{0, 2}, {1, 4}, {2, 30}};
  EXPECT_EQ(DefaultTokenThreshold(s, 2), 30);
  EXPECT_EQ(DefaultTokenThreshold(s, 10), 120);
}

TEST(SampleCsvTest, ParsesWithHeader) {
  std::istringstream is("sample_id,token_count\n0,5\n1,7\n");
  const auto s = ReadSampleCsv(is);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].token_count, 7);
  std::istringstream bad("a,b\n0,x\n");
  EXPECT_THROW(ReadSampleCsv(bad), ValidationError);
}

TEST(ZipfBatchTest, ReallocationCutsSpread) {
  LengthDistribution d;
  d.kind = LengthDistKind::kZipf;
  d.max_len = 2048;
  d.zipf_exponent = 1.2;
  const auto batch = ToSampleMetas(GenerateLengths(d, 1024, 1));
  const auto rr = MakeImbalanceReport(FixedCountRoundRobin(batch, 16), 1e-6);
  const auto lpt = MakeImbalanceReport(GlobalTokenReallocate(batch, 16), 1e-6);
  EXPECT_GE(rr.max_token_diff, 10 * lpt.max_token_diff);
}

}  // namespace
}  // namespace jaggedrec
