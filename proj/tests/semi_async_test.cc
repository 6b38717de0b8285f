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
#include "jaggedrec/semi_async.h"

#include <algorithm>
#include <deque>
#include <random>
#include <unordered_set>

#include "gtest/gtest.h"
#include "jaggedrec/errors.h"

namespace jaggedrec {
namespace {

using P = Phase;

TEST(StalenessConfigTest, TauZeroIffSync) {
  EXPECT_NO_THROW(StalenessConfig::Sync().Validate());
  EXPECT_NO_THROW(StalenessConfig::SemiAsync(3).Validate());
  EXPECT_THROW((StalenessConfig{0, TrainMode::kSemiAsync}.Validate()),
               ValidationError);
  EXPECT_THROW((StalenessConfig{1, TrainMode::kSync}.Validate()),
               ValidationError);
  EXPECT_THROW((StalenessConfig{-1, TrainMode::kSemiAsync}.Validate()),
               ValidationError);
  EXPECT_EQ(ParseTrainMode("semi-async"), TrainMode::kSemiAsync);
  EXPECT_EQ(TrainModeName(ParseTrainMode("sync")), "sync");
  EXPECT_THROW(ParseTrainMode("async"), ValidationError);
}

TEST(ReadVersionTest, ClampsAtZero) {
  EXPECT_EQ(ReadVersion(0, 1), 0);
  EXPECT_EQ(ReadVersion(5, 1), 4);
  EXPECT_EQ(ReadVersion(5, 0), 5);
  EXPECT_EQ(ReadVersion(2, 7), 0);
  EXPECT_THROW(ReadVersion(-1, 0), ValidationError);
}

TEST(ScheduleDagTest, SyncSerializesSparseWork) {
  const ScheduleDag dag = SemiAsyncSchedule(5, TrainMode::kSync);
  for (int64_t i = 0; i + 1 < 5; ++i) {
    const int64_t bwd = ScheduleDag::Index(i, P::kSparseBwd);
    const int64_t next = ScheduleDag::Index(i + 1, P::kSparseFwd);
    EXPECT_TRUE(dag.HasEdge(bwd, next));
    EXPECT_FALSE(dag.MayOverlap(bwd, next));
  }
  // Total order: each event reaches every later one.
  for (int64_t a = 0; a < dag.size(); ++a) {
    for (int64_t b = a + 1; b < dag.size(); ++b) {
      EXPECT_TRUE(dag.Reaches(a, b)) << a << " " << b;
    }
  }
}

TEST(ScheduleDagTest, SemiAsyncOverlapsNextLookupWithBackward) {
  const ScheduleDag dag = SemiAsyncSchedule(6, TrainMode::kSemiAsync);
  for (int64_t i = 0; i + 1 < 6; ++i) {
    const int64_t next_fwd = ScheduleDag::Index(i + 1, P::kSparseFwd);
    EXPECT_TRUE(dag.MayOverlap(ScheduleDag::Index(i, P::kSparseBwd), next_fwd));
    EXPECT_TRUE(dag.MayOverlap(ScheduleDag::Index(i, P::kDenseBwd), next_fwd));
    EXPECT_TRUE(dag.Reaches(ScheduleDag::Index(i, P::kSparseFwd), next_fwd));
  }
  // The lead is bounded at one step.
  for (int64_t i = 0; i + 2 < 6; ++i) {
    EXPECT_TRUE(dag.Reaches(ScheduleDag::Index(i, P::kSparseBwd),
                            ScheduleDag::Index(i + 2, P::kSparseFwd)));
  }
  // Dense work stays in order.
  for (int64_t i = 0; i + 1 < 6; ++i) {
    EXPECT_TRUE(dag.Reaches(ScheduleDag::Index(i, P::kDenseBwd),
                            ScheduleDag::Index(i + 1, P::kDenseFwd)));
  }
}

TEST(ScheduleDagTest, TopologicalOrderRespectsEdgesAndRejectsCycles) {
  for (TrainMode mode : {TrainMode::kSync, TrainMode::kSemiAsync}) {
    const ScheduleDag dag = SemiAsyncSchedule(7, mode);
    const auto order = dag.TopologicalOrder();
    std::vector<int64_t> pos(order.size());
    for (size_t k = 0; k < order.size(); ++k) pos[order[k]] = k;
    for (int64_t e = 0; e < dag.size(); ++e) {
      for (int64_t p : dag.preds(e)) EXPECT_LT(pos[p], pos[e]);
    }
  }
  std::vector<std::vector<int64_t>> cyc(4);
  cyc[0] = {3};
  cyc[1] = {0};
  cyc[2] = {1};
  cyc[3] = {2};
  EXPECT_THROW(ScheduleDag(1, cyc), ValidationError);
  EXPECT_EQ(PhaseName(P::kDenseBwd), "dense_bwd");
}

// Replays the event order of the semi-async DAG with tau = 1: the forward of
// step t runs before the update of step t - 1 lands.
TEST(StalenessMonitorTest, CorrectDelayedScheduleHasNoViolationsProperty) {
  std::mt19937_64 rng(11);
  for (int64_t tau : {0, 1, 2, 4}) {
    StalenessMonitor mon;
    std::deque<std::pair<int64_t, std::vector<int64_t>>> pending;
    for (int64_t t = 0; t < 300; ++t) {
      // Apply every update older than the window.
      while (!pending.empty() && pending.front().first < t - tau) {
        mon.RecordUpdate(pending.front().first, pending.front().second);
        pending.pop_front();
      }
      std::vector<int64_t> ids(1 + rng() % 12);
      for (auto& id : ids) id = rng() % 30;
      mon.RecordRead(t, tau, ids);
      pending.emplace_back(t, ids);
      // Randomly apply some in-window updates early; that is also legal.
      while (!pending.empty() && rng() % 3 == 0 && pending.front().first < t) {
        mon.RecordUpdate(pending.front().first, pending.front().second);
        pending.pop_front();
      }
    }
    EXPECT_EQ(mon.violations(), 0) << "tau=" << tau;
    EXPECT_GT(mon.reads(), 0);
  }
}

TEST(StalenessMonitorTest, FlagsMissingAndFutureUpdates) {
  StalenessMonitor late;
  const std::vector<int64_t> a = {4};
  late.RecordRead(0, 1, a);
  late.RecordRead(1, 1, a);
  late.RecordRead(2, 1, a);  // step 0 update never applied
  EXPECT_EQ(late.violations(), 1);
  ASSERT_FALSE(late.messages().empty());
  EXPECT_NE(late.messages()[0].find("misses the update of step 0"),
            std::string::npos);

  StalenessMonitor sync_late;
  sync_late.RecordRead(0, 0, a);
  sync_late.RecordRead(1, 0, a);
  EXPECT_EQ(sync_late.violations(), 1);

  StalenessMonitor future;
  future.RecordRead(0, 1, a);
  future.RecordUpdate(3, a);
  future.RecordRead(2, 1, a);
  EXPECT_GE(future.violations(), 1);
}

TEST(StalenessMonitorTest, DuplicateIdsCountOnce) {
  StalenessMonitor mon;
  const std::vector<int64_t> ids = {1, 1, 2, 1};
  mon.RecordRead(0, 0, ids);
  EXPECT_EQ(mon.reads(), 2);
}

double AlphaOracle(const std::vector<std::vector<int64_t>>& ids, size_t w) {
  double sum = 0.0;
  int n = 0;
  for (size_t t = w; t < ids.size(); ++t) {
    std::unordered_set<int64_t> cur(ids[t].begin(), ids[t].end());
    if (cur.empty()) continue;
    int hit = 0;
    for (int64_t id : cur) {
      bool seen = false;
      for (size_t k = t - w; k < t; ++k) {
        seen |= std::count(ids[k].begin(), ids[k].end(), id) > 0;
      }
      hit += seen;
    }
    sum += static_cast<double>(hit) / cur.size();
    ++n;
  }
  return n ? sum / n : 0.0;
}

TEST(EstimateAlphaTest, MatchesBruteForceProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<int64_t>> ids(2 + rng() % 10);
    for (auto& step : ids) {
      step.resize(rng() % 8);
      for (auto& id : step) id = rng() % 15;
    }
    const int64_t w = 1 + rng() % 3;
    const SparsityEstimate e = EstimateAlpha(ids, w);
    EXPECT_NEAR(e.alpha, AlphaOracle(ids, w), 1e-12);
    EXPECT_GE(e.alpha, 0.0);
    EXPECT_LE(e.alpha, 1.0);
  }
}

TEST(EstimateAlphaTest, Extremes) {
  const std::vector<std::vector<int64_t>> same = {{1, 2}, {2, 1}, {1, 2, 2}};
  EXPECT_DOUBLE_EQ(EstimateAlpha(same).alpha, 1.0);
  EXPECT_EQ(EstimateAlpha(same).num_unique, 2);
  const std::vector<std::vector<int64_t>> disjoint = {{1}, {2}, {3}};
  EXPECT_DOUBLE_EQ(EstimateAlpha(disjoint).alpha, 0.0);
  const std::vector<std::vector<int64_t>> one = {{1}};
  EXPECT_THROW(EstimateAlpha(one), ValidationError);
}

TEST(EvalBoundTest, ClosedFormAndMonotonicity) {
  BoundParams p;
  p.lipschitz = 4.0;
  p.sigma = 0.5;
  p.iterations = 100.0;
  p.alpha = 0.25;
  p.tau = 2.0;
  // 2 * 0.5 / 10 + 4 / 100 + 0.25 * 4 * 2 / 100
  EXPECT_DOUBLE_EQ(EvalBound(p), 0.1 + 0.04 + 0.02);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    BoundParams q;
    q.lipschitz = 0.1 + 5 * u(rng);
    q.sigma = u(rng);
    q.iterations = 1 + 1000 * u(rng);
    q.alpha = u(rng);
    q.tau = 0;
    const double base = EvalBound(q);
    q.tau = 1 + trial % 4;
    EXPECT_GE(EvalBound(q), base);
    const double at_t = EvalBound(q);
    q.iterations *= 2;
    EXPECT_LT(EvalBound(q), at_t);
    q.alpha = 0.0;
    q.tau = 0;
    const double no_delay = EvalBound(q);
    q.tau = 7;
    EXPECT_DOUBLE_EQ(EvalBound(q), no_delay);
  }
  p.alpha = 1.5;
  EXPECT_THROW(EvalBound(p), ValidationError);
  p.alpha = 0.5;
  p.iterations = 0.5;
  EXPECT_THROW(EvalBound(p), ValidationError);
}

}  // namespace
}  // namespace jaggedrec
