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
#include "jaggedrec/hsp.h"

#include <cmath>
#include <cstring>
#include <map>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "jaggedrec/errors.h"
#include "jaggedrec/workload.h"

namespace jaggedrec {
namespace {

ClusterTopology Topo(int64_t n, int64_t m) {
  ClusterTopology t;
  t.num_devices = n;
  t.num_groups = m;
  return t;
}

bool Bitwise(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Single-process trainer written from the update rule alone: per device, sum
// each ID's gradient rows in position order; fold devices in index order; one
// AdaGrad step per touched row.
std::vector<EmbeddingTable> CentralizedOracle(
    const HspWorkload& workload, std::vector<EmbeddingTable> tables,
    double lr, double eps) {
  for (const auto& step : workload) {
    std::vector<std::map<int64_t, std::vector<double>>> total(tables.size());
    for (const KeyedJaggedTensor& kjt : step) {
      for (int64_t k = 0; k < kjt.num_keys(); ++k) {
        size_t t = 0;
        while (tables[t].name != kjt.keys[k]) ++t;
        const EmbeddingTable& table = tables[t];
        const auto [b, e] = kjt.key_range(k);
        std::map<int64_t, std::vector<double>> local;
        for (int64_t i = b; i < e; ++i) {
          const int64_t id = kjt.values[i];
          auto& row = local[id];
          row.resize(table.dim, 0.0);
          for (int64_t d = 0; d < table.dim; ++d) {
            const double target =
                0.5 * std::sin(0.37 * id + 1.3 * d + 0.7 * static_cast<int>(t));
            row[d] += table.weights[id * table.dim + d] - target;
          }
        }
        for (auto& [id, row] : local) {
          auto it = total[t].find(id);
          if (it == total[t].end()) {
            total[t][id] = row;
          } else {
            for (size_t d = 0; d < row.size(); ++d) it->second[d] += row[d];
          }
        }
      }
    }
    for (size_t t = 0; t < tables.size(); ++t) {
      EmbeddingTable& table = tables[t];
      for (const auto& [id, g] : total[t]) {
        for (int64_t d = 0; d < table.dim; ++d) {
          double& s = table.optimizer_state[id * table.dim + d];
          s += g[d] * g[d];
          table.weights[id * table.dim + d] -= lr / std::sqrt(s + eps) * g[d];
        }
      }
    }
  }
  return tables;
}

TEST(TopologyTest, Validation) {
  EXPECT_NO_THROW(Topo(16, 4).Validate());
  EXPECT_THROW(Topo(16, 3).Validate(), ValidationError);
  EXPECT_THROW(Topo(0, 1).Validate(), ValidationError);
  ClusterTopology t = Topo(8, 2);
  t.inter_node_bw = 0;
  EXPECT_THROW(t.Validate(), ValidationError);
  EXPECT_EQ(Topo(16, 4).group_size(), 4);
  EXPECT_EQ(Topo(16, 4).group_of(9), 2);
}

TEST(ShardPlanTest, LargestTablesFirstRoundRobin) {
  const auto tables =
      MakeRandomTables(std::vector<int64_t>{5, 50, 20, 50, 1}, 2, 1);
  const ShardPlan plan = BuildShardPlan(tables, Topo(6, 2));
  // Order by rows: t1, t3, t2, t0, t4 -> local owners 0, 1, 2, 0, 1.
  EXPECT_EQ(plan.owner_local, (std::vector<int64_t>{0, 0, 2, 1, 1}));
  EXPECT_EQ(plan.Owner(2, 1), 5);
  EXPECT_EQ(plan.TableIndex("t3"), 3);
  EXPECT_THROW(plan.TableIndex("zz"), ValidationError);
}

TEST(RouteLookupTest, HandComputedBytes) {
  const auto tables = MakeRandomTables(std::vector<int64_t>{10}, 2, 1);
  const ClusterTopology topo = Topo(4, 2);
  const ShardPlan plan = BuildShardPlan(tables, topo);
  std::vector<KeyedJaggedTensor> batches(4);
  const std::vector<std::vector<int64_t>> ids = {{1}, {3, 3, 5}, {}, {7}};
  for (int d = 0; d < 4; ++d) {
    batches[d].keys = {"t0"};
    batches[d].batch_size = 1;
    batches[d].lengths = {static_cast<int64_t>(ids[d].size())};
    batches[d].values = ids[d];
  }
  const std::vector<std::vector<EmbeddingTable>> replicas = {tables};
  const RouteResult r = RouteLookup(batches, replicas, plan, topo, 7);
  // Device 1 asks owner 0 for 2 unique IDs; device 3 asks owner 2 for 1.
  ASSERT_EQ(r.log.messages.size(), 4u);
  EXPECT_EQ(r.log.TotalBytes(CommKind::kAllToAllIds), 2 * 8 + 1 * 8);
  EXPECT_EQ(r.log.TotalBytes(CommKind::kAllToAllEmb), 2 * 2 * 4 + 1 * 2 * 4);
  EXPECT_EQ(r.log.MaxAllToAllFanout(), 1);
  EXPECT_EQ(r.log.CrossGroupAllToAll(topo), 0);
  for (const auto& m : r.log.messages) EXPECT_EQ(m.step, 7);
  EXPECT_EQ(r.per_device[1].embeddings[0].values(),
            LookupJagged(batches[1], tables).embeddings[0].values());
  std::ostringstream os;
  r.log.WriteCsv(os);
  EXPECT_EQ(os.str().substr(0, 24), "step,src,dst,bytes,kind\n");
}

TEST(SparseAllReduceTest, LeftFoldInGroupOrder) {
  SparseGradient a{1, {1, 4}, {1.0, 2.0}};
  SparseGradient b{1, {4}, {10.0}};
  SparseGradient c{1, {0, 1}, {5.0, 0.5}};
  std::vector<std::vector<SparseGradient>> groups = {{a, b}, {c}};
  const SparseGradient out = SparseAllReduce(groups);
  EXPECT_EQ(out.indices, (std::vector<int64_t>{0, 1, 4}));
  EXPECT_EQ(out.values, (std::vector<double>{5.0, 1.5, 12.0}));
  std::vector<std::vector<SparseGradient>> bad = {{a}, {SparseGradient{2, {0}, {1, 1}}}};
  EXPECT_THROW(SparseAllReduce(bad), ValidationError);
}

TEST(SparseAllReduceTest, LoggedVolumeIsPairwiseBetweenOwners) {
  const auto tables = MakeRandomTables(std::vector<int64_t>{10}, 3, 1);
  const ClusterTopology topo = Topo(6, 3);
  const ShardPlan plan = BuildShardPlan(tables, topo);
  SparseGradient a{3, {1, 2}, std::vector<double>(6, 1.0)};
  SparseGradient b{3, {2}, std::vector<double>(3, 1.0)};
  std::vector<std::vector<SparseGradient>> groups = {{a, b}, {}, {b}};
  CommVolumeLog log;
  SparseAllReduceLogged(groups, plan, 0, 0, log);
  // Group 0 has 2 active rows, group 2 has 1; each sends to the other two.
  EXPECT_EQ(log.TotalBytes(CommKind::kAllReduceGrad),
            2 * (2 * (8 + 12)) + 2 * (1 * (8 + 12)));
  EXPECT_EQ(log.messages.size(), 4u);
}

TEST(HspTrainTest, EquivalentToCentralizedOracleAcrossGroupCounts) {
  const auto tables =
      MakeRandomTables(std::vector<int64_t>{60, 40, 25, 9}, 4, 3);
  const HspWorkload workload =
      MakeZipfHspWorkload(tables, 100, 8, 2, 5, 1.1, 4);
  const auto oracle = CentralizedOracle(workload, tables, 0.05, 1e-8);
  HspTrainResult first;
  for (int64_t m : {1, 2, 4}) {
    const HspTrainResult r = HspTrain(workload, tables, Topo(8, m));
    EXPECT_EQ(r.steps_checked, 100);
    for (const auto& replica : r.replicas) {
      for (size_t t = 0; t < tables.size(); ++t) {
        EXPECT_TRUE(Bitwise(replica[t].weights, oracle[t].weights)) << m;
        EXPECT_TRUE(
            Bitwise(replica[t].optimizer_state, oracle[t].optimizer_state));
      }
    }
    if (m == 1) {
      first = r;
    } else {
      ASSERT_EQ(r.trajectory.size(), first.trajectory.size());
      for (size_t s = 0; s < r.trajectory.size(); ++s) {
        ASSERT_TRUE(Bitwise(r.trajectory[s], first.trajectory[s])) << s;
      }
    }
    EXPECT_EQ(r.log.CrossGroupAllToAll(Topo(8, m)), 0);
  }
}

TEST(HspTrainTest, VolumeShrinksWithGroupsProperty) {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 10; ++trial) {
    const auto tables = MakeRandomTables(
        std::vector<int64_t>{200, 100, 50, 30, 10, 7, 5, 3}, 4, rng());
    const HspWorkload workload =
        MakeZipfHspWorkload(tables, 3, 16, 4, 12, 1.2, rng());
    int64_t prev = INT64_MAX;
    for (int64_t m : {1, 2, 4, 8, 16}) {
      HspTrainConfig cfg;
      cfg.record_trajectory = false;
      const HspTrainResult r = HspTrain(workload, tables, Topo(16, m), cfg);
      const int64_t bytes = r.log.TotalAllToAllBytes();
      EXPECT_LE(bytes, prev) << "M=" << m;
      prev = bytes;
      const int64_t i = 16 / m;
      EXPECT_LE(r.log.MaxAllToAllFanout(), i - 1);
      EXPECT_EQ(r.log.CrossGroupAllToAll(Topo(16, m)), 0);
      if (m == 16) {
        EXPECT_EQ(bytes, 0);
      }
    }
  }
}

TEST(HspTrainTest, FanoutReachesGroupSizeMinusOne) {
  const auto tables =
      MakeRandomTables(std::vector<int64_t>{500, 400, 300, 200}, 4, 5);
  const HspWorkload workload =
      MakeZipfHspWorkload(tables, 2, 16, 8, 16, 1.2, 6);
  for (int64_t m : {1, 2, 4}) {
    HspTrainConfig cfg;
    cfg.record_trajectory = false;
    const HspTrainResult r = HspTrain(workload, tables, Topo(16, m), cfg);
    EXPECT_EQ(r.log.MaxAllToAllFanout(), 16 / m - 1) << m;
  }
}

TEST(CommLatencyTest, PerMessagePlusBandwidth) {
  ClusterTopology t = Topo(16, 1);
  CommVolumeLog log;
  log.messages.push_back({0, 0, 1, 56000, CommKind::kAllToAllIds});
  log.messages.push_back({0, 0, 9, 25000, CommKind::kAllToAllEmb});
  log.messages.push_back({0, 0, 9, 0, CommKind::kAllReduceGrad});
  const CommLatency lat = ModelCommLatency(log, t);
  EXPECT_DOUBLE_EQ(lat.seconds.at(CommKind::kAllToAllIds), 20e-6 + 1e-6);
  EXPECT_DOUBLE_EQ(lat.seconds.at(CommKind::kAllToAllEmb), 20e-6 + 1e-6);
  EXPECT_DOUBLE_EQ(lat.all_to_all(), 42e-6);
  EXPECT_DOUBLE_EQ(lat.total(), 62e-6);
  EXPECT_EQ(CommKindName(CommKind::kAllReduceGrad), "all_reduce_grad");
}

TEST(RouteLookupTest, RejectsMismatchedInputs) {
  const auto tables = MakeRandomTables(std::vector<int64_t>{4}, 2, 1);
  const ShardPlan plan = BuildShardPlan(tables, Topo(4, 2));
  std::vector<KeyedJaggedTensor> three(3);
  const std::vector<std::vector<EmbeddingTable>> replicas = {tables};
  EXPECT_THROW(RouteLookup(three, replicas, plan, Topo(4, 2)),
               ValidationError);
  std::vector<KeyedJaggedTensor> four(4);
  EXPECT_THROW(RouteLookup(four, replicas, plan, Topo(4, 1)), ValidationError);
}

}  // namespace
}  // namespace jaggedrec
