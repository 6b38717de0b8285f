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
#ifndef JAGGEDREC_HSP_H_
#define JAGGEDREC_HSP_H_

// Hierarchical sparse parallelism on a simulated cluster. N devices form M
// groups of I = N / M. Every group holds a full replica of the embedding
// tables, sharded table-wise over its I devices; lookups use all-to-all
// inside the group only, and gradients are all-reduced across groups so that
// every replica applies the same AdaGrad update.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "jaggedrec/embedding.h"

namespace jaggedrec {

struct ClusterTopology {
  int64_t num_devices = 16;      // N
  int64_t num_groups = 1;        // M
  int64_t devices_per_node = 8;  // placement for the bandwidth choice
  double intra_node_bw = 56e9;   // bytes / s
  double inter_node_bw = 25e9;   // bytes / s
  double per_message_latency_s = 20e-6;

  int64_t group_size() const { return num_devices / num_groups; }  // I
  int64_t group_of(int64_t device) const { return device / group_size(); }
  bool same_node(int64_t a, int64_t b) const {
    return a / devices_per_node == b / devices_per_node;
  }
  void Validate() const;
};

// Table-wise sharding inside each group, identical in every group.
struct ShardPlan {
  int64_t num_groups = 1;
  int64_t group_size = 1;
  std::vector<std::string> table_names;
  std::vector<int64_t> owner_local;  // per table, device index inside a group

  int64_t TableIndex(const std::string& name) const;
  int64_t Owner(int64_t table, int64_t group) const {
    return group * group_size + owner_local[table];
  }
};

// Tables sorted by descending row count (stable), dealt round-robin to the I
// devices of a group.
ShardPlan BuildShardPlan(std::span<const EmbeddingTable> tables,
                         const ClusterTopology& topology);

enum class CommKind { kAllToAllIds, kAllToAllEmb, kAllReduceGrad };
std::string CommKindName(CommKind kind);

struct CommMessage {
  int64_t step = 0;
  int64_t src = 0;
  int64_t dst = 0;
  int64_t bytes = 0;
  CommKind kind = CommKind::kAllToAllIds;
};

struct CommVolumeLog {
  std::vector<CommMessage> messages;

  int64_t TotalBytes(CommKind kind) const;
  int64_t TotalAllToAllBytes() const;
  // Largest number of distinct all-to-all peers any device sends to.
  int64_t MaxAllToAllFanout() const;
  // Number of all-to-all messages whose endpoints lie in different groups.
  int64_t CrossGroupAllToAll(const ClusterTopology& topology) const;
  void WriteCsv(std::ostream& os) const;  // step,src,dst,bytes,kind
};

inline constexpr int64_t kIdBytes = 8;
inline constexpr int64_t kEmbElemBytes = 4;

struct RouteResult {
  std::vector<LookupResult> per_device;
  CommVolumeLog log;
};

// Two-phase lookup for every device: unique IDs go to the owning device of
// each table inside the requester's group, embeddings come back. `replicas`
// holds one table set per group (or a single set shared by all groups).
RouteResult RouteLookup(std::span<const KeyedJaggedTensor> device_batches,
                        std::span<const std::vector<EmbeddingTable>> replicas,
                        const ShardPlan& plan, const ClusterTopology& topology,
                        int64_t step = 0);

// Sums per-index values of every contribution, visiting groups in ascending
// order and each group's contributions in list order.
SparseGradient SparseAllReduce(
    std::span<const std::vector<SparseGradient>> per_group);

// As above, and logs one message per ordered pair of groups carrying the
// sender group's activated (index, value) entries between the table owners.
SparseGradient SparseAllReduceLogged(
    std::span<const std::vector<SparseGradient>> per_group,
    const ShardPlan& plan, int64_t table, int64_t step, CommVolumeLog& log);

// S += G^2; W -= lr * G / sqrt(S + eps), on the touched rows only.
void AdagradStep(EmbeddingTable& table, const SparseGradient& grad, double lr,
                 double eps);

struct HspTrainConfig {
  double learning_rate = 0.05;
  double epsilon = 1e-8;
  bool record_trajectory = true;
};

// Per-device batches for each step: workload[step][device].
using HspWorkload = std::vector<std::vector<KeyedJaggedTensor>>;

// Regression target for row `id` of a table: the loss of one occurrence is
// 0.5 * ||e_id - target(id)||^2.
double HspTarget(int64_t table, int64_t id, int64_t d);

struct HspTrainResult {
  std::vector<std::vector<EmbeddingTable>> replicas;  // final state per group
  CommVolumeLog log;
  // Per step, group 0's concatenated (weights, accumulator) of every table.
  std::vector<std::vector<double>> trajectory;
  int64_t steps_checked = 0;
};

// Runs the full HSP step loop. After every step all group replicas must be
// bitwise identical; a mismatch throws InvariantError.
HspTrainResult HspTrain(const HspWorkload& workload,
                        const std::vector<EmbeddingTable>& initial_tables,
                        const ClusterTopology& topology,
                        const HspTrainConfig& config = {});

struct CommLatency {
  std::map<CommKind, double> seconds;
  double all_to_all() const;
  double total() const;
};

// Linear cost model: each message costs latency + bytes / bandwidth, where the
// bandwidth depends on whether both endpoints sit on the same node.
CommLatency ModelCommLatency(const CommVolumeLog& log,
                             const ClusterTopology& topology);

// A Zipf-skewed multi-table HSP workload.
HspWorkload MakeZipfHspWorkload(std::span<const EmbeddingTable> tables,
                                int64_t steps, int64_t num_devices,
                                int64_t samples_per_device, int64_t max_len,
                                double zipf_exponent, uint64_t seed);

}  // namespace jaggedrec

#endif  // JAGGEDREC_HSP_H_
