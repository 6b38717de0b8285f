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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <tuple>

#include "jaggedrec/errors.h"
#include "jaggedrec/workload.h"

namespace jaggedrec {

void ClusterTopology::Validate() const {
  JR_CHECK_ARG(num_devices >= 1, "num_devices must be >= 1");
  JR_CHECK_ARG(num_groups >= 1, "num_groups must be >= 1");
  JR_CHECK_ARG(num_devices % num_groups == 0, "num_devices ", num_devices,
               " is not divisible by num_groups ", num_groups);
  JR_CHECK_ARG(devices_per_node >= 1, "devices_per_node must be >= 1");
  JR_CHECK_ARG(intra_node_bw > 0.0 && inter_node_bw > 0.0,
               "bandwidths must be positive");
  JR_CHECK_ARG(per_message_latency_s >= 0.0,
               "per-message latency must be non-negative");
}

int64_t ShardPlan::TableIndex(const std::string& name) const {
  auto it = std::find(table_names.begin(), table_names.end(), name);
  JR_CHECK_ARG(it != table_names.end(), "no owner for table '", name, "'");
  return it - table_names.begin();
}

ShardPlan BuildShardPlan(std::span<const EmbeddingTable> tables,
                         const ClusterTopology& topology) {
  topology.Validate();
  ShardPlan plan;
  plan.num_groups = topology.num_groups;
  plan.group_size = topology.group_size();
  plan.owner_local.assign(tables.size(), 0);
  for (const EmbeddingTable& t : tables) plan.table_names.push_back(t.name);
  std::vector<size_t> order(tables.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return tables[a].rows > tables[b].rows;
  });
  for (size_t i = 0; i < order.size(); ++i) {
    plan.owner_local[order[i]] = static_cast<int64_t>(i) % plan.group_size;
  }
  return plan;
}

std::string CommKindName(CommKind kind) {
  switch (kind) {
    case CommKind::kAllToAllIds:
      return "all_to_all_ids";
    case CommKind::kAllToAllEmb:
      return "all_to_all_emb";
    case CommKind::kAllReduceGrad:
      return "all_reduce_grad";
  }
  return "unknown";
}

namespace {

bool IsAllToAll(CommKind kind) { return kind != CommKind::kAllReduceGrad; }

}  // namespace

int64_t CommVolumeLog::TotalBytes(CommKind kind) const {
  int64_t total = 0;
  for (const CommMessage& m : messages) {
    if (m.kind == kind) total += m.bytes;
  }
  return total;
}

int64_t CommVolumeLog::TotalAllToAllBytes() const {
  return TotalBytes(CommKind::kAllToAllIds) +
         TotalBytes(CommKind::kAllToAllEmb);
}

int64_t CommVolumeLog::MaxAllToAllFanout() const {
  std::map<int64_t, std::set<int64_t>> peers;
  for (const CommMessage& m : messages) {
    if (IsAllToAll(m.kind)) peers[m.src].insert(m.dst);
  }
  int64_t fanout = 0;
  for (const auto& [src, dsts] : peers) {
    fanout = std::max(fanout, static_cast<int64_t>(dsts.size()));
  }
  return fanout;
}

int64_t CommVolumeLog::CrossGroupAllToAll(
    const ClusterTopology& topology) const {
  int64_t n = 0;
  for (const CommMessage& m : messages) {
    if (IsAllToAll(m.kind) &&
        topology.group_of(m.src) != topology.group_of(m.dst)) {
      ++n;
    }
  }
  return n;
}

void CommVolumeLog::WriteCsv(std::ostream& os) const {
  os << "step,src,dst,bytes,kind\n";
  for (const CommMessage& m : messages) {
    os << m.step << ',' << m.src << ',' << m.dst << ',' << m.bytes << ','
       << CommKindName(m.kind) << '\n';
  }
}

namespace {

using MessageKey = std::tuple<int64_t, int64_t, CommKind>;  // src, dst, kind

void Flush(const std::map<MessageKey, int64_t>& pending, int64_t step,
           CommVolumeLog& log) {
  for (const auto& [key, bytes] : pending) {
    const auto& [src, dst, kind] = key;
    log.messages.push_back(CommMessage{step, src, dst, bytes, kind});
  }
}

int64_t CountUnique(std::span<const int64_t> ids) {
  std::vector<int64_t> sorted(ids.begin(), ids.end());
  std::sort(sorted.begin(), sorted.end());
  return std::unique(sorted.begin(), sorted.end()) - sorted.begin();
}

const std::vector<EmbeddingTable>& ReplicaFor(
    std::span<const std::vector<EmbeddingTable>> replicas, int64_t group) {
  return replicas.size() == 1 ? replicas[0] : replicas[group];
}

}  // namespace

RouteResult RouteLookup(std::span<const KeyedJaggedTensor> device_batches,
                        std::span<const std::vector<EmbeddingTable>> replicas,
                        const ShardPlan& plan, const ClusterTopology& topology,
                        int64_t step) {
  topology.Validate();
  JR_CHECK_ARG(static_cast<int64_t>(device_batches.size()) ==
                   topology.num_devices,
               "got ", device_batches.size(), " device batches for ",
               topology.num_devices, " devices");
  JR_CHECK_ARG(replicas.size() == 1 ||
                   static_cast<int64_t>(replicas.size()) == topology.num_groups,
               "need one replica or one per group");
  JR_CHECK_ARG(plan.group_size == topology.group_size() &&
                   plan.num_groups == topology.num_groups,
               "shard plan does not match topology");

  RouteResult result;
  std::map<MessageKey, int64_t> pending;
  for (int64_t d = 0; d < topology.num_devices; ++d) {
    const KeyedJaggedTensor& kjt = device_batches[d];
    const int64_t group = topology.group_of(d);
    const std::vector<EmbeddingTable>& tables = ReplicaFor(replicas, group);
    for (int64_t k = 0; k < kjt.num_keys(); ++k) {
      const int64_t t = plan.TableIndex(kjt.keys[k]);
      const int64_t owner = plan.Owner(t, group);
      if (owner == d) continue;
      const auto [begin, end] = kjt.key_range(k);
      const int64_t unique = CountUnique(
          std::span<const int64_t>(kjt.values).subspan(begin, end - begin));
      if (unique == 0) continue;
      const int64_t dim = FindTable(tables, kjt.keys[k]).dim;
      pending[{d, owner, CommKind::kAllToAllIds}] += unique * kIdBytes;
      pending[{owner, d, CommKind::kAllToAllEmb}] +=
          unique * dim * kEmbElemBytes;
    }
    // Values come from the owning shard, which is the group's own replica.
    result.per_device.push_back(LookupJagged(kjt, tables));
  }
  Flush(pending, step, result.log);
  return result;
}

SparseGradient SparseAllReduce(
    std::span<const std::vector<SparseGradient>> per_group) {
  int64_t dim = -1;
  std::map<int64_t, std::vector<double>> acc;
  for (const std::vector<SparseGradient>& contributions : per_group) {
    for (const SparseGradient& g : contributions) {
      if (dim < 0) dim = g.dim;
      JR_CHECK_ARG(g.dim == dim, "sparse gradient dims differ: ", g.dim,
                   " vs ", dim);
      for (size_t i = 0; i < g.indices.size(); ++i) {
        std::span<const double> row = g.row(i);
        auto [it, inserted] = acc.try_emplace(g.indices[i]);
        if (inserted) {
          it->second.assign(row.begin(), row.end());
        } else {
          for (int64_t d = 0; d < dim; ++d) it->second[d] += row[d];
        }
      }
    }
  }
  SparseGradient out;
  out.dim = std::max<int64_t>(dim, 0);
  for (auto& [index, values] : acc) {
    out.indices.push_back(index);
    out.values.insert(out.values.end(), values.begin(), values.end());
  }
  return out;
}

SparseGradient SparseAllReduceLogged(
    std::span<const std::vector<SparseGradient>> per_group,
    const ShardPlan& plan, int64_t table, int64_t step, CommVolumeLog& log) {
  SparseGradient out = SparseAllReduce(per_group);
  const int64_t groups = static_cast<int64_t>(per_group.size());
  for (int64_t g = 0; g < groups; ++g) {
    std::set<int64_t> active;
    for (const SparseGradient& c : per_group[g]) {
      active.insert(c.indices.begin(), c.indices.end());
    }
    if (active.empty()) continue;
    const int64_t bytes = static_cast<int64_t>(active.size()) *
                          (kIdBytes + out.dim * kEmbElemBytes);
    for (int64_t h = 0; h < groups; ++h) {
      if (h == g) continue;
      log.messages.push_back(CommMessage{step, plan.Owner(table, g),
                                         plan.Owner(table, h), bytes,
                                         CommKind::kAllReduceGrad});
    }
  }
  return out;
}

void AdagradStep(EmbeddingTable& table, const SparseGradient& grad, double lr,
                 double eps) {
  if (grad.indices.empty()) return;
  JR_CHECK_ARG(grad.dim == table.dim, "gradient dim ", grad.dim,
               " != table dim ", table.dim);
  for (size_t i = 0; i < grad.indices.size(); ++i) {
    const int64_t r = grad.indices[i];
    JR_CHECK_ARG(r >= 0 && r < table.rows, "gradient row ", r,
                 " out of range for table ", table.name);
    std::span<const double> g = grad.row(i);
    double* w = table.weights.data() + r * table.dim;
    double* s = table.optimizer_state.data() + r * table.dim;
    for (int64_t d = 0; d < table.dim; ++d) {
      s[d] += g[d] * g[d];
      w[d] -= lr / std::sqrt(s[d] + eps) * g[d];
    }
  }
}

double HspTarget(int64_t table, int64_t id, int64_t d) {
  return 0.5 * std::sin(0.37 * static_cast<double>(id) +
                        1.3 * static_cast<double>(d) +
                        0.7 * static_cast<double>(table));
}

namespace {

bool BitwiseEqual(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<double> Snapshot(const std::vector<EmbeddingTable>& tables) {
  std::vector<double> out;
  for (const EmbeddingTable& t : tables) {
    out.insert(out.end(), t.weights.begin(), t.weights.end());
    out.insert(out.end(), t.optimizer_state.begin(), t.optimizer_state.end());
  }
  return out;
}

}  // namespace

HspTrainResult HspTrain(const HspWorkload& workload,
                        const std::vector<EmbeddingTable>& initial_tables,
                        const ClusterTopology& topology,
                        const HspTrainConfig& config) {
  topology.Validate();
  const ShardPlan plan = BuildShardPlan(initial_tables, topology);
  const int64_t num_tables = static_cast<int64_t>(initial_tables.size());
  HspTrainResult result;
  result.replicas.assign(topology.num_groups, initial_tables);

  for (size_t step = 0; step < workload.size(); ++step) {
    const std::vector<KeyedJaggedTensor>& batches = workload[step];
    RouteResult routed = RouteLookup(batches, result.replicas, plan, topology,
                                     static_cast<int64_t>(step));
    result.log.messages.insert(result.log.messages.end(),
                               routed.log.messages.begin(),
                               routed.log.messages.end());

    // per_table[t][g] lists group g's device contributions in device order.
    std::vector<std::vector<std::vector<SparseGradient>>> per_table(
        num_tables,
        std::vector<std::vector<SparseGradient>>(topology.num_groups));
    std::map<MessageKey, int64_t> pending;
    for (int64_t d = 0; d < topology.num_devices; ++d) {
      const KeyedJaggedTensor& kjt = batches[d];
      const LookupResult& emb = routed.per_device[d];
      std::vector<JaggedTensor<double>> grads;
      for (int64_t k = 0; k < kjt.num_keys(); ++k) {
        const JaggedTensor<double>& e = emb.embeddings[k];
        const int64_t t = plan.TableIndex(kjt.keys[k]);
        const auto [begin, end] = kjt.key_range(k);
        std::vector<double> g(e.values().size());
        for (int64_t i = begin; i < end; ++i) {
          for (int64_t c = 0; c < e.dim(); ++c) {
            const int64_t flat = (i - begin) * e.dim() + c;
            g[flat] = e.values()[flat] - HspTarget(t, kjt.values[i], c);
          }
        }
        grads.emplace_back(std::move(g), e.offsets(), e.dim());
      }
      std::vector<SparseGradient> sparse = BackwardAccumulate(grads, kjt);
      const int64_t group = topology.group_of(d);
      for (int64_t k = 0; k < kjt.num_keys(); ++k) {
        const int64_t t = plan.TableIndex(kjt.keys[k]);
        const int64_t owner = plan.Owner(t, group);
        if (owner != d && !sparse[k].indices.empty()) {
          pending[{d, owner, CommKind::kAllToAllEmb}] +=
              static_cast<int64_t>(sparse[k].indices.size()) * sparse[k].dim *
              kEmbElemBytes;
        }
        per_table[t][group].push_back(std::move(sparse[k]));
      }
    }
    Flush(pending, static_cast<int64_t>(step), result.log);

    for (int64_t t = 0; t < num_tables; ++t) {
      const SparseGradient total = SparseAllReduceLogged(
          per_table[t], plan, t, static_cast<int64_t>(step), result.log);
      for (int64_t g = 0; g < topology.num_groups; ++g) {
        AdagradStep(result.replicas[g][t], total, config.learning_rate,
                    config.epsilon);
      }
    }

    for (int64_t g = 1; g < topology.num_groups; ++g) {
      for (int64_t t = 0; t < num_tables; ++t) {
        const EmbeddingTable& a = result.replicas[0][t];
        const EmbeddingTable& b = result.replicas[g][t];
        if (!BitwiseEqual(a.weights, b.weights) ||
            !BitwiseEqual(a.optimizer_state, b.optimizer_state)) {
          throw InvariantError(internal::StrCat(
              "group ", g, " diverged from group 0 on table ", a.name,
              " at step ", step));
        }
      }
    }
    ++result.steps_checked;
    if (config.record_trajectory) {
      result.trajectory.push_back(Snapshot(result.replicas[0]));
    }
  }
  return result;
}

double CommLatency::all_to_all() const {
  double s = 0.0;
  for (const auto& [kind, v] : seconds) {
    if (IsAllToAll(kind)) s += v;
  }
  return s;
}

double CommLatency::total() const {
  double s = 0.0;
  for (const auto& [kind, v] : seconds) s += v;
  return s;
}

CommLatency ModelCommLatency(const CommVolumeLog& log,
                             const ClusterTopology& topology) {
  topology.Validate();
  CommLatency out;
  for (const CommMessage& m : log.messages) {
    const double bw = topology.same_node(m.src, m.dst) ? topology.intra_node_bw
                                                       : topology.inter_node_bw;
    out.seconds[m.kind] +=
        topology.per_message_latency_s + static_cast<double>(m.bytes) / bw;
  }
  return out;
}

HspWorkload MakeZipfHspWorkload(std::span<const EmbeddingTable> tables,
                                int64_t steps, int64_t num_devices,
                                int64_t samples_per_device, int64_t max_len,
                                double zipf_exponent, uint64_t seed) {
  std::mt19937_64 rng(seed);
  HspWorkload workload(steps);
  for (auto& step : workload) {
    for (int64_t d = 0; d < num_devices; ++d) {
      step.push_back(MakeRandomKjt(tables, samples_per_device, max_len,
                                   zipf_exponent, rng));
    }
  }
  return workload;
}

}  // namespace jaggedrec
