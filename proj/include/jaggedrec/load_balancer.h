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
#ifndef JAGGEDREC_LOAD_BALANCER_H_
#define JAGGEDREC_LOAD_BALANCER_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace jaggedrec {

struct SampleMeta {
  int64_t sample_id = 0;
  int64_t token_count = 1;
};

struct WorkerAssignment {
  std::vector<std::vector<int64_t>> samples;  // per worker, ordered sample ids
  std::vector<int64_t> loads;                 // per worker token totals
  bool has_empty_worker = false;

  int64_t num_workers() const { return static_cast<int64_t>(loads.size()); }
  std::vector<int64_t> sample_counts() const;
};

// Token-aware dynamic batch scaling: one WorkerAssignment per training step.
struct DynamicBatchPlan {
  std::vector<WorkerAssignment> steps;
  int64_t max_sample_tokens = 0;
};

// Each worker, in index order, takes consecutive samples from the stream until
// the next one would push it past `token_threshold`.
DynamicBatchPlan DynamicBatchScale(std::span<const SampleMeta> stream,
                                   int64_t token_threshold,
                                   int64_t num_workers);

// Mean token count times the baseline batch size.
int64_t DefaultTokenThreshold(std::span<const SampleMeta> samples,
                              int64_t baseline_batch_size);

// sum(n_i * g_i) / sum(n_i), accumulated in worker order.
std::vector<double> WeightedGradAggregate(
    std::span<const std::vector<double>> grads,
    std::span<const int64_t> counts);

// LPT: sort by token count descending (stable), give each sample to the
// least-loaded worker, ties to the lowest index.
WorkerAssignment GlobalTokenReallocate(std::span<const SampleMeta> batch,
                                       int64_t num_workers);

// Fixed-count baseline: sample i goes to worker i mod num_workers.
WorkerAssignment FixedCountRoundRobin(std::span<const SampleMeta> batch,
                                      int64_t num_workers);

struct SyncModel {
  double fixed_overhead_s = 0.0;
};

struct ImbalanceReport {
  int64_t max_token_diff = 0;
  std::vector<int64_t> loads;
  double imbalance_delay_s = 0.0;
  double step_latency_s = 0.0;
  double imbalance_ratio = 0.0;  // delay / step latency, in [0, 1]
};

ImbalanceReport MakeImbalanceReport(const WorkerAssignment& assignment,
                                    double per_token_cost_s,
                                    const SyncModel& sync_model = {});

// "sample_id,token_count" lines; an optional header line is skipped.
std::vector<SampleMeta> ReadSampleCsv(std::istream& is);

// Columns: strategy, max_token_diff, step_latency_ms, imbalance_delay_ms,
// imbalance_ratio_pct.
std::string ImbalanceCsvHeader();
std::string ImbalanceCsvRow(const std::string& strategy,
                            const ImbalanceReport& r);
std::string ImbalanceMarkdownHeader();
std::string ImbalanceMarkdownRow(const std::string& strategy,
                                 const ImbalanceReport& r);

}  // namespace jaggedrec

#endif  // JAGGEDREC_LOAD_BALANCER_H_
