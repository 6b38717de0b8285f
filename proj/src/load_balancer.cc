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
#include <cstdio>
#include <istream>
#include <numeric>
#include <queue>
#include <sstream>
#include <tuple>

#include "jaggedrec/errors.h"

namespace jaggedrec {

std::vector<int64_t> WorkerAssignment::sample_counts() const {
  std::vector<int64_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(static_cast<int64_t>(s.size()));
  return out;
}

namespace {

WorkerAssignment EmptyAssignment(int64_t num_workers) {
  WorkerAssignment a;
  a.samples.resize(num_workers);
  a.loads.assign(num_workers, 0);
  return a;
}

void FlagEmpty(WorkerAssignment& a) {
  a.has_empty_worker = std::any_of(a.samples.begin(), a.samples.end(),
                                   [](const auto& s) { return s.empty(); });
}

void CheckSamples(std::span<const SampleMeta> samples) {
  for (const SampleMeta& s : samples) {
    JR_CHECK_ARG(s.token_count >= 1, "sample ", s.sample_id,
                 " has token_count ", s.token_count, " < 1");
  }
}

}  // namespace

DynamicBatchPlan DynamicBatchScale(std::span<const SampleMeta> stream,
                                   int64_t token_threshold,
                                   int64_t num_workers) {
  JR_CHECK_ARG(num_workers >= 1, "num_workers must be >= 1");
  CheckSamples(stream);
  DynamicBatchPlan plan;
  for (const SampleMeta& s : stream) {
    JR_CHECK_ARG(s.token_count <= token_threshold, "sample ", s.sample_id,
                 " has ", s.token_count, " tokens, above threshold ",
                 token_threshold);
    plan.max_sample_tokens = std::max(plan.max_sample_tokens, s.token_count);
  }
  size_t next = 0;
  while (next < stream.size()) {
    WorkerAssignment step = EmptyAssignment(num_workers);
    for (int64_t w = 0; w < num_workers && next < stream.size(); ++w) {
      while (next < stream.size() &&
             step.loads[w] + stream[next].token_count <= token_threshold) {
        step.samples[w].push_back(stream[next].sample_id);
        step.loads[w] += stream[next].token_count;
        ++next;
      }
    }
    FlagEmpty(step);
    plan.steps.push_back(std::move(step));
  }
  return plan;
}

int64_t DefaultTokenThreshold(std::span<const SampleMeta> samples,
                              int64_t baseline_batch_size) {
  JR_CHECK_ARG(!samples.empty(), "cannot derive a threshold from no samples");
  int64_t total = 0;
  int64_t max_tokens = 0;
  for (const SampleMeta& s : samples) {
    total += s.token_count;
    max_tokens = std::max(max_tokens, s.token_count);
  }
  const double mean = static_cast<double>(total) / samples.size();
  const auto threshold = static_cast<int64_t>(mean * baseline_batch_size);
  return std::max(threshold, max_tokens);
}

std::vector<double> WeightedGradAggregate(
    std::span<const std::vector<double>> grads,
    std::span<const int64_t> counts) {
  JR_CHECK_ARG(!grads.empty(), "no gradients to aggregate");
  JR_CHECK_ARG(grads.size() == counts.size(), "got ", grads.size(),
               " gradients and ", counts.size(), " counts");
  const size_t dim = grads[0].size();
  std::vector<double> out(dim, 0.0);
  int64_t total = 0;
  for (size_t w = 0; w < grads.size(); ++w) {
    JR_CHECK_ARG(grads[w].size() == dim, "gradient ", w, " has dimension ",
                 grads[w].size(), ", expected ", dim);
    JR_CHECK_ARG(counts[w] > 0, "sample count of worker ", w,
                 " must be positive");
    total += counts[w];
    for (size_t d = 0; d < dim; ++d) {
      out[d] += static_cast<double>(counts[w]) * grads[w][d];
    }
  }
  for (double& v : out) v /= static_cast<double>(total);
  return out;
}

WorkerAssignment GlobalTokenReallocate(std::span<const SampleMeta> batch,
                                       int64_t num_workers) {
  JR_CHECK_ARG(num_workers >= 1, "num_workers must be >= 1");
  CheckSamples(batch);
  std::vector<SampleMeta> sorted(batch.begin(), batch.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SampleMeta& a, const SampleMeta& b) {
                     return a.token_count > b.token_count;
                   });
  WorkerAssignment a = EmptyAssignment(num_workers);
  using Slot = std::pair<int64_t, int64_t>;  // (load, worker)
  std::priority_queue<Slot, std::vector<Slot>, std::greater<>> heap;
  for (int64_t w = 0; w < num_workers; ++w) heap.emplace(0, w);
  for (const SampleMeta& s : sorted) {
    auto [load, w] = heap.top();
    heap.pop();
    a.samples[w].push_back(s.sample_id);
    a.loads[w] = load + s.token_count;
    heap.emplace(a.loads[w], w);
  }
  FlagEmpty(a);
  return a;
}

WorkerAssignment FixedCountRoundRobin(std::span<const SampleMeta> batch,
                                      int64_t num_workers) {
  JR_CHECK_ARG(num_workers >= 1, "num_workers must be >= 1");
  CheckSamples(batch);
  WorkerAssignment a = EmptyAssignment(num_workers);
  for (size_t i = 0; i < batch.size(); ++i) {
    const int64_t w = static_cast<int64_t>(i) % num_workers;
    a.samples[w].push_back(batch[i].sample_id);
    a.loads[w] += batch[i].token_count;
  }
  FlagEmpty(a);
  return a;
}

ImbalanceReport MakeImbalanceReport(const WorkerAssignment& assignment,
                                    double per_token_cost_s,
                                    const SyncModel& sync_model) {
  JR_CHECK_ARG(per_token_cost_s > 0.0, "per_token_cost must be positive");
  JR_CHECK_ARG(!assignment.loads.empty(), "assignment has no workers");
  ImbalanceReport r;
  r.loads = assignment.loads;
  const auto [mn, mx] =
      std::minmax_element(assignment.loads.begin(), assignment.loads.end());
  r.max_token_diff = *mx - *mn;
  r.imbalance_delay_s = static_cast<double>(r.max_token_diff) * per_token_cost_s;
  r.step_latency_s =
      static_cast<double>(*mx) * per_token_cost_s + sync_model.fixed_overhead_s;
  r.imbalance_ratio =
      r.step_latency_s > 0.0 ? r.imbalance_delay_s / r.step_latency_s : 0.0;
  return r;
}

std::vector<SampleMeta> ReadSampleCsv(std::istream& is) {
  std::vector<SampleMeta> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    SampleMeta s;
    if (!(ls >> s.sample_id >> s.token_count)) {
      JR_CHECK_ARG(line_no == 1, "malformed sample line ", line_no, ": ", line);
      continue;  // header
    }
    JR_CHECK_ARG(s.token_count >= 1, "line ", line_no,
                 ": token_count must be >= 1");
    out.push_back(s);
  }
  return out;
}

std::string ImbalanceCsvHeader() {
  return "strategy,max_token_diff,step_latency_ms,imbalance_delay_ms,"
         "imbalance_ratio_pct";
}

std::string ImbalanceCsvRow(const std::string& strategy,
                            const ImbalanceReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%lld,%.6f,%.6f,%.4f", strategy.c_str(),
                static_cast<long long>(r.max_token_diff),
                r.step_latency_s * 1e3, r.imbalance_delay_s * 1e3,
                r.imbalance_ratio * 100.0);
  return buf;
}

std::string ImbalanceMarkdownHeader() {
  return "| Strategy | Maximum Token Count Difference | Single-step "
         "Latency(ms) | Load Imbalance Delay(ms) | Load Imbalance Ratio(%) |\n"
         "|---|---|---|---|---|";
}

std::string ImbalanceMarkdownRow(const std::string& strategy,
                                 const ImbalanceReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "| %s | %lld | %.3f | %.3f | %.2f |",
                strategy.c_str(), static_cast<long long>(r.max_token_diff),
                r.step_latency_s * 1e3, r.imbalance_delay_s * 1e3,
                r.imbalance_ratio * 100.0);
  return buf;
}

}  // namespace jaggedrec
