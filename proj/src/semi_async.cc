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
#include <cmath>
#include <queue>
#include <set>

#include "jaggedrec/errors.h"

namespace jaggedrec {

std::string TrainModeName(TrainMode mode) {
  return mode == TrainMode::kSync ? "sync" : "semi_async";
}

TrainMode ParseTrainMode(const std::string& name) {
  if (name == "sync") return TrainMode::kSync;
  if (name == "semi_async" || name == "semi-async") {
    return TrainMode::kSemiAsync;
  }
  throw ValidationError("unknown train mode '" + name + "'");
}

void StalenessConfig::Validate() const {
  JR_CHECK_ARG(tau >= 0, "tau must be non-negative, got ", tau);
  JR_CHECK_ARG((tau == 0) == (mode == TrainMode::kSync),
               "tau = 0 exactly when mode is sync (tau=", tau,
               ", mode=", TrainModeName(mode), ")");
}

int64_t ReadVersion(int64_t step, int64_t tau) {
  JR_CHECK_ARG(step >= 0 && tau >= 0, "step and tau must be non-negative");
  return std::max<int64_t>(0, step - tau);
}

std::string PhaseName(Phase phase) {
  switch (phase) {
    case Phase::kSparseFwd:
      return "sparse_fwd";
    case Phase::kDenseFwd:
      return "dense_fwd";
    case Phase::kDenseBwd:
      return "dense_bwd";
    case Phase::kSparseBwd:
      return "sparse_bwd";
  }
  return "unknown";
}

ScheduleDag::ScheduleDag(int64_t num_batches,
                         std::vector<std::vector<int64_t>> preds)
    : num_batches_(num_batches), preds_(std::move(preds)) {
  JR_CHECK_ARG(num_batches_ >= 1, "num_batches must be >= 1");
  JR_CHECK_ARG(static_cast<int64_t>(preds_.size()) == size(),
               "preds size mismatch");
  for (const auto& p : preds_) {
    for (int64_t q : p) {
      JR_CHECK_ARG(q >= 0 && q < size(), "predecessor out of range");
    }
  }
  const std::vector<int64_t> order = TopologicalOrder();
  reach_.assign(size(), std::vector<bool>(size(), false));
  for (int64_t e : order) {
    for (int64_t p : preds_[e]) {
      reach_[p][e] = true;
      for (int64_t a = 0; a < size(); ++a) {
        if (reach_[a][p]) reach_[a][e] = true;
      }
    }
  }
}

bool ScheduleDag::HasEdge(int64_t from, int64_t to) const {
  const auto& p = preds_[to];
  return std::find(p.begin(), p.end(), from) != p.end();
}

bool ScheduleDag::Reaches(int64_t from, int64_t to) const {
  return reach_[from][to];
}

bool ScheduleDag::MayOverlap(int64_t a, int64_t b) const {
  return a != b && !reach_[a][b] && !reach_[b][a];
}

std::vector<int64_t> ScheduleDag::TopologicalOrder() const {
  std::vector<int64_t> indegree(size(), 0);
  std::vector<std::vector<int64_t>> succ(size());
  for (int64_t e = 0; e < size(); ++e) {
    for (int64_t p : preds_[e]) {
      ++indegree[e];
      succ[p].push_back(e);
    }
  }
  std::priority_queue<int64_t, std::vector<int64_t>, std::greater<>> ready;
  for (int64_t e = 0; e < size(); ++e) {
    if (indegree[e] == 0) ready.push(e);
  }
  std::vector<int64_t> order;
  while (!ready.empty()) {
    const int64_t e = ready.top();
    ready.pop();
    order.push_back(e);
    for (int64_t s : succ[e]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  if (static_cast<int64_t>(order.size()) != size()) {
    throw ValidationError("schedule has a cyclic dependency");
  }
  return order;
}

ScheduleDag SemiAsyncSchedule(int64_t num_batches, TrainMode mode) {
  JR_CHECK_ARG(num_batches >= 1, "num_batches must be >= 1");
  using P = Phase;
  auto idx = &ScheduleDag::Index;
  std::vector<std::vector<int64_t>> preds(num_batches * kNumPhases);
  for (int64_t i = 0; i < num_batches; ++i) {
    preds[idx(i, P::kDenseFwd)].push_back(idx(i, P::kSparseFwd));
    preds[idx(i, P::kDenseBwd)].push_back(idx(i, P::kDenseFwd));
    preds[idx(i, P::kSparseBwd)].push_back(idx(i, P::kDenseBwd));
    if (i == 0) continue;
    preds[idx(i, P::kDenseFwd)].push_back(idx(i - 1, P::kDenseBwd));
    if (mode == TrainMode::kSync) {
      preds[idx(i, P::kSparseFwd)].push_back(idx(i - 1, P::kSparseBwd));
    } else {
      preds[idx(i, P::kSparseFwd)].push_back(idx(i - 1, P::kSparseFwd));
      if (i >= 2) {
        preds[idx(i, P::kSparseFwd)].push_back(idx(i - 2, P::kSparseBwd));
      }
    }
  }
  return ScheduleDag(num_batches, std::move(preds));
}

namespace {

std::vector<int64_t> Unique(std::span<const int64_t> ids) {
  std::vector<int64_t> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

void StalenessMonitor::Violation(std::string message) {
  ++violations_;
  if (messages_.size() < 16) messages_.push_back(std::move(message));
}

void StalenessMonitor::RecordRead(int64_t step, int64_t tau,
                                  std::span<const int64_t> ids) {
  for (int64_t id : Unique(ids)) {
    ++reads_;
    RowState& row = rows_[id];
    if (!row.applied.empty() && row.applied.back() >= step) {
      Violation(internal::StrCat("step ", step, " row ", id,
                                 " sees the update of step ",
                                 row.applied.back()));
    }
    // Earlier reads older than the delay window must have been applied.
    while (row.verified < row.touched.size() &&
           row.touched[row.verified] < step - tau) {
      const int64_t s = row.touched[row.verified++];
      if (!std::binary_search(row.applied.begin(), row.applied.end(), s)) {
        Violation(internal::StrCat("step ", step, " row ", id,
                                   " misses the update of step ", s));
      }
    }
    row.touched.push_back(step);
    // Drop checked reads and updates no pending read can ask about.
    if (row.verified * 2 >= row.touched.size()) {
      row.touched.erase(row.touched.begin(),
                        row.touched.begin() + row.verified);
      row.verified = 0;
      auto keep = std::lower_bound(row.applied.begin(), row.applied.end(),
                                   row.touched.front());
      if (keep == row.applied.end() && keep != row.applied.begin()) --keep;
      row.applied.erase(row.applied.begin(), keep);
    }
  }
}

void StalenessMonitor::RecordUpdate(int64_t step,
                                    std::span<const int64_t> ids) {
  for (int64_t id : Unique(ids)) {
    std::vector<int64_t>& applied = rows_[id].applied;
    auto it = std::upper_bound(applied.begin(), applied.end(), step);
    if (it == applied.begin() || *(it - 1) != step) applied.insert(it, step);
  }
}

SparsityEstimate EstimateAlpha(std::span<const std::vector<int64_t>> ids,
                               int64_t window) {
  JR_CHECK_ARG(ids.size() >= 2, "alpha needs at least 2 steps, got ",
               ids.size());
  JR_CHECK_ARG(window >= 1, "window must be >= 1");
  std::vector<std::vector<int64_t>> uniq;
  std::set<int64_t> all;
  for (const auto& step : ids) {
    uniq.push_back(Unique(step));
    all.insert(step.begin(), step.end());
  }
  double sum = 0.0;
  int64_t counted = 0;
  for (size_t t = window; t < uniq.size(); ++t) {
    if (uniq[t].empty()) continue;
    std::set<int64_t> prev;
    for (size_t w = 1; w <= static_cast<size_t>(window); ++w) {
      prev.insert(uniq[t - w].begin(), uniq[t - w].end());
    }
    int64_t hit = 0;
    for (int64_t id : uniq[t]) hit += prev.count(id);
    sum += static_cast<double>(hit) / static_cast<double>(uniq[t].size());
    ++counted;
  }
  SparsityEstimate e;
  e.alpha = counted > 0 ? sum / counted : 0.0;
  e.num_unique = static_cast<int64_t>(all.size());
  return e;
}

void BoundParams::Validate() const {
  JR_CHECK_ARG(iterations >= 1.0, "T must be >= 1");
  for (double v : {lipschitz, sigma, alpha, tau, c1, c2, c3}) {
    JR_CHECK_ARG(std::isfinite(v) && v >= 0.0,
                 "bound parameters must be finite and non-negative");
  }
  JR_CHECK_ARG(alpha <= 1.0, "alpha must lie in [0, 1]");
}

double EvalBound(const BoundParams& p) {
  p.Validate();
  const double t = p.iterations;
  return p.c1 * std::sqrt(p.lipschitz) * p.sigma / std::sqrt(t) +
         p.c2 * p.lipschitz / t + p.c3 * p.alpha * p.lipschitz * p.tau / t;
}

}  // namespace jaggedrec
