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
#ifndef JAGGEDREC_SEMI_ASYNC_H_
#define JAGGEDREC_SEMI_ASYNC_H_

// Semi-asynchronous training support: the per-batch event DAG, staleness
// bookkeeping for embedding reads, the adjacent-step sparsity estimate and the
// SGD-form convergence bound with a delay penalty.

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace jaggedrec {

enum class TrainMode { kSync, kSemiAsync };

std::string TrainModeName(TrainMode mode);
TrainMode ParseTrainMode(const std::string& name);

struct StalenessConfig {
  int64_t tau = 1;
  TrainMode mode = TrainMode::kSemiAsync;

  // tau == 0 exactly when mode is kSync.
  void Validate() const;

  static StalenessConfig Sync() { return {0, TrainMode::kSync}; }
  static StalenessConfig SemiAsync(int64_t tau = 1) {
    return {tau, TrainMode::kSemiAsync};
  }
};

// Number of sparse updates (steps 0 .. v-1) visible to the forward pass of
// `step`: max(0, step - tau).
int64_t ReadVersion(int64_t step, int64_t tau);

enum class Phase { kSparseFwd = 0, kDenseFwd = 1, kDenseBwd = 2, kSparseBwd = 3 };
inline constexpr int kNumPhases = 4;
std::string PhaseName(Phase phase);

struct ScheduleEvent {
  int64_t batch = 0;
  Phase phase = Phase::kSparseFwd;
};

// Events are stored batch-major in phase order; `preds[e]` lists the direct
// predecessors of event e.
class ScheduleDag {
 public:
  ScheduleDag(int64_t num_batches, std::vector<std::vector<int64_t>> preds);

  int64_t num_batches() const { return num_batches_; }
  int64_t size() const { return num_batches_ * kNumPhases; }
  static int64_t Index(int64_t batch, Phase phase) {
    return batch * kNumPhases + static_cast<int64_t>(phase);
  }
  ScheduleEvent event(int64_t e) const {
    return {e / kNumPhases, static_cast<Phase>(e % kNumPhases)};
  }
  const std::vector<int64_t>& preds(int64_t e) const { return preds_[e]; }

  bool HasEdge(int64_t from, int64_t to) const;
  // True if `to` is reachable from `from` along predecessor edges.
  bool Reaches(int64_t from, int64_t to) const;
  // Neither event is an ancestor of the other.
  bool MayOverlap(int64_t a, int64_t b) const;
  // Kahn's algorithm with smallest-index tie-break; throws on a cycle.
  std::vector<int64_t> TopologicalOrder() const;

 private:
  int64_t num_batches_;
  std::vector<std::vector<int64_t>> preds_;
  std::vector<std::vector<bool>> reach_;  // reach_[a][b]: b reachable from a
};

// Dependency DAG over {sparse_fwd, dense_fwd, dense_bwd, sparse_bwd} per
// batch. Both modes chain the four phases of a batch and keep the dense path
// in order. Sync also orders sparse_fwd(i+1) after sparse_bwd(i); semi-async
// relaxes that to sparse_fwd(i+1) after sparse_fwd(i), bounding the lead at
// one step with sparse_fwd(i+2) after sparse_bwd(i).
ScheduleDag SemiAsyncSchedule(int64_t num_batches, TrainMode mode);

// Shadow bookkeeping for stale embedding reads. Every forward read at step t
// with delay tau must see, for each row, exactly the updates of the steps
// s < t that touched it, except that the updates of steps in [t - tau, t) may
// be missing.
class StalenessMonitor {
 public:
  // Forward pass of `step` reads `ids`.
  void RecordRead(int64_t step, int64_t tau, std::span<const int64_t> ids);
  // The sparse backward of `step` has been applied to `ids`.
  void RecordUpdate(int64_t step, std::span<const int64_t> ids);

  int64_t reads() const { return reads_; }
  int64_t violations() const { return violations_; }
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  void Violation(std::string message);

  struct RowState {
    std::vector<int64_t> touched;  // reading steps, ascending
    size_t verified = 0;           // touched[0, verified) already checked
    std::vector<int64_t> applied;  // ascending
  };
  std::unordered_map<int64_t, RowState> rows_;
  int64_t reads_ = 0;
  int64_t violations_ = 0;
  std::vector<std::string> messages_;  // first few violations
};

struct SparsityEstimate {
  double alpha = 0.0;
  int64_t num_unique = 0;  // distinct IDs over the whole stream
};

// Mean over steps t >= window of |IDs(t) ∩ (IDs(t-1) ∪ ... ∪ IDs(t-window))|
// / |IDs(t)|, with IDs deduplicated per step. Steps with no IDs are skipped.
SparsityEstimate EstimateAlpha(std::span<const std::vector<int64_t>> ids,
                               int64_t window = 1);

struct BoundParams {
  double lipschitz = 1.0;  // L
  double sigma = 1.0;
  double iterations = 1.0;  // T
  double alpha = 0.0;
  double tau = 0.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;

  void Validate() const;
};

// c1 * sqrt(L) * sigma / sqrt(T) + c2 * L / T + c3 * alpha * L * tau / T.
double EvalBound(const BoundParams& p);

}  // namespace jaggedrec

#endif  // JAGGEDREC_SEMI_ASYNC_H_
