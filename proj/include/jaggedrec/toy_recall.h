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
#ifndef JAGGEDREC_TOY_RECALL_H_
#define JAGGEDREC_TOY_RECALL_H_

// A small next-item recall model for convergence experiments: item lookup,
// mean pooling, a residual two-layer dense block and dot-product scoring
// against sampled negatives. Item embeddings are trained with AdaGrad and may
// be read stale; dense weights use AdamW and are always current.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "jaggedrec/data_pipeline.h"
#include "jaggedrec/semi_async.h"

namespace jaggedrec {

struct ToyDataConfig {
  int64_t num_items = 10000;
  int64_t num_users = 2000;
  int64_t num_clusters = 50;
  int64_t min_len = 10;  // per-user sequence length, including the test item
  int64_t max_len = 40;
  double zipf_exponent = 1.0;  // item popularity inside a cluster
  double stickiness = 0.8;     // chance the next item stays in the cluster
  uint64_t seed = 7;

  void Validate() const;
};

struct ToyDataset {
  int64_t num_items = 0;
  std::vector<SplitSequence> users;
};

// Users walk between two preferred item clusters; the last item of every
// walk is held out.
ToyDataset MakeToyDataset(const ToyDataConfig& config);

struct ToyTrainConfig {
  int64_t dim = 32;
  int64_t hidden = 64;
  int64_t history = 20;  // pooled items before the target
  int64_t steps = 5000;
  int64_t batch_size = 64;
  int64_t num_negatives = 128;
  double temperature = 0.1;
  double sparse_lr = 0.05;  // AdaGrad
  double dense_lr = 4e-3;   // AdamW
  double weight_decay = 0.0;
  TrainMode mode = TrainMode::kSync;
  int64_t tau = 0;  // sparse delay; must be 0 in sync mode
  bool fp16_negatives = false;
  int64_t probe_interval = 250;
  int64_t probe_batch = 256;
  int64_t probe_eval_users = 200;  // users scored at each probe point
  int64_t eval_k = 10;
  uint64_t seed = 1;

  void Validate() const;
};

struct ProbePoint {
  int64_t step = 0;
  double grad_norm_sq_avg = 0.0;  // running mean over probe points so far
  double loss = 0.0;              // mean training loss since the last probe
  double hr = 0.0;                // HR@K on the probe users
};

struct ToyTrainResult {
  std::vector<ProbePoint> probe;
  std::vector<double> step_loss;
  double final_hr = 0.0;
  double final_ndcg = 0.0;
  std::vector<double> item_weights;  // final item table
  std::vector<double> dense_params;  // W1, b1, W2, b2
  int64_t staleness_reads = 0;
  int64_t staleness_violations = 0;
  int64_t fp16_saturated = 0;
};

// Throws InvariantError on a non-finite loss.
ToyTrainResult TrainToyRecall(const ToyDataset& data,
                              const ToyTrainConfig& config);

// CSV with columns step,grad_norm_sq_avg,loss,hr@K.
void WriteProbeCsv(std::ostream& os, const ToyTrainResult& result, int64_t k);

}  // namespace jaggedrec

#endif  // JAGGEDREC_TOY_RECALL_H_
