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
#ifndef JAGGEDREC_NEG_SAMPLING_H_
#define JAGGEDREC_NEG_SAMPLING_H_

// Jagged negative sampling and the sampled-softmax loss with shared
// auxiliary logits. Negative embeddings can stay in a host arena and be
// streamed to the device in fixed-size segments through two buffers.

#include <cstdint>
#include <span>
#include <vector>

#include "jaggedrec/embedding.h"
#include "jaggedrec/jagged_tensor.h"

namespace jaggedrec {

// Negatives for the valid positions of a jagged batch: R IDs per position,
// stored position-major.
struct NegSampleBatch {
  JaggedTensor<int64_t> positive_ids;
  std::vector<int64_t> negative_ids;  // num_valid x R
  int64_t num_negatives = 0;          // R
  int64_t pool_size = 0;

  int64_t num_valid() const { return positive_ids.num_items(); }
  std::span<const int64_t> negatives(int64_t p) const {
    return std::span<const int64_t>(negative_ids)
        .subspan(p * num_negatives, num_negatives);
  }
};

struct NegSamplerConfig {
  int64_t num_negatives = 128;
  int64_t pool_size = 1;
  bool exclude_positive = false;
  uint64_t seed = 0;
};

// Uniform draws with replacement from [0, pool_size), reproducible from
// (seed, batch_id). With `exclude_positive`, a draw equal to the position's
// positive ID is redrawn (needs pool_size >= 2).
NegSampleBatch SampleNegatives(const JaggedTensor<int64_t>& positive_ids,
                               const NegSamplerConfig& config,
                               uint64_t batch_id = 0);

// Same, for a batch described only by its per-row valid lengths; positive IDs
// are left at 0.
NegSampleBatch SampleNegatives(std::span<const int64_t> valid_lengths,
                               int64_t num_negatives, int64_t pool_size,
                               uint64_t seed, uint64_t batch_id = 0);

struct NegMemory {
  int64_t full_bytes = 0;           // B * L * D * R * bytes
  int64_t offloaded_peak_bytes = 0;  // 2 * seg * R * D * bytes + B * L * R * bytes
};

NegMemory NegMemoryModel(int64_t batch, int64_t seq_len, int64_t dim,
                         int64_t num_negatives, int64_t bytes_per_elem,
                         int64_t segment_size);

// Float dot product with a fixed left-to-right accumulation order; both
// logit paths use it so their results agree bitwise.
float Dot(const float* a, const float* b, int64_t n);

// logits[p][j] = <output[p], neg[p][j]> for T x D outputs and T x R x D
// negatives.
std::vector<float> MonolithicLogits(std::span<const float> output,
                                    std::span<const float> negatives,
                                    int64_t num_valid, int64_t num_negatives,
                                    int64_t dim);

struct SegmentTransfer {
  int64_t segment = 0;
  int64_t buffer = 0;  // 0 or 1
  int64_t bytes = 0;
};

struct SegmentedLogits {
  std::vector<float> logits;             // num_valid x R
  int64_t resident_high_water_bytes = 0;  // device-resident negative bytes
  std::vector<SegmentTransfer> transfers;  // host -> device, in issue order
};

// Computes the same logits as MonolithicLogits while holding at most two
// segments of `segment_size` positions on the device. Segment s + 1 is
// fetched into the idle buffer before segment s is consumed.
SegmentedLogits ComputeSegmentedLogits(std::span<const float> output,
                                       std::span<const float> host_negatives,
                                       int64_t num_valid,
                                       int64_t num_negatives, int64_t dim,
                                       int64_t segment_size);

// Per-token expanded logit sets of size k * R: the token's own R logits plus
// (k - 1) * R logits drawn without replacement from the other tokens' own
// logits, then shuffled per token.
struct SharedLogits {
  int64_t num_tokens = 0;
  int64_t set_size = 0;  // k * R
  std::vector<double> values;
  // Origin of each entry: (token, index in that token's own R logits).
  std::vector<int64_t> source_token;
  std::vector<int64_t> source_index;

  std::span<const double> set(int64_t t) const {
    return std::span<const double>(values).subspan(t * set_size, set_size);
  }
};

SharedLogits ShareLogits(std::span<const double> self_logits,
                         int64_t num_tokens, int64_t num_negatives,
                         int64_t expansion, uint64_t seed);

struct SoftmaxLoss {
  double loss = 0.0;
  double grad_positive = 0.0;
  std::vector<double> grad_negatives;
  std::vector<double> grad_auxiliary;
};

// -log(exp(pos) / (exp(pos) + sum exp(neg) + sum exp(aux))) on logits that
// already include the temperature, with gradients.
SoftmaxLoss SampledSoftmaxLoss(double positive,
                               std::span<const double> negatives,
                               std::span<const double> auxiliary = {});

struct LossConfig {
  double temperature = 0.05;
  int64_t expansion = 1;  // k
  uint64_t shuffle_seed = 0;
  bool fp16_negatives = false;
};

struct BatchLoss {
  double loss = 0.0;  // mean over tokens
  std::vector<double> grad_output;  // T x D
  SparseGradient grad_table;        // positive and negative rows
  int64_t embedding_lookups = 0;    // rows fetched from the table
  int64_t fp16_saturated = 0;
};

// Mean sampled-softmax loss over T tokens with outputs o_t (T x D), positives
// and negatives looked up from `table`. Logits are <o_t, e> / temperature; for
// k > 1, each token's negatives are extended with the other tokens' negative
// logits. Gradients flow back to every logit's source output and row.
BatchLoss NegativeSampledLoss(std::span<const double> outputs,
                              const NegSampleBatch& batch,
                              const EmbeddingTable& table,
                              const LossConfig& config);

}  // namespace jaggedrec

#endif  // JAGGEDREC_NEG_SAMPLING_H_
