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
#ifndef JAGGEDREC_ATTENTION_H_
#define JAGGEDREC_ATTENTION_H_

#include <cstdint>
#include <vector>

#include "jaggedrec/jagged_tensor.h"

namespace jaggedrec {

// Relative attention bias: a learned bias per bucketized timestamp delta
// (relative time bias) plus a bias per clipped relative position (relative
// position bias).
template <typename T>
struct RabSpec {
  int64_t num_time_buckets = 32;
  int64_t max_relative_position = 64;
  // num_time_buckets entries.
  std::vector<T> time_bucket_table;
  // 2 * max_relative_position + 1 entries, indexed by
  // clip(key_pos - query_pos) + max_relative_position. Causal attention only
  // reads the [-max_relative_position, 0] half.
  std::vector<T> position_table;

  void Validate() const;
};

// Log-spaced bucket of |delta|: bucket(0) = 0, bucket(d) = floor(log2(d + 1)),
// clamped to the last bucket.
int64_t TimeBucket(int64_t delta, int64_t num_time_buckets);

// Index into RabSpec::position_table for a (query, key) pair.
int64_t PositionBucket(int64_t query_pos, int64_t key_pos,
                       int64_t max_relative_position);

struct AttentionConfig {
  int64_t num_heads = 8;
  int64_t head_dim = 16;
  bool causal = true;

  int64_t width() const { return num_heads * head_dim; }
};

// Work counters. `score_elements` counts (query, key) pairs per head-set, so a
// batch with row lengths L_i reports sum(L_i^2) regardless of padding.
struct AttentionStats {
  int64_t score_elements = 0;
  int64_t rab_elements = 0;
};

// One L_i x L_i bias matrix per row, stored row-major as a jagged tensor whose
// row i holds L_i^2 scalars.
template <typename T>
JaggedTensor<T> ComputeRab(const JaggedTensor<int64_t>& timestamps,
                           const RabSpec<T>& spec,
                           AttentionStats* stats = nullptr);

// Scaled dot-product attention restricted to each row's valid tokens. `rab`
// may be null (no bias). Output shares the offsets of `q`.
template <typename T>
JaggedTensor<T> JaggedAttention(const JaggedTensor<T>& q,
                                const JaggedTensor<T>& k,
                                const JaggedTensor<T>& v,
                                const JaggedTensor<T>* rab,
                                const AttentionConfig& cfg,
                                AttentionStats* stats = nullptr);

}  // namespace jaggedrec

#endif  // JAGGEDREC_ATTENTION_H_
