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
#include "jaggedrec/attention.h"

#include <bit>
#include <cmath>
#include <limits>

namespace jaggedrec {

template <typename T>
void RabSpec<T>::Validate() const {
  JR_CHECK_ARG(num_time_buckets >= 1, "num_time_buckets must be positive");
  JR_CHECK_ARG(max_relative_position >= 1,
               "max_relative_position must be positive");
  JR_CHECK_ARG(static_cast<int64_t>(time_bucket_table.size()) ==
                   num_time_buckets,
               "time_bucket_table has ", time_bucket_table.size(),
               " entries, expected ", num_time_buckets);
  JR_CHECK_ARG(static_cast<int64_t>(position_table.size()) ==
                   2 * max_relative_position + 1,
               "position_table has ", position_table.size(),
               " entries, expected ", 2 * max_relative_position + 1);
}

int64_t TimeBucket(int64_t delta, int64_t num_time_buckets) {
  const uint64_t mag =
      delta < 0 ? uint64_t{0} - static_cast<uint64_t>(delta)
                : static_cast<uint64_t>(delta);
  if (mag == std::numeric_limits<uint64_t>::max()) return num_time_buckets - 1;
  const int64_t b = static_cast<int64_t>(std::bit_width(mag + 1)) - 1;
  return std::min(b, num_time_buckets - 1);
}

int64_t PositionBucket(int64_t query_pos, int64_t key_pos,
                       int64_t max_relative_position) {
  const int64_t rel = std::clamp(key_pos - query_pos, -max_relative_position,
                                 max_relative_position);
  return rel + max_relative_position;
}

template <typename T>
JaggedTensor<T> ComputeRab(const JaggedTensor<int64_t>& timestamps,
                           const RabSpec<T>& spec, AttentionStats* stats) {
  spec.Validate();
  JR_CHECK_ARG(timestamps.dim() == 1, "timestamps must be scalar rows");
  const int64_t batch = timestamps.batch_size();
  std::vector<int64_t> sq_lengths(batch);
  for (int64_t b = 0; b < batch; ++b) {
    const int64_t len = timestamps.length(b);
    sq_lengths[b] = len * len;
  }
  std::vector<int64_t> offsets = OffsetsFromLengths(sq_lengths);
  std::vector<T> values(offsets.back());
  for (int64_t b = 0; b < batch; ++b) {
    std::span<const int64_t> ts = timestamps.row(b);
    const int64_t len = static_cast<int64_t>(ts.size());
    for (int64_t i = 1; i < len; ++i) {
      JR_CHECK_ARG(ts[i] >= ts[i - 1], "timestamps of row ", b,
                   " decrease at position ", i);
    }
    T* out = values.data() + offsets[b];
    for (int64_t a = 0; a < len; ++a) {
      for (int64_t c = 0; c < len; ++c) {
        out[a * len + c] =
            spec.time_bucket_table[TimeBucket(ts[a] - ts[c],
                                              spec.num_time_buckets)] +
            spec.position_table[PositionBucket(a, c,
                                               spec.max_relative_position)];
      }
    }
  }
  if (stats != nullptr) stats->rab_elements += offsets.back();
  return JaggedTensor<T>(std::move(values), std::move(offsets), 1);
}

template <typename T>
JaggedTensor<T> JaggedAttention(const JaggedTensor<T>& q,
                                const JaggedTensor<T>& k,
                                const JaggedTensor<T>& v,
                                const JaggedTensor<T>* rab,
                                const AttentionConfig& cfg,
                                AttentionStats* stats) {
  JR_CHECK_ARG(cfg.num_heads >= 1 && cfg.head_dim >= 1,
               "attention heads and head_dim must be positive");
  JR_CHECK_ARG(q.dim() == cfg.width(), "q width ", q.dim(), " != heads*dim ",
               cfg.width());
  JR_CHECK_ARG(q.SameLayout(k) && q.SameLayout(v),
               "q, k and v must share offsets and width");
  const int64_t batch = q.batch_size();
  if (rab != nullptr) {
    JR_CHECK_ARG(rab->batch_size() == batch, "rab batch mismatch");
    for (int64_t b = 0; b < batch; ++b) {
      JR_CHECK_ARG(rab->length(b) == q.length(b) * q.length(b),
                   "rab row ", b, " is not L x L");
    }
  }

  const int64_t width = cfg.width();
  const int64_t hd = cfg.head_dim;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  std::vector<T> out(q.values().size(), T(0));
  std::vector<T> scores;
  int64_t score_elements = 0;

  for (int64_t b = 0; b < batch; ++b) {
    const int64_t len = q.length(b);
    if (len == 0) continue;
    score_elements += len * len;
    const T* qb = q.values().data() + q.offsets()[b] * width;
    const T* kb = k.values().data() + k.offsets()[b] * width;
    const T* vb = v.values().data() + v.offsets()[b] * width;
    const T* bias = rab != nullptr ? rab->row(b).data() : nullptr;
    T* ob = out.data() + q.offsets()[b] * width;
    scores.assign(len, T(0));

    for (int64_t h = 0; h < cfg.num_heads; ++h) {
      const int64_t hoff = h * hd;
      for (int64_t a = 0; a < len; ++a) {
        const int64_t kv_end = cfg.causal ? a + 1 : len;
        T row_max = -std::numeric_limits<T>::infinity();
        for (int64_t c = 0; c < kv_end; ++c) {
          T dot = T(0);
          for (int64_t d = 0; d < hd; ++d) {
            dot += qb[a * width + hoff + d] * kb[c * width + hoff + d];
          }
          T s = dot * scale;
          if (bias != nullptr) s += bias[a * len + c];
          scores[c] = s;
          row_max = std::max(row_max, s);
        }
        T denom = T(0);
        for (int64_t c = 0; c < kv_end; ++c) {
          scores[c] = std::exp(scores[c] - row_max);
          denom += scores[c];
        }
        T* orow = ob + a * width + hoff;
        for (int64_t c = 0; c < kv_end; ++c) {
          const T p = scores[c] / denom;
          for (int64_t d = 0; d < hd; ++d) {
            orow[d] += p * vb[c * width + hoff + d];
          }
        }
      }
    }
  }
  if (stats != nullptr) stats->score_elements += score_elements;
  return JaggedTensor<T>(std::move(out), q.offsets(), width);
}

template struct RabSpec<float>;
template struct RabSpec<double>;
template JaggedTensor<float> ComputeRab(const JaggedTensor<int64_t>&,
                                        const RabSpec<float>&,
                                        AttentionStats*);
template JaggedTensor<double> ComputeRab(const JaggedTensor<int64_t>&,
                                         const RabSpec<double>&,
                                         AttentionStats*);
template JaggedTensor<float> JaggedAttention(const JaggedTensor<float>&,
                                             const JaggedTensor<float>&,
                                             const JaggedTensor<float>&,
                                             const JaggedTensor<float>*,
                                             const AttentionConfig&,
                                             AttentionStats*);
template JaggedTensor<double> JaggedAttention(const JaggedTensor<double>&,
                                              const JaggedTensor<double>&,
                                              const JaggedTensor<double>&,
                                              const JaggedTensor<double>*,
                                              const AttentionConfig&,
                                              AttentionStats*);

}  // namespace jaggedrec
