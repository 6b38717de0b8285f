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
#include "jaggedrec/neg_sampling.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "jaggedrec/errors.h"
#include "jaggedrec/half.h"

namespace jaggedrec {
namespace {

std::mt19937_64 BatchRng(uint64_t seed, uint64_t batch_id) {
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(batch_id),
                    static_cast<uint32_t>(batch_id >> 32)};
  return std::mt19937_64(seq);
}

int64_t CheckedMul(std::initializer_list<int64_t> factors) {
  int64_t out = 1;
  for (int64_t f : factors) {
    JR_CHECK_ARG(!__builtin_mul_overflow(out, f, &out),
                 "byte count overflows int64");
  }
  return out;
}

}  // namespace

NegSampleBatch SampleNegatives(const JaggedTensor<int64_t>& positive_ids,
                               const NegSamplerConfig& config,
                               uint64_t batch_id) {
  JR_CHECK_ARG(config.num_negatives >= 1, "R must be >= 1");
  JR_CHECK_ARG(config.pool_size >= 1, "pool_size must be >= 1");
  JR_CHECK_ARG(!config.exclude_positive || config.pool_size >= 2,
               "positive exclusion needs pool_size >= 2");
  NegSampleBatch out;
  out.positive_ids = positive_ids;
  out.num_negatives = config.num_negatives;
  out.pool_size = config.pool_size;
  std::mt19937_64 rng = BatchRng(config.seed, batch_id);
  std::uniform_int_distribution<int64_t> uid(0, config.pool_size - 1);
  const int64_t valid = positive_ids.num_items();
  out.negative_ids.resize(valid * config.num_negatives);
  for (int64_t p = 0; p < valid; ++p) {
    const int64_t pos = positive_ids.values()[p];
    for (int64_t j = 0; j < config.num_negatives; ++j) {
      int64_t id = uid(rng);
      while (config.exclude_positive && id == pos) id = uid(rng);
      out.negative_ids[p * config.num_negatives + j] = id;
    }
  }
  return out;
}

NegSampleBatch SampleNegatives(std::span<const int64_t> valid_lengths,
                               int64_t num_negatives, int64_t pool_size,
                               uint64_t seed, uint64_t batch_id) {
  const std::vector<int64_t> offsets = OffsetsFromLengths(valid_lengths);
  JaggedTensor<int64_t> positives(std::vector<int64_t>(offsets.back(), 0),
                                  offsets);
  return SampleNegatives(positives,
                         NegSamplerConfig{num_negatives, pool_size, false, seed},
                         batch_id);
}

NegMemory NegMemoryModel(int64_t batch, int64_t seq_len, int64_t dim,
                         int64_t num_negatives, int64_t bytes_per_elem,
                         int64_t segment_size) {
  for (int64_t v : {batch, seq_len, dim, num_negatives, bytes_per_elem,
                    segment_size}) {
    JR_CHECK_ARG(v >= 1, "memory model inputs must be positive");
  }
  NegMemory m;
  m.full_bytes =
      CheckedMul({batch, seq_len, dim, num_negatives, bytes_per_elem});
  const int64_t buffers =
      CheckedMul({2, segment_size, num_negatives, dim, bytes_per_elem});
  const int64_t logits =
      CheckedMul({batch, seq_len, num_negatives, bytes_per_elem});
  JR_CHECK_ARG(!__builtin_add_overflow(buffers, logits, &m.offloaded_peak_bytes),
               "byte count overflows int64");
  return m;
}

float Dot(const float* a, const float* b, int64_t n) {
  float acc = 0.0f;
  for (int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

namespace {

void CheckLogitShapes(std::span<const float> output,
                      std::span<const float> negatives, int64_t num_valid,
                      int64_t num_negatives, int64_t dim) {
  JR_CHECK_ARG(num_valid >= 0 && num_negatives >= 1 && dim >= 1,
               "bad logit shape");
  JR_CHECK_ARG(static_cast<int64_t>(output.size()) == num_valid * dim,
               "output has ", output.size(), " values, expected ",
               num_valid * dim);
  JR_CHECK_ARG(static_cast<int64_t>(negatives.size()) ==
                   num_valid * num_negatives * dim,
               "negatives have ", negatives.size(), " values, expected ",
               num_valid * num_negatives * dim);
}

}  // namespace

std::vector<float> MonolithicLogits(std::span<const float> output,
                                    std::span<const float> negatives,
                                    int64_t num_valid, int64_t num_negatives,
                                    int64_t dim) {
  CheckLogitShapes(output, negatives, num_valid, num_negatives, dim);
  std::vector<float> logits(num_valid * num_negatives);
  for (int64_t p = 0; p < num_valid; ++p) {
    for (int64_t j = 0; j < num_negatives; ++j) {
      logits[p * num_negatives + j] =
          Dot(&output[p * dim], &negatives[(p * num_negatives + j) * dim], dim);
    }
  }
  return logits;
}

SegmentedLogits ComputeSegmentedLogits(std::span<const float> output,
                                       std::span<const float> host_negatives,
                                       int64_t num_valid,
                                       int64_t num_negatives, int64_t dim,
                                       int64_t segment_size) {
  JR_CHECK_ARG(segment_size >= 1, "segment_size must be >= 1, got ",
               segment_size);
  CheckLogitShapes(output, host_negatives, num_valid, num_negatives, dim);
  SegmentedLogits out;
  out.logits.resize(num_valid * num_negatives);
  const int64_t per_position = num_negatives * dim;
  const int64_t num_segments = (num_valid + segment_size - 1) / segment_size;
  std::vector<float> device[2];
  int64_t resident[2] = {0, 0};
  device[0].resize(std::min(segment_size, num_valid) * per_position);
  device[1].resize(device[0].size());

  auto fetch = [&](int64_t s, int64_t buf) {
    const int64_t begin = s * segment_size;
    const int64_t end = std::min(begin + segment_size, num_valid);
    std::copy(host_negatives.begin() + begin * per_position,
              host_negatives.begin() + end * per_position,
              device[buf].begin());
    resident[buf] = (end - begin) * per_position *
                    static_cast<int64_t>(sizeof(float));
    out.transfers.push_back(SegmentTransfer{s, buf, resident[buf]});
    out.resident_high_water_bytes = std::max(out.resident_high_water_bytes,
                                             resident[0] + resident[1]);
  };

  if (num_segments > 0) fetch(0, 0);
  for (int64_t s = 0; s < num_segments; ++s) {
    const int64_t buf = s % 2;
    if (s + 1 < num_segments) fetch(s + 1, 1 - buf);
    const int64_t begin = s * segment_size;
    const int64_t end = std::min(begin + segment_size, num_valid);
    for (int64_t p = begin; p < end; ++p) {
      const float* neg = &device[buf][(p - begin) * per_position];
      for (int64_t j = 0; j < num_negatives; ++j) {
        out.logits[p * num_negatives + j] =
            Dot(&output[p * dim], neg + j * dim, dim);
      }
    }
    resident[buf] = 0;
  }
  return out;
}

SharedLogits ShareLogits(std::span<const double> self_logits,
                         int64_t num_tokens, int64_t num_negatives,
                         int64_t expansion, uint64_t seed) {
  JR_CHECK_ARG(num_tokens >= 0 && num_negatives >= 1, "bad logit shape");
  JR_CHECK_ARG(expansion >= 1, "expansion factor k must be >= 1");
  JR_CHECK_ARG(static_cast<int64_t>(self_logits.size()) ==
                   num_tokens * num_negatives,
               "self logits size mismatch");
  JR_CHECK_ARG(expansion == 1 || num_tokens >= 2,
               "logit sharing with k > 1 needs at least 2 tokens");
  JR_CHECK_ARG(expansion <= std::max<int64_t>(num_tokens, 1),
               "k = ", expansion, " needs ", (expansion - 1) * num_negatives,
               " auxiliary logits but only ", (num_tokens - 1) * num_negatives,
               " are available");
  const int64_t aux = (expansion - 1) * num_negatives;
  SharedLogits out;
  out.num_tokens = num_tokens;
  out.set_size = expansion * num_negatives;
  out.values.resize(num_tokens * out.set_size);
  out.source_token.resize(out.values.size());
  out.source_index.resize(out.values.size());
  std::mt19937_64 rng(seed);
  std::vector<int64_t> pool;
  std::vector<int64_t> set(out.set_size);  // flat source positions
  for (int64_t t = 0; t < num_tokens; ++t) {
    for (int64_t j = 0; j < num_negatives; ++j) set[j] = t * num_negatives + j;
    if (aux > 0) {
      pool.clear();
      for (int64_t s = 0; s < num_tokens * num_negatives; ++s) {
        if (s / num_negatives != t) pool.push_back(s);
      }
      for (int64_t i = 0; i < aux; ++i) {
        std::uniform_int_distribution<int64_t> pick(
            i, static_cast<int64_t>(pool.size()) - 1);
        std::swap(pool[i], pool[pick(rng)]);
        set[num_negatives + i] = pool[i];
      }
    }
    for (int64_t i = out.set_size - 1; i > 0; --i) {
      std::uniform_int_distribution<int64_t> pick(0, i);
      std::swap(set[i], set[pick(rng)]);
    }
    for (int64_t i = 0; i < out.set_size; ++i) {
      const int64_t flat = t * out.set_size + i;
      out.values[flat] = self_logits[set[i]];
      out.source_token[flat] = set[i] / num_negatives;
      out.source_index[flat] = set[i] % num_negatives;
    }
  }
  return out;
}

SoftmaxLoss SampledSoftmaxLoss(double positive,
                               std::span<const double> negatives,
                               std::span<const double> auxiliary) {
  double m = positive;
  auto scan = [&](std::span<const double> xs) {
    for (double x : xs) {
      JR_CHECK_ARG(!std::isnan(x) && x != std::numeric_limits<double>::infinity(),
                   "logits must be finite or -inf");
      m = std::max(m, x);
    }
  };
  JR_CHECK_ARG(!std::isnan(positive) &&
                   positive != std::numeric_limits<double>::infinity(),
               "positive logit must be finite or -inf");
  scan(negatives);
  scan(auxiliary);
  JR_CHECK_ARG(std::isfinite(m), "all logits are -inf");

  SoftmaxLoss out;
  double z = std::exp(positive - m);
  for (double x : negatives) z += std::exp(x - m);
  for (double x : auxiliary) z += std::exp(x - m);
  out.loss = std::log(z) - (positive - m);
  out.grad_positive = std::exp(positive - m) / z - 1.0;
  out.grad_negatives.reserve(negatives.size());
  for (double x : negatives) out.grad_negatives.push_back(std::exp(x - m) / z);
  out.grad_auxiliary.reserve(auxiliary.size());
  for (double x : auxiliary) out.grad_auxiliary.push_back(std::exp(x - m) / z);
  return out;
}

BatchLoss NegativeSampledLoss(std::span<const double> outputs,
                              const NegSampleBatch& batch,
                              const EmbeddingTable& table,
                              const LossConfig& config) {
  JR_CHECK_ARG(config.temperature > 0.0, "temperature must be positive");
  const int64_t tokens = batch.num_valid();
  const int64_t r = batch.num_negatives;
  const int64_t dim = table.dim;
  JR_CHECK_ARG(static_cast<int64_t>(outputs.size()) == tokens * dim,
               "outputs have ", outputs.size(), " values, expected ",
               tokens * dim);
  JR_CHECK_ARG(static_cast<int64_t>(batch.negative_ids.size()) == tokens * r,
               "negative ID count mismatch");
  const double inv_temp = 1.0 / config.temperature;

  BatchLoss out;
  // Gather every row once: positives first, then negatives.
  std::vector<double> pos_rows(tokens * dim);
  std::vector<double> neg_rows(tokens * r * dim);
  for (int64_t t = 0; t < tokens; ++t) {
    const int64_t id = batch.positive_ids.values()[t];
    JR_CHECK_ARG(id >= 0 && id < table.rows, "positive ID ", id,
                 " out of range");
    std::span<const double> row = table.row(id);
    std::copy(row.begin(), row.end(), pos_rows.begin() + t * dim);
    ++out.embedding_lookups;
  }
  for (int64_t i = 0; i < tokens * r; ++i) {
    const int64_t id = batch.negative_ids[i];
    JR_CHECK_ARG(id >= 0 && id < table.rows, "negative ID ", id,
                 " out of range");
    std::span<const double> row = table.row(id);
    for (int64_t d = 0; d < dim; ++d) {
      double v = row[d];
      if (config.fp16_negatives) {
        bool saturated = false;
        v = FromHalf(ToHalf(v, &saturated));
        out.fp16_saturated += saturated;
      }
      neg_rows[i * dim + d] = v;
    }
    ++out.embedding_lookups;
  }

  auto dot = [dim](const double* a, const double* b) {
    double acc = 0.0;
    for (int64_t d = 0; d < dim; ++d) acc += a[d] * b[d];
    return acc;
  };
  std::vector<double> self(tokens * r);
  for (int64_t t = 0; t < tokens; ++t) {
    for (int64_t j = 0; j < r; ++j) {
      self[t * r + j] =
          dot(&outputs[t * dim], &neg_rows[(t * r + j) * dim]) * inv_temp;
    }
  }
  SharedLogits shared;
  if (config.expansion > 1) {
    shared = ShareLogits(self, tokens, r, config.expansion, config.shuffle_seed);
  }

  out.grad_output.assign(tokens * dim, 0.0);
  SparseGradientBuilder rows(dim, table.rows);
  auto add_row = [&](int64_t id, const double* o, double g) {
    double* row = rows.Row(id);
    for (int64_t d = 0; d < dim; ++d) row[d] += g * o[d];
  };
  auto add_out = [&](int64_t t, const double* e, double g) {
    for (int64_t d = 0; d < dim; ++d) out.grad_output[t * dim + d] += g * e[d];
  };

  const double scale = tokens > 0 ? 1.0 / static_cast<double>(tokens) : 0.0;
  for (int64_t t = 0; t < tokens; ++t) {
    const double* o = &outputs[t * dim];
    const double pos = dot(o, &pos_rows[t * dim]) * inv_temp;
    SoftmaxLoss l =
        config.expansion > 1
            ? SampledSoftmaxLoss(pos, shared.set(t))
            : SampledSoftmaxLoss(
                  pos, std::span<const double>(self).subspan(t * r, r));
    if (!std::isfinite(l.loss)) {
      throw InvariantError(internal::StrCat("non-finite loss at token ", t));
    }
    out.loss += l.loss * scale;
    const double gp = l.grad_positive * scale * inv_temp;
    add_out(t, &pos_rows[t * dim], gp);
    add_row(batch.positive_ids.values()[t], o, gp);
    for (size_t i = 0; i < l.grad_negatives.size(); ++i) {
      int64_t src_t = t;
      int64_t src_j = static_cast<int64_t>(i);
      if (config.expansion > 1) {
        src_t = shared.source_token[t * shared.set_size + i];
        src_j = shared.source_index[t * shared.set_size + i];
      }
      const double g = l.grad_negatives[i] * scale * inv_temp;
      const int64_t flat = src_t * r + src_j;
      add_out(src_t, &neg_rows[flat * dim], g);
      add_row(batch.negative_ids[flat], &outputs[src_t * dim], g);
    }
  }
  out.grad_table = rows.Finish();
  return out;
}

}  // namespace jaggedrec
