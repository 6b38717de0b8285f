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
#ifndef JAGGEDREC_WORKLOAD_H_
#define JAGGEDREC_WORKLOAD_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jaggedrec/embedding.h"
#include "jaggedrec/load_balancer.h"

namespace jaggedrec {

// Discrete Zipf over {1, ..., support} with P(k) proportional to k^-exponent,
// sampled by inverse CDF.
class ZipfSampler {
 public:
  ZipfSampler(int64_t support, double exponent);

  int64_t operator()(std::mt19937_64& rng) const;

  int64_t support() const { return static_cast<int64_t>(cdf_.size()); }
  double exponent() const { return exponent_; }

 private:
  double exponent_;
  std::vector<double> cdf_;
};

enum class LengthDistKind { kFixed, kUniform, kLogNormal, kZipf };

struct LengthDistribution {
  LengthDistKind kind = LengthDistKind::kUniform;
  int64_t max_len = 2048;
  int64_t min_len = 1;
  int64_t fixed_len = 2048;  // kFixed
  double mu = 5.0;           // kLogNormal, log-space mean
  double sigma = 1.0;        // kLogNormal, log-space stddev
  double zipf_exponent = 1.2;

  void Validate() const;
};

LengthDistKind ParseLengthDistKind(const std::string& name);
std::string LengthDistName(LengthDistKind kind);

// Lengths in [min_len, max_len], reproducible from `seed`.
std::vector<int64_t> GenerateLengths(const LengthDistribution& dist,
                                     int64_t count, uint64_t seed);

struct LengthSummary {
  int64_t total_slots = 0;  // count * max_len
  int64_t valid = 0;
  int64_t padded = 0;
  double padding_ratio = 0.0;
  int64_t p50 = 0;
  int64_t p90 = 0;
  int64_t p99 = 0;
  int64_t max = 0;
};

// Padding relative to staging every length at `max_len`; nearest-rank
// percentiles.
LengthSummary SummarizeLengths(std::span<const int64_t> lengths,
                               int64_t max_len);

std::vector<SampleMeta> ToSampleMetas(std::span<const int64_t> lengths);

// A multi-table batch with exactly `total_slots` padded slots of which
// `padded_slots` are padding: num_keys * batch_size * max_len == total_slots.
// Lengths are drawn at random and then adjusted to hit the valid count.
KeyedJaggedTensor MakePaddedBatch(int64_t num_keys, int64_t batch_size,
                                  int64_t max_len, int64_t padded_slots,
                                  int64_t rows_per_table, uint64_t seed);

// The lookup batch size used for the padding-redundancy check: 1,064,960
// slots, 537,019 of them padding.
inline constexpr int64_t kTable2Slots = 1064960;
inline constexpr int64_t kTable2Padding = 537019;
KeyedJaggedTensor MakeTable2Batch(int64_t rows_per_table, uint64_t seed);

// Random embedding tables named "t0", "t1", ... with weights in [-1, 1].
std::vector<EmbeddingTable> MakeRandomTables(std::span<const int64_t> rows,
                                             int64_t dim, uint64_t seed);

// Random KJT over the given tables: per-slot lengths uniform in
// [0, max_len], IDs uniform (zipf_exponent <= 0) or Zipf-ranked.
KeyedJaggedTensor MakeRandomKjt(std::span<const EmbeddingTable> tables,
                                int64_t batch_size, int64_t max_len,
                                double zipf_exponent, std::mt19937_64& rng);

}  // namespace jaggedrec

#endif  // JAGGEDREC_WORKLOAD_H_
