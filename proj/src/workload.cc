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
#include "jaggedrec/workload.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "jaggedrec/errors.h"

namespace jaggedrec {

ZipfSampler::ZipfSampler(int64_t support, double exponent)
    : exponent_(exponent) {
  JR_CHECK_ARG(support >= 1, "Zipf support must be >= 1");
  JR_CHECK_ARG(std::isfinite(exponent) && exponent >= 0.0,
               "Zipf exponent must be finite and non-negative");
  cdf_.resize(support);
  double acc = 0.0;
  for (int64_t k = 1; k <= support; ++k) {
    acc += std::pow(static_cast<double>(k), -exponent);
    cdf_[k - 1] = acc;
  }
  for (double& c : cdf_) c /= acc;
  cdf_.back() = 1.0;
}

int64_t ZipfSampler::operator()(std::mt19937_64& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<int64_t>(it - cdf_.begin()) + 1;
}

void LengthDistribution::Validate() const {
  JR_CHECK_ARG(max_len >= 1, "max_len must be >= 1");
  JR_CHECK_ARG(min_len >= 0 && min_len <= max_len,
               "min_len must lie in [0, max_len]");
  switch (kind) {
    case LengthDistKind::kFixed:
      JR_CHECK_ARG(fixed_len >= 0 && fixed_len <= max_len,
                   "fixed_len must lie in [0, max_len]");
      break;
    case LengthDistKind::kUniform:
      break;
    case LengthDistKind::kLogNormal:
      JR_CHECK_ARG(std::isfinite(mu) && std::isfinite(sigma) && sigma > 0.0,
                   "log-normal needs finite mu and sigma > 0");
      break;
    case LengthDistKind::kZipf:
      JR_CHECK_ARG(std::isfinite(zipf_exponent) && zipf_exponent > 0.0,
                   "Zipf exponent must be positive");
      break;
  }
}

LengthDistKind ParseLengthDistKind(const std::string& name) {
  if (name == "fixed") return LengthDistKind::kFixed;
  if (name == "uniform") return LengthDistKind::kUniform;
  if (name == "lognormal") return LengthDistKind::kLogNormal;
  if (name == "zipf") return LengthDistKind::kZipf;
  throw ValidationError("unknown length distribution '" + name + "'");
}

std::string LengthDistName(LengthDistKind kind) {
  switch (kind) {
    case LengthDistKind::kFixed:
      return "fixed";
    case LengthDistKind::kUniform:
      return "uniform";
    case LengthDistKind::kLogNormal:
      return "lognormal";
    case LengthDistKind::kZipf:
      return "zipf";
  }
  return "unknown";
}

std::vector<int64_t> GenerateLengths(const LengthDistribution& dist,
                                     int64_t count, uint64_t seed) {
  dist.Validate();
  JR_CHECK_ARG(count >= 0, "negative sample count");
  std::mt19937_64 rng(seed);
  std::vector<int64_t> out(count);
  switch (dist.kind) {
    case LengthDistKind::kFixed:
      std::fill(out.begin(), out.end(), dist.fixed_len);
      break;
    case LengthDistKind::kUniform: {
      std::uniform_int_distribution<int64_t> u(dist.min_len, dist.max_len);
      for (auto& l : out) l = u(rng);
      break;
    }
    case LengthDistKind::kLogNormal: {
      std::lognormal_distribution<double> ln(dist.mu, dist.sigma);
      for (auto& l : out) {
        l = std::clamp(static_cast<int64_t>(std::llround(ln(rng))),
                       dist.min_len, dist.max_len);
      }
      break;
    }
    case LengthDistKind::kZipf: {
      ZipfSampler z(dist.max_len, dist.zipf_exponent);
      for (auto& l : out) l = std::max(z(rng), dist.min_len);
      break;
    }
  }
  return out;
}

LengthSummary SummarizeLengths(std::span<const int64_t> lengths,
                               int64_t max_len) {
  LengthSummary s;
  if (lengths.empty()) return s;
  std::vector<int64_t> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  JR_CHECK_ARG(sorted.back() <= max_len, "length ", sorted.back(),
               " exceeds max_len ", max_len);
  s.total_slots = static_cast<int64_t>(lengths.size()) * max_len;
  for (int64_t l : lengths) s.valid += l;
  s.padded = s.total_slots - s.valid;
  s.padding_ratio =
      s.total_slots > 0 ? static_cast<double>(s.padded) / s.total_slots : 0.0;
  auto pct = [&](double q) {
    const auto rank = static_cast<size_t>(
        std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::clamp<size_t>(rank, 1, sorted.size()) - 1];
  };
  s.p50 = pct(0.50);
  s.p90 = pct(0.90);
  s.p99 = pct(0.99);
  s.max = sorted.back();
  return s;
}

std::vector<SampleMeta> ToSampleMetas(std::span<const int64_t> lengths) {
  std::vector<SampleMeta> out;
  out.reserve(lengths.size());
  for (size_t i = 0; i < lengths.size(); ++i) {
    out.push_back(SampleMeta{static_cast<int64_t>(i), lengths[i]});
  }
  return out;
}

KeyedJaggedTensor MakePaddedBatch(int64_t num_keys, int64_t batch_size,
                                  int64_t max_len, int64_t padded_slots,
                                  int64_t rows_per_table, uint64_t seed) {
  const int64_t slots = num_keys * batch_size;
  const int64_t total = slots * max_len;
  JR_CHECK_ARG(padded_slots >= 0 && padded_slots <= total,
               "padded_slots must lie in [0, ", total, "]");
  JR_CHECK_ARG(rows_per_table >= 1, "rows_per_table must be >= 1");
  const int64_t valid = total - padded_slots;
  std::mt19937_64 rng(seed);

  // Long-tailed draw, then nudge single rows until the sum is exact.
  std::vector<int64_t> lengths(slots);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> raw(slots);
  double raw_sum = 0.0;
  for (auto& r : raw) {
    r = expo(rng);
    raw_sum += r;
  }
  int64_t sum = 0;
  for (int64_t i = 0; i < slots; ++i) {
    lengths[i] = std::clamp<int64_t>(
        std::llround(raw[i] / raw_sum * static_cast<double>(valid)), 0,
        max_len);
    sum += lengths[i];
  }
  std::uniform_int_distribution<int64_t> pick(0, slots - 1);
  while (sum != valid) {
    const int64_t i = pick(rng);
    if (sum < valid && lengths[i] < max_len) {
      const int64_t step = std::min(max_len - lengths[i], valid - sum);
      lengths[i] += step;
      sum += step;
    } else if (sum > valid && lengths[i] > 0) {
      const int64_t step = std::min(lengths[i], sum - valid);
      lengths[i] -= step;
      sum -= step;
    }
  }

  KeyedJaggedTensor kjt;
  for (int64_t k = 0; k < num_keys; ++k) kjt.keys.push_back("t" + std::to_string(k));
  kjt.batch_size = batch_size;
  kjt.lengths = std::move(lengths);
  kjt.values.resize(valid);
  std::uniform_int_distribution<int64_t> id(0, rows_per_table - 1);
  for (auto& v : kjt.values) v = id(rng);
  return kjt;
}

KeyedJaggedTensor MakeTable2Batch(int64_t rows_per_table, uint64_t seed) {
  // 8 tables x 130 samples x 1024 slots = 1,064,960.
  return MakePaddedBatch(8, 130, 1024, kTable2Padding, rows_per_table, seed);
}

std::vector<EmbeddingTable> MakeRandomTables(std::span<const int64_t> rows,
                                             int64_t dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<EmbeddingTable> tables;
  for (size_t t = 0; t < rows.size(); ++t) {
    EmbeddingTable table =
        EmbeddingTable::Zeros("t" + std::to_string(t), rows[t], dim);
    for (double& w : table.weights) w = u(rng);
    tables.push_back(std::move(table));
  }
  return tables;
}

KeyedJaggedTensor MakeRandomKjt(std::span<const EmbeddingTable> tables,
                                int64_t batch_size, int64_t max_len,
                                double zipf_exponent, std::mt19937_64& rng) {
  KeyedJaggedTensor kjt;
  kjt.batch_size = batch_size;
  std::uniform_int_distribution<int64_t> len(0, max_len);
  for (const EmbeddingTable& t : tables) {
    kjt.keys.push_back(t.name);
    std::uniform_int_distribution<int64_t> uid(0, t.rows - 1);
    std::unique_ptr<ZipfSampler> zipf;
    if (zipf_exponent > 0.0) {
      zipf = std::make_unique<ZipfSampler>(t.rows, zipf_exponent);
    }
    for (int64_t s = 0; s < batch_size; ++s) {
      const int64_t l = len(rng);
      kjt.lengths.push_back(l);
      for (int64_t i = 0; i < l; ++i) {
        kjt.values.push_back(zipf ? (*zipf)(rng) - 1 : uid(rng));
      }
    }
  }
  return kjt;
}

}  // namespace jaggedrec
