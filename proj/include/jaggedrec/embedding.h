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
#ifndef JAGGEDREC_EMBEDDING_H_
#define JAGGEDREC_EMBEDDING_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "jaggedrec/half.h"
#include "jaggedrec/jagged_tensor.h"

namespace jaggedrec {

enum class Precision { kFull = 0, kHalf = 1 };

struct EmbeddingTable {
  std::string name;
  int64_t rows = 0;
  int64_t dim = 0;
  std::vector<double> weights;          // rows x dim, row-major
  std::vector<double> optimizer_state;  // rows x dim AdaGrad accumulator
  Precision precision = Precision::kFull;

  static EmbeddingTable Zeros(std::string name, int64_t rows, int64_t dim,
                              Precision precision = Precision::kFull);

  std::span<const double> row(int64_t r) const {
    return std::span<const double>(weights).subspan(r * dim, dim);
  }
  std::span<double> mutable_row(int64_t r) {
    return std::span<double>(weights).subspan(r * dim, dim);
  }

  // Finite weights, non-negative optimizer state, consistent sizes.
  void Validate() const;

  friend bool operator==(const EmbeddingTable&,
                         const EmbeddingTable&) = default;
};

// Table lookup by name over a caller-owned collection.
const EmbeddingTable& FindTable(std::span<const EmbeddingTable> tables,
                                const std::string& name);

// Per-table jagged ID batch. Values are concatenated key-major, sample-minor:
// all samples of keys[0], then all samples of keys[1], and so on.
struct KeyedJaggedTensor {
  std::vector<std::string> keys;
  int64_t batch_size = 0;
  std::vector<int64_t> lengths;  // keys.size() * batch_size
  std::vector<int64_t> values;

  int64_t num_keys() const { return static_cast<int64_t>(keys.size()); }
  int64_t length(int64_t key, int64_t sample) const {
    return lengths[key * batch_size + sample];
  }
  // Offsets over (key, sample) slots; size num_keys * batch_size + 1.
  std::vector<int64_t> offsets() const;
  // [begin, end) of key `k`'s IDs inside `values`.
  std::pair<int64_t, int64_t> key_range(int64_t k) const;
  JaggedTensor<int64_t> ids_for_key(int64_t k) const;
  int64_t KeyIndex(const std::string& key) const;

  // Structural checks, plus ID range checks when `tables` is non-empty.
  void Validate(std::span<const EmbeddingTable> tables = {}) const;
};

struct IndexStats {
  int64_t total_processed = 0;
};

struct LookupResult {
  // One jagged tensor per KJT key, in key order; widths equal table dims.
  std::vector<JaggedTensor<double>> embeddings;
  IndexStats stats;
};

// Gathers only the valid IDs of every (key, sample) row.
LookupResult LookupJagged(const KeyedJaggedTensor& kjt,
                          std::span<const EmbeddingTable> tables);

// Baseline that stages every row to `max_len` slots, padding with ID 0, and
// looks up every slot. Returned tensors hold only the valid prefix; the stats
// count all slots processed, padded or not.
LookupResult LookupPadded(const KeyedJaggedTensor& kjt,
                          std::span<const EmbeddingTable> tables,
                          int64_t max_len);

struct IndexRange {
  int64_t begin = 0;
  int64_t end = 0;
  int64_t size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// Table-major work split: ranges[t][c] is core c's slice of table t's IDs,
// expressed as absolute positions into KeyedJaggedTensor::values.
struct CorePartitionPlan {
  int64_t num_cores = 1;
  std::vector<std::vector<IndexRange>> ranges;
};

CorePartitionPlan BuildCorePartition(const KeyedJaggedTensor& kjt,
                                     int64_t num_cores);

struct GroupedLookupResult {
  LookupResult lookup;
  std::vector<std::vector<int64_t>> work;  // [core][table] processed IDs
};

// Executes the plan core by core. Output is bit-identical to LookupJagged.
GroupedLookupResult LookupGrouped(const KeyedJaggedTensor& kjt,
                                  std::span<const EmbeddingTable> tables,
                                  const CorePartitionPlan& plan);

struct SparseGradient {
  int64_t dim = 0;
  std::vector<int64_t> indices;  // strictly increasing
  std::vector<double> values;    // indices.size() x dim

  std::span<const double> row(size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
  friend bool operator==(const SparseGradient&,
                         const SparseGradient&) = default;
};


// Accumulates rows by ID in arrival order; Finish() sorts by ID. With
// `num_rows` > 0 the IDs must lie in [0, num_rows) and lookups use a dense
// slot array instead of a hash map.
class SparseGradientBuilder {
 public:
  explicit SparseGradientBuilder(int64_t dim, int64_t num_rows = 0)
      : dim_(dim), dense_slot_(num_rows, -1) {}

  // Zero-initialized on first use.
  double* Row(int64_t id);
  SparseGradient Finish() const;

 private:
  int64_t dim_;
  std::unordered_map<int64_t, int64_t> slot_;
  std::vector<int64_t> dense_slot_;
  std::vector<int64_t> ids_;
  std::vector<double> values_;
};

// Sums gradient rows per referenced ID, in ascending position order. Returns
// one SparseGradient per KJT key.
std::vector<SparseGradient> BackwardAccumulate(
    std::span<const JaggedTensor<double>> grads, const KeyedJaggedTensor& kjt);

struct HalfLookup {
  int64_t dim = 0;
  std::vector<Half> values;  // ids.size() x dim
  int64_t saturated = 0;     // elements clamped to +-kHalfMax

  double at(size_t i, int64_t d) const { return FromHalf(values[i * dim + d]); }
};

// Half-precision gather for negative-sample embeddings.
HalfLookup LookupFp16(std::span<const int64_t> ids, const EmbeddingTable& table);

// ID -> occurrence count for one key.
std::map<int64_t, int64_t> AccessHistogram(const KeyedJaggedTensor& kjt,
                                           int64_t key);

// Binary checkpoint: magic "JRTB", u32 version, u32 name length, name bytes,
// i64 rows, i64 dim, u8 precision, then rows*dim little-endian f64 weights and
// rows*dim f64 optimizer state.
void WriteTable(const EmbeddingTable& table, std::ostream& os);
EmbeddingTable ReadTable(std::istream& is);
void SaveTable(const EmbeddingTable& table, const std::string& path);
EmbeddingTable LoadTable(const std::string& path);

}  // namespace jaggedrec

#endif  // JAGGEDREC_EMBEDDING_H_
