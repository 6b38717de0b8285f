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
#ifndef JAGGEDREC_JAGGED_TENSOR_H_
#define JAGGEDREC_JAGGED_TENSOR_H_

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jaggedrec/errors.h"

namespace jaggedrec {

// Prefix sum of `lengths` with a leading zero. Throws on negative lengths.
std::vector<int64_t> OffsetsFromLengths(std::span<const int64_t> lengths);

// A batch of variable-length rows stored without padding.
//
// Row `i` owns the `dim`-wide items values[offsets[i] * dim ..
// offsets[i + 1] * dim). Zero-length rows are legal. Instances are immutable
// after construction.
template <typename T>
class JaggedTensor {
 public:
  JaggedTensor() : offsets_{0}, dim_(1) {}

  JaggedTensor(std::vector<T> values, std::vector<int64_t> offsets,
               int64_t dim = 1)
      : values_(std::move(values)), offsets_(std::move(offsets)), dim_(dim) {
    JR_CHECK_ARG(dim_ >= 1, "jagged dim must be >= 1, got ", dim_);
    JR_CHECK_ARG(!offsets_.empty() && offsets_.front() == 0,
                 "jagged offsets must start at 0");
    for (size_t i = 1; i < offsets_.size(); ++i) {
      JR_CHECK_ARG(offsets_[i] >= offsets_[i - 1],
                   "jagged offsets must be non-decreasing at ", i);
    }
    JR_CHECK_ARG(static_cast<int64_t>(values_.size()) ==
                     offsets_.back() * dim_,
                 "jagged values size ", values_.size(), " != offsets.back() ",
                 offsets_.back(), " * dim ", dim_);
  }

  static JaggedTensor FromLengths(std::vector<T> values,
                                  std::span<const int64_t> lengths,
                                  int64_t dim = 1) {
    return JaggedTensor(std::move(values), OffsetsFromLengths(lengths), dim);
  }

  int64_t batch_size() const {
    return static_cast<int64_t>(offsets_.size()) - 1;
  }
  int64_t dim() const { return dim_; }
  int64_t num_items() const { return offsets_.back(); }
  int64_t length(int64_t row) const {
    return offsets_[row + 1] - offsets_[row];
  }
  int64_t max_length() const {
    int64_t m = 0;
    for (int64_t i = 0; i < batch_size(); ++i) m = std::max(m, length(i));
    return m;
  }
  std::vector<int64_t> lengths() const {
    std::vector<int64_t> out(batch_size());
    for (int64_t i = 0; i < batch_size(); ++i) out[i] = length(i);
    return out;
  }

  const std::vector<T>& values() const { return values_; }
  const std::vector<int64_t>& offsets() const { return offsets_; }

  // All `dim`-wide items of `row`, flattened.
  std::span<const T> row(int64_t i) const {
    return std::span<const T>(values_).subspan(offsets_[i] * dim_,
                                               length(i) * dim_);
  }
  // Item `pos` of row `i`.
  std::span<const T> item(int64_t i, int64_t pos) const {
    return std::span<const T>(values_).subspan((offsets_[i] + pos) * dim_,
                                               dim_);
  }

  bool SameLayout(const JaggedTensor& other) const {
    return offsets_ == other.offsets_ && dim_ == other.dim_;
  }

  friend bool operator==(const JaggedTensor&, const JaggedTensor&) = default;

 private:
  std::vector<T> values_;
  std::vector<int64_t> offsets_;
  int64_t dim_;
};

// Row-major B x Lmax x D buffer used for dense staging and oracles.
template <typename T>
struct DenseBatch {
  int64_t batch = 0;
  int64_t max_len = 0;
  int64_t dim = 1;
  std::vector<T> data;

  DenseBatch() = default;
  DenseBatch(int64_t b, int64_t l, int64_t d, T fill = T{})
      : batch(b), max_len(l), dim(d), data(b * l * d, fill) {}

  T& at(int64_t b, int64_t l, int64_t d) {
    return data[(b * max_len + l) * dim + d];
  }
  const T& at(int64_t b, int64_t l, int64_t d) const {
    return data[(b * max_len + l) * dim + d];
  }
};

// Keeps the first lengths[i] positions of every dense row.
template <typename T>
JaggedTensor<T> DenseToJagged(const DenseBatch<T>& dense,
                              std::span<const int64_t> lengths) {
  JR_CHECK_ARG(static_cast<int64_t>(lengths.size()) == dense.batch,
               "lengths size ", lengths.size(), " != batch ", dense.batch);
  std::vector<int64_t> offsets = OffsetsFromLengths(lengths);
  std::vector<T> values;
  values.reserve(offsets.back() * dense.dim);
  for (int64_t b = 0; b < dense.batch; ++b) {
    JR_CHECK_ARG(lengths[b] <= dense.max_len, "row ", b, " length ",
                 lengths[b], " exceeds Lmax ", dense.max_len);
    const T* row = &dense.data[b * dense.max_len * dense.dim];
    values.insert(values.end(), row, row + lengths[b] * dense.dim);
  }
  return JaggedTensor<T>(std::move(values), std::move(offsets), dense.dim);
}

// Pads every row to `max_len` with `pad_value`.
template <typename T>
DenseBatch<T> JaggedToDense(const JaggedTensor<T>& jt, int64_t max_len,
                            T pad_value) {
  DenseBatch<T> out(jt.batch_size(), max_len, jt.dim(), pad_value);
  for (int64_t b = 0; b < jt.batch_size(); ++b) {
    JR_CHECK_ARG(jt.length(b) <= max_len, "row ", b, " length ", jt.length(b),
                 " exceeds Lmax ", max_len);
    std::span<const T> row = jt.row(b);
    std::copy(row.begin(), row.end(),
              out.data.begin() + b * max_len * jt.dim());
  }
  return out;
}

// JSON text with "dim", "offsets" and "values" keys, for goldens and debugging.
std::string DebugString(const JaggedTensor<float>& jt);
std::string DebugString(const JaggedTensor<double>& jt);
std::string DebugString(const JaggedTensor<int64_t>& jt);

}  // namespace jaggedrec

#endif  // JAGGEDREC_JAGGED_TENSOR_H_
