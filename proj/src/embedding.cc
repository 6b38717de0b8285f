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
#include "jaggedrec/embedding.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

namespace jaggedrec {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

EmbeddingTable EmbeddingTable::Zeros(std::string name, int64_t rows,
                                     int64_t dim, Precision precision) {
  JR_CHECK_ARG(rows >= 0 && dim >= 1, "invalid table shape ", rows, "x", dim);
  EmbeddingTable t;
  t.name = std::move(name);
  t.rows = rows;
  t.dim = dim;
  t.weights.assign(rows * dim, 0.0);
  t.optimizer_state.assign(rows * dim, 0.0);
  t.precision = precision;
  return t;
}

void EmbeddingTable::Validate() const {
  JR_CHECK_ARG(static_cast<int64_t>(weights.size()) == rows * dim,
               "table ", name, " weight size mismatch");
  JR_CHECK_ARG(static_cast<int64_t>(optimizer_state.size()) == rows * dim,
               "table ", name, " optimizer state size mismatch");
  for (double w : weights) {
    JR_CHECK_ARG(std::isfinite(w), "table ", name, " has non-finite weight");
  }
  for (double s : optimizer_state) {
    JR_CHECK_ARG(s >= 0.0, "table ", name, " has negative optimizer state");
  }
}

const EmbeddingTable& FindTable(std::span<const EmbeddingTable> tables,
                                const std::string& name) {
  for (const EmbeddingTable& t : tables) {
    if (t.name == name) return t;
  }
  throw ValidationError("unknown table key '" + name + "'");
}

std::vector<int64_t> KeyedJaggedTensor::offsets() const {
  return OffsetsFromLengths(lengths);
}

std::pair<int64_t, int64_t> KeyedJaggedTensor::key_range(int64_t k) const {
  int64_t begin = 0;
  for (int64_t i = 0; i < k * batch_size; ++i) begin += lengths[i];
  int64_t end = begin;
  for (int64_t s = 0; s < batch_size; ++s) end += length(k, s);
  return {begin, end};
}

JaggedTensor<int64_t> KeyedJaggedTensor::ids_for_key(int64_t k) const {
  const auto [begin, end] = key_range(k);
  std::vector<int64_t> ids(values.begin() + begin, values.begin() + end);
  return JaggedTensor<int64_t>::FromLengths(
      std::move(ids),
      std::span<const int64_t>(lengths).subspan(k * batch_size, batch_size));
}

int64_t KeyedJaggedTensor::KeyIndex(const std::string& key) const {
  auto it = std::find(keys.begin(), keys.end(), key);
  JR_CHECK_ARG(it != keys.end(), "unknown key '", key, "'");
  return it - keys.begin();
}

void KeyedJaggedTensor::Validate(std::span<const EmbeddingTable> tables) const {
  JR_CHECK_ARG(batch_size >= 0, "negative batch size");
  JR_CHECK_ARG(static_cast<int64_t>(lengths.size()) == num_keys() * batch_size,
               "KJT lengths size ", lengths.size(), " != keys*batch ",
               num_keys() * batch_size);
  int64_t total = 0;
  for (int64_t l : lengths) {
    JR_CHECK_ARG(l >= 0, "negative KJT length");
    total += l;
  }
  JR_CHECK_ARG(total == static_cast<int64_t>(values.size()),
               "KJT lengths sum ", total, " != values size ", values.size());
  if (tables.empty()) return;
  for (int64_t k = 0; k < num_keys(); ++k) {
    const EmbeddingTable& table = FindTable(tables, keys[k]);
    const auto [begin, end] = key_range(k);
    for (int64_t i = begin; i < end; ++i) {
      JR_CHECK_ARG(values[i] >= 0 && values[i] < table.rows, "ID ", values[i],
                   " out of range for table ", table.name, " with ",
                   table.rows, " rows");
    }
  }
}

namespace {

std::vector<const EmbeddingTable*> ResolveTables(
    const KeyedJaggedTensor& kjt, std::span<const EmbeddingTable> tables) {
  kjt.Validate(tables);
  std::vector<const EmbeddingTable*> out;
  out.reserve(kjt.num_keys());
  for (const std::string& key : kjt.keys) out.push_back(&FindTable(tables, key));
  return out;
}

}  // namespace

LookupResult LookupJagged(const KeyedJaggedTensor& kjt,
                          std::span<const EmbeddingTable> tables) {
  const std::vector<const EmbeddingTable*> resolved = ResolveTables(kjt, tables);
  LookupResult result;
  result.embeddings.reserve(kjt.num_keys());
  for (int64_t k = 0; k < kjt.num_keys(); ++k) {
    const EmbeddingTable& table = *resolved[k];
    const auto [begin, end] = kjt.key_range(k);
    std::vector<double> out;
    out.reserve((end - begin) * table.dim);
    for (int64_t i = begin; i < end; ++i) {
      std::span<const double> row = table.row(kjt.values[i]);
      out.insert(out.end(), row.begin(), row.end());
    }
    result.stats.total_processed += end - begin;
    result.embeddings.push_back(JaggedTensor<double>::FromLengths(
        std::move(out),
        std::span<const int64_t>(kjt.lengths)
            .subspan(k * kjt.batch_size, kjt.batch_size),
        table.dim));
  }
  return result;
}

LookupResult LookupPadded(const KeyedJaggedTensor& kjt,
                          std::span<const EmbeddingTable> tables,
                          int64_t max_len) {
  const std::vector<const EmbeddingTable*> resolved = ResolveTables(kjt, tables);
  LookupResult result;
  const std::vector<int64_t> offsets = kjt.offsets();
  for (int64_t k = 0; k < kjt.num_keys(); ++k) {
    const EmbeddingTable& table = *resolved[k];
    DenseBatch<double> staged(kjt.batch_size, max_len, table.dim);
    std::vector<int64_t> lens(kjt.batch_size);
    for (int64_t s = 0; s < kjt.batch_size; ++s) {
      const int64_t slot = k * kjt.batch_size + s;
      lens[s] = kjt.lengths[slot];
      JR_CHECK_ARG(lens[s] <= max_len, "row length ", lens[s],
                   " exceeds Lmax ", max_len);
      for (int64_t p = 0; p < max_len; ++p) {
        const int64_t id = p < lens[s] ? kjt.values[offsets[slot] + p] : 0;
        std::span<const double> row = table.row(id);
        std::copy(row.begin(), row.end(), &staged.at(s, p, 0));
        ++result.stats.total_processed;
      }
    }
    result.embeddings.push_back(DenseToJagged(staged, lens));
  }
  return result;
}

CorePartitionPlan BuildCorePartition(const KeyedJaggedTensor& kjt,
                                     int64_t num_cores) {
  JR_CHECK_ARG(num_cores >= 1, "num_cores must be >= 1");
  kjt.Validate();
  CorePartitionPlan plan;
  plan.num_cores = num_cores;
  plan.ranges.resize(kjt.num_keys());
  for (int64_t k = 0; k < kjt.num_keys(); ++k) {
    const auto [begin, end] = kjt.key_range(k);
    const int64_t n = end - begin;
    const int64_t base = n / num_cores;
    const int64_t rem = n % num_cores;
    int64_t cursor = begin;
    for (int64_t c = 0; c < num_cores; ++c) {
      const int64_t count = base + (c < rem ? 1 : 0);
      plan.ranges[k].push_back(IndexRange{cursor, cursor + count});
      cursor += count;
    }
  }
  return plan;
}

GroupedLookupResult LookupGrouped(const KeyedJaggedTensor& kjt,
                                  std::span<const EmbeddingTable> tables,
                                  const CorePartitionPlan& plan) {
  const std::vector<const EmbeddingTable*> resolved = ResolveTables(kjt, tables);
  JR_CHECK_ARG(static_cast<int64_t>(plan.ranges.size()) == kjt.num_keys(),
               "plan covers ", plan.ranges.size(), " tables, KJT has ",
               kjt.num_keys());
  std::vector<std::vector<double>> outputs(kjt.num_keys());
  std::vector<int64_t> key_begin(kjt.num_keys());
  for (int64_t k = 0; k < kjt.num_keys(); ++k) {
    const auto [begin, end] = kjt.key_range(k);
    key_begin[k] = begin;
    outputs[k].assign((end - begin) * resolved[k]->dim, 0.0);
    JR_CHECK_ARG(static_cast<int64_t>(plan.ranges[k].size()) == plan.num_cores,
                 "plan for table ", k, " has wrong core count");
    int64_t cursor = begin;
    for (const IndexRange& r : plan.ranges[k]) {
      JR_CHECK_ARG(r.begin == cursor && r.end >= r.begin,
                   "plan ranges for table ", k, " are not contiguous");
      cursor = r.end;
    }
    JR_CHECK_ARG(cursor == end, "plan ranges for table ", k,
                 " do not cover the table's IDs");
  }

  GroupedLookupResult result;
  result.work.assign(plan.num_cores, std::vector<int64_t>(kjt.num_keys(), 0));
  for (int64_t c = 0; c < plan.num_cores; ++c) {
    for (int64_t k = 0; k < kjt.num_keys(); ++k) {
      const EmbeddingTable& table = *resolved[k];
      const IndexRange& r = plan.ranges[k][c];
      for (int64_t i = r.begin; i < r.end; ++i) {
        std::span<const double> row = table.row(kjt.values[i]);
        std::copy(row.begin(), row.end(),
                  outputs[k].begin() + (i - key_begin[k]) * table.dim);
      }
      result.work[c][k] = r.size();
      result.lookup.stats.total_processed += r.size();
    }
  }
  for (int64_t k = 0; k < kjt.num_keys(); ++k) {
    result.lookup.embeddings.push_back(JaggedTensor<double>::FromLengths(
        std::move(outputs[k]),
        std::span<const int64_t>(kjt.lengths)
            .subspan(k * kjt.batch_size, kjt.batch_size),
        resolved[k]->dim));
  }
  return result;
}

double* SparseGradientBuilder::Row(int64_t id) {
  if (!dense_slot_.empty()) {
    int64_t& slot = dense_slot_[id];
    if (slot < 0) {
      slot = static_cast<int64_t>(ids_.size());
      ids_.push_back(id);
      values_.resize(values_.size() + dim_, 0.0);
    }
    return values_.data() + slot * dim_;
  }
  auto [it, inserted] =
      slot_.try_emplace(id, static_cast<int64_t>(ids_.size()));
  if (inserted) {
    ids_.push_back(id);
    values_.resize(values_.size() + dim_, 0.0);
  }
  return values_.data() + it->second * dim_;
}

SparseGradient SparseGradientBuilder::Finish() const {
  std::vector<int64_t> order;
  order.reserve(ids_.size());
  if (!dense_slot_.empty()) {
    for (int64_t s : dense_slot_) {
      if (s >= 0) order.push_back(s);
    }
  } else {
    order.resize(ids_.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int64_t a, int64_t b) { return ids_[a] < ids_[b]; });
  }
  SparseGradient g;
  g.dim = dim_;
  g.indices.reserve(ids_.size());
  g.values.reserve(values_.size());
  for (int64_t o : order) {
    g.indices.push_back(ids_[o]);
    g.values.insert(g.values.end(), values_.begin() + o * dim_,
                    values_.begin() + (o + 1) * dim_);
  }
  return g;
}

std::vector<SparseGradient> BackwardAccumulate(
    std::span<const JaggedTensor<double>> grads, const KeyedJaggedTensor& kjt) {
  kjt.Validate();
  JR_CHECK_ARG(static_cast<int64_t>(grads.size()) == kjt.num_keys(),
               "got ", grads.size(), " gradient tensors for ", kjt.num_keys(),
               " keys");
  std::vector<SparseGradient> out(kjt.num_keys());
  for (int64_t k = 0; k < kjt.num_keys(); ++k) {
    const JaggedTensor<double>& g = grads[k];
    const auto [begin, end] = kjt.key_range(k);
    JR_CHECK_ARG(g.batch_size() == kjt.batch_size, "gradient batch mismatch");
    for (int64_t s = 0; s < kjt.batch_size; ++s) {
      JR_CHECK_ARG(g.length(s) == kjt.length(k, s),
                   "gradient row length mismatch at key ", k, " sample ", s);
    }
    const int64_t dim = g.dim();
    const int64_t n = end - begin;
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      return kjt.values[begin + a] < kjt.values[begin + b];
    });
    SparseGradient& sg = out[k];
    sg.dim = dim;
    for (int64_t pos : order) {
      const int64_t id = kjt.values[begin + pos];
      if (sg.indices.empty() || sg.indices.back() != id) {
        sg.indices.push_back(id);
        sg.values.resize(sg.values.size() + dim, 0.0);
      }
      double* acc = sg.values.data() + sg.values.size() - dim;
      const double* src = g.values().data() + pos * dim;
      for (int64_t d = 0; d < dim; ++d) acc[d] += src[d];
    }
  }
  return out;
}

HalfLookup LookupFp16(std::span<const int64_t> ids, const EmbeddingTable& table) {
  HalfLookup out;
  out.dim = table.dim;
  out.values.reserve(ids.size() * table.dim);
  for (int64_t id : ids) {
    JR_CHECK_ARG(id >= 0 && id < table.rows, "ID ", id,
                 " out of range for table ", table.name);
    for (double w : table.row(id)) {
      bool sat = false;
      out.values.push_back(ToHalf(w, &sat));
      if (sat) ++out.saturated;
    }
  }
  return out;
}

std::map<int64_t, int64_t> AccessHistogram(const KeyedJaggedTensor& kjt,
                                           int64_t key) {
  std::map<int64_t, int64_t> hist;
  const auto [begin, end] = kjt.key_range(key);
  for (int64_t i = begin; i < end; ++i) ++hist[kjt.values[i]];
  return hist;
}

namespace {

constexpr char kMagic[4] = {'J', 'R', 'T', 'B'};
constexpr uint32_t kVersion = 1;

template <typename T>
void WritePod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  JR_CHECK_ARG(is.good(), "truncated table checkpoint");
  return v;
}

}  // namespace

void WriteTable(const EmbeddingTable& table, std::ostream& os) {
  table.Validate();
  os.write(kMagic, 4);
  WritePod(os, kVersion);
  WritePod(os, static_cast<uint32_t>(table.name.size()));
  os.write(table.name.data(), static_cast<std::streamsize>(table.name.size()));
  WritePod(os, table.rows);
  WritePod(os, table.dim);
  WritePod(os, static_cast<uint8_t>(table.precision));
  os.write(reinterpret_cast<const char*>(table.weights.data()),
           static_cast<std::streamsize>(table.weights.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(table.optimizer_state.data()),
           static_cast<std::streamsize>(table.optimizer_state.size() *
                                        sizeof(double)));
}

EmbeddingTable ReadTable(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  JR_CHECK_ARG(is.good() && std::memcmp(magic, kMagic, 4) == 0,
               "not a table checkpoint");
  const auto version = ReadPod<uint32_t>(is);
  JR_CHECK_ARG(version == kVersion, "unsupported checkpoint version ", version);
  const auto name_len = ReadPod<uint32_t>(is);
  EmbeddingTable t;
  t.name.resize(name_len);
  is.read(t.name.data(), name_len);
  t.rows = ReadPod<int64_t>(is);
  t.dim = ReadPod<int64_t>(is);
  const auto precision = ReadPod<uint8_t>(is);
  JR_CHECK_ARG(precision <= 1, "bad precision tag ", int{precision});
  JR_CHECK_ARG(t.rows >= 0 && t.dim >= 1, "bad table shape in checkpoint");
  t.precision = static_cast<Precision>(precision);
  t.weights.resize(t.rows * t.dim);
  t.optimizer_state.resize(t.rows * t.dim);
  is.read(reinterpret_cast<char*>(t.weights.data()),
          static_cast<std::streamsize>(t.weights.size() * sizeof(double)));
  is.read(reinterpret_cast<char*>(t.optimizer_state.data()),
          static_cast<std::streamsize>(t.optimizer_state.size() *
                                       sizeof(double)));
  JR_CHECK_ARG(!is.fail(), "truncated table checkpoint");
  return t;
}

void SaveTable(const EmbeddingTable& table, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  JR_CHECK_ARG(os.is_open(), "cannot open ", path, " for writing");
  WriteTable(table, os);
}

EmbeddingTable LoadTable(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  JR_CHECK_ARG(is.is_open(), "cannot open ", path);
  return ReadTable(is);
}

}  // namespace jaggedrec
