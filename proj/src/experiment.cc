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
#include "jaggedrec/experiment.h"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "jaggedrec/attention.h"
#include "jaggedrec/data_pipeline.h"
#include "jaggedrec/embedding.h"
#include "jaggedrec/errors.h"
#include "jaggedrec/hsp.h"
#include "jaggedrec/jagged_tensor.h"
#include "jaggedrec/load_balancer.h"
#include "jaggedrec/neg_sampling.h"
#include "jaggedrec/pipeline_sim.h"
#include "jaggedrec/semi_async.h"
#include "jaggedrec/toy_recall.h"

namespace jaggedrec {

using nlohmann::json;

void ExperimentConfig::Validate() const {
  JR_CHECK_ARG(!out_dir.empty(), "out_dir must not be empty");
  JR_CHECK_ARG(dim >= 1 && num_heads >= 1 && head_dim >= 1 && num_layers >= 1,
               "model sizes must be positive");
  JR_CHECK_ARG(batch_size >= 1, "batch_size must be >= 1");
  lengths.Validate();
  JR_CHECK_ARG(num_tables >= 1, "num_tables must be >= 1");
  JR_CHECK_ARG(static_cast<int64_t>(pool_sizes.size()) == num_tables,
               "pool_sizes needs num_tables = ", num_tables, " entries, got ",
               pool_sizes.size());
  for (int64_t p : pool_sizes) JR_CHECK_ARG(p >= 1, "pool sizes must be >= 1");
  JR_CHECK_ARG(id_zipf_exponent >= 0.0, "id_zipf_exponent must be >= 0");
  JR_CHECK_ARG(lookup_cores >= 1 && lookup_dim >= 1, "bad lookup settings");
  JR_CHECK_ARG(balance_batch >= 1 && num_workers >= 1 && balance_max_len >= 1,
               "bad balance settings");
  JR_CHECK_ARG(balance_zipf_exponent > 0.0, "balance_zipf_exponent must be > 0");
  JR_CHECK_ARG(per_token_cost_s > 0.0, "per_token_cost_s must be > 0");
  JR_CHECK_ARG(!group_counts.empty(), "group_counts must not be empty");
  for (int64_t m : group_counts) {
    ClusterTopology t;
    t.num_devices = num_devices;
    t.num_groups = m;
    t.devices_per_node = devices_per_node;
    t.intra_node_bw = intra_node_bw;
    t.inter_node_bw = inter_node_bw;
    t.per_message_latency_s = per_message_latency_s;
    t.Validate();
  }
  JR_CHECK_ARG(hsp_steps >= 1 && hsp_dim >= 1 && hsp_samples_per_device >= 1 &&
                   hsp_max_len >= 1 && hsp_num_tables >= 1 &&
                   hsp_table_rows >= 1,
               "bad hsp settings");
  JR_CHECK_ARG(num_negatives >= 1 && expansion >= 1 && segment_size >= 1,
               "bad sampling settings");
  JR_CHECK_ARG(temperature > 0.0, "temperature must be > 0");
  JR_CHECK_ARG(toy_steps >= 1, "toy_steps must be >= 1");
  JR_CHECK_ARG(tau >= 0, "tau must be >= 0");
  JR_CHECK_ARG(pipeline_depth >= 1 && pipeline_batches >= 1,
               "bad pipeline settings");
  JR_CHECK_ARG(column_delimiter.size() == 1,
               "column_delimiter must be one character");
  JR_CHECK_ARG(core_k >= 1, "core_k must be >= 1");
}

nlohmann::json ConfigToJson(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["dim"] = c.dim;
  j["num_heads"] = c.num_heads;
  j["head_dim"] = c.head_dim;
  j["num_layers"] = c.num_layers;
  j["batch_size"] = c.batch_size;
  j["lengths"] = {{"kind", LengthDistName(c.lengths.kind)},
                  {"max_len", c.lengths.max_len},
                  {"min_len", c.lengths.min_len},
                  {"fixed_len", c.lengths.fixed_len},
                  {"mu", c.lengths.mu},
                  {"sigma", c.lengths.sigma},
                  {"zipf_exponent", c.lengths.zipf_exponent}};
  j["num_tables"] = c.num_tables;
  j["pool_sizes"] = c.pool_sizes;
  j["id_zipf_exponent"] = c.id_zipf_exponent;
  j["lookup_cores"] = c.lookup_cores;
  j["lookup_dim"] = c.lookup_dim;
  j["balance_batch"] = c.balance_batch;
  j["num_workers"] = c.num_workers;
  j["balance_zipf_exponent"] = c.balance_zipf_exponent;
  j["balance_max_len"] = c.balance_max_len;
  j["per_token_cost_s"] = c.per_token_cost_s;
  j["num_devices"] = c.num_devices;
  j["group_counts"] = c.group_counts;
  j["devices_per_node"] = c.devices_per_node;
  j["intra_node_bw"] = c.intra_node_bw;
  j["inter_node_bw"] = c.inter_node_bw;
  j["per_message_latency_s"] = c.per_message_latency_s;
  j["hsp_steps"] = c.hsp_steps;
  j["hsp_dim"] = c.hsp_dim;
  j["hsp_samples_per_device"] = c.hsp_samples_per_device;
  j["hsp_max_len"] = c.hsp_max_len;
  j["hsp_num_tables"] = c.hsp_num_tables;
  j["hsp_table_rows"] = c.hsp_table_rows;
  j["num_negatives"] = c.num_negatives;
  j["expansion"] = c.expansion;
  j["temperature"] = c.temperature;
  j["segment_size"] = c.segment_size;
  j["toy_steps"] = c.toy_steps;
  j["tau"] = c.tau;
  j["pipeline_depth"] = c.pipeline_depth;
  j["pipeline_batches"] = c.pipeline_batches;
  j["input_path"] = c.input_path;
  j["column_delimiter"] = c.column_delimiter;
  j["core_k"] = c.core_k;
  j["semi_async"] = c.semi_async;
  j["hsp"] = c.hsp;
  j["reallocate"] = c.reallocate;
  j["fp16_neg"] = c.fp16_neg;
  return j;
}

namespace {

template <typename T>
T Get(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      JR_CHECK_ARG(v.is_boolean(), "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      JR_CHECK_ARG(v.is_number_integer(), "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        JR_CHECK_ARG(v.is_number_unsigned() || v.get<int64_t>() >= 0,
                     "expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      JR_CHECK_ARG(v.is_number(), "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      JR_CHECK_ARG(v.is_string(), "expected a string");
    } else {
      JR_CHECK_ARG(v.is_array(), "expected an array");
      for (const auto& e : v) {
        JR_CHECK_ARG(e.is_number_integer(), "expected integer elements");
      }
    }
    return v.get<T>();
  } catch (const ValidationError& e) {
    throw ValidationError("config key '" + key + "': " + e.what());
  }
}

using Setter = std::function<void(ExperimentConfig&, const json&)>;

template <typename T>
Setter Field(T ExperimentConfig::*member, const std::string& key) {
  return [member, key](ExperimentConfig& c, const json& v) {
    c.*member = Get<T>(v, key);
  };
}

void ParseLengths(LengthDistribution& d, const json& j) {
  JR_CHECK_ARG(j.is_object(), "config key 'lengths': expected an object");
  for (const auto& [key, v] : j.items()) {
    const std::string k = "lengths." + key;
    if (key == "kind") {
      d.kind = ParseLengthDistKind(Get<std::string>(v, k));
    } else if (key == "max_len") {
      d.max_len = Get<int64_t>(v, k);
    } else if (key == "min_len") {
      d.min_len = Get<int64_t>(v, k);
    } else if (key == "fixed_len") {
      d.fixed_len = Get<int64_t>(v, k);
    } else if (key == "mu") {
      d.mu = Get<double>(v, k);
    } else if (key == "sigma") {
      d.sigma = Get<double>(v, k);
    } else if (key == "zipf_exponent") {
      d.zipf_exponent = Get<double>(v, k);
    } else {
      throw ValidationError("unknown config key '" + k + "'");
    }
  }
}

const std::map<std::string, Setter>& Setters() {
  using C = ExperimentConfig;
  static const auto* setters = new std::map<std::string, Setter>{
      {"seed", Field(&C::seed, "seed")},
      {"out_dir", Field(&C::out_dir, "out_dir")},
      {"dim", Field(&C::dim, "dim")},
      {"num_heads", Field(&C::num_heads, "num_heads")},
      {"head_dim", Field(&C::head_dim, "head_dim")},
      {"num_layers", Field(&C::num_layers, "num_layers")},
      {"batch_size", Field(&C::batch_size, "batch_size")},
      {"lengths",
       [](C& c, const json& v) { ParseLengths(c.lengths, v); }},
      {"num_tables", Field(&C::num_tables, "num_tables")},
      {"pool_sizes", Field(&C::pool_sizes, "pool_sizes")},
      {"id_zipf_exponent", Field(&C::id_zipf_exponent, "id_zipf_exponent")},
      {"lookup_cores", Field(&C::lookup_cores, "lookup_cores")},
      {"lookup_dim", Field(&C::lookup_dim, "lookup_dim")},
      {"balance_batch", Field(&C::balance_batch, "balance_batch")},
      {"num_workers", Field(&C::num_workers, "num_workers")},
      {"balance_zipf_exponent",
       Field(&C::balance_zipf_exponent, "balance_zipf_exponent")},
      {"balance_max_len", Field(&C::balance_max_len, "balance_max_len")},
      {"per_token_cost_s", Field(&C::per_token_cost_s, "per_token_cost_s")},
      {"num_devices", Field(&C::num_devices, "num_devices")},
      {"group_counts", Field(&C::group_counts, "group_counts")},
      {"devices_per_node", Field(&C::devices_per_node, "devices_per_node")},
      {"intra_node_bw", Field(&C::intra_node_bw, "intra_node_bw")},
      {"inter_node_bw", Field(&C::inter_node_bw, "inter_node_bw")},
      {"per_message_latency_s",
       Field(&C::per_message_latency_s, "per_message_latency_s")},
      {"hsp_steps", Field(&C::hsp_steps, "hsp_steps")},
      {"hsp_dim", Field(&C::hsp_dim, "hsp_dim")},
      {"hsp_samples_per_device",
       Field(&C::hsp_samples_per_device, "hsp_samples_per_device")},
      {"hsp_max_len", Field(&C::hsp_max_len, "hsp_max_len")},
      {"hsp_num_tables", Field(&C::hsp_num_tables, "hsp_num_tables")},
      {"hsp_table_rows", Field(&C::hsp_table_rows, "hsp_table_rows")},
      {"num_negatives", Field(&C::num_negatives, "num_negatives")},
      {"expansion", Field(&C::expansion, "expansion")},
      {"temperature", Field(&C::temperature, "temperature")},
      {"segment_size", Field(&C::segment_size, "segment_size")},
      {"toy_steps", Field(&C::toy_steps, "toy_steps")},
      {"tau", Field(&C::tau, "tau")},
      {"pipeline_depth", Field(&C::pipeline_depth, "pipeline_depth")},
      {"pipeline_batches", Field(&C::pipeline_batches, "pipeline_batches")},
      {"input_path", Field(&C::input_path, "input_path")},
      {"column_delimiter", Field(&C::column_delimiter, "column_delimiter")},
      {"core_k", Field(&C::core_k, "core_k")},
      {"semi_async", Field(&C::semi_async, "semi_async")},
      {"hsp", Field(&C::hsp, "hsp")},
      {"reallocate", Field(&C::reallocate, "reallocate")},
      {"fp16_neg", Field(&C::fp16_neg, "fp16_neg")},
  };
  return *setters;
}

}  // namespace

ExperimentConfig ConfigFromJson(const nlohmann::json& j) {
  JR_CHECK_ARG(j.is_object(), "config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    auto it = Setters().find(key);
    if (it == Setters().end()) {
      throw ValidationError("unknown config key '" + key + "'");
    }
    it->second(c, v);
  }
  c.Validate();
  return c;
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  JR_CHECK_ARG(in.good(), "cannot open config file '", path, "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " +
                          e.what());
  }
  return ConfigFromJson(j);
}

void ApplyEnvOverrides(ExperimentConfig& config) {
  if (const char* seed = std::getenv("JAGGEDREC_SEED"); seed && *seed) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(seed, &end, 10);
    JR_CHECK_ARG(errno == 0 && *end == '\0' && seed[0] != '-',
                 "JAGGEDREC_SEED must be an unsigned integer, got '", seed,
                 "'");
    config.seed = v;
  }
  if (const char* out = std::getenv("JAGGEDREC_OUT"); out && *out) {
    config.out_dir = out;
  }
}

std::string ExperimentKindName(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kJagged:
      return "jagged";
    case ExperimentKind::kLookup:
      return "lookup";
    case ExperimentKind::kBalance:
      return "balance";
    case ExperimentKind::kHsp:
      return "hsp";
    case ExperimentKind::kSemiAsync:
      return "semi-async";
    case ExperimentKind::kPipeline:
      return "pipeline";
    case ExperimentKind::kNegSample:
      return "negsample";
    case ExperimentKind::kTrainToy:
      return "train-toy";
    case ExperimentKind::kPreprocess:
      return "preprocess";
  }
  return "unknown";
}

std::vector<ExperimentKind> AllExperimentKinds() {
  return {ExperimentKind::kJagged,    ExperimentKind::kLookup,
          ExperimentKind::kBalance,   ExperimentKind::kHsp,
          ExperimentKind::kSemiAsync, ExperimentKind::kPipeline,
          ExperimentKind::kNegSample, ExperimentKind::kTrainToy,
          ExperimentKind::kPreprocess};
}

ExperimentKind ParseExperimentKind(const std::string& name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '_', '-');
  for (ExperimentKind k : AllExperimentKinds()) {
    if (ExperimentKindName(k) == n) return k;
  }
  throw ValidationError("unknown experiment kind '" + name + "'");
}

void Report::AddRow(std::vector<std::string> row) {
  JR_CHECK_INVARIANT(row.size() == columns.size(), "report row has ",
                     row.size(), " cells, expected ", columns.size());
  rows.push_back(std::move(row));
}

void Report::Check(bool ok, const std::string& what) {
  checks.push_back(std::string(ok ? "PASS " : "FAIL ") + what);
  if (!ok) failures.push_back(what);
}

std::string FormatDouble(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

namespace {

std::string I(int64_t v) { return std::to_string(v); }
std::string F(double v, int decimals = 4) { return FormatDouble(v, decimals); }
std::string B(bool v) { return v ? "yes" : "no"; }

std::string CsvCell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string RenderCsv(const Report& report, const ExperimentConfig& config) {
  std::ostringstream os;
  os << "# experiment: " << report.name << "\n";
  os << "# config: " << ConfigToJson(config).dump() << "\n";
  for (size_t i = 0; i < report.columns.size(); ++i) {
    os << (i ? "," : "") << CsvCell(report.columns[i]);
  }
  os << "\n";
  for (const auto& row : report.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      os << (i ? "," : "") << CsvCell(row[i]);
    }
    os << "\n";
  }
  return os.str();
}

std::string RenderMarkdown(const Report& report,
                           const ExperimentConfig& config) {
  std::ostringstream os;
  os << "## " << report.name << "\n\n";
  os << "Resolved config:\n\n```json\n" << ConfigToJson(config).dump(2)
     << "\n```\n\n";
  os << "|";
  for (const auto& c : report.columns) os << " " << c << " |";
  os << "\n|";
  for (size_t i = 0; i < report.columns.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& row : report.rows) {
    os << "|";
    for (const auto& cell : row) os << " " << cell << " |";
    os << "\n";
  }
  if (!report.notes.empty()) {
    os << "\n";
    for (const auto& n : report.notes) os << "- " << n << "\n";
  }
  if (!report.checks.empty()) {
    os << "\nChecks:\n\n";
    for (const auto& c : report.checks) os << "- " << c << "\n";
  }
  return os.str();
}

namespace {

std::vector<double> RandomValues(int64_t n, std::mt19937_64& rng,
                                 double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> out(n);
  for (double& v : out) v = u(rng);
  return out;
}

Report RunJagged(const ExperimentConfig& c) {
  Report r;
  r.name = "jagged";
  r.columns = {"layout",        "batch",         "max_len",
               "valid_tokens",  "slots",         "padding_ratio_pct",
               "score_elements", "rab_elements", "p50_len",
               "p90_len",       "p99_len"};
  const std::vector<int64_t> lengths =
      GenerateLengths(c.lengths, c.batch_size, c.seed);
  const LengthSummary s = SummarizeLengths(lengths, c.lengths.max_len);

  std::mt19937_64 rng(c.seed ^ 0x6a61676765647265ULL);
  AttentionConfig ac;
  ac.num_heads = c.num_heads;
  ac.head_dim = c.head_dim;
  const int64_t w = ac.width();
  const int64_t tokens = s.valid;
  auto make = [&] {
    return JaggedTensor<double>::FromLengths(RandomValues(tokens * w, rng, 0.5),
                                             lengths, w);
  };
  std::vector<int64_t> ts;
  for (int64_t len : lengths) {
    int64_t t = 0;
    for (int64_t i = 0; i < len; ++i) ts.push_back(t += 1 + (i * 37) % 500);
  }
  JaggedTensor<int64_t> times = JaggedTensor<int64_t>::FromLengths(ts, lengths);
  RabSpec<double> spec;
  spec.time_bucket_table = RandomValues(spec.num_time_buckets, rng, 0.1);
  spec.position_table =
      RandomValues(2 * spec.max_relative_position + 1, rng, 0.1);

  AttentionStats stats;
  JaggedTensor<double> q = make();
  JaggedTensor<double> k = make();
  JaggedTensor<double> v = make();
  for (int64_t layer = 0; layer < c.num_layers; ++layer) {
    JaggedTensor<double> rab = ComputeRab(times, spec, &stats);
    q = JaggedAttention(q, k, v, &rab, ac, &stats);
  }
  int64_t expected = 0;
  for (int64_t len : lengths) expected += len * len;
  expected *= c.num_layers;

  const int64_t max_len = c.lengths.max_len;
  const int64_t padded_scores = c.batch_size * max_len * max_len * c.num_layers;
  auto pct = [](int64_t part, int64_t whole) {
    return whole > 0 ? 100.0 * part / whole : 0.0;
  };
  r.AddRow({"padded", I(c.batch_size), I(max_len), I(s.valid),
            I(s.total_slots), F(pct(s.padded, s.total_slots)),
            I(padded_scores), I(padded_scores), I(s.p50), I(s.p90), I(s.p99)});
  r.AddRow({"jagged", I(c.batch_size), I(max_len), I(s.valid), I(s.valid),
            F(0.0), I(stats.score_elements), I(stats.rab_elements), I(s.p50),
            I(s.p90), I(s.p99)});
  r.notes.push_back(
      "score_elements are counters summed over layers; padded counts assume "
      "every row is staged at max_len");
  r.Check(stats.score_elements == expected,
          "jagged score elements equal the sum of squared lengths");
  return r;
}

Report RunLookup(const ExperimentConfig& c) {
  Report r;
  r.name = "lookup";
  r.columns = {"method",          "slots",
               "padded_slots",    "processed_indices",
               "padding_ratio_pct", "modeled_gather_bytes",
               "max_core_table_spread", "bit_equal_to_jagged"};
  const KeyedJaggedTensor kjt = MakeTable2Batch(1000, c.seed);
  const std::vector<int64_t> rows(kjt.num_keys(), 1000);
  const std::vector<EmbeddingTable> tables =
      MakeRandomTables(rows, c.lookup_dim, c.seed + 1);
  const LookupResult jagged = LookupJagged(kjt, tables);
  const LookupResult padded = LookupPadded(kjt, tables, 1024);
  const CorePartitionPlan plan = BuildCorePartition(kjt, c.lookup_cores);
  const GroupedLookupResult grouped = LookupGrouped(kjt, tables, plan);

  int64_t spread = 0;
  for (int64_t t = 0; t < kjt.num_keys(); ++t) {
    int64_t lo = INT64_MAX;
    int64_t hi = 0;
    for (const auto& core : grouped.work) {
      lo = std::min(lo, core[t]);
      hi = std::max(hi, core[t]);
    }
    spread = std::max(spread, hi - lo);
  }
  const bool equal = grouped.lookup.embeddings == jagged.embeddings;
  const int64_t bytes_per = c.lookup_dim * kEmbElemBytes;
  r.AddRow({"padded", I(kTable2Slots), I(kTable2Padding),
            I(padded.stats.total_processed),
            F(100.0 * kTable2Padding / kTable2Slots),
            I(padded.stats.total_processed * bytes_per), "-",
            B(padded.embeddings == jagged.embeddings)});
  r.AddRow({"jagged", I(kTable2Slots), I(kTable2Padding),
            I(jagged.stats.total_processed),
            F(100.0 * kTable2Padding / kTable2Slots),
            I(jagged.stats.total_processed * bytes_per), "-", "yes"});
  r.AddRow({"grouped", I(kTable2Slots), I(kTable2Padding),
            I(grouped.lookup.stats.total_processed),
            F(100.0 * kTable2Padding / kTable2Slots),
            I(grouped.lookup.stats.total_processed * bytes_per), I(spread),
            B(equal)});
  r.Check(jagged.stats.total_processed == kTable2Slots - kTable2Padding,
          "jagged lookup processes exactly the valid indices");
  r.Check(padded.stats.total_processed == kTable2Slots,
          "padded lookup processes every slot");
  r.Check(equal, "grouped lookup is bit-identical to jagged lookup");
  r.Check(spread <= 1, "per-core per-table counts differ by at most one");
  return r;
}

Report RunBalance(const ExperimentConfig& c) {
  Report r;
  r.name = "balance";
  r.columns = {"strategy",           "workers",
               "max_token_diff",     "step_latency_ms",
               "imbalance_delay_ms", "imbalance_ratio_pct"};
  LengthDistribution dist;
  dist.kind = LengthDistKind::kZipf;
  dist.min_len = 1;
  dist.max_len = c.balance_max_len;
  dist.zipf_exponent = c.balance_zipf_exponent;
  const std::vector<SampleMeta> batch =
      ToSampleMetas(GenerateLengths(dist, c.balance_batch, c.seed));
  const ImbalanceReport base = MakeImbalanceReport(
      FixedCountRoundRobin(batch, c.num_workers), c.per_token_cost_s);
  auto add = [&](const std::string& name, const ImbalanceReport& x) {
    r.AddRow({name, I(c.num_workers), I(x.max_token_diff),
              F(x.step_latency_s * 1e3, 6), F(x.imbalance_delay_s * 1e3, 6),
              F(100.0 * x.imbalance_ratio)});
  };
  add("fixed_count", base);
  if (c.reallocate) {
    const ImbalanceReport lpt = MakeImbalanceReport(
        GlobalTokenReallocate(batch, c.num_workers), c.per_token_cost_s);
    add("global_token_reallocate", lpt);
    r.Check(lpt.max_token_diff * 10 <= base.max_token_diff,
            "reallocation cuts max_token_diff by at least 10x");
    r.Check(base.imbalance_ratio > 0.30 && lpt.imbalance_ratio < 0.05,
            "imbalance ratio drops below 5% from above 30%");
  }
  r.notes.push_back("latencies are model-based: tokens x per_token_cost_s");
  return r;
}

Report RunHsp(const ExperimentConfig& c) {
  Report r;
  r.name = "hsp";
  r.columns = {"groups",
               "group_size",
               "all_to_all_bytes",
               "all_reduce_bytes",
               "max_all_to_all_fanout",
               "cross_group_all_to_all",
               "all_to_all_latency_ms",
               "all_reduce_latency_ms",
               "all_to_all_reduction_pct",
               "weights_equal_to_first"};
  const std::vector<EmbeddingTable> tables =
      MakeRandomTables(std::vector<int64_t>(c.hsp_num_tables, c.hsp_table_rows),
                       c.hsp_dim, c.seed);
  const HspWorkload workload = MakeZipfHspWorkload(
      tables, c.hsp_steps, c.num_devices, c.hsp_samples_per_device,
      c.hsp_max_len, c.id_zipf_exponent, c.seed + 1);
  std::vector<int64_t> groups = c.group_counts;
  if (!c.hsp) groups = {1};
  HspTrainConfig tc;
  tc.record_trajectory = false;
  std::vector<EmbeddingTable> first;
  int64_t prev_bytes = -1;
  double first_latency = 0.0;
  bool monotone = true;
  for (int64_t m : groups) {
    ClusterTopology topo;
    topo.num_devices = c.num_devices;
    topo.num_groups = m;
    topo.devices_per_node = c.devices_per_node;
    topo.intra_node_bw = c.intra_node_bw;
    topo.inter_node_bw = c.inter_node_bw;
    topo.per_message_latency_s = c.per_message_latency_s;
    const HspTrainResult res = HspTrain(workload, tables, topo, tc);
    const CommLatency lat = ModelCommLatency(res.log, topo);
    const int64_t a2a = res.log.TotalAllToAllBytes();
    bool equal = true;
    if (first.empty()) {
      first = res.replicas[0];
    }
    for (const auto& replica : res.replicas) equal = equal && replica == first;
    if (prev_bytes >= 0 && a2a > prev_bytes) monotone = false;
    prev_bytes = a2a;
    if (first_latency == 0.0) first_latency = lat.all_to_all();
    const double reduction =
        first_latency > 0.0 ? 100.0 * (1.0 - lat.all_to_all() / first_latency)
                            : 0.0;
    const int64_t fanout = res.log.MaxAllToAllFanout();
    const int64_t cross = res.log.CrossGroupAllToAll(topo);
    const auto reduce_it = lat.seconds.find(CommKind::kAllReduceGrad);
    const double reduce_s =
        reduce_it == lat.seconds.end() ? 0.0 : reduce_it->second;
    r.AddRow({I(m), I(topo.group_size()), I(a2a),
              I(res.log.TotalBytes(CommKind::kAllReduceGrad)), I(fanout),
              I(cross), F(lat.all_to_all() * 1e3, 6), F(reduce_s * 1e3, 6),
              F(reduction, 2), B(equal)});
    r.Check(equal, "M=" + I(m) + " weights and AdaGrad state equal the " +
                       "first configuration bit for bit");
    r.Check(cross == 0, "M=" + I(m) + " logs no cross-group all-to-all");
    r.Check(fanout == topo.group_size() - 1,
            "M=" + I(m) + " all-to-all fan-out equals group size - 1");
    if (m == 4 && groups.front() == 1) {
      r.Check(reduction >= 60.0,
              "M=4 modeled all-to-all latency is at least 60% below M=1");
    }
  }
  r.Check(monotone, "all-to-all bytes are non-increasing in M");
  r.notes.push_back(
      "latencies are model-based: per-message latency plus bytes over link "
      "bandwidth");
  return r;
}

ToyDataset DefaultToyData() { return MakeToyDataset(ToyDataConfig{}); }

ToyTrainConfig ToyConfig(const ExperimentConfig& c) {
  ToyTrainConfig t;
  t.steps = c.toy_steps;
  t.num_negatives = c.num_negatives;
  t.fp16_negatives = c.fp16_neg;
  t.seed = c.seed;
  return t;
}

Report RunSemiAsync(const ExperimentConfig& c) {
  Report r;
  r.name = "semi-async";
  r.columns = {"mode",        "tau",      "hr_at_10",
               "ndcg_at_10",  "final_loss", "hr_rel_diff_pct",
               "staleness_reads", "staleness_violations", "alpha"};
  const ToyDataset data = DefaultToyData();
  ToyTrainConfig sync_cfg = ToyConfig(c);
  const ToyTrainResult sync = TrainToyRecall(data, sync_cfg);

  ToyTrainConfig semi_cfg = sync_cfg;
  semi_cfg.mode = TrainMode::kSemiAsync;
  semi_cfg.tau = c.tau;
  const ToyTrainResult semi = TrainToyRecall(data, semi_cfg);

  ToyTrainConfig zero_cfg = semi_cfg;
  zero_cfg.tau = 0;
  zero_cfg.steps = std::min<int64_t>(c.toy_steps, 200);
  ToyTrainConfig zero_sync = sync_cfg;
  zero_sync.steps = zero_cfg.steps;
  const ToyTrainResult zero = TrainToyRecall(data, zero_cfg);
  const ToyTrainResult zero_ref = TrainToyRecall(data, zero_sync);

  // Collision rate of item IDs between consecutive training batches.
  std::vector<std::vector<int64_t>> stream;
  {
    std::mt19937_64 rng(c.seed);
    std::uniform_int_distribution<size_t> pick(0, data.users.size() - 1);
    for (int s = 0; s < 50; ++s) {
      std::vector<int64_t> ids;
      for (int64_t b = 0; b < sync_cfg.batch_size; ++b) {
        const auto& u = data.users[pick(rng)];
        ids.insert(ids.end(), u.train.begin(), u.train.end());
      }
      stream.push_back(std::move(ids));
    }
  }
  const double alpha = EstimateAlpha(stream).alpha;

  auto rel = [&](double hr) {
    return sync.final_hr > 0.0 ? 100.0 * (hr - sync.final_hr) / sync.final_hr
                               : 0.0;
  };
  auto add = [&](const std::string& mode, int64_t tau,
                 const ToyTrainResult& x) {
    r.AddRow({mode, I(tau), F(x.final_hr), F(x.final_ndcg),
              F(x.step_loss.empty() ? 0.0 : x.step_loss.back()),
              F(rel(x.final_hr), 2), I(x.staleness_reads),
              I(x.staleness_violations), F(alpha)});
  };
  add("sync", 0, sync);
  add("semi_async", c.tau, semi);
  r.notes.push_back("tau=0 semi-async path over " + I(zero_cfg.steps) +
                    " steps is compared bit for bit with sync");
  const bool identical = zero.item_weights == zero_ref.item_weights &&
                         zero.dense_params == zero_ref.dense_params;
  r.Check(identical, "tau=0 semi-async path is bit-identical to sync");
  r.Check(semi.staleness_violations == 0 && sync.staleness_violations == 0,
          "staleness monitor reports zero violations");
  r.Check(std::abs(rel(semi.final_hr)) <= 5.0,
          "semi-async HR@10 within 5% relative of sync");
  return r;
}

std::vector<std::string> UtilCells(const std::string& name,
                                   const UtilizationReport& u) {
  return {name,
          F(u.makespan * 1e3, 3),
          F(u.computing * 1e3, 3),
          F(u.communication * 1e3, 3),
          F(u.comm_not_overlapped * 1e3, 3),
          F(u.free * 1e3, 3),
          F(u.unmasked_sparse_comm * 1e3, 3),
          F(100 * u.ratio(u.computing), 2),
          F(100 * u.ratio(u.communication), 2),
          F(100 * u.ratio(u.comm_not_overlapped), 2),
          F(100 * u.ratio(u.free), 2),
          F(100 * u.ratio(u.unmasked_sparse_comm), 2)};
}

Report RunPipeline(const ExperimentConfig& c) {
  Report r;
  r.name = "pipeline";
  r.columns = {"config",         "makespan_ms",      "computing_ms",
               "communication_ms", "not_overlapped_ms", "free_ms",
               "unmasked_sparse_ms", "computing_pct",  "communication_pct",
               "not_overlapped_pct", "free_pct",       "unmasked_sparse_pct"};
  const UtilizationTargets targets;
  const CalibratedPipeline cal = CalibratePipeline(targets);
  const UtilizationReport& u = cal.report;
  r.AddRow({"target", "-", "-", "-", "-", "-", "-",
            F(100 * targets.computing, 2), F(100 * targets.communication, 2),
            F(100 * targets.comm_not_overlapped, 2), F(100 * targets.free, 2),
            "-"});
  r.AddRow(UtilCells("calibrated_semi_async", u));

  std::vector<int64_t> tokens(c.pipeline_batches, 1);
  const ModeComparison heavy =
      CompareModes(CommHeavyStageSpecs(), tokens, c.pipeline_depth);
  r.AddRow(UtilCells("comm_heavy_sync", heavy.sync));
  r.AddRow(UtilCells("comm_heavy_semi_async", heavy.semi_async));
  r.notes.push_back("calibrated run: " + I(cal.batch_tokens.size()) +
                    " batches, depth " + I(cal.depth) +
                    "; times are model-based");
  auto within = [](double got, double want) {
    return std::abs(100 * got - 100 * want) <= 1.0;
  };
  r.Check(within(u.ratio(u.computing), targets.computing),
          "computing ratio within 1pp");
  r.Check(within(u.ratio(u.comm_not_overlapped), targets.comm_not_overlapped),
          "not-overlapped ratio within 1pp");
  r.Check(within(u.ratio(u.free), targets.free), "free ratio within 1pp");
  r.Check(heavy.semi_async.ratio(heavy.semi_async.unmasked_sparse_comm) <
              heavy.sync.ratio(heavy.sync.unmasked_sparse_comm),
          "semi-async exposes less sparse communication than sync");
  return r;
}

Report RunNegSample(const ExperimentConfig& c) {
  Report r;
  r.name = "negsample";
  r.columns = {"case",
               "batch",
               "seq_len",
               "dim",
               "negatives",
               "segment_size",
               "full_bytes",
               "offloaded_peak_bytes",
               "resident_high_water_bytes",
               "resident_bound_bytes",
               "logits_bit_equal",
               "lookups_k1",
               "lookups_k"};
  const NegMemory big = NegMemoryModel(8, 8192, 1024, 128, 4, c.segment_size);
  r.AddRow({"memory_model", "8", "8192", "1024", "128", I(c.segment_size),
            I(big.full_bytes), I(big.offloaded_peak_bytes), "-",
            I(2 * c.segment_size * 128 * 1024 * 4), "-", "-", "-"});

  const std::vector<int64_t> lengths =
      GenerateLengths(c.lengths, c.batch_size, c.seed);
  int64_t tokens = 0;
  for (int64_t l : lengths) tokens += l;
  std::mt19937_64 rng(c.seed + 11);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> out(tokens * c.dim);
  std::vector<float> neg(tokens * c.num_negatives * c.dim);
  for (float& v : out) v = u(rng);
  for (float& v : neg) v = u(rng);
  const std::vector<float> mono =
      MonolithicLogits(out, neg, tokens, c.num_negatives, c.dim);
  const SegmentedLogits seg = ComputeSegmentedLogits(
      out, neg, tokens, c.num_negatives, c.dim, c.segment_size);
  const int64_t bound = 2 * c.segment_size * c.num_negatives * c.dim * 4;
  const bool equal = seg.logits == mono;

  const int64_t pool = c.pool_sizes.front();
  const std::vector<EmbeddingTable> table =
      MakeRandomTables(std::vector<int64_t>{pool}, c.dim, c.seed + 12);
  std::uniform_int_distribution<int64_t> pick(0, pool - 1);
  std::vector<int64_t> pos(tokens);
  for (int64_t& p : pos) p = pick(rng);
  const NegSampleBatch batch = SampleNegatives(
      JaggedTensor<int64_t>::FromLengths(pos, lengths),
      NegSamplerConfig{c.num_negatives, pool, false, c.seed}, 0);
  std::vector<double> outputs(tokens * c.dim);
  for (double& v : outputs) v = 0.1 * u(rng);
  LossConfig lc;
  lc.temperature = c.temperature;
  lc.fp16_negatives = c.fp16_neg;
  lc.shuffle_seed = c.seed;
  const BatchLoss k1 = NegativeSampledLoss(outputs, batch, table[0], lc);
  lc.expansion = c.expansion;
  const BatchLoss kk = NegativeSampledLoss(outputs, batch, table[0], lc);

  r.AddRow({"desk_run", I(c.batch_size), I(c.lengths.max_len), I(c.dim),
            I(c.num_negatives), I(c.segment_size),
            I(tokens * c.num_negatives * c.dim * 4), "-",
            I(seg.resident_high_water_bytes), I(bound), B(equal),
            I(k1.embedding_lookups), I(kk.embedding_lookups)});
  r.notes.push_back("desk run has " + I(tokens) + " valid tokens; expansion k=" +
                    I(c.expansion) + "; byte counts are counter-based");
  r.Check(big.full_bytes == 34359738368LL,
          "full negative-embedding bytes for (8, 8192, 1024, 128, 4)");
  r.Check(seg.resident_high_water_bytes <= bound,
          "segmented resident high-water mark within two segments");
  r.Check(equal, "segmented logits bit-equal monolithic logits");
  r.Check(k1.embedding_lookups == kk.embedding_lookups,
          "logit sharing performs no extra lookups");
  return r;
}

Report RunTrainToy(const ExperimentConfig& c) {
  Report r;
  r.name = "train-toy";
  r.columns = {"step", "grad_norm_sq_avg", "loss", "hr_at_10"};
  const ToyDataset data = DefaultToyData();
  ToyTrainConfig t = ToyConfig(c);
  if (c.semi_async && c.tau > 0) {
    t.mode = TrainMode::kSemiAsync;
    t.tau = c.tau;
  }
  const ToyTrainResult res = TrainToyRecall(data, t);
  for (const ProbePoint& p : res.probe) {
    r.AddRow({I(p.step), F(p.grad_norm_sq_avg, 6), F(p.loss), F(p.hr)});
  }
  r.AddRow({"final", "-", F(res.step_loss.empty() ? 0.0 : res.step_loss.back()),
            F(res.final_hr)});
  r.notes.push_back("mode " + TrainModeName(t.mode) + ", tau " + I(t.tau) +
                    ", fp16 negatives " + B(t.fp16_negatives) +
                    ", final NDCG@10 " + F(res.final_ndcg) +
                    ", fp16 saturations " + I(res.fp16_saturated));
  r.Check(res.staleness_violations == 0,
          "staleness monitor reports zero violations");
  return r;
}

Report RunPreprocess(const ExperimentConfig& c) {
  Report r;
  r.name = "preprocess";
  r.columns = {"source",      "raw_records", "skipped_lines",
               "after_filter", "after_core", "users",
               "items",       "core_iterations", "test_items"};
  ParsedLog log;
  std::string source = "synthetic";
  if (c.input_path.empty()) {
    log.records = MakeSyntheticLog(500, 300, 30, c.seed);
  } else {
    ColumnMapping mapping;
    mapping.delimiter = c.column_delimiter[0];
    log = ReadInteractionsFile(c.input_path, mapping);
    source = std::filesystem::path(c.input_path).filename().string();
  }
  const PreprocessResult res = Preprocess(log, c.core_k);
  const PreprocessStats& s = res.stats;
  r.AddRow({source, I(s.raw_records), I(s.skipped_lines), I(s.after_filter),
            I(s.after_core), I(s.users), I(s.items), I(s.core_iterations),
            I(static_cast<int64_t>(res.split.size()))});

  std::filesystem::create_directories(c.out_dir);
  const std::string seq_path =
      (std::filesystem::path(c.out_dir) / "sequences.txt").string();
  std::ofstream os(seq_path);
  WriteSequenceFile(os, res.sequences);
  r.notes.push_back("sequences written to sequences.txt");

  std::vector<Interaction> kept;
  for (const UserSequence& u : res.sequences) {
    for (size_t i = 0; i < u.items.size(); ++i) {
      Interaction x;
      x.user_id = u.user_id;
      x.item_id = u.items[i];
      x.timestamp = u.timestamps[i];
      x.click = true;
      kept.push_back(x);
    }
  }
  r.Check(FiveCoreFilter(kept, c.core_k).records.size() == kept.size(),
          "core filter is idempotent on its output");
  int64_t held_out = 0;
  for (size_t i = 0; i < res.split.size(); ++i) {
    held_out += static_cast<int64_t>(res.split[i].train.size()) + 1;
  }
  r.Check(held_out == s.after_core,
          "leave-one-out split covers every kept interaction once");
  return r;
}

}  // namespace

Report RunExperiment(const ExperimentConfig& config, ExperimentKind kind) {
  config.Validate();
  switch (kind) {
    case ExperimentKind::kJagged:
      return RunJagged(config);
    case ExperimentKind::kLookup:
      return RunLookup(config);
    case ExperimentKind::kBalance:
      return RunBalance(config);
    case ExperimentKind::kHsp:
      return RunHsp(config);
    case ExperimentKind::kSemiAsync:
      return RunSemiAsync(config);
    case ExperimentKind::kPipeline:
      return RunPipeline(config);
    case ExperimentKind::kNegSample:
      return RunNegSample(config);
    case ExperimentKind::kTrainToy:
      return RunTrainToy(config);
    case ExperimentKind::kPreprocess:
      return RunPreprocess(config);
  }
  throw ValidationError("unknown experiment kind");
}

WrittenReport RunAndWrite(const ExperimentConfig& config, ExperimentKind kind) {
  WrittenReport w;
  w.report = RunExperiment(config, kind);
  std::filesystem::create_directories(config.out_dir);
  const std::filesystem::path dir(config.out_dir);
  w.csv_path = (dir / (w.report.name + ".csv")).string();
  w.md_path = (dir / (w.report.name + ".md")).string();
  std::ofstream csv(w.csv_path);
  csv << RenderCsv(w.report, config);
  std::ofstream md(w.md_path);
  md << RenderMarkdown(w.report, config);
  JR_CHECK_INVARIANT(csv.good() && md.good(), "failed to write reports to ",
                     config.out_dir);
  return w;
}

}  // namespace jaggedrec
