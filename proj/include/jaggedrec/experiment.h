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
#ifndef JAGGEDREC_EXPERIMENT_H_
#define JAGGEDREC_EXPERIMENT_H_

// Experiment configuration, the per-kind experiment runners and their report
// files.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "jaggedrec/workload.h"

namespace jaggedrec {

struct ExperimentConfig {
  uint64_t seed = 1;
  std::string out_dir = "out";

  // Model sizing.
  int64_t dim = 64;
  int64_t num_heads = 4;
  int64_t head_dim = 16;
  int64_t num_layers = 1;

  // Workload.
  int64_t batch_size = 8;
  LengthDistribution lengths{LengthDistKind::kLogNormal, 512, 1, 512, 5.0, 1.0,
                             1.2};
  int64_t num_tables = 4;
  std::vector<int64_t> pool_sizes = {20000, 10000, 5000, 2000};
  double id_zipf_exponent = 1.2;
  int64_t lookup_cores = 4;
  int64_t lookup_dim = 4;  // counters do not depend on width

  // Load balancing.
  int64_t balance_batch = 1024;
  int64_t num_workers = 16;
  double balance_zipf_exponent = 1.2;
  int64_t balance_max_len = 2048;
  double per_token_cost_s = 1e-6;

  // Topology and HSP.
  int64_t num_devices = 16;
  std::vector<int64_t> group_counts = {1, 2, 4};
  int64_t devices_per_node = 8;
  double intra_node_bw = 56e9;
  double inter_node_bw = 25e9;
  double per_message_latency_s = 20e-6;
  int64_t hsp_steps = 20;
  int64_t hsp_dim = 16;
  int64_t hsp_samples_per_device = 4;
  int64_t hsp_max_len = 16;
  // One table per device at N = 16, so M = 1 fans out to every peer.
  int64_t hsp_num_tables = 16;
  int64_t hsp_table_rows = 10000;

  // Sampling and loss.
  int64_t num_negatives = 128;
  int64_t expansion = 4;  // k
  double temperature = 0.05;
  int64_t segment_size = 100;

  // Toy recall training.
  int64_t toy_steps = 5000;
  int64_t tau = 1;

  // Pipeline.
  int64_t pipeline_depth = 6;
  int64_t pipeline_batches = 16;

  // Preprocessing; an empty path uses a synthetic log.
  std::string input_path;
  std::string column_delimiter = ",";
  int64_t core_k = 5;

  // Mode flags.
  bool semi_async = true;
  bool hsp = true;
  bool reallocate = true;
  bool fp16_neg = false;

  void Validate() const;
};

nlohmann::json ConfigToJson(const ExperimentConfig& config);
// Rejects unknown keys and mistyped values with ValidationError.
ExperimentConfig ConfigFromJson(const nlohmann::json& j);
ExperimentConfig LoadConfig(const std::string& path);
// JAGGEDREC_SEED and JAGGEDREC_OUT override the seed and output directory.
void ApplyEnvOverrides(ExperimentConfig& config);

enum class ExperimentKind {
  kJagged,
  kLookup,
  kBalance,
  kHsp,
  kSemiAsync,
  kPipeline,
  kNegSample,
  kTrainToy,
  kPreprocess,
};
std::string ExperimentKindName(ExperimentKind kind);  // CLI spelling
ExperimentKind ParseExperimentKind(const std::string& name);
std::vector<ExperimentKind> AllExperimentKinds();

// A fixed-column table. Every ratio column can be recomputed from the raw
// columns of the same row.
struct Report {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;
  // Checks evaluated by the run; empty `failures` means all passed.
  std::vector<std::string> checks;
  std::vector<std::string> failures;

  void AddRow(std::vector<std::string> row);
  void Check(bool ok, const std::string& what);
};

// CSV with the resolved config as leading '#' comment lines.
std::string RenderCsv(const Report& report, const ExperimentConfig& config);
// Markdown table preceded by the resolved config as a JSON block.
std::string RenderMarkdown(const Report& report,
                           const ExperimentConfig& config);

Report RunExperiment(const ExperimentConfig& config, ExperimentKind kind);

struct WrittenReport {
  Report report;
  std::string csv_path;
  std::string md_path;
};

// Runs `kind` and writes <out_dir>/<name>.csv and <out_dir>/<name>.md.
WrittenReport RunAndWrite(const ExperimentConfig& config, ExperimentKind kind);

// printf-style fixed-point formatting.
std::string FormatDouble(double v, int decimals = 4);

}  // namespace jaggedrec

#endif  // JAGGEDREC_EXPERIMENT_H_
