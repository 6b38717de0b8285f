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
#ifndef JAGGEDREC_PIPELINE_SIM_H_
#define JAGGEDREC_PIPELINE_SIM_H_

// Discrete-event model of the six-stage training pipeline on three resources
// (host, device compute, device communication), with utilization accounting.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace jaggedrec {

enum class Resource { kHost = 0, kDeviceCompute = 1, kDeviceComm = 2, kNone = 3 };
std::string ResourceName(Resource r);
Resource ParseResource(const std::string& name);

enum class Stage {
  kDataloader = 0,
  kFeatureA2aUnique = 1,
  kWaitUnique = 2,
  kEmbForward = 3,
  kDenseModule = 4,
  kEmbBackward = 5,
};
inline constexpr int kNumStages = 6;
std::string StageName(Stage s);
Stage ParseStage(const std::string& name);

struct StageSpec {
  Stage stage = Stage::kDataloader;
  Resource resource = Resource::kHost;
  double constant_s = 0.0;
  double per_token_s = 0.0;

  double Duration(int64_t tokens) const {
    return constant_s + per_token_s * static_cast<double>(tokens);
  }
};

// The six stages in pipeline order with their default resources and unit
// constant durations.
std::vector<StageSpec> DefaultStageSpecs();

// Six specs, one per stage in pipeline order, non-negative durations.
void ValidateStageSpecs(std::span<const StageSpec> specs);

struct TimelineEvent {
  int64_t batch = 0;
  Stage stage = Stage::kDataloader;
  Resource resource = Resource::kHost;
  double start = 0.0;
  double end = 0.0;
};

struct PipelineTimeline {
  std::vector<TimelineEvent> events;  // batch-major, stage order
  int64_t depth = 6;
  bool semi_async = false;

  const TimelineEvent& at(int64_t batch, Stage s) const {
    return events[batch * kNumStages + static_cast<int64_t>(s)];
  }
  int64_t num_batches() const {
    return static_cast<int64_t>(events.size()) / kNumStages;
  }
  double makespan() const;
  void WriteCsv(std::ostream& os) const;  // batch,stage,resource,start,end
  // One row per resource; each cell shows the batch digit or '.'.
  std::string Gantt(int64_t width = 100) const;
};

// Direct predecessors of (batch, stage): the previous stage of the batch, the
// same stage of the previous batch, dataloader(b) after emb_backward(b -
// depth), and the embedding ordering of the training mode: emb_forward(b)
// after emb_backward(b - 1) when synchronous, after emb_backward(b - 2) when
// semi-asynchronous.
std::vector<std::pair<int64_t, Stage>> StagePredecessors(int64_t batch,
                                                         Stage stage,
                                                         int64_t depth,
                                                         bool semi_async);

// Non-delay list scheduling: repeatedly start the ready event with the
// earliest feasible start, ties broken by (batch, stage).
PipelineTimeline BuildSchedule(std::span<const StageSpec> specs,
                               std::span<const int64_t> batch_tokens,
                               int64_t depth = 6, bool semi_async = false);

struct UtilizationReport {
  double makespan = 0.0;
  double computing = 0.0;
  double communication = 0.0;
  double comm_not_overlapped = 0.0;
  double comm_overlapped = 0.0;
  double free = 0.0;
  double unmasked_sparse_comm = 0.0;  // emb forward/backward outside compute

  double ratio(double v) const { return makespan > 0.0 ? v / makespan : 0.0; }
};

UtilizationReport MakeUtilizationReport(const PipelineTimeline& timeline);

struct ModeComparison {
  UtilizationReport sync;
  UtilizationReport semi_async;
};

ModeComparison CompareModes(std::span<const StageSpec> specs,
                            std::span<const int64_t> batch_tokens,
                            int64_t depth = 6);

// Utilization shares of the makespan.
struct UtilizationTargets {
  double computing = 0.9429;
  double communication = 0.2404;
  double comm_not_overlapped = 0.0539;
  double free = 0.0033;
};

struct CalibratedPipeline {
  std::vector<StageSpec> specs;
  std::vector<int64_t> batch_tokens;
  int64_t depth = 6;
  bool semi_async = true;
  UtilizationReport report;
};

// Fits per-token stage durations so that the simulated semi-async schedule
// hits the targets. The last batch is partial; its size sets the
// communication to exposed-communication ratio. That size, the dense cost
// and the host cost are refined in turn by bisection against the simulator.
// `num_batches` = 0 picks the smallest batch count that can reach the
// communication ratio. Durations are scaled so that the computing latency
// equals `computing_latency_s`.
CalibratedPipeline CalibratePipeline(const UtilizationTargets& targets,
                                     int64_t num_batches = 0,
                                     int64_t tokens_per_batch = 100000,
                                     double computing_latency_s = 1.712);

// A communication-heavy configuration with constant per-batch costs, used to
// contrast exposed embedding communication between the two modes.
std::vector<StageSpec> CommHeavyStageSpecs();

std::string UtilizationCsvHeader();
std::string UtilizationCsvRow(const std::string& name,
                              const UtilizationReport& r);
std::string UtilizationMarkdownHeader();
std::string UtilizationMarkdownRow(const std::string& name,
                                   const UtilizationReport& r);

}  // namespace jaggedrec

#endif  // JAGGEDREC_PIPELINE_SIM_H_
