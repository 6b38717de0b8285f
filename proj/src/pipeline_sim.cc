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
#include "jaggedrec/pipeline_sim.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "jaggedrec/errors.h"

namespace jaggedrec {

std::string ResourceName(Resource r) {
  switch (r) {
    case Resource::kHost:
      return "host";
    case Resource::kDeviceCompute:
      return "device_compute";
    case Resource::kDeviceComm:
      return "device_comm";
    case Resource::kNone:
      return "none";
  }
  return "unknown";
}

Resource ParseResource(const std::string& name) {
  for (Resource r : {Resource::kHost, Resource::kDeviceCompute,
                     Resource::kDeviceComm, Resource::kNone}) {
    if (ResourceName(r) == name) return r;
  }
  throw ValidationError("unknown resource '" + name + "'");
}

std::string StageName(Stage s) {
  switch (s) {
    case Stage::kDataloader:
      return "dataloader";
    case Stage::kFeatureA2aUnique:
      return "feature_a2a_and_unique";
    case Stage::kWaitUnique:
      return "wait_unique";
    case Stage::kEmbForward:
      return "emb_forward";
    case Stage::kDenseModule:
      return "dense_module";
    case Stage::kEmbBackward:
      return "emb_backward";
  }
  return "unknown";
}

Stage ParseStage(const std::string& name) {
  for (int k = 0; k < kNumStages; ++k) {
    if (StageName(static_cast<Stage>(k)) == name) return static_cast<Stage>(k);
  }
  throw ValidationError("unknown stage '" + name + "'");
}

std::vector<StageSpec> DefaultStageSpecs() {
  return {
      {Stage::kDataloader, Resource::kHost, 1.0, 0.0},
      {Stage::kFeatureA2aUnique, Resource::kDeviceComm, 1.0, 0.0},
      {Stage::kWaitUnique, Resource::kNone, 1.0, 0.0},
      {Stage::kEmbForward, Resource::kDeviceComm, 1.0, 0.0},
      {Stage::kDenseModule, Resource::kDeviceCompute, 1.0, 0.0},
      {Stage::kEmbBackward, Resource::kDeviceComm, 1.0, 0.0},
  };
}

void ValidateStageSpecs(std::span<const StageSpec> specs) {
  JR_CHECK_ARG(specs.size() == kNumStages, "expected ", kNumStages,
               " stage specs, got ", specs.size());
  for (int k = 0; k < kNumStages; ++k) {
    JR_CHECK_ARG(specs[k].stage == static_cast<Stage>(k), "stage ", k,
                 " must be ", StageName(static_cast<Stage>(k)), ", got ",
                 StageName(specs[k].stage));
    JR_CHECK_ARG(std::isfinite(specs[k].constant_s) &&
                     std::isfinite(specs[k].per_token_s) &&
                     specs[k].constant_s >= 0.0 && specs[k].per_token_s >= 0.0,
                 "stage ", StageName(specs[k].stage),
                 " has a negative or non-finite duration");
  }
}

double PipelineTimeline::makespan() const {
  double m = 0.0;
  for (const TimelineEvent& e : events) m = std::max(m, e.end);
  return m;
}

void PipelineTimeline::WriteCsv(std::ostream& os) const {
  os << "batch,stage,resource,start,end\n";
  char buf[200];
  for (const TimelineEvent& e : events) {
    std::snprintf(buf, sizeof(buf), "%lld,%s,%s,%.9g,%.9g\n",
                  static_cast<long long>(e.batch), StageName(e.stage).c_str(),
                  ResourceName(e.resource).c_str(), e.start, e.end);
    os << buf;
  }
}

std::string PipelineTimeline::Gantt(int64_t width) const {
  JR_CHECK_ARG(width >= 1, "Gantt width must be >= 1");
  const double span = makespan();
  std::string out;
  for (Resource r : {Resource::kHost, Resource::kDeviceComm,
                     Resource::kDeviceCompute}) {
    std::string row(width, '.');
    for (const TimelineEvent& e : events) {
      if (e.resource != r || e.end <= e.start || span <= 0.0) continue;
      const auto a = static_cast<int64_t>(e.start / span * width);
      const auto b = static_cast<int64_t>(std::ceil(e.end / span * width));
      for (int64_t c = a; c < std::min(b, width); ++c) {
        row[c] = static_cast<char>('0' + e.batch % 10);
      }
    }
    char label[32];
    std::snprintf(label, sizeof(label), "%-15s|", ResourceName(r).c_str());
    out += label + row + "|\n";
  }
  return out;
}

std::vector<std::pair<int64_t, Stage>> StagePredecessors(int64_t batch,
                                                         Stage stage,
                                                         int64_t depth,
                                                         bool semi_async) {
  std::vector<std::pair<int64_t, Stage>> preds;
  const int k = static_cast<int>(stage);
  if (k > 0) preds.emplace_back(batch, static_cast<Stage>(k - 1));
  if (batch > 0) preds.emplace_back(batch - 1, stage);
  if (stage == Stage::kDataloader && batch >= depth) {
    preds.emplace_back(batch - depth, Stage::kEmbBackward);
  }
  if (stage == Stage::kEmbForward) {
    const int64_t lag = semi_async ? 2 : 1;
    if (batch >= lag) preds.emplace_back(batch - lag, Stage::kEmbBackward);
  }
  return preds;
}

PipelineTimeline BuildSchedule(std::span<const StageSpec> specs,
                               std::span<const int64_t> batch_tokens,
                               int64_t depth, bool semi_async) {
  ValidateStageSpecs(specs);
  JR_CHECK_ARG(!batch_tokens.empty(), "need at least one batch");
  JR_CHECK_ARG(depth >= 1, "pipeline depth must be >= 1");
  for (int64_t t : batch_tokens) {
    JR_CHECK_ARG(t >= 0, "token counts must be non-negative");
  }
  const int64_t batches = static_cast<int64_t>(batch_tokens.size());
  const int64_t n = batches * kNumStages;
  PipelineTimeline tl;
  tl.depth = depth;
  tl.semi_async = semi_async;
  tl.events.resize(n);
  std::vector<std::vector<int64_t>> preds(n);
  std::vector<std::vector<int64_t>> succ(n);
  std::vector<int64_t> missing(n, 0);
  for (int64_t b = 0; b < batches; ++b) {
    for (int k = 0; k < kNumStages; ++k) {
      const int64_t e = b * kNumStages + k;
      TimelineEvent& ev = tl.events[e];
      ev.batch = b;
      ev.stage = static_cast<Stage>(k);
      ev.resource = specs[k].resource;
      for (auto [pb, ps] : StagePredecessors(b, ev.stage, depth, semi_async)) {
        const int64_t p = pb * kNumStages + static_cast<int64_t>(ps);
        preds[e].push_back(p);
        succ[p].push_back(e);
        ++missing[e];
      }
    }
  }

  std::array<double, 4> resource_free{0.0, 0.0, 0.0, 0.0};
  std::vector<int64_t> ready;
  for (int64_t e = 0; e < n; ++e) {
    if (missing[e] == 0) ready.push_back(e);
  }
  std::vector<double> pred_end(n, 0.0);
  int64_t done = 0;
  while (!ready.empty()) {
    size_t best = 0;
    double best_start = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < ready.size(); ++i) {
      const TimelineEvent& ev = tl.events[ready[i]];
      double start = pred_end[ready[i]];
      if (ev.resource != Resource::kNone) {
        start = std::max(start, resource_free[static_cast<int>(ev.resource)]);
      }
      // `ready` is kept sorted by event index, i.e. by (batch, stage).
      if (start < best_start) {
        best_start = start;
        best = i;
      }
    }
    const int64_t e = ready[best];
    ready.erase(ready.begin() + static_cast<std::ptrdiff_t>(best));
    TimelineEvent& ev = tl.events[e];
    ev.start = best_start;
    ev.end = best_start +
             specs[static_cast<int>(ev.stage)].Duration(batch_tokens[ev.batch]);
    if (ev.resource != Resource::kNone) {
      resource_free[static_cast<int>(ev.resource)] = ev.end;
    }
    ++done;
    for (int64_t s : succ[e]) {
      pred_end[s] = std::max(pred_end[s], ev.end);
      if (--missing[s] == 0) {
        ready.insert(std::lower_bound(ready.begin(), ready.end(), s), s);
      }
    }
  }
  if (done != n) throw ValidationError("pipeline has a cyclic dependency");
  return tl;
}

namespace {

using Interval = std::pair<double, double>;

double OverlapWith(const Interval& x, const std::vector<Interval>& sorted) {
  double total = 0.0;
  auto it = std::lower_bound(
      sorted.begin(), sorted.end(), x.first,
      [](const Interval& a, double v) { return a.second <= v; });
  for (; it != sorted.end() && it->first < x.second; ++it) {
    total += std::max(0.0, std::min(x.second, it->second) -
                               std::max(x.first, it->first));
  }
  return total;
}

}  // namespace

UtilizationReport MakeUtilizationReport(const PipelineTimeline& timeline) {
  UtilizationReport r;
  r.makespan = timeline.makespan();
  std::vector<Interval> compute;
  for (const TimelineEvent& e : timeline.events) {
    if (e.resource == Resource::kDeviceCompute && e.end > e.start) {
      compute.emplace_back(e.start, e.end);
      r.computing += e.end - e.start;
    }
  }
  std::sort(compute.begin(), compute.end());
  for (const TimelineEvent& e : timeline.events) {
    if (e.resource != Resource::kDeviceComm) continue;
    const double len = e.end - e.start;
    const double hidden = OverlapWith({e.start, e.end}, compute);
    r.communication += len;
    r.comm_overlapped += hidden;
    r.comm_not_overlapped += len - hidden;
    if (e.stage == Stage::kEmbForward || e.stage == Stage::kEmbBackward) {
      r.unmasked_sparse_comm += len - hidden;
    }
  }
  r.free = r.makespan - r.computing - r.comm_not_overlapped;
  return r;
}

ModeComparison CompareModes(std::span<const StageSpec> specs,
                            std::span<const int64_t> batch_tokens,
                            int64_t depth) {
  ModeComparison c;
  c.sync = MakeUtilizationReport(BuildSchedule(specs, batch_tokens, depth, false));
  c.semi_async =
      MakeUtilizationReport(BuildSchedule(specs, batch_tokens, depth, true));
  return c;
}

namespace {

// Per-token costs of the calibrated configuration.
struct CalibrationKnobs {
  double comm = 1.0;     // total device communication per token
  double dense = 1.0;    // dense module per token
  double host = 0.0;     // dataloader constant per batch
  double wait = 0.0;     // wait_unique constant per batch
};

std::vector<StageSpec> KnobSpecs(const CalibrationKnobs& k) {
  return {
      {Stage::kDataloader, Resource::kHost, k.host, 0.0},
      {Stage::kFeatureA2aUnique, Resource::kDeviceComm, 0.0, 0.25 * k.comm},
      {Stage::kWaitUnique, Resource::kNone, k.wait, 0.0},
      {Stage::kEmbForward, Resource::kDeviceComm, 0.0, 0.25 * k.comm},
      {Stage::kDenseModule, Resource::kDeviceCompute, 0.0, k.dense},
      {Stage::kEmbBackward, Resource::kDeviceComm, 0.0, 0.5 * k.comm},
  };
}

template <typename F>
double Bisect(double lo, double hi, double target, F ratio_of) {
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ratio_of(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CalibratedPipeline CalibratePipeline(const UtilizationTargets& targets,
                                     int64_t num_batches,
                                     int64_t tokens_per_batch,
                                     double computing_latency_s) {
  JR_CHECK_ARG(targets.computing > 0.0 && targets.comm_not_overlapped > 0.0 &&
                   targets.free > 0.0 && targets.communication > 0.0,
               "calibration targets must be positive");
  JR_CHECK_ARG(num_batches == 0 || num_batches >= 2,
               "calibration needs >= 2 batches (or 0 to search)");
  JR_CHECK_ARG(tokens_per_batch >= 100, "tokens_per_batch must be >= 100");
  JR_CHECK_ARG(computing_latency_s > 0.0, "computing latency must be positive");
  const double tokens = static_cast<double>(tokens_per_batch);
  const double comm_ratio = targets.communication / targets.comm_not_overlapped;

  CalibratedPipeline out;
  CalibrationKnobs k;
  // Start with the dense cost far above the communication so that only the
  // warm-up and drain traffic is exposed.
  k.dense = 4.0 * k.comm;
  k.host = 0.02 * k.comm * tokens;
  k.wait = k.host / 9.0;
  double f = 1.0;

  auto tokens_for = [&](int64_t n, double frac) {
    std::vector<int64_t> t(n, tokens_per_batch);
    t.back() = std::max<int64_t>(1, std::llround(frac * tokens));
    return t;
  };
  auto simulate = [&](const CalibrationKnobs& kn, int64_t n, double frac) {
    return MakeUtilizationReport(BuildSchedule(
        KnobSpecs(kn), tokens_for(n, frac), out.depth, out.semi_async));
  };
  auto exposed_ratio = [&](const CalibrationKnobs& kn, int64_t n, double frac) {
    const UtilizationReport r = simulate(kn, n, frac);
    return r.communication / r.comm_not_overlapped;
  };

  // For f in [0.5, 1] the exposed share grows with the last batch, so the
  // comm ratio decreases in f. Below 0.5 the short final dense step stops
  // hiding the previous backward and the relation turns. Pick the smallest
  // batch count that brackets the target.
  int64_t n = num_batches;
  constexpr double kMinFrac = 0.5;
  if (n == 0) {
    for (int64_t c = 2; c <= 32 && n == 0; ++c) {
      if (exposed_ratio(k, c, 1.0) <= comm_ratio &&
          comm_ratio <= exposed_ratio(k, c, kMinFrac)) {
        n = c;
      }
    }
    JR_CHECK_ARG(n > 0, "no batch count up to 32 reaches a communication "
                 "ratio of ", comm_ratio);
  }
  JR_CHECK_ARG(exposed_ratio(k, n, 1.0) <= comm_ratio &&
                   comm_ratio <= exposed_ratio(k, n, kMinFrac),
               "no partial last batch reaches a communication ratio of ",
               comm_ratio, " with ", n, " batches");

  for (int round = 0; round < 6; ++round) {
    f = Bisect(kMinFrac, 1.0, -comm_ratio,
               [&](double v) { return -exposed_ratio(k, n, v); });
    k.dense = Bisect(k.dense / 8.0, k.dense * 8.0, targets.computing,
                     [&](double v) {
                       CalibrationKnobs t = k;
                       t.dense = v;
                       const UtilizationReport r = simulate(t, n, f);
                       return r.ratio(r.computing);
                     });
    const double free_unit = k.host + k.wait;
    const double scale = Bisect(0.0, 8.0, targets.free, [&](double v) {
      CalibrationKnobs t = k;
      t.host = 0.9 * free_unit * v;
      t.wait = 0.1 * free_unit * v;
      const UtilizationReport r = simulate(t, n, f);
      return r.ratio(r.free);
    });
    k.host = 0.9 * free_unit * scale;
    k.wait = 0.1 * free_unit * scale;
  }

  // Rescale time so the computing latency has the requested magnitude.
  const double s = computing_latency_s / simulate(k, n, f).computing;
  k.comm *= s;
  k.dense *= s;
  k.host *= s;
  k.wait *= s;
  out.specs = KnobSpecs(k);
  out.batch_tokens = tokens_for(n, f);
  out.report = simulate(k, n, f);
  return out;
}

std::vector<StageSpec> CommHeavyStageSpecs() {
  return {
      {Stage::kDataloader, Resource::kHost, 2e-3, 0.0},
      {Stage::kFeatureA2aUnique, Resource::kDeviceComm, 1e-3, 0.0},
      {Stage::kWaitUnique, Resource::kNone, 0.5e-3, 0.0},
      {Stage::kEmbForward, Resource::kDeviceComm, 3e-3, 0.0},
      {Stage::kDenseModule, Resource::kDeviceCompute, 10e-3, 0.0},
      {Stage::kEmbBackward, Resource::kDeviceComm, 3e-3, 0.0},
  };
}

std::string UtilizationCsvHeader() {
  return "config,makespan_ms,computing_ms,computing_pct,communication_ms,"
         "communication_pct,comm_not_overlapped_ms,comm_not_overlapped_pct,"
         "free_ms,free_pct,unmasked_sparse_comm_ms,unmasked_sparse_comm_pct";
}

std::string UtilizationCsvRow(const std::string& name,
                              const UtilizationReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%.6f,%.6f,%.4f,%.6f,%.4f,%.6f,%.4f,%.6f,%.4f,%.6f,%.4f",
                name.c_str(), r.makespan * 1e3, r.computing * 1e3,
                100 * r.ratio(r.computing), r.communication * 1e3,
                100 * r.ratio(r.communication), r.comm_not_overlapped * 1e3,
                100 * r.ratio(r.comm_not_overlapped), r.free * 1e3,
                100 * r.ratio(r.free), r.unmasked_sparse_comm * 1e3,
                100 * r.ratio(r.unmasked_sparse_comm));
  return buf;
}

std::string UtilizationMarkdownHeader() {
  return "| Config | Computing (ms) | Computing (%) | Communication (ms) | "
         "Communication (%) | Comm. Not Overlapped (ms) | Comm. Not "
         "Overlapped (%) | Free (ms) | Free (%) |\n"
         "|---|---|---|---|---|---|---|---|---|";
}

std::string UtilizationMarkdownRow(const std::string& name,
                                   const UtilizationReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "| %s | %.2f | %.2f | %.2f | %.2f | %.2f | %.2f | %.2f | %.2f |",
                name.c_str(), r.computing * 1e3, 100 * r.ratio(r.computing),
                r.communication * 1e3, 100 * r.ratio(r.communication),
                r.comm_not_overlapped * 1e3,
                100 * r.ratio(r.comm_not_overlapped), r.free * 1e3,
                100 * r.ratio(r.free));
  return buf;
}

}  // namespace jaggedrec
