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
#include "jaggedrec/toy_recall.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <ostream>
#include <random>

#include "jaggedrec/embedding.h"
#include "jaggedrec/errors.h"
#include "jaggedrec/hsp.h"
#include "jaggedrec/neg_sampling.h"
#include "jaggedrec/workload.h"

namespace jaggedrec {

void ToyDataConfig::Validate() const {
  JR_CHECK_ARG(num_items >= 2 && num_users >= 1, "dataset sizes too small");
  JR_CHECK_ARG(num_clusters >= 2 && num_clusters <= num_items,
               "num_clusters must lie in [2, num_items]");
  JR_CHECK_ARG(min_len >= 3 && max_len >= min_len,
               "sequence lengths need 3 <= min_len <= max_len");
  JR_CHECK_ARG(stickiness >= 0.0 && stickiness <= 1.0,
               "stickiness must lie in [0, 1]");
  JR_CHECK_ARG(zipf_exponent >= 0.0, "zipf exponent must be non-negative");
}

ToyDataset MakeToyDataset(const ToyDataConfig& config) {
  config.Validate();
  std::mt19937_64 rng(config.seed);
  std::vector<int64_t> perm(config.num_items);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  // Cluster c holds perm[c], perm[c + C], ...; rank order is popularity order.
  std::vector<std::vector<int64_t>> clusters(config.num_clusters);
  for (int64_t i = 0; i < config.num_items; ++i) {
    clusters[i % config.num_clusters].push_back(perm[i]);
  }
  std::vector<ZipfSampler> popularity;
  for (const auto& c : clusters) {
    popularity.emplace_back(static_cast<int64_t>(c.size()),
                            config.zipf_exponent);
  }
  std::uniform_int_distribution<int64_t> pick_cluster(0,
                                                      config.num_clusters - 1);
  std::uniform_int_distribution<int64_t> pick_len(config.min_len,
                                                  config.max_len);
  std::bernoulli_distribution stay(config.stickiness);

  ToyDataset data;
  data.num_items = config.num_items;
  for (int64_t u = 0; u < config.num_users; ++u) {
    const int64_t a = pick_cluster(rng);
    int64_t b = pick_cluster(rng);
    while (b == a) b = pick_cluster(rng);
    int64_t cur = a;
    const int64_t len = pick_len(rng);
    std::vector<int64_t> items;
    for (int64_t i = 0; i < len; ++i) {
      if (i > 0 && !stay(rng)) cur = cur == a ? b : a;
      items.push_back(clusters[cur][popularity[cur](rng) - 1]);
    }
    SplitSequence s;
    s.user_id = u;
    s.test_item = items.back();
    items.pop_back();
    s.train = std::move(items);
    data.users.push_back(std::move(s));
  }
  return data;
}

void ToyTrainConfig::Validate() const {
  JR_CHECK_ARG(dim >= 1 && hidden >= 1 && history >= 1, "bad model shape");
  JR_CHECK_ARG(steps >= 0 && batch_size >= 1 && num_negatives >= 1,
               "bad training sizes");
  JR_CHECK_ARG(temperature > 0.0, "temperature must be positive");
  JR_CHECK_ARG(sparse_lr >= 0.0 && dense_lr >= 0.0 && weight_decay >= 0.0,
               "learning rates must be non-negative");
  JR_CHECK_ARG(tau >= 0, "tau must be non-negative");
  JR_CHECK_ARG(mode == TrainMode::kSemiAsync || tau == 0,
               "sync mode needs tau = 0");
  JR_CHECK_ARG(probe_interval >= 1 && probe_batch >= 1 && eval_k >= 1,
               "bad probe settings");
}

namespace {

struct Sample {
  std::vector<int64_t> history;
  int64_t target = 0;
};

class DenseBlock {
 public:
  DenseBlock(int64_t dim, int64_t hidden, std::mt19937_64& rng)
      : dim_(dim), hidden_(hidden), params_(2 * dim * hidden + hidden + dim) {
    std::uniform_real_distribution<double> w1(-1.0 / std::sqrt(dim),
                                              1.0 / std::sqrt(dim));
    std::uniform_real_distribution<double> w2(-0.1 / std::sqrt(hidden),
                                              0.1 / std::sqrt(hidden));
    for (int64_t i = 0; i < hidden * dim; ++i) params_[i] = w1(rng);
    for (int64_t i = 0; i < dim * hidden; ++i) params_[w2_off() + i] = w2(rng);
  }

  int64_t size() const { return static_cast<int64_t>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // u = h + W2 relu(W1 h + b1) + b2 for T rows; caches the pre-activations.
  std::vector<double> Forward(const std::vector<double>& h,
                              std::vector<double>* pre) const {
    const int64_t t = static_cast<int64_t>(h.size()) / dim_;
    pre->assign(t * hidden_, 0.0);
    std::vector<double> u(h);
    for (int64_t s = 0; s < t; ++s) {
      const double* x = &h[s * dim_];
      for (int64_t j = 0; j < hidden_; ++j) {
        double z = params_[b1_off() + j];
        for (int64_t d = 0; d < dim_; ++d) z += params_[j * dim_ + d] * x[d];
        (*pre)[s * hidden_ + j] = z;
      }
      for (int64_t d = 0; d < dim_; ++d) {
        double acc = params_[b2_off() + d];
        for (int64_t j = 0; j < hidden_; ++j) {
          acc += params_[w2_off() + d * hidden_ + j] *
                 std::max(0.0, (*pre)[s * hidden_ + j]);
        }
        u[s * dim_ + d] += acc;
      }
    }
    return u;
  }

  // Returns dL/dh and accumulates dL/dparams into `grad`.
  std::vector<double> Backward(const std::vector<double>& h,
                               const std::vector<double>& pre,
                               const std::vector<double>& du,
                               std::vector<double>& grad) const {
    const int64_t t = static_cast<int64_t>(h.size()) / dim_;
    std::vector<double> dh(du);
    std::vector<double> dz(hidden_);
    for (int64_t s = 0; s < t; ++s) {
      const double* g = &du[s * dim_];
      for (int64_t j = 0; j < hidden_; ++j) {
        const double a = std::max(0.0, pre[s * hidden_ + j]);
        double da = 0.0;
        for (int64_t d = 0; d < dim_; ++d) {
          grad[w2_off() + d * hidden_ + j] += g[d] * a;
          da += params_[w2_off() + d * hidden_ + j] * g[d];
        }
        dz[j] = pre[s * hidden_ + j] > 0.0 ? da : 0.0;
      }
      for (int64_t d = 0; d < dim_; ++d) grad[b2_off() + d] += g[d];
      for (int64_t j = 0; j < hidden_; ++j) {
        grad[b1_off() + j] += dz[j];
        for (int64_t d = 0; d < dim_; ++d) {
          grad[j * dim_ + d] += dz[j] * h[s * dim_ + d];
          dh[s * dim_ + d] += params_[j * dim_ + d] * dz[j];
        }
      }
    }
    return dh;
  }

 private:
  int64_t b1_off() const { return hidden_ * dim_; }
  int64_t w2_off() const { return hidden_ * dim_ + hidden_; }
  int64_t b2_off() const { return 2 * hidden_ * dim_ + hidden_; }

  int64_t dim_;
  int64_t hidden_;
  std::vector<double> params_;
};

class AdamW {
 public:
  AdamW(int64_t n, double lr, double weight_decay)
      : lr_(lr), wd_(weight_decay), m_(n, 0.0), v_(n, 0.0) {}

  void Step(std::vector<double>& p, const std::vector<double>& g) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (size_t i = 0; i < p.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr_ * ((m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps) +
                     wd_ * p[i]);
    }
  }

 private:
  double lr_;
  double wd_;
  int64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

std::vector<double> Pool(const EmbeddingTable& items,
                         const std::vector<Sample>& batch) {
  const int64_t dim = items.dim;
  std::vector<double> h(batch.size() * dim, 0.0);
  for (size_t s = 0; s < batch.size(); ++s) {
    const double inv = 1.0 / static_cast<double>(batch[s].history.size());
    for (int64_t id : batch[s].history) {
      std::span<const double> row = items.row(id);
      for (int64_t d = 0; d < dim; ++d) h[s * dim + d] += row[d] * inv;
    }
  }
  return h;
}

struct StepResult {
  double loss = 0.0;
  std::vector<double> dense_grad;
  SparseGradient sparse_grad;
  std::vector<int64_t> read_ids;
  int64_t fp16_saturated = 0;
};

StepResult ForwardBackward(const EmbeddingTable& items,
                           const DenseBlock& dense,
                           const std::vector<Sample>& batch,
                           const NegSampleBatch& negatives,
                           const ToyTrainConfig& config) {
  const int64_t dim = items.dim;
  StepResult out;
  const std::vector<double> h = Pool(items, batch);
  std::vector<double> pre;
  const std::vector<double> u = dense.Forward(h, &pre);
  LossConfig loss_config;
  loss_config.temperature = config.temperature;
  loss_config.fp16_negatives = config.fp16_negatives;
  BatchLoss loss = NegativeSampledLoss(u, negatives, items, loss_config);
  out.loss = loss.loss;
  out.fp16_saturated = loss.fp16_saturated;
  out.dense_grad.assign(dense.size(), 0.0);
  const std::vector<double> dh =
      dense.Backward(h, pre, loss.grad_output, out.dense_grad);

  SparseGradientBuilder rows(dim, items.rows);
  for (size_t i = 0; i < loss.grad_table.indices.size(); ++i) {
    std::span<const double> g = loss.grad_table.row(i);
    std::copy(g.begin(), g.end(), rows.Row(loss.grad_table.indices[i]));
  }
  for (size_t s = 0; s < batch.size(); ++s) {
    const double inv = 1.0 / static_cast<double>(batch[s].history.size());
    for (int64_t id : batch[s].history) {
      double* row = rows.Row(id);
      for (int64_t d = 0; d < dim; ++d) row[d] += dh[s * dim + d] * inv;
    }
  }
  out.sparse_grad = rows.Finish();
  out.read_ids = out.sparse_grad.indices;
  return out;
}

Sample DrawSample(const SplitSequence& user, int64_t history,
                  std::mt19937_64& rng) {
  const int64_t n = static_cast<int64_t>(user.train.size());
  std::uniform_int_distribution<int64_t> pos(1, n - 1);
  const int64_t p = pos(rng);
  Sample s;
  s.history.assign(user.train.begin() + std::max<int64_t>(0, p - history),
                   user.train.begin() + p);
  s.target = user.train[p];
  return s;
}

std::vector<Sample> DrawBatch(const ToyDataset& data, int64_t size,
                              int64_t history, std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> pick(0, data.users.size() - 1);
  std::vector<Sample> batch;
  batch.reserve(size);
  for (int64_t i = 0; i < size; ++i) {
    batch.push_back(DrawSample(data.users[pick(rng)], history, rng));
  }
  return batch;
}

NegSampleBatch Negatives(const std::vector<Sample>& batch,
                         const ToyTrainConfig& config, int64_t pool,
                         uint64_t seed, uint64_t batch_id) {
  std::vector<int64_t> targets;
  for (const Sample& s : batch) targets.push_back(s.target);
  const std::vector<int64_t> ones(batch.size(), 1);
  return SampleNegatives(
      JaggedTensor<int64_t>::FromLengths(std::move(targets), ones),
      NegSamplerConfig{config.num_negatives, pool, false, seed}, batch_id);
}

// 1-based rank of every user's test item among all items.
std::vector<int64_t> EvalRanks(const EmbeddingTable& items,
                               const DenseBlock& dense, const ToyDataset& data,
                               int64_t history, int64_t num_users) {
  std::vector<Sample> batch;
  for (int64_t u = 0; u < num_users; ++u) {
    const SplitSequence& s = data.users[u];
    Sample e;
    e.history.assign(
        s.train.end() - std::min<int64_t>(history, s.train.size()),
        s.train.end());
    e.target = s.test_item;
    batch.push_back(std::move(e));
  }
  std::vector<double> pre;
  const std::vector<double> u = dense.Forward(Pool(items, batch), &pre);
  const int64_t dim = items.dim;
  std::vector<int64_t> ranks;
  for (int64_t b = 0; b < num_users; ++b) {
    const double* q = &u[b * dim];
    auto score = [&](int64_t id) {
      const double* e = &items.weights[id * dim];
      double acc = 0.0;
      for (int64_t d = 0; d < dim; ++d) acc += q[d] * e[d];
      return acc;
    };
    const double truth = score(batch[b].target);
    int64_t rank = 1;
    for (int64_t id = 0; id < items.rows; ++id) rank += score(id) > truth;
    ranks.push_back(rank);
  }
  return ranks;
}

double SquaredNorm(const StepResult& r) {
  double s = 0.0;
  for (double g : r.dense_grad) s += g * g;
  for (double g : r.sparse_grad.values) s += g * g;
  return s;
}

}  // namespace

ToyTrainResult TrainToyRecall(const ToyDataset& data,
                              const ToyTrainConfig& config) {
  config.Validate();
  JR_CHECK_ARG(!data.users.empty(), "toy dataset has no users");
  for (const SplitSequence& s : data.users) {
    JR_CHECK_ARG(s.train.size() >= 2, "user ", s.user_id,
                 " needs >= 2 training items");
  }
  std::mt19937_64 init_rng(config.seed);
  EmbeddingTable items =
      EmbeddingTable::Zeros("items", data.num_items, config.dim);
  std::normal_distribution<double> init(0.0, 0.1);
  for (double& w : items.weights) w = init(init_rng);
  DenseBlock dense(config.dim, config.hidden, init_rng);
  AdamW adamw(dense.size(), config.dense_lr, config.weight_decay);

  std::mt19937_64 batch_rng(config.seed * 0x9E3779B97F4A7C15ULL + 1);
  const uint64_t neg_seed = config.seed ^ 0x5DEECE66DULL;

  // The probe batch is drawn once from its own stream and never trained on.
  std::mt19937_64 probe_rng(config.seed + 0xABCDEFULL);
  const std::vector<Sample> probe_batch =
      DrawBatch(data, config.probe_batch, config.history, probe_rng);
  const NegSampleBatch probe_neg =
      Negatives(probe_batch, config, data.num_items, neg_seed, ~uint64_t{0});
  const int64_t probe_users = std::min<int64_t>(
      config.probe_eval_users, static_cast<int64_t>(data.users.size()));

  ToyTrainResult result;
  StalenessMonitor monitor;
  const int64_t tau = config.tau;
  std::deque<std::pair<int64_t, SparseGradient>> pending;
  double grad_sum = 0.0;
  int64_t probes = 0;
  double loss_since_probe = 0.0;
  int64_t steps_since_probe = 0;

  auto apply = [&](int64_t step, const SparseGradient& g) {
    AdagradStep(items, g, config.sparse_lr, 1e-8);
    monitor.RecordUpdate(step, g.indices);
  };
  auto probe = [&](int64_t step) {
    StepResult r = ForwardBackward(items, dense, probe_batch, probe_neg, config);
    grad_sum += SquaredNorm(r);
    ++probes;
    ProbePoint p;
    p.step = step;
    p.grad_norm_sq_avg = grad_sum / static_cast<double>(probes);
    p.loss = steps_since_probe > 0 ? loss_since_probe / steps_since_probe
                                   : r.loss;
    p.hr = HitRateFromRanks(
        EvalRanks(items, dense, data, config.history, probe_users),
        config.eval_k);
    result.probe.push_back(p);
    loss_since_probe = 0.0;
    steps_since_probe = 0;
  };

  for (int64_t step = 0; step < config.steps; ++step) {
    if (step % config.probe_interval == 0) probe(step);
    if (config.mode == TrainMode::kSemiAsync) {
      while (static_cast<int64_t>(pending.size()) > tau) {
        apply(pending.front().first, pending.front().second);
        pending.pop_front();
      }
    }
    const std::vector<Sample> batch =
        DrawBatch(data, config.batch_size, config.history, batch_rng);
    const NegSampleBatch neg =
        Negatives(batch, config, data.num_items, neg_seed, step);
    StepResult r = ForwardBackward(items, dense, batch, neg, config);
    monitor.RecordRead(step, tau, r.read_ids);
    if (!std::isfinite(r.loss)) {
      throw InvariantError(internal::StrCat(
          "non-finite loss ", r.loss, " at step ", step, " (mode ",
          TrainModeName(config.mode), ", tau ", tau, ")"));
    }
    result.step_loss.push_back(r.loss);
    result.fp16_saturated += r.fp16_saturated;
    loss_since_probe += r.loss;
    ++steps_since_probe;
    adamw.Step(dense.params(), r.dense_grad);
    if (config.mode == TrainMode::kSync) {
      apply(step, r.sparse_grad);
    } else {
      pending.emplace_back(step, std::move(r.sparse_grad));
    }
  }
  for (auto& [step, g] : pending) apply(step, g);
  pending.clear();
  probe(config.steps);

  const std::vector<int64_t> ranks =
      EvalRanks(items, dense, data, config.history,
                static_cast<int64_t>(data.users.size()));
  result.final_hr = HitRateFromRanks(ranks, config.eval_k);
  result.final_ndcg = NdcgFromRanks(ranks, config.eval_k);
  result.item_weights = items.weights;
  result.dense_params = dense.params();
  result.staleness_reads = monitor.reads();
  result.staleness_violations = monitor.violations();
  return result;
}

void WriteProbeCsv(std::ostream& os, const ToyTrainResult& result, int64_t k) {
  os << "step,grad_norm_sq_avg,loss,hr@" << k << '\n';
  char buf[160];
  for (const ProbePoint& p : result.probe) {
    std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g,%.6f\n",
                  static_cast<long long>(p.step), p.grad_norm_sq_avg, p.loss,
                  p.hr);
    os << buf;
  }
}

}  // namespace jaggedrec
