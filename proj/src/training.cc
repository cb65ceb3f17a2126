// Copyright 2026 The CFAG Authors.
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

#include "cfag/training.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "cfag/errors.h"
#include "cfag/evaluation.h"

namespace cfag {
namespace {

constexpr uint64_t kSamplerStream = 0x94d049bb133111ebull;

// -log(sigmoid(x)), stable for large |x|.
double neg_log_sigmoid(double x) {
  return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
}

std::vector<BprTriple> sample_triples(const TripartiteGraph& train,
                                      size_t batch_size, Rng& rng) {
  const std::vector<Edge>& edges = train.edges(Relation::kUserGroup);
  if (edges.empty()) throw DataError("sample_triples: no training edges");
  const uint64_t n_groups = train.num_groups();
  std::vector<BprTriple> batch;
  batch.reserve(batch_size);
  size_t saturated_draws = 0;
  while (batch.size() < batch_size) {
    const Edge& e = edges[rng.bounded(edges.size())];
    if (train.user_groups(e.src).size() >= n_groups) {
      // No valid negative for this user; draw another positive.
      if (++saturated_draws > 100 * edges.size() + 1000) {
        throw DataError("sample_triples: every user joined every group");
      }
      continue;
    }
    uint32_t neg;
    do {
      neg = static_cast<uint32_t>(rng.bounded(n_groups));
    } while (train.has_edge(NodeType::kUser, e.src, NodeType::kGroup, neg));
    batch.push_back({e.src, e.dst, neg});
  }
  return batch;
}

double bpr_loss(std::span<const double> scores_pos,
                std::span<const double> scores_neg, const ModelParams& params,
                double l2) {
  if (scores_pos.size() != scores_neg.size()) {
    throw std::invalid_argument("bpr_loss: score arrays differ in length");
  }
  double total = 0.0;
  for (size_t k = 0; k < scores_pos.size(); ++k) {
    if (!std::isfinite(scores_pos[k]) || !std::isfinite(scores_neg[k])) {
      throw NumericError("bpr_loss: non-finite score");
    }
    total += neg_log_sigmoid(scores_pos[k] - scores_neg[k]);
  }
  const double mean =
      scores_pos.empty() ? 0.0 : total / static_cast<double>(scores_pos.size());
  return mean + (l2 > 0.0 ? l2 * params.squared_norm() : 0.0);
}

LossAndGradient bpr_loss_and_gradient(const ModelParams& params,
                                      const PropagationGraph& graph,
                                      const HyperParams& hp,
                                      std::span<const BprTriple> batch,
                                      double l2) {
  const ForwardTrace trace = forward(params, graph, hp);
  const DenseMatrix& zu = trace.output[static_cast<int>(NodeType::kUser)];
  const DenseMatrix& zg = trace.output[static_cast<int>(NodeType::kGroup)];

  std::vector<double> pos(batch.size()), neg(batch.size());
  for (size_t k = 0; k < batch.size(); ++k) {
    pos[k] = zu.col(batch[k].user).dot(zg.col(batch[k].pos_group));
    neg[k] = zu.col(batch[k].user).dot(zg.col(batch[k].neg_group));
  }
  LossAndGradient out;
  out.loss = bpr_loss(pos, neg, params, l2);

  PerType<DenseMatrix> dout;
  dout[static_cast<int>(NodeType::kUser)] = DenseMatrix::Zero(zu.rows(), zu.cols());
  dout[static_cast<int>(NodeType::kGroup)] = DenseMatrix::Zero(zg.rows(), zg.cols());
  DenseMatrix& du = dout[static_cast<int>(NodeType::kUser)];
  DenseMatrix& dg = dout[static_cast<int>(NodeType::kGroup)];
  const double inv_n = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  for (size_t k = 0; k < batch.size(); ++k) {
    const BprTriple& t = batch[k];
    // d/dx of -log sigmoid(x) is -sigmoid(-x).
    const double c = -sigmoid(-(pos[k] - neg[k])) * inv_n;
    du.col(t.user) += c * (zg.col(t.pos_group) - zg.col(t.neg_group));
    dg.col(t.pos_group) += c * zu.col(t.user);
    dg.col(t.neg_group) -= c * zu.col(t.user);
  }
  out.gradient = backward(params, trace, graph, hp, dout);
  if (l2 > 0.0) {
    auto grads = out.gradient.tensors();
    auto values = params.tensors();
    for (size_t k = 0; k < grads.size(); ++k) {
      *grads[k].second += (2.0 * l2) * *values[k].second;
    }
  }
  return out;
}

OptimizerState OptimizerState::for_params(const ModelParams& params) {
  OptimizerState s;
  for (const auto& [name, m] : params.tensors()) {
    s.slots.push_back(AdamState::like(*m));
  }
  return s;
}

double train_step(ModelParams& params, std::span<const BprTriple> batch,
                  const PropagationGraph& graph, const HyperParams& hp,
                  double l2, double lr, OptimizerState& optimizer) {
  LossAndGradient lg = bpr_loss_and_gradient(params, graph, hp, batch, l2);
  if (!std::isfinite(lg.loss)) throw NumericError("train_step: loss is not finite");
  auto values = params.tensors();
  auto grads = lg.gradient.tensors();
  if (optimizer.slots.size() != values.size()) {
    throw std::invalid_argument("train_step: optimizer state does not match params");
  }
  for (size_t k = 0; k < values.size(); ++k) {
    adam_step(*values[k].second, *grads[k].second, optimizer.slots[k], lr);
  }
  ++params.version;
  return lg.loss;
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  best_ = -std::numeric_limits<double>::infinity();
}

bool EarlyStopping::update(double value) {
  ++evaluations_;
  if (value > best_) {
    best_ = value;
    bad_updates_ = 0;
    return true;
  }
  ++bad_updates_;
  return false;
}

FitResult fit(const DatasetSplit& split, const HyperParams& hp,
              const TrainConfig& config) {
  hp.validate();
  config.validate();
  const TripartiteGraph& train = split.train;
  const PropagationGraph graph = PropagationGraph::build(train, hp.aggregation);
  ModelParams params =
      init_params(hp, train.num_users(), train.num_groups(), train.num_items(),
                  config.seed, hp.pa_mode != PaMode::kNoPa);
  OptimizerState optimizer = OptimizerState::for_params(params);
  Rng rng(config.seed ^ kSamplerStream);

  const size_t n_edges = train.edges(Relation::kUserGroup).size();
  const bool validate = !split.validation_ug.empty();
  const int cutoff10[] = {10};
  EarlyStopping stopper(config.patience);

  FitResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog row;
    row.epoch = epoch;
    double loss_sum = 0.0;
    for (size_t done = 0; done < n_edges;) {
      const size_t b = std::min(static_cast<size_t>(config.batch_size), n_edges - done);
      const std::vector<BprTriple> batch = sample_triples(train, b, rng);
      loss_sum += train_step(params, batch, graph, hp, config.l2, config.lr,
                             optimizer) *
                  static_cast<double>(b);
      done += b;
    }
    row.loss = loss_sum / static_cast<double>(n_edges);

    bool stop = false;
    if (validate && epoch % config.eval_every == 0) {
      const ForwardTrace trace = forward(params, graph, hp);
      const DenseMatrix scores = score_matrix(trace);
      check_finite(scores, "validation scores");
      const EvalReport report = evaluate_scores(
          scores, split, EvalTarget::kValidation, cutoff10, config.threads);
      row.val_recall10 = report.recall_at(10);
      row.val_ndcg10 = report.ndcg_at(10);
      if (stopper.update(*row.val_ndcg10)) {
        result.params = params;
        result.best_epoch = epoch;
        result.best_val_ndcg10 = row.val_ndcg10;
      }
      stop = stopper.should_stop();
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    result.log.push_back(row);
    if (stop) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.best_epoch == 0) {
    result.params = std::move(params);
    result.best_epoch = result.log.back().epoch;
  }
  return result;
}

void write_training_log(const std::filesystem::path& path,
                        std::span<const EpochLog> log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss,val_recall@10,val_ndcg@10,wall_ms\n";
  out.precision(10);
  for (const EpochLog& row : log) {
    out << row.epoch << ',' << row.loss << ',';
    if (row.val_recall10) out << *row.val_recall10;
    out << ',';
    if (row.val_ndcg10) out << *row.val_ndcg10;
    out << ',' << std::fixed;
    out.precision(1);
    out << row.wall_ms << std::defaultfloat;
    out.precision(10);
    out << '\n';
  }
}

}  // namespace cfag
