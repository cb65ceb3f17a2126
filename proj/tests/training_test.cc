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

#include <cmath>
#include <map>
#include <vector>

#include <doctest.h>

#include "cfag/errors.h"
#include "cfag/evaluation.h"
#include "cfag/graph.h"
#include "cfag/training.h"
#include "test_util.h"

namespace cfag {
namespace {

HyperParams toy_hp() {
  HyperParams hp;
  hp.dim = 4;
  return hp;
}

double margin(const ModelParams& p, const PropagationGraph& pg, const HyperParams& hp,
              const BprTriple& t) {
  const ForwardTrace tr = forward(p, pg, hp);
  const DenseVector u = tr.output[0].col(t.user);
  return score(u, tr.output[1].col(t.pos_group)) - score(u, tr.output[1].col(t.neg_group));
}

TEST_CASE("negative sampling is forced when one group remains") {
  const TripartiteGraph g(1, 2, 1, {{0, 0}}, {{0, 0}}, {});
  Rng rng(1);
  for (const auto& t : sample_triples(g, 500, rng)) {
    CHECK(t.pos_group == 0);
    CHECK(t.neg_group == 1);
  }
}

TEST_CASE("sampled triples satisfy membership invariants") {
  Rng graph_rng(2);
  const auto g = testing::random_graph(20, 10, 4, 0.3, graph_rng);
  Rng rng(3);
  for (int batch = 0; batch < 50; ++batch) {
    for (const auto& t : sample_triples(g, 64, rng)) {
      CHECK(g.has_edge(NodeType::kUser, t.user, NodeType::kGroup, t.pos_group));
      CHECK(!g.has_edge(NodeType::kUser, t.user, NodeType::kGroup, t.neg_group));
    }
  }
}

TEST_CASE("positives are drawn uniformly over edges") {
  const TripartiteGraph g(3, 4, 1, {{0, 0}, {0, 1}, {1, 2}, {2, 0}, {2, 3}}, {}, {});
  Rng rng(4);
  const auto batch = sample_triples(g, 100000, rng);
  std::map<std::pair<uint32_t, uint32_t>, int> counts;
  for (const auto& t : batch) ++counts[{t.user, t.pos_group}];
  REQUIRE(counts.size() == 5);
  for (const auto& [edge, c] : counts) CHECK(std::abs(c - 20000) <= 400);
}

TEST_CASE("saturated users are skipped and all-saturated fails") {
  const TripartiteGraph g(2, 2, 1, {{0, 0}, {0, 1}, {1, 0}}, {}, {});
  Rng rng(5);
  for (const auto& t : sample_triples(g, 200, rng)) CHECK(t.user == 1);
  const TripartiteGraph full(1, 2, 1, {{0, 0}, {0, 1}}, {}, {});
  CHECK_THROWS_AS(sample_triples(full, 4, rng), DataError);
}

TEST_CASE("bpr loss values") {
  const ModelParams p = init_params(toy_hp(), 2, 2, 2, 1);
  const std::vector<double> zero = {0.3}, one = {1.0}, big = {1e6};
  CHECK(bpr_loss(zero, zero, p, 0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(bpr_loss(one, std::vector<double>{0.0}, p, 0.0) ==
        doctest::Approx(0.3132616875182228).epsilon(1e-15));
  CHECK(bpr_loss(big, std::vector<double>{0.0}, p, 0.1) ==
        doctest::Approx(0.1 * p.squared_norm()).epsilon(1e-15));
  const std::vector<double> pos = {0.5, -1.0, 2.0}, neg = {0.0, 0.4, 2.5};
  CHECK(bpr_loss(pos, neg, p, 0.01) ==
        doctest::Approx(bpr_loss(pos, neg, p, 0.0) + 0.01 * p.squared_norm()).epsilon(1e-15));
  CHECK_THROWS(bpr_loss(pos, one, p, 0.0));
  CHECK_THROWS_AS(bpr_loss(std::vector<double>{NAN}, one, p, 0.0), NumericError);
}

TEST_CASE("training descends on the toy graph") {
  const auto g = testing::toy_graph();
  const HyperParams hp = toy_hp();
  const auto pg = PropagationGraph::build(g, hp.aggregation);
  ModelParams p = init_params(hp, 5, 4, 4, 1);
  OptimizerState opt = OptimizerState::for_params(p);
  const auto batch = testing::toy_triples();
  const double first = train_step(p, batch, pg, hp, 0.0, 0.01, opt);
  double last = first;
  for (int i = 1; i < 50; ++i) last = train_step(p, batch, pg, hp, 0.0, 0.01, opt);
  CHECK(last < first);
  CHECK(p.version == 50);
}

TEST_CASE("strong regularization shrinks parameters on zero-margin data") {
  const auto g = testing::toy_graph();
  const HyperParams hp = toy_hp();
  const auto pg = PropagationGraph::build(g, hp.aggregation);
  ModelParams p = init_params(hp, 5, 4, 4, 1);
  OptimizerState opt = OptimizerState::for_params(p);
  const std::vector<BprTriple> batch = {{0, 1, 1}, {2, 3, 3}};
  double prev = p.squared_norm();
  for (int i = 0; i < 30; ++i) {
    train_step(p, batch, pg, hp, 10.0, 0.001, opt);
    const double now = p.squared_norm();
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("identical seeds give identical trajectories") {
  const auto g = testing::toy_graph();
  const HyperParams hp = toy_hp();
  const auto pg = PropagationGraph::build(g, hp.aggregation);
  auto run = [&] {
    ModelParams p = init_params(hp, 5, 4, 4, 11);
    OptimizerState opt = OptimizerState::for_params(p);
    Rng rng(12);
    std::vector<double> losses;
    for (int i = 0; i < 20; ++i) {
      losses.push_back(train_step(p, sample_triples(g, 4, rng), pg, hp, 1e-4, 0.01, opt));
    }
    return losses;
  };
  CHECK(run() == run());
}

TEST_CASE("single triple margin is non-decreasing") {
  const auto g = testing::toy_graph();
  const HyperParams hp = toy_hp();
  const auto pg = PropagationGraph::build(g, hp.aggregation);
  ModelParams p = init_params(hp, 5, 4, 4, 6);
  OptimizerState opt = OptimizerState::for_params(p);
  const std::vector<BprTriple> batch = {{0, 1, 3}};
  double prev = margin(p, pg, hp, batch[0]);
  for (int i = 0; i < 40; ++i) {
    train_step(p, batch, pg, hp, 0.0, 1e-4, opt);
    const double now = margin(p, pg, hp, batch[0]);
    CHECK(now >= prev);
    prev = now;
  }
}

TEST_CASE("early stopping patience") {
  EarlyStopping es(1);
  CHECK(es.update(0.5));
  CHECK(!es.should_stop());
  CHECK(!es.update(0.4));
  CHECK(es.should_stop());
  CHECK(es.evaluations() == 2);
  CHECK(es.best() == 0.5);

  EarlyStopping three(3);
  three.update(0.1);
  three.update(0.05);
  three.update(0.2);
  three.update(0.2);
  three.update(0.1);
  CHECK(!three.should_stop());
  three.update(0.0);
  CHECK(three.should_stop());
}

DatasetSplit small_split(uint64_t seed) {
  Rng rng(seed);
  const auto g = testing::random_graph(40, 20, 15, 0.15, rng);
  return split_per_user(g, 0.7, 0.3, seed);
}

TEST_CASE("fit logs every epoch and returns the best checkpoint") {
  const DatasetSplit split = small_split(8);
  REQUIRE(!split.validation_ug.empty());
  HyperParams hp;
  hp.dim = 8;
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 32;
  cfg.lr = 0.01;
  cfg.patience = 100;
  const FitResult r = fit(split, hp, cfg);
  REQUIRE(r.log.size() == 12);
  double best = -1.0;
  int best_epoch = 0;
  for (size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].epoch == static_cast<int>(i) + 1);
    CHECK(std::isfinite(r.log[i].loss));
    REQUIRE(r.log[i].val_ndcg10.has_value());
    if (*r.log[i].val_ndcg10 > best) {
      best = *r.log[i].val_ndcg10;
      best_epoch = r.log[i].epoch;
    }
  }
  CHECK(r.best_epoch == best_epoch);
  REQUIRE(r.best_val_ndcg10.has_value());
  CHECK(*r.best_val_ndcg10 == best);
  const int cut[] = {10};
  const EvalReport again = evaluate(r.params, split, hp, EvalTarget::kValidation, cut);
  CHECK(again.ndcg_at(10) == best);
}

TEST_CASE("fit evaluation cadence and determinism") {
  const DatasetSplit split = small_split(9);
  HyperParams hp;
  hp.dim = 8;
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.eval_every = 3;
  cfg.batch_size = 50;
  const FitResult a = fit(split, hp, cfg);
  const FitResult b = fit(split, hp, cfg);
  for (const auto& row : a.log) CHECK(row.val_ndcg10.has_value() == (row.epoch % 3 == 0));
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  CHECK(a.params.embeddings == b.params.embeddings);
}

TEST_CASE("fit without validation runs all epochs") {
  Rng rng(10);
  const auto g = testing::random_graph(30, 15, 10, 0.2, rng);
  const DatasetSplit split = split_per_user(g, 0.7, 0.0, 1);
  HyperParams hp;
  hp.dim = 8;
  hp.pa_mode = PaMode::kNoPa;
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.patience = 1;
  const FitResult r = fit(split, hp, cfg);
  CHECK(r.log.size() == 4);
  CHECK(!r.early_stopped);
  CHECK(r.best_epoch == 4);
  CHECK(r.params.group_context.size() == 0);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.patience = 0;
  CHECK_THROWS(c.validate());
}

}  // namespace
}  // namespace cfag
