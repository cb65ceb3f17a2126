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

#include <string>
#include <vector>

#include <doctest.h>

#include "cfag/model.h"
#include "cfag/training.h"
#include "test_util.h"

namespace cfag {
namespace {

constexpr double kTolerance = 1e-4;

std::vector<HyperParams> all_variants() {
  std::vector<HyperParams> out;
  for (auto p : {PartitionVariant::kSplit, PartitionVariant::kLinear}) {
    for (auto m : {MergeVariant::kConcat, MergeVariant::kFcBefore, MergeVariant::kFcAfter}) {
      for (auto a : {AggregationVariant::kMean, AggregationVariant::kSum,
                     AggregationVariant::kSymNorm}) {
        for (auto pa : {PaMode::kFull, PaMode::kNoPa, PaMode::kNoItem, PaMode::kNoGroup}) {
          for (int layers : {1, 2}) {
            HyperParams hp;
            hp.dim = 4;
            hp.layers = layers;
            hp.init_std = 0.5;
            hp.partition = p;
            hp.merge = m;
            hp.aggregation = a;
            hp.pa_mode = pa;
            out.push_back(hp);
          }
        }
      }
    }
  }
  return out;
}

std::string label(const HyperParams& hp) {
  return std::string(to_string(hp.partition)) + "/" + std::string(to_string(hp.merge)) +
         "/" + std::string(to_string(hp.aggregation)) + "/" +
         std::string(to_string(hp.pa_mode)) + "/L" + std::to_string(hp.layers) + "/" +
         std::string(to_string(hp.orientation));
}

void check_all(const HyperParams& hp, double l2, uint64_t seed) {
  const auto g = testing::toy_graph();
  const auto pg = PropagationGraph::build(g, hp.aggregation);
  const ModelParams p = init_params(hp, 5, 4, 4, seed);
  for (const auto& c : testing::gradient_check(p, pg, hp, testing::toy_triples(), l2)) {
    INFO(label(hp), " tensor ", c.name, " analytic ", c.analytic_norm, " numeric ",
         c.numeric_norm);
    CHECK(c.relative_error < kTolerance);
  }
}

TEST_CASE("gradients match finite differences for every variant") {
  const auto variants = all_variants();
  CHECK(variants.size() == 144);
  uint64_t seed = 1;
  for (const HyperParams& hp : variants) check_all(hp, 1e-3, seed++);
}

TEST_CASE("gradients match with row-oriented relatedness") {
  for (HyperParams hp : all_variants()) {
    if (hp.pa_mode != PaMode::kFull || hp.aggregation != AggregationVariant::kMean) continue;
    hp.orientation = RelatednessOrientation::kRow;
    check_all(hp, 0.0, 77);
  }
}

TEST_CASE("unused item context has exactly zero gradient") {
  HyperParams hp;
  hp.dim = 4;
  hp.pa_mode = PaMode::kNoItem;
  const auto g = testing::toy_graph();
  const auto pg = PropagationGraph::build(g, hp.aggregation);
  const ModelParams p = init_params(hp, 5, 4, 4, 3);
  const auto lg = bpr_loss_and_gradient(p, pg, hp, testing::toy_triples(), 0.0);
  CHECK(lg.gradient.item_context.isZero(0.0));
  CHECK(!lg.gradient.group_context.isZero(0.0));
}

TEST_CASE("regularization gradient is exact") {
  HyperParams hp;
  hp.dim = 4;
  const auto g = testing::toy_graph();
  const auto pg = PropagationGraph::build(g, hp.aggregation);
  const ModelParams p = init_params(hp, 5, 4, 4, 3);
  const auto a = bpr_loss_and_gradient(p, pg, hp, testing::toy_triples(), 0.0);
  const auto b = bpr_loss_and_gradient(p, pg, hp, testing::toy_triples(), 0.25);
  CHECK(b.loss == doctest::Approx(a.loss + 0.25 * p.squared_norm()).epsilon(1e-14));
  const auto ta = a.gradient.tensors();
  const auto tb = b.gradient.tensors();
  const auto tp = p.tensors();
  for (size_t i = 0; i < ta.size(); ++i) {
    CHECK((*tb[i].second - *ta[i].second - 0.5 * *tp[i].second).cwiseAbs().maxCoeff() <
          1e-14);
  }
}

}  // namespace
}  // namespace cfag
