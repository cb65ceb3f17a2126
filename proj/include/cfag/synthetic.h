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

#ifndef CFAG_SYNTHETIC_H_
#define CFAG_SYNTHETIC_H_

#include <cstdint>

#include "cfag/graph.h"
#include "cfag/numeric.h"

namespace cfag {

// Community-planted tripartite graph generator. Every node belongs to one of
// `communities` latent communities; edges land inside the endpoint's
// community with probability `affinity` and uniformly otherwise. Node
// activity and popularity are log-normal, so degrees are skewed.
struct SyntheticSpec {
  size_t n_users = 0;
  size_t n_groups = 0;
  size_t n_items = 0;
  size_t user_group_edges = 0;
  size_t user_item_edges = 0;
  size_t group_item_edges = 0;
  size_t communities = 40;
  double affinity = 0.85;
  double activity_sigma = 0.8;
  uint64_t seed = 1;
};

// Node and edge counts of the Mafengwo dataset: 1,269 users, 972 groups,
// 999 items, 5,574 user-group, 8,676 user-item and 2,540 group-item edges.
SyntheticSpec mafengwo_scale_spec(uint64_t seed);

// Exactly the requested edge counts; every user joins at least one group.
// Throws std::invalid_argument when a count exceeds the possible pairs.
TripartiteGraph generate_planted_graph(const SyntheticSpec& spec);

// Groups evenly spaced on a circle with contextual embeddings
// scale * (cos theta, sin theta, 0, ...); each user covers an arc of
// half-width `arc` around a uniform random angle and joins every group in it,
// so member overlap decreases with angular distance while contextual
// similarity decreases with it too. Each user also gets one random item.
struct PlantedContext {
  TripartiteGraph graph;
  DenseMatrix group_context;
};
PlantedContext make_planted_context(size_t n_groups, size_t n_users, int dim,
                                    double scale, double arc, uint64_t seed);

}  // namespace cfag

#endif  // CFAG_SYNTHETIC_H_
