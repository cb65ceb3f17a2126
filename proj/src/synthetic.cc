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

#include "cfag/synthetic.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

namespace cfag {
namespace {

class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<double>& weights) {
    cumulative_.reserve(weights.size());
    double total = 0.0;
    for (double w : weights) {
      total += w;
      cumulative_.push_back(total);
    }
  }
  size_t draw(Rng& rng) const {
    const double x = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    return std::min(static_cast<size_t>(it - cumulative_.begin()),
                    cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

std::vector<double> lognormal_weights(size_t n, double sigma, Rng& rng) {
  std::vector<double> w(n);
  for (double& x : w) x = std::exp(rng.normal(0.0, sigma));
  return w;
}

std::vector<uint32_t> assign_communities(size_t n, size_t k, Rng& rng) {
  std::vector<uint32_t> c(n);
  for (size_t i = 0; i < n; ++i) c[i] = static_cast<uint32_t>(i % k);
  rng.shuffle(c);
  return c;
}

// Members of each community, with per-community popularity samplers.
struct CommunityIndex {
  std::vector<std::vector<uint32_t>> members;
  std::vector<WeightedSampler> samplers;
  WeightedSampler global;

  CommunityIndex(const std::vector<uint32_t>& community, size_t k,
                 const std::vector<double>& popularity)
      : global(popularity) {
    members.resize(k);
    for (uint32_t i = 0; i < community.size(); ++i) {
      members[community[i]].push_back(i);
    }
    for (const auto& m : members) {
      std::vector<double> w;
      for (uint32_t i : m) w.push_back(popularity[i]);
      if (w.empty()) w.push_back(1.0);
      samplers.emplace_back(w);
    }
  }

  uint32_t draw(uint32_t comm, double affinity, Rng& rng) const {
    if (!members[comm].empty() && rng.uniform() < affinity) {
      return members[comm][samplers[comm].draw(rng)];
    }
    return static_cast<uint32_t>(global.draw(rng));
  }
};

std::vector<Edge> generate_relation(size_t n_src, size_t n_dst, size_t target,
                                    const std::vector<uint32_t>& src_comm,
                                    const CommunityIndex& dst_index,
                                    const std::vector<double>& src_activity,
                                    double affinity, bool cover_sources,
                                    Rng& rng) {
  if (target > n_src * n_dst) {
    throw std::invalid_argument("generate_planted_graph: too many edges");
  }
  std::set<Edge> edges;
  if (cover_sources) {
    if (target < n_src) {
      throw std::invalid_argument("generate_planted_graph: too few edges");
    }
    for (uint32_t s = 0; s < n_src; ++s) {
      edges.insert({s, dst_index.draw(src_comm[s], affinity, rng)});
    }
  }
  const WeightedSampler pick_src(src_activity);
  while (edges.size() < target) {
    const auto s = static_cast<uint32_t>(pick_src.draw(rng));
    edges.insert({s, dst_index.draw(src_comm[s], affinity, rng)});
  }
  return {edges.begin(), edges.end()};
}

}  // namespace

SyntheticSpec mafengwo_scale_spec(uint64_t seed) {
  SyntheticSpec s;
  s.n_users = 1269;
  s.n_groups = 972;
  s.n_items = 999;
  s.user_group_edges = 5574;
  s.user_item_edges = 8676;
  s.group_item_edges = 2540;
  s.seed = seed;
  return s;
}

TripartiteGraph generate_planted_graph(const SyntheticSpec& spec) {
  if (spec.communities == 0) {
    throw std::invalid_argument("generate_planted_graph: communities must be > 0");
  }
  Rng rng(spec.seed);
  const size_t k = spec.communities;
  const auto user_comm = assign_communities(spec.n_users, k, rng);
  const auto group_comm = assign_communities(spec.n_groups, k, rng);
  const auto item_comm = assign_communities(spec.n_items, k, rng);
  const auto user_activity = lognormal_weights(spec.n_users, spec.activity_sigma, rng);
  const auto group_pop = lognormal_weights(spec.n_groups, spec.activity_sigma, rng);
  const auto item_pop = lognormal_weights(spec.n_items, spec.activity_sigma, rng);
  const CommunityIndex groups(group_comm, k, group_pop);
  const CommunityIndex items(item_comm, k, item_pop);

  auto ug = generate_relation(spec.n_users, spec.n_groups, spec.user_group_edges,
                              user_comm, groups, user_activity, spec.affinity,
                              /*cover_sources=*/true, rng);
  auto ui = generate_relation(spec.n_users, spec.n_items, spec.user_item_edges,
                              user_comm, items, user_activity, spec.affinity,
                              /*cover_sources=*/false, rng);
  auto gi = generate_relation(spec.n_groups, spec.n_items, spec.group_item_edges,
                              group_comm, items, group_pop, spec.affinity,
                              /*cover_sources=*/false, rng);
  return TripartiteGraph(spec.n_users, spec.n_groups, spec.n_items,
                         std::move(ug), std::move(ui), std::move(gi));
}

PlantedContext make_planted_context(size_t n_groups, size_t n_users, int dim,
                                    double scale, double arc, uint64_t seed) {
  if (n_groups < 2 || n_users < 1 || dim < 2) {
    throw std::invalid_argument("make_planted_context: sizes");
  }
  Rng rng(seed);
  DenseMatrix context = DenseMatrix::Zero(dim, static_cast<Eigen::Index>(n_groups));
  std::vector<double> angle(n_groups);
  for (size_t g = 0; g < n_groups; ++g) {
    angle[g] = 2.0 * M_PI * static_cast<double>(g) / static_cast<double>(n_groups);
    context(0, static_cast<Eigen::Index>(g)) = scale * std::cos(angle[g]);
    context(1, static_cast<Eigen::Index>(g)) = scale * std::sin(angle[g]);
  }
  std::vector<Edge> ug, ui;
  for (uint32_t u = 0; u < n_users; ++u) {
    const double center = rng.uniform(0.0, 2.0 * M_PI);
    for (uint32_t g = 0; g < n_groups; ++g) {
      double delta = std::fabs(angle[g] - center);
      delta = std::min(delta, 2.0 * M_PI - delta);
      if (delta <= arc) ug.push_back({u, g});
    }
    ui.push_back({u, static_cast<uint32_t>(rng.bounded(n_groups))});
  }
  std::vector<Edge> gi;
  for (uint32_t g = 0; g < n_groups; ++g) gi.push_back({g, g});
  return {TripartiteGraph(n_users, n_groups, n_groups, std::move(ug),
                          std::move(ui), std::move(gi)),
          std::move(context)};
}

}  // namespace cfag
