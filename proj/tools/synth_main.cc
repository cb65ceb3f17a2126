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

// Writes a community-planted synthetic dataset as three edge lists.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cfag/errors.h"
#include "cfag/synthetic.h"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic social tripartite graph"};
  std::string out_dir;
  uint64_t seed = 1;
  bool mafengwo_scale = false;
  cfag::SyntheticSpec spec;
  spec.n_users = 200;
  spec.n_groups = 150;
  spec.n_items = 150;
  spec.user_group_edges = 900;
  spec.user_item_edges = 1400;
  spec.group_item_edges = 400;
  spec.communities = 10;

  app.add_option("-o,--output-dir", out_dir, "Destination directory")->required();
  app.add_option("--seed", seed, "Generator seed");
  app.add_flag("--mafengwo-scale", mafengwo_scale,
               "Use the Mafengwo node and edge counts");
  app.add_option("--users", spec.n_users);
  app.add_option("--groups", spec.n_groups);
  app.add_option("--items", spec.n_items);
  app.add_option("--ug-edges", spec.user_group_edges);
  app.add_option("--ui-edges", spec.user_item_edges);
  app.add_option("--gi-edges", spec.group_item_edges);
  app.add_option("--communities", spec.communities);
  app.add_option("--affinity", spec.affinity, "In-community edge probability");
  CLI11_PARSE(app, argc, argv);

  if (mafengwo_scale) spec = cfag::mafengwo_scale_spec(seed);
  spec.seed = seed;
  try {
    const cfag::TripartiteGraph g = cfag::generate_planted_graph(spec);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    cfag::write_edge_list(dir / "user_group.txt",
                          g.edges(cfag::Relation::kUserGroup), g.num_users(),
                          g.num_groups());
    cfag::write_edge_list(dir / "user_item.txt",
                          g.edges(cfag::Relation::kUserItem), g.num_users(),
                          g.num_items());
    cfag::write_edge_list(dir / "group_item.txt",
                          g.edges(cfag::Relation::kGroupItem), g.num_groups(),
                          g.num_items());
    std::printf("users=%zu groups=%zu items=%zu ug=%zu ui=%zu gi=%zu\n",
                g.num_users(), g.num_groups(), g.num_items(),
                g.edges(cfag::Relation::kUserGroup).size(),
                g.edges(cfag::Relation::kUserItem).size(),
                g.edges(cfag::Relation::kGroupItem).size());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
