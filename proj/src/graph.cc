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

#include "cfag/graph.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cfag/errors.h"
#include "cfag/numeric.h"

namespace cfag {
namespace {

bool parse_id(std::string_view token, uint64_t* out) {
  if (token.empty()) return false;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last;
}

std::string where(const std::filesystem::path& path, size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

void sort_unique(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

const char* to_string(NodeType t) {
  switch (t) {
    case NodeType::kUser:
      return "user";
    case NodeType::kGroup:
      return "group";
    case NodeType::kItem:
      return "item";
  }
  return "?";
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::kUserGroup:
      return "user-group";
    case Relation::kUserItem:
      return "user-item";
    case Relation::kGroupItem:
      return "group-item";
  }
  return "?";
}

EdgeList load_edge_list(const std::filesystem::path& path, Relation relation) {
  std::ifstream in(path);
  if (!in) {
    throw DataError(std::string("cannot open ") + to_string(relation) +
                    " edge list: " + path.string());
  }
  EdgeList list;
  bool has_shape = false;
  uint64_t max_src = 0, max_dst = 0;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream header(line.substr(1));
      std::string keyword;
      header >> keyword;
      if (keyword == "shape") {
        uint64_t n_src = 0, n_dst = 0;
        if (!(header >> n_src >> n_dst)) {
          throw DataError("malformed shape header at " + where(path, line_no));
        }
        list.n_src = n_src;
        list.n_dst = n_dst;
        has_shape = true;
      }
      continue;
    }
    const size_t tab = line.find('\t');
    uint64_t src = 0, dst = 0;
    if (tab == std::string::npos ||
        !parse_id(std::string_view(line).substr(0, tab), &src) ||
        !parse_id(std::string_view(line).substr(tab + 1), &dst)) {
      throw DataError("malformed edge line at " + where(path, line_no) +
                      ": expected <src>\\t<dst>");
    }
    constexpr uint64_t kMaxId = std::numeric_limits<uint32_t>::max() - 1;
    if (src > kMaxId || dst > kMaxId) {
      throw DataError("id overflow at " + where(path, line_no));
    }
    if (has_shape && (src >= list.n_src || dst >= list.n_dst)) {
      throw DataError("id outside declared shape at " + where(path, line_no));
    }
    max_src = std::max(max_src, src);
    max_dst = std::max(max_dst, dst);
    list.edges.push_back(
        {static_cast<uint32_t>(src), static_cast<uint32_t>(dst)});
  }
  if (list.edges.empty()) {
    throw DataError(std::string("empty ") + to_string(relation) +
                    " edge list: " + path.string());
  }
  if (!has_shape) {
    list.n_src = max_src + 1;
    list.n_dst = max_dst + 1;
  }
  sort_unique(list.edges);
  return list;
}

void write_edge_list(const std::filesystem::path& path,
                     std::span<const Edge> edges, size_t n_src, size_t n_dst) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# shape " << n_src << ' ' << n_dst << '\n';
  for (const Edge& e : edges) out << e.src << '\t' << e.dst << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

Relation relation_between(NodeType a, NodeType b, bool* reversed) {
  auto ia = static_cast<int>(a);
  auto ib = static_cast<int>(b);
  if (ia == ib) throw std::invalid_argument("relation_between: same type");
  if (reversed != nullptr) *reversed = ia > ib;
  const int lo = std::min(ia, ib), hi = std::max(ia, ib);
  if (lo == 0 && hi == 1) return Relation::kUserGroup;
  if (lo == 0 && hi == 2) return Relation::kUserItem;
  return Relation::kGroupItem;
}

TripartiteGraph::TripartiteGraph(size_t n_users, size_t n_groups,
                                 size_t n_items, std::vector<Edge> user_group,
                                 std::vector<Edge> user_item,
                                 std::vector<Edge> group_item)
    : counts_{n_users, n_groups, n_items},
      edges_{std::move(user_group), std::move(user_item),
             std::move(group_item)} {
  for (int r = 0; r < 3; ++r) {
    const auto rel = static_cast<Relation>(r);
    NodeType src_type = r == 2 ? NodeType::kGroup : NodeType::kUser;
    NodeType dst_type = r == 0 ? NodeType::kGroup : NodeType::kItem;
    const size_t n_src = num_nodes(src_type), n_dst = num_nodes(dst_type);
    for (const Edge& e : edges_[r]) {
      if (e.src >= n_src || e.dst >= n_dst) {
        throw DataError(std::string(to_string(rel)) + " edge (" +
                        std::to_string(e.src) + ", " + std::to_string(e.dst) +
                        ") out of range");
      }
    }
    sort_unique(edges_[r]);
    const int s = static_cast<int>(src_type), d = static_cast<int>(dst_type);
    adjacency_[s][d] = build_csr(n_src, edges_[r], /*reversed=*/false);
    adjacency_[d][s] = build_csr(n_dst, edges_[r], /*reversed=*/true);
  }
}

TripartiteGraph::Csr TripartiteGraph::build_csr(size_t n_rows,
                                                std::span<const Edge> edges,
                                                bool reversed) {
  Csr csr;
  csr.offsets.assign(n_rows + 1, 0);
  for (const Edge& e : edges) ++csr.offsets[(reversed ? e.dst : e.src) + 1];
  for (size_t i = 0; i < n_rows; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.targets.resize(edges.size());
  std::vector<size_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  // Edges are sorted by (src, dst), so both directions come out sorted.
  for (const Edge& e : edges) {
    const uint32_t row = reversed ? e.dst : e.src;
    csr.targets[cursor[row]++] = reversed ? e.src : e.dst;
  }
  return csr;
}

const TripartiteGraph::Csr& TripartiteGraph::csr(NodeType center,
                                                 NodeType other) const {
  if (center == other) {
    throw std::invalid_argument("TripartiteGraph: no same-type adjacency");
  }
  return adjacency_[static_cast<int>(center)][static_cast<int>(other)];
}

std::span<const uint32_t> TripartiteGraph::neighbors(NodeType center,
                                                     NodeType other,
                                                     uint32_t node) const {
  const Csr& c = csr(center, other);
  if (node >= num_nodes(center)) {
    throw std::out_of_range("TripartiteGraph::neighbors: node id");
  }
  return std::span<const uint32_t>(c.targets.data() + c.offsets[node],
                                   c.offsets[node + 1] - c.offsets[node]);
}

bool TripartiteGraph::has_edge(NodeType a, uint32_t a_id, NodeType b,
                               uint32_t b_id) const {
  auto nbrs = neighbors(a, b, a_id);
  return std::binary_search(nbrs.begin(), nbrs.end(), b_id);
}

TripartiteGraph load_tripartite_graph(const std::filesystem::path& user_group,
                                      const std::filesystem::path& user_item,
                                      const std::filesystem::path& group_item) {
  EdgeList ug = load_edge_list(user_group, Relation::kUserGroup);
  EdgeList ui = load_edge_list(user_item, Relation::kUserItem);
  EdgeList gi = load_edge_list(group_item, Relation::kGroupItem);
  const size_t n_users = std::max(ug.n_src, ui.n_src);
  const size_t n_groups = std::max(ug.n_dst, gi.n_src);
  const size_t n_items = std::max(ui.n_dst, gi.n_dst);
  return TripartiteGraph(n_users, n_groups, n_items, std::move(ug.edges),
                         std::move(ui.edges), std::move(gi.edges));
}

DatasetSplit split_per_user(const TripartiteGraph& graph, double train_ratio,
                            double valid_ratio, uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio <= 1.0)) {
    throw std::invalid_argument("split_per_user: train_ratio must be in (0, 1]");
  }
  if (!(valid_ratio >= 0.0 && valid_ratio < 1.0)) {
    throw std::invalid_argument("split_per_user: valid_ratio must be in [0, 1)");
  }
  if (graph.edges(Relation::kUserGroup).empty()) {
    throw DataError("split_per_user: graph has no user-group edges");
  }
  Rng rng(seed);
  std::vector<Edge> train, validation, test;
  std::vector<uint32_t> groups;
  for (uint32_t u = 0; u < graph.num_users(); ++u) {
    auto nbrs = graph.user_groups(u);
    if (nbrs.empty()) continue;
    groups.assign(nbrs.begin(), nbrs.end());
    rng.shuffle(groups);
    const size_t deg = groups.size();
    // Guard against 0.7 * 10 evaluating to 7.000000000000001.
    const double raw_block = static_cast<double>(deg) * train_ratio;
    size_t block = static_cast<size_t>(std::ceil(raw_block - 1e-9));
    block = std::clamp<size_t>(block, 1, deg);
    size_t n_valid = static_cast<size_t>(
        std::floor(static_cast<double>(block) * valid_ratio + 1e-9));
    n_valid = std::min(n_valid, block - 1);
    const size_t n_train = block - n_valid;
    for (size_t k = 0; k < deg; ++k) {
      const Edge e{u, groups[k]};
      if (k < n_train) {
        train.push_back(e);
      } else if (k < block) {
        validation.push_back(e);
      } else {
        test.push_back(e);
      }
    }
  }
  std::sort(validation.begin(), validation.end());
  std::sort(test.begin(), test.end());
  DatasetSplit split{
      TripartiteGraph(graph.num_users(), graph.num_groups(), graph.num_items(),
                      std::move(train), graph.edges(Relation::kUserItem),
                      graph.edges(Relation::kGroupItem)),
      std::move(validation), std::move(test)};
  return split;
}

DatasetSplit cap_user_groups(const DatasetSplit& split, size_t k,
                             uint64_t seed) {
  if (k < 1) throw std::invalid_argument("cap_user_groups: k must be >= 1");
  const TripartiteGraph& g = split.train;
  Rng rng(seed);
  std::vector<Edge> kept;
  std::vector<uint32_t> groups;
  for (uint32_t u = 0; u < g.num_users(); ++u) {
    auto nbrs = g.user_groups(u);
    groups.assign(nbrs.begin(), nbrs.end());
    if (groups.size() > k) {
      rng.shuffle(groups);
      groups.resize(k);
    }
    for (uint32_t grp : groups) kept.push_back({u, grp});
  }
  return DatasetSplit{
      TripartiteGraph(g.num_users(), g.num_groups(), g.num_items(),
                      std::move(kept), g.edges(Relation::kUserItem),
                      g.edges(Relation::kGroupItem)),
      split.validation_ug, split.test_ug};
}

void write_split_manifest(const DatasetSplit& split,
                          const SplitMetadata& metadata,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const size_t nu = split.train.num_users(), ng = split.train.num_groups();
  write_edge_list(dir / "train_ug.txt",
                  split.train.edges(Relation::kUserGroup), nu, ng);
  write_edge_list(dir / "validation_ug.txt", split.validation_ug, nu, ng);
  write_edge_list(dir / "test_ug.txt", split.test_ug, nu, ng);
  nlohmann::ordered_json meta;
  meta["n_users"] = nu;
  meta["n_groups"] = ng;
  meta["n_items"] = split.train.num_items();
  meta["train_ug_edges"] = split.train.edges(Relation::kUserGroup).size();
  meta["validation_ug_edges"] = split.validation_ug.size();
  meta["test_ug_edges"] = split.test_ug.size();
  meta["ui_edges"] = split.train.edges(Relation::kUserItem).size();
  meta["gi_edges"] = split.train.edges(Relation::kGroupItem).size();
  meta["train_ratio"] = metadata.train_ratio;
  meta["valid_ratio"] = metadata.valid_ratio;
  meta["seed"] = metadata.seed;
  meta["cap_k"] = metadata.cap_k;
  std::ofstream out(dir / "split.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "split.json").string());
  out << meta.dump(2) << '\n';
}

}  // namespace cfag
