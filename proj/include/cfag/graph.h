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

#ifndef CFAG_GRAPH_H_
#define CFAG_GRAPH_H_

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cfag {

enum class NodeType : int { kUser = 0, kGroup = 1, kItem = 2 };
inline constexpr std::array<NodeType, 3> kNodeTypes = {
    NodeType::kUser, NodeType::kGroup, NodeType::kItem};

// The three bipartite relations of the social tripartite graph. The first
// endpoint of an edge is always the source type named first.
enum class Relation : int { kUserGroup = 0, kUserItem = 1, kGroupItem = 2 };

const char* to_string(NodeType t);
const char* to_string(Relation r);

struct Edge {
  uint32_t src = 0;
  uint32_t dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// A deduplicated, sorted edge set together with the id space sizes.
struct EdgeList {
  std::vector<Edge> edges;
  size_t n_src = 0;
  size_t n_dst = 0;
};

// Reads "<src>\t<dst>" lines. Blank lines and lines starting with '#' are
// skipped, except that a comment of the form "# shape <n_src> <n_dst>" fixes
// the id spaces instead of inferring them as max id + 1. Throws DataError
// with the offending line number on malformed input, ids outside uint32 or
// the declared shape, and on files with no edges.
EdgeList load_edge_list(const std::filesystem::path& path, Relation relation);

// Writes the format read by load_edge_list, including the shape header.
void write_edge_list(const std::filesystem::path& path,
                     std::span<const Edge> edges, size_t n_src, size_t n_dst);

// Immutable social tripartite graph with CSR neighbor indexes in every
// direction. Neighbor lists are sorted ascending.
class TripartiteGraph {
 public:
  TripartiteGraph() = default;
  // Validates ranges and deduplicates. Throws DataError on out-of-range ids.
  TripartiteGraph(size_t n_users, size_t n_groups, size_t n_items,
                  std::vector<Edge> user_group, std::vector<Edge> user_item,
                  std::vector<Edge> group_item);

  size_t num_nodes(NodeType t) const {
    return counts_[static_cast<int>(t)];
  }
  size_t num_users() const { return num_nodes(NodeType::kUser); }
  size_t num_groups() const { return num_nodes(NodeType::kGroup); }
  size_t num_items() const { return num_nodes(NodeType::kItem); }

  const std::vector<Edge>& edges(Relation r) const {
    return edges_[static_cast<int>(r)];
  }

  // Neighbors of `node` (of type `center`) among nodes of type `other`.
  std::span<const uint32_t> neighbors(NodeType center, NodeType other,
                                      uint32_t node) const;
  size_t degree(NodeType center, NodeType other, uint32_t node) const {
    return neighbors(center, other, node).size();
  }
  bool has_edge(NodeType a, uint32_t a_id, NodeType b, uint32_t b_id) const;

  std::span<const uint32_t> user_groups(uint32_t user) const {
    return neighbors(NodeType::kUser, NodeType::kGroup, user);
  }
  std::span<const uint32_t> group_users(uint32_t group) const {
    return neighbors(NodeType::kGroup, NodeType::kUser, group);
  }

 private:
  struct Csr {
    std::vector<size_t> offsets;
    std::vector<uint32_t> targets;
  };
  static Csr build_csr(size_t n_rows, std::span<const Edge> edges,
                       bool reversed);
  const Csr& csr(NodeType center, NodeType other) const;

  std::array<size_t, 3> counts_{};
  std::array<std::vector<Edge>, 3> edges_;
  // Indexed [center][other]; the diagonal is unused.
  std::array<std::array<Csr, 3>, 3> adjacency_;
};

// Relation joining two distinct node types, and whether (a, b) is stored as
// (dst, src) in it.
Relation relation_between(NodeType a, NodeType b, bool* reversed = nullptr);

TripartiteGraph load_tripartite_graph(const std::filesystem::path& user_group,
                                      const std::filesystem::path& user_item,
                                      const std::filesystem::path& group_item);

struct DatasetSplit {
  TripartiteGraph train;
  std::vector<Edge> validation_ug;
  std::vector<Edge> test_ug;
};

// Per-user random split of user-group edges. Each user's groups are shuffled;
// the first ceil(deg * train_ratio) form the training block, of which the last
// floor(block * valid_ratio) become validation (at least one edge always stays
// in train); the rest is test. User-item and group-item edges are kept whole.
// Throws std::invalid_argument for train_ratio outside (0, 1] or valid_ratio
// outside [0, 1), and DataError when the graph has no user-group edges.
DatasetSplit split_per_user(const TripartiteGraph& graph, double train_ratio,
                            double valid_ratio, uint64_t seed);

// Keeps a uniform random subset of k training groups for every user with more
// than k; validation and test edges are untouched. Throws
// std::invalid_argument when k < 1.
DatasetSplit cap_user_groups(const DatasetSplit& split, size_t k,
                             uint64_t seed);

struct SplitMetadata {
  double train_ratio = 0.0;
  double valid_ratio = 0.0;
  uint64_t seed = 0;
  // 0 when uncapped.
  size_t cap_k = 0;
};

// Writes train_ug.txt, validation_ug.txt, test_ug.txt and split.json.
void write_split_manifest(const DatasetSplit& split,
                          const SplitMetadata& metadata,
                          const std::filesystem::path& dir);

}  // namespace cfag

#endif  // CFAG_GRAPH_H_
