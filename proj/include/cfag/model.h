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

#ifndef CFAG_MODEL_H_
#define CFAG_MODEL_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "cfag/checkpoint.h"
#include "cfag/graph.h"
#include "cfag/numeric.h"

namespace cfag {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class PartitionVariant { kSplit, kLinear };
enum class MergeVariant { kConcat, kFcBefore, kFcAfter };
enum class AggregationVariant { kMean, kSum, kSymNorm };
enum class PaMode { kFull, kNoPa, kNoItem, kNoGroup };
// kColumn: R(m, g) = exp(c_m . c_g) / sum_k exp(c_k . c_g), so every column
// of R sums to one. kRow normalizes rows instead.
enum class RelatednessOrientation { kColumn, kRow };

std::string_view to_string(PartitionVariant v);
std::string_view to_string(MergeVariant v);
std::string_view to_string(AggregationVariant v);
std::string_view to_string(PaMode v);
std::string_view to_string(RelatednessOrientation v);
// Parsers accept the to_string spellings; they throw std::invalid_argument.
PartitionVariant parse_partition_variant(std::string_view s);
MergeVariant parse_merge_variant(std::string_view s);
AggregationVariant parse_aggregation_variant(std::string_view s);
PaMode parse_pa_mode(std::string_view s);
RelatednessOrientation parse_relatedness_orientation(std::string_view s);

struct HyperParams {
  int dim = 64;
  int layers = 1;
  // Propagation augmentation intensity, in [0, 1].
  double pa_beta = 0.5;
  double leaky_slope = 0.2;
  double init_std = 0.1;
  PartitionVariant partition = PartitionVariant::kSplit;
  MergeVariant merge = MergeVariant::kConcat;
  AggregationVariant aggregation = AggregationVariant::kMean;
  PaMode pa_mode = PaMode::kFull;
  RelatednessOrientation orientation = RelatednessOrientation::kColumn;

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  bool group_pa() const {
    return pa_mode == PaMode::kFull || pa_mode == PaMode::kNoItem;
  }
  bool item_pa() const {
    return pa_mode == PaMode::kFull || pa_mode == PaMode::kNoGroup;
  }
  int half_dim() const { return dim / 2; }
};

// Branch slot of a type-`t` node's partition that feeds neighbors of type
// `s`. Users partition into (group, item), groups into (user, item) and
// items into (user, group).
constexpr int branch_slot(NodeType t, NodeType s) {
  return static_cast<int>(s) < static_cast<int>(t) ? static_cast<int>(s)
                                                   : static_cast<int>(s) - 1;
}
constexpr NodeType slot_type(NodeType t, int slot) {
  const int s = slot < static_cast<int>(t) ? slot : slot + 1;
  return static_cast<NodeType>(s);
}

template <typename T>
using PerType = std::array<T, 3>;
template <typename T>
using PerBranch = std::array<std::array<T, 2>, 3>;

// Trainable transforms of one convolution layer. Only the matrices of the
// selected partition/merge variants are allocated.
struct LayerWeights {
  // LINEAR partition: (d/2) x d per [type][slot].
  PerBranch<DenseMatrix> partition;
  // FC_BEFORE merge: d x d per type, applied to the concatenated messages.
  PerType<DenseMatrix> merge;
  // FC_AFTER merge: (d/2) x (d/2) per [type][slot], applied per branch.
  PerBranch<DenseMatrix> merge_branch;
};

struct ModelParams {
  size_t n_users = 0;
  size_t n_groups = 0;
  size_t n_items = 0;
  // Personalized embeddings, one column per node: users, then groups, then
  // items.
  DenseMatrix embeddings;
  // Contextual embeddings; 0 x 0 when not allocated.
  DenseMatrix group_context;
  DenseMatrix item_context;
  std::vector<LayerWeights> layers;
  // Bumped by every in-place update so stale traces can be detected.
  uint64_t version = 0;

  int dim() const { return static_cast<int>(embeddings.rows()); }
  size_t count(NodeType t) const;
  size_t offset(NodeType t) const;
  auto block(NodeType t) {
    return embeddings.middleCols(static_cast<Eigen::Index>(offset(t)),
                                 static_cast<Eigen::Index>(count(t)));
  }
  auto block(NodeType t) const {
    return embeddings.middleCols(static_cast<Eigen::Index>(offset(t)),
                                 static_cast<Eigen::Index>(count(t)));
  }

  // Every allocated (non-empty) trainable matrix with a stable name.
  std::vector<std::pair<std::string, DenseMatrix*>> tensors();
  std::vector<std::pair<std::string, const DenseMatrix*>> tensors() const;
  // Same shapes, all zeros.
  ModelParams zeros_like() const;
  double squared_norm() const;

  std::vector<NamedMatrix> to_named() const;
};

// Embeddings and contextual embeddings are i.i.d. normal(0, init_std), drawn
// in that order; transform weights are normal(0, 1/sqrt(fan_in)). Contextual
// embeddings are skipped when `allocate_context` is false.
ModelParams init_params(const HyperParams& hp, size_t n_users, size_t n_groups,
                        size_t n_items, uint64_t seed,
                        bool allocate_context = true);

// Rebuilds parameters from checkpoint matrices. Throws DataError when a
// matrix expected by `hp` is missing or has the wrong shape.
ModelParams params_from_named(std::span<const NamedMatrix> matrices,
                              const HyperParams& hp, size_t n_users,
                              size_t n_groups, size_t n_items);

// Normalized propagation operators derived from the graph. prop[s][t] is
// n_s x n_t and maps type-s branches to messages received by type-t nodes.
struct PropagationGraph {
  size_t n_users = 0, n_groups = 0, n_items = 0;
  std::array<std::array<SparseMatrix, 3>, 3> prop;
  // Unnormalized memberships used by the attention: user x group, user x item.
  SparseMatrix user_group;
  SparseMatrix user_item;

  static PropagationGraph build(const TripartiteGraph& graph,
                                AggregationVariant aggregation);
  size_t count(NodeType t) const;
};

// ---- Single-op building blocks ---------------------------------------------

struct Branches {
  DenseMatrix first;
  DenseMatrix second;
};

// Splits each column of `z` (d x n) into the two branches of type `t`. SPLIT
// takes the first and last d/2 rows; LINEAR applies the layer's projections.
Branches partition(const DenseMatrix& z, NodeType t, const HyperParams& hp,
                   const LayerWeights* weights);

// Weighted neighbor aggregation for one center node. neighbor_degrees is only
// read by SYM_NORM. An empty neighborhood yields the zero vector of size
// `half_dim`.
DenseVector aggregate(std::span<const DenseVector> neighbor_branches,
                      AggregationVariant variant, size_t half_dim,
                      size_t center_degree = 0,
                      std::span<const size_t> neighbor_degrees = {});

// Combines two message matrices (d/2 x n each) into d x n embeddings.
DenseMatrix merge(const DenseMatrix& first, const DenseMatrix& second,
                  NodeType t, const HyperParams& hp,
                  const LayerWeights* weights);

// Softmax-normalized Gram matrix of the contextual embeddings (d x n).
DenseMatrix relatedness_matrix(const DenseMatrix& context,
                               RelatednessOrientation orientation);

struct Attention {
  // membership * R (users x targets), before the nonlinearity.
  DenseMatrix pre_activation;
  // Row-softmax of LeakyReLU(pre_activation); each row sums to one.
  DenseMatrix weights;
};

// Matrix form of the factorized attention: row u is the softmax over all
// targets of LeakyReLU(sum over u's neighbors m of R(m, .)).
Attention attention_weights(const SparseMatrix& membership,
                            const DenseMatrix& relatedness, double leaky_slope);

// Adds beta * (target branches) * A^T to the user branch, column by column:
// the user's augmented branch is e_u + beta * sum_t alpha(u, t) e_t.
DenseMatrix propagation_augmentation(const DenseMatrix& user_branch,
                                     const DenseMatrix& target_branch,
                                     const DenseMatrix& attention, double beta);

double score(const DenseVector& user, const DenseVector& group);

// ---- Full forward / backward -----------------------------------------------

struct AttentionTrace {
  bool active = false;
  DenseMatrix relatedness;
  Attention attention;
};

struct LayerTrace {
  PerType<DenseMatrix> input;
  // Branches as fed to aggregation (user branches include augmentation on the
  // first layer).
  PerBranch<DenseMatrix> branch;
  // Aggregated messages indexed [center type][slot].
  PerBranch<DenseMatrix> message;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  AttentionTrace group_attention;
  AttentionTrace item_attention;
  PerType<DenseMatrix> output;
  uint64_t params_version = 0;
};

// One convolution layer over every node. `pa` is non-null only for the first
// layer, where it supplies the attention used to augment user branches.
struct PaInputs {
  const AttentionTrace* group = nullptr;
  const AttentionTrace* item = nullptr;
  double beta = 0.0;
};
LayerTrace conv_layer(const PerType<DenseMatrix>& input,
                      const PropagationGraph& graph, const HyperParams& hp,
                      const LayerWeights* weights, const PaInputs* pa);

// Attention stage followed by hp.layers convolution layers. Only the final
// layer's embeddings are returned (trace.output).
ForwardTrace forward(const ModelParams& params, const PropagationGraph& graph,
                     const HyperParams& hp);

// Gradients of a scalar loss with respect to every trainable matrix, given
// its gradient with respect to trace.output. Throws std::logic_error when
// the trace was produced from a different parameter version.
ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     const PropagationGraph& graph, const HyperParams& hp,
                     const PerType<DenseMatrix>& output_grad);

}  // namespace cfag

#endif  // CFAG_MODEL_H_
