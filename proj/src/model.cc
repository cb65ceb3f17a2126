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

#include "cfag/model.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cfag/errors.h"

namespace cfag {
namespace {

constexpr NodeType kUser = NodeType::kUser;
constexpr NodeType kGroup = NodeType::kGroup;
constexpr NodeType kItem = NodeType::kItem;

int idx(NodeType t) { return static_cast<int>(t); }

// Sub-streams so that, for a fixed seed, embeddings do not depend on which
// optional matrices are allocated.
constexpr uint64_t kContextStream = 0x9e3779b97f4a7c15ull;
constexpr uint64_t kWeightStream = 0xbf58476d1ce4e5b9ull;

void softmax_columns_inplace(DenseMatrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    auto col = m.col(c);
    const double mx = col.maxCoeff();
    col = (col.array() - mx).exp().matrix();
    col /= col.sum();
  }
}

void softmax_rows_inplace(DenseMatrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
  }
}

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

std::string tensor_prefix(size_t layer) {
  return "layer" + std::to_string(layer) + ".";
}

// Gradient with respect to the contextual embeddings given dL/dA.
DenseMatrix attention_backward(const DenseMatrix& d_attention,
                               const AttentionTrace& trace,
                               const SparseMatrix& membership,
                               const DenseMatrix& context,
                               const HyperParams& hp) {
  const DenseMatrix& a = trace.attention.weights;
  const DenseMatrix& p = trace.attention.pre_activation;
  const DenseMatrix& r = trace.relatedness;

  // Row softmax backward, then the LeakyReLU mask.
  const Eigen::VectorXd inner = (d_attention.array() * a.array()).rowwise().sum();
  DenseMatrix d_pre =
      (a.array() * (d_attention.colwise() - inner).array()).matrix();
  for (Eigen::Index c = 0; c < d_pre.cols(); ++c) {
    for (Eigen::Index u = 0; u < d_pre.rows(); ++u) {
      if (!(p(u, c) > 0.0)) d_pre(u, c) *= hp.leaky_slope;
    }
  }
  const DenseMatrix d_rel = membership.transpose() * d_pre;

  DenseMatrix d_gram(r.rows(), r.cols());
  if (hp.orientation == RelatednessOrientation::kColumn) {
    for (Eigen::Index c = 0; c < r.cols(); ++c) {
      const double dot = d_rel.col(c).dot(r.col(c));
      d_gram.col(c) =
          (r.col(c).array() * (d_rel.col(c).array() - dot)).matrix();
    }
  } else {
    for (Eigen::Index row = 0; row < r.rows(); ++row) {
      const double dot = d_rel.row(row).dot(r.row(row));
      d_gram.row(row) =
          (r.row(row).array() * (d_rel.row(row).array() - dot)).matrix();
    }
  }
  return context * (d_gram + d_gram.transpose());
}

}  // namespace

// ---- enums -------------------------------------------------------------------

std::string_view to_string(PartitionVariant v) {
  return v == PartitionVariant::kSplit ? "split" : "linear";
}
std::string_view to_string(MergeVariant v) {
  switch (v) {
    case MergeVariant::kConcat:
      return "concat";
    case MergeVariant::kFcBefore:
      return "fc_before";
    case MergeVariant::kFcAfter:
      return "fc_after";
  }
  return "?";
}
std::string_view to_string(AggregationVariant v) {
  switch (v) {
    case AggregationVariant::kMean:
      return "mean";
    case AggregationVariant::kSum:
      return "sum";
    case AggregationVariant::kSymNorm:
      return "sym_norm";
  }
  return "?";
}
std::string_view to_string(PaMode v) {
  switch (v) {
    case PaMode::kFull:
      return "full";
    case PaMode::kNoPa:
      return "no_pa";
    case PaMode::kNoItem:
      return "no_item";
    case PaMode::kNoGroup:
      return "no_group";
  }
  return "?";
}
std::string_view to_string(RelatednessOrientation v) {
  return v == RelatednessOrientation::kColumn ? "column" : "row";
}

PartitionVariant parse_partition_variant(std::string_view s) {
  if (s == "split") return PartitionVariant::kSplit;
  if (s == "linear") return PartitionVariant::kLinear;
  throw std::invalid_argument("unknown partition variant: " + std::string(s));
}
MergeVariant parse_merge_variant(std::string_view s) {
  if (s == "concat") return MergeVariant::kConcat;
  if (s == "fc_before") return MergeVariant::kFcBefore;
  if (s == "fc_after") return MergeVariant::kFcAfter;
  throw std::invalid_argument("unknown merge variant: " + std::string(s));
}
AggregationVariant parse_aggregation_variant(std::string_view s) {
  if (s == "mean") return AggregationVariant::kMean;
  if (s == "sum") return AggregationVariant::kSum;
  if (s == "sym_norm") return AggregationVariant::kSymNorm;
  throw std::invalid_argument("unknown aggregation variant: " + std::string(s));
}
PaMode parse_pa_mode(std::string_view s) {
  if (s == "full") return PaMode::kFull;
  if (s == "no_pa") return PaMode::kNoPa;
  if (s == "no_item") return PaMode::kNoItem;
  if (s == "no_group") return PaMode::kNoGroup;
  throw std::invalid_argument("unknown pa_mode: " + std::string(s));
}
RelatednessOrientation parse_relatedness_orientation(std::string_view s) {
  if (s == "column") return RelatednessOrientation::kColumn;
  if (s == "row") return RelatednessOrientation::kRow;
  throw std::invalid_argument("unknown relatedness orientation: " +
                              std::string(s));
}

void HyperParams::validate() const {
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("dim must be a positive even number, got " +
                                std::to_string(dim));
  }
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (!(pa_beta >= 0.0 && pa_beta <= 1.0)) {
    throw std::invalid_argument("pa_beta must be in [0, 1]");
  }
  if (!(init_std > 0.0)) throw std::invalid_argument("init_std must be > 0");
  if (!std::isfinite(leaky_slope)) {
    throw std::invalid_argument("leaky_slope must be finite");
  }
}

// ---- parameters ----------------------------------------------------------------

size_t ModelParams::count(NodeType t) const {
  switch (t) {
    case NodeType::kUser:
      return n_users;
    case NodeType::kGroup:
      return n_groups;
    case NodeType::kItem:
      return n_items;
  }
  return 0;
}

size_t ModelParams::offset(NodeType t) const {
  switch (t) {
    case NodeType::kUser:
      return 0;
    case NodeType::kGroup:
      return n_users;
    case NodeType::kItem:
      return n_users + n_groups;
  }
  return 0;
}

std::vector<std::pair<std::string, const DenseMatrix*>> ModelParams::tensors()
    const {
  std::vector<std::pair<std::string, const DenseMatrix*>> out;
  auto add = [&out](std::string name, const DenseMatrix& m) {
    if (m.size() > 0) out.emplace_back(std::move(name), &m);
  };
  add("embeddings", embeddings);
  add("group_context", group_context);
  add("item_context", item_context);
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = tensor_prefix(l);
    for (NodeType t : kNodeTypes) {
      for (int k = 0; k < 2; ++k) {
        add(prefix + "partition." + to_string(t) + "." +
                to_string(slot_type(t, k)),
            layers[l].partition[idx(t)][k]);
      }
      add(prefix + "merge." + to_string(t), layers[l].merge[idx(t)]);
      for (int k = 0; k < 2; ++k) {
        add(prefix + "merge." + to_string(t) + "." +
                to_string(slot_type(t, k)),
            layers[l].merge_branch[idx(t)][k]);
      }
    }
  }
  return out;
}

std::vector<std::pair<std::string, DenseMatrix*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, DenseMatrix*>> out;
  for (auto& [name, ptr] : std::as_const(*this).tensors()) {
    out.emplace_back(name, const_cast<DenseMatrix*>(ptr));
  }
  return out;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& [name, m] : z.tensors()) m->setZero();
  return z;
}

double ModelParams::squared_norm() const {
  double total = 0.0;
  for (const auto& [name, m] : tensors()) total += m->squaredNorm();
  return total;
}

std::vector<NamedMatrix> ModelParams::to_named() const {
  std::vector<NamedMatrix> out;
  for (const auto& [name, m] : tensors()) out.push_back({name, *m});
  return out;
}

ModelParams init_params(const HyperParams& hp, size_t n_users, size_t n_groups,
                        size_t n_items, uint64_t seed, bool allocate_context) {
  hp.validate();
  if (n_users == 0 || n_groups == 0 || n_items == 0) {
    throw std::invalid_argument("init_params: node counts must be positive");
  }
  const auto d = static_cast<Eigen::Index>(hp.dim);
  const auto h = static_cast<Eigen::Index>(hp.half_dim());
  ModelParams p;
  p.n_users = n_users;
  p.n_groups = n_groups;
  p.n_items = n_items;

  Rng embed_rng(seed);
  p.embeddings.resize(d, static_cast<Eigen::Index>(n_users + n_groups + n_items));
  fill_normal(p.embeddings, embed_rng, 0.0, hp.init_std);

  if (allocate_context) {
    Rng ctx_rng(seed ^ kContextStream);
    p.group_context.resize(d, static_cast<Eigen::Index>(n_groups));
    p.item_context.resize(d, static_cast<Eigen::Index>(n_items));
    fill_normal(p.group_context, ctx_rng, 0.0, hp.init_std);
    fill_normal(p.item_context, ctx_rng, 0.0, hp.init_std);
  }

  Rng weight_rng(seed ^ kWeightStream);
  auto make = [&weight_rng](Eigen::Index rows, Eigen::Index cols) {
    DenseMatrix w(rows, cols);
    fill_normal(w, weight_rng, 0.0, 1.0 / std::sqrt(static_cast<double>(cols)));
    return w;
  };
  p.layers.resize(static_cast<size_t>(hp.layers));
  for (auto& layer : p.layers) {
    for (NodeType t : kNodeTypes) {
      if (hp.partition == PartitionVariant::kLinear) {
        for (int k = 0; k < 2; ++k) layer.partition[idx(t)][k] = make(h, d);
      }
      if (hp.merge == MergeVariant::kFcBefore) {
        layer.merge[idx(t)] = make(d, d);
      } else if (hp.merge == MergeVariant::kFcAfter) {
        for (int k = 0; k < 2; ++k) layer.merge_branch[idx(t)][k] = make(h, h);
      }
    }
  }
  return p;
}

ModelParams params_from_named(std::span<const NamedMatrix> matrices,
                              const HyperParams& hp, size_t n_users,
                              size_t n_groups, size_t n_items) {
  bool has_context = false;
  for (const auto& nm : matrices) {
    if (nm.name == "group_context") has_context = true;
  }
  ModelParams p = init_params(hp, n_users, n_groups, n_items, 0, has_context);
  auto slots = p.tensors();
  if (slots.size() != matrices.size()) {
    throw DataError("checkpoint holds " + std::to_string(matrices.size()) +
                    " matrices, configuration expects " +
                    std::to_string(slots.size()));
  }
  for (auto& [name, dst] : slots) {
    const NamedMatrix* src = nullptr;
    for (const auto& nm : matrices) {
      if (nm.name == name) src = &nm;
    }
    if (src == nullptr) throw DataError("checkpoint is missing matrix " + name);
    if (src->value.rows() != dst->rows() || src->value.cols() != dst->cols()) {
      throw DataError("checkpoint matrix " + name + " has shape " +
                      std::to_string(src->value.rows()) + "x" +
                      std::to_string(src->value.cols()) + ", expected " +
                      std::to_string(dst->rows()) + "x" +
                      std::to_string(dst->cols()));
    }
    *dst = src->value;
  }
  return p;
}

// ---- propagation graph -----------------------------------------------------------

size_t PropagationGraph::count(NodeType t) const {
  switch (t) {
    case NodeType::kUser:
      return n_users;
    case NodeType::kGroup:
      return n_groups;
    case NodeType::kItem:
      return n_items;
  }
  return 0;
}

PropagationGraph PropagationGraph::build(const TripartiteGraph& graph,
                                         AggregationVariant aggregation) {
  PropagationGraph pg;
  pg.n_users = graph.num_users();
  pg.n_groups = graph.num_groups();
  pg.n_items = graph.num_items();
  using Triplet = Eigen::Triplet<double>;
  for (NodeType s : kNodeTypes) {
    for (NodeType t : kNodeTypes) {
      if (s == t) continue;
      std::vector<Triplet> triplets;
      for (uint32_t c = 0; c < graph.num_nodes(t); ++c) {
        auto nbrs = graph.neighbors(t, s, c);
        for (uint32_t j : nbrs) {
          double w = 1.0;
          switch (aggregation) {
            case AggregationVariant::kMean:
              w = 1.0 / static_cast<double>(nbrs.size());
              break;
            case AggregationVariant::kSum:
              break;
            case AggregationVariant::kSymNorm:
              w = 1.0 / std::sqrt(static_cast<double>(nbrs.size()) *
                                  static_cast<double>(graph.degree(s, t, j)));
              break;
          }
          triplets.emplace_back(static_cast<int>(j), static_cast<int>(c), w);
        }
      }
      SparseMatrix m(static_cast<Eigen::Index>(graph.num_nodes(s)),
                     static_cast<Eigen::Index>(graph.num_nodes(t)));
      m.setFromTriplets(triplets.begin(), triplets.end());
      pg.prop[idx(s)][idx(t)] = std::move(m);
    }
  }
  auto membership = [&graph](NodeType target) {
    std::vector<Triplet> triplets;
    for (uint32_t u = 0; u < graph.num_users(); ++u) {
      for (uint32_t j : graph.neighbors(kUser, target, u)) {
        triplets.emplace_back(static_cast<int>(u), static_cast<int>(j), 1.0);
      }
    }
    SparseMatrix m(static_cast<Eigen::Index>(graph.num_users()),
                   static_cast<Eigen::Index>(graph.num_nodes(target)));
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
  };
  pg.user_group = membership(kGroup);
  pg.user_item = membership(kItem);
  return pg;
}

// ---- ops ------------------------------------------------------------------------

Branches partition(const DenseMatrix& z, NodeType t, const HyperParams& hp,
                   const LayerWeights* weights) {
  const auto h = static_cast<Eigen::Index>(hp.half_dim());
  if (z.rows() != hp.dim) {
    throw std::invalid_argument("partition: expected dim " +
                                std::to_string(hp.dim) + ", got " +
                                std::to_string(z.rows()));
  }
  if (hp.partition == PartitionVariant::kSplit) {
    return {z.topRows(h), z.bottomRows(h)};
  }
  if (weights == nullptr) {
    throw std::invalid_argument("partition: LINEAR variant needs weights");
  }
  return {weights->partition[idx(t)][0] * z, weights->partition[idx(t)][1] * z};
}

DenseVector aggregate(std::span<const DenseVector> neighbor_branches,
                      AggregationVariant variant, size_t half_dim,
                      size_t center_degree,
                      std::span<const size_t> neighbor_degrees) {
  DenseVector out = DenseVector::Zero(static_cast<Eigen::Index>(half_dim));
  if (neighbor_branches.empty()) return out;
  if (variant == AggregationVariant::kSymNorm &&
      neighbor_degrees.size() != neighbor_branches.size()) {
    throw std::invalid_argument("aggregate: SYM_NORM needs neighbor degrees");
  }
  for (size_t j = 0; j < neighbor_branches.size(); ++j) {
    const DenseVector& v = neighbor_branches[j];
    if (v.size() != out.size()) {
      throw std::invalid_argument("aggregate: dimension mismatch");
    }
    if (variant == AggregationVariant::kSymNorm) {
      out += v / std::sqrt(static_cast<double>(center_degree) *
                           static_cast<double>(neighbor_degrees[j]));
    } else {
      out += v;
    }
  }
  if (variant == AggregationVariant::kMean) {
    out /= static_cast<double>(neighbor_branches.size());
  }
  return out;
}

DenseMatrix merge(const DenseMatrix& first, const DenseMatrix& second,
                  NodeType t, const HyperParams& hp,
                  const LayerWeights* weights) {
  const auto h = static_cast<Eigen::Index>(hp.half_dim());
  if (first.rows() != h || second.rows() != h ||
      first.cols() != second.cols()) {
    throw std::invalid_argument("merge: dimension mismatch");
  }
  DenseMatrix out(2 * h, first.cols());
  switch (hp.merge) {
    case MergeVariant::kConcat:
      out.topRows(h) = first;
      out.bottomRows(h) = second;
      break;
    case MergeVariant::kFcBefore: {
      if (weights == nullptr) throw std::invalid_argument("merge: needs weights");
      out.topRows(h) = first;
      out.bottomRows(h) = second;
      out = weights->merge[idx(t)] * out;
      break;
    }
    case MergeVariant::kFcAfter:
      if (weights == nullptr) throw std::invalid_argument("merge: needs weights");
      out.topRows(h) = weights->merge_branch[idx(t)][0] * first;
      out.bottomRows(h) = weights->merge_branch[idx(t)][1] * second;
      break;
  }
  return out;
}

DenseMatrix relatedness_matrix(const DenseMatrix& context,
                               RelatednessOrientation orientation) {
  DenseMatrix r = context.transpose() * context;
  if (orientation == RelatednessOrientation::kColumn) {
    softmax_columns_inplace(r);
  } else {
    softmax_rows_inplace(r);
  }
  return r;
}

Attention attention_weights(const SparseMatrix& membership,
                            const DenseMatrix& relatedness,
                            double leaky_slope) {
  if (membership.cols() != relatedness.rows() ||
      relatedness.rows() != relatedness.cols()) {
    throw std::invalid_argument("attention_weights: shape mismatch");
  }
  Attention a;
  a.pre_activation = membership * relatedness;
  a.weights = a.pre_activation.unaryExpr(
      [leaky_slope](double x) { return leaky_relu(x, leaky_slope); });
  softmax_rows_inplace(a.weights);
  return a;
}

DenseMatrix propagation_augmentation(const DenseMatrix& user_branch,
                                     const DenseMatrix& target_branch,
                                     const DenseMatrix& attention,
                                     double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("propagation_augmentation: beta outside [0, 1]");
  }
  if (attention.rows() != user_branch.cols() ||
      attention.cols() != target_branch.cols() ||
      user_branch.rows() != target_branch.rows()) {
    throw std::invalid_argument("propagation_augmentation: shape mismatch");
  }
  return user_branch + beta * (target_branch * attention.transpose());
}

double score(const DenseVector& user, const DenseVector& group) {
  if (user.size() != group.size()) {
    throw std::invalid_argument("score: dimension mismatch");
  }
  return user.dot(group);
}

LayerTrace conv_layer(const PerType<DenseMatrix>& input,
                      const PropagationGraph& graph, const HyperParams& hp,
                      const LayerWeights* weights, const PaInputs* pa) {
  LayerTrace lt;
  lt.input = input;
  for (NodeType t : kNodeTypes) {
    if (input[idx(t)].cols() != static_cast<Eigen::Index>(graph.count(t))) {
      throw std::invalid_argument("conv_layer: node count mismatch");
    }
    Branches b = partition(input[idx(t)], t, hp, weights);
    lt.branch[idx(t)][0] = std::move(b.first);
    lt.branch[idx(t)][1] = std::move(b.second);
  }
  if (pa != nullptr) {
    if (pa->group != nullptr && pa->group->active) {
      DenseMatrix& ub = lt.branch[idx(kUser)][branch_slot(kUser, kGroup)];
      ub = propagation_augmentation(
          ub, lt.branch[idx(kGroup)][branch_slot(kGroup, kUser)],
          pa->group->attention.weights, pa->beta);
    }
    if (pa->item != nullptr && pa->item->active) {
      DenseMatrix& ub = lt.branch[idx(kUser)][branch_slot(kUser, kItem)];
      ub = propagation_augmentation(
          ub, lt.branch[idx(kItem)][branch_slot(kItem, kUser)],
          pa->item->attention.weights, pa->beta);
    }
  }
  for (NodeType t : kNodeTypes) {
    for (int k = 0; k < 2; ++k) {
      const NodeType s = slot_type(t, k);
      lt.message[idx(t)][k] =
          lt.branch[idx(s)][branch_slot(s, t)] * graph.prop[idx(s)][idx(t)];
    }
  }
  return lt;
}

ForwardTrace forward(const ModelParams& params, const PropagationGraph& graph,
                     const HyperParams& hp) {
  hp.validate();
  if (params.dim() != hp.dim || params.n_users != graph.n_users ||
      params.n_groups != graph.n_groups || params.n_items != graph.n_items) {
    throw std::invalid_argument("forward: parameter/graph shape mismatch");
  }
  ForwardTrace tr;
  tr.params_version = params.version;
  if (hp.group_pa()) {
    if (params.group_context.cols() != static_cast<Eigen::Index>(params.n_groups)) {
      throw std::invalid_argument("forward: group PA needs group_context");
    }
    tr.group_attention.active = true;
    tr.group_attention.relatedness =
        relatedness_matrix(params.group_context, hp.orientation);
    tr.group_attention.attention = attention_weights(
        graph.user_group, tr.group_attention.relatedness, hp.leaky_slope);
  }
  if (hp.item_pa()) {
    if (params.item_context.cols() != static_cast<Eigen::Index>(params.n_items)) {
      throw std::invalid_argument("forward: item PA needs item_context");
    }
    tr.item_attention.active = true;
    tr.item_attention.relatedness =
        relatedness_matrix(params.item_context, hp.orientation);
    tr.item_attention.attention = attention_weights(
        graph.user_item, tr.item_attention.relatedness, hp.leaky_slope);
  }
  const PaInputs pa{&tr.group_attention, &tr.item_attention, hp.pa_beta};

  PerType<DenseMatrix> current;
  for (NodeType t : kNodeTypes) current[idx(t)] = params.block(t);
  tr.layers.reserve(static_cast<size_t>(hp.layers));
  for (int l = 0; l < hp.layers; ++l) {
    const LayerWeights* w =
        static_cast<size_t>(l) < params.layers.size() ? &params.layers[l] : nullptr;
    LayerTrace lt = conv_layer(current, graph, hp, w, l == 0 ? &pa : nullptr);
    for (NodeType t : kNodeTypes) {
      current[idx(t)] = merge(lt.message[idx(t)][0], lt.message[idx(t)][1], t,
                              hp, w);
    }
    tr.layers.push_back(std::move(lt));
  }
  tr.output = std::move(current);
  return tr;
}

ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                     const PropagationGraph& graph, const HyperParams& hp,
                     const PerType<DenseMatrix>& output_grad) {
  if (trace.params_version != params.version ||
      trace.layers.size() != static_cast<size_t>(hp.layers)) {
    throw std::logic_error("backward: stale forward trace");
  }
  const auto h = static_cast<Eigen::Index>(hp.half_dim());
  ModelParams grad = params.zeros_like();

  PerType<DenseMatrix> dz;
  for (NodeType t : kNodeTypes) {
    const auto n = static_cast<Eigen::Index>(graph.count(t));
    if (output_grad[idx(t)].size() == 0) {
      dz[idx(t)] = DenseMatrix::Zero(hp.dim, n);
    } else if (output_grad[idx(t)].rows() != hp.dim ||
               output_grad[idx(t)].cols() != n) {
      throw std::invalid_argument("backward: output gradient shape mismatch");
    } else {
      dz[idx(t)] = output_grad[idx(t)];
    }
  }

  for (int l = hp.layers - 1; l >= 0; --l) {
    const LayerTrace& lt = trace.layers[static_cast<size_t>(l)];
    const LayerWeights* w = static_cast<size_t>(l) < params.layers.size()
                                ? &params.layers[static_cast<size_t>(l)]
                                : nullptr;
    LayerWeights* gw = static_cast<size_t>(l) < grad.layers.size()
                           ? &grad.layers[static_cast<size_t>(l)]
                           : nullptr;

    PerBranch<DenseMatrix> dmsg;
    for (NodeType t : kNodeTypes) {
      const int ti = idx(t);
      switch (hp.merge) {
        case MergeVariant::kConcat:
          dmsg[ti][0] = dz[ti].topRows(h);
          dmsg[ti][1] = dz[ti].bottomRows(h);
          break;
        case MergeVariant::kFcBefore: {
          DenseMatrix cat(2 * h, lt.message[ti][0].cols());
          cat.topRows(h) = lt.message[ti][0];
          cat.bottomRows(h) = lt.message[ti][1];
          gw->merge[ti] += dz[ti] * cat.transpose();
          const DenseMatrix dcat = w->merge[ti].transpose() * dz[ti];
          dmsg[ti][0] = dcat.topRows(h);
          dmsg[ti][1] = dcat.bottomRows(h);
          break;
        }
        case MergeVariant::kFcAfter:
          for (int k = 0; k < 2; ++k) {
            const DenseMatrix dk =
                k == 0 ? DenseMatrix(dz[ti].topRows(h)) : DenseMatrix(dz[ti].bottomRows(h));
            gw->merge_branch[ti][k] += dk * lt.message[ti][k].transpose();
            dmsg[ti][k] = w->merge_branch[ti][k].transpose() * dk;
          }
          break;
      }
    }

    PerBranch<DenseMatrix> dbranch;
    for (NodeType t : kNodeTypes) {
      for (int k = 0; k < 2; ++k) {
        dbranch[idx(t)][k] =
            DenseMatrix::Zero(h, static_cast<Eigen::Index>(graph.count(t)));
      }
    }
    for (NodeType t : kNodeTypes) {
      for (int k = 0; k < 2; ++k) {
        const NodeType s = slot_type(t, k);
        dbranch[idx(s)][branch_slot(s, t)] +=
            dmsg[idx(t)][k] * graph.prop[idx(s)][idx(t)].transpose();
      }
    }

    if (l == 0) {
      const double beta = hp.pa_beta;
      if (trace.group_attention.active) {
        const DenseMatrix& du = dbranch[idx(kUser)][branch_slot(kUser, kGroup)];
        const DenseMatrix& target = lt.branch[idx(kGroup)][branch_slot(kGroup, kUser)];
        const DenseMatrix& a = trace.group_attention.attention.weights;
        const DenseMatrix d_att = beta * (du.transpose() * target);
        dbranch[idx(kGroup)][branch_slot(kGroup, kUser)] += beta * (du * a);
        grad.group_context += attention_backward(
            d_att, trace.group_attention, graph.user_group,
            params.group_context, hp);
      }
      if (trace.item_attention.active) {
        const DenseMatrix& du = dbranch[idx(kUser)][branch_slot(kUser, kItem)];
        const DenseMatrix& target = lt.branch[idx(kItem)][branch_slot(kItem, kUser)];
        const DenseMatrix& a = trace.item_attention.attention.weights;
        const DenseMatrix d_att = beta * (du.transpose() * target);
        dbranch[idx(kItem)][branch_slot(kItem, kUser)] += beta * (du * a);
        grad.item_context += attention_backward(
            d_att, trace.item_attention, graph.user_item, params.item_context,
            hp);
      }
    }

    for (NodeType t : kNodeTypes) {
      const int ti = idx(t);
      if (hp.partition == PartitionVariant::kSplit) {
        dz[ti].topRows(h) = dbranch[ti][0];
        dz[ti].bottomRows(h) = dbranch[ti][1];
      } else {
        dz[ti].setZero();
        for (int k = 0; k < 2; ++k) {
          gw->partition[ti][k] += dbranch[ti][k] * lt.input[ti].transpose();
          dz[ti] += w->partition[ti][k].transpose() * dbranch[ti][k];
        }
      }
    }
  }
  for (NodeType t : kNodeTypes) grad.block(t) = dz[idx(t)];
  return grad;
}

}  // namespace cfag
