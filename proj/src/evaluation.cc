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

#include "cfag/evaluation.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "cfag/errors.h"

namespace cfag {
namespace {

size_t cutoff_index(const std::vector<int>& cutoffs, int k) {
  auto it = std::find(cutoffs.begin(), cutoffs.end(), k);
  if (it == cutoffs.end()) {
    throw std::out_of_range("cutoff " + std::to_string(k) + " not evaluated");
  }
  return static_cast<size_t>(it - cutoffs.begin());
}

bool contains(std::span<const uint32_t> sorted, uint32_t x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

std::vector<uint32_t> group_lists(std::span<const Edge> edges, uint32_t user) {
  auto lo = std::lower_bound(edges.begin(), edges.end(), Edge{user, 0});
  std::vector<uint32_t> out;
  for (auto it = lo; it != edges.end() && it->src == user; ++it) {
    out.push_back(it->dst);
  }
  return out;
}

}  // namespace

double EvalReport::recall_at(int k) const {
  return recall[cutoff_index(cutoffs, k)];
}

double EvalReport::ndcg_at(int k) const {
  return ndcg[cutoff_index(cutoffs, k)];
}

std::vector<uint32_t> rank_by_scores(std::span<const double> scores,
                                     std::span<const uint32_t> exclude,
                                     size_t limit) {
  std::vector<uint32_t> candidates;
  candidates.reserve(scores.size());
  for (uint32_t g = 0; g < scores.size(); ++g) {
    if (!contains(exclude, g)) candidates.push_back(g);
  }
  if (candidates.empty()) {
    throw std::invalid_argument("rank_groups: empty candidate set");
  }
  auto before = [&scores](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  if (limit < candidates.size()) {
    std::partial_sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(limit),
                      candidates.end(), before);
    candidates.resize(limit);
  } else {
    std::sort(candidates.begin(), candidates.end(), before);
  }
  return candidates;
}

std::vector<uint32_t> rank_groups(const DenseVector& user,
                                  const DenseMatrix& groups,
                                  std::span<const uint32_t> exclude) {
  if (user.size() != groups.rows()) {
    throw std::invalid_argument("rank_groups: dimension mismatch");
  }
  const DenseVector s = groups.transpose() * user;
  return rank_by_scores(std::span<const double>(s.data(), s.size()), exclude);
}

double recall_at_k(std::span<const uint32_t> ranked,
                   std::span<const uint32_t> relevant, size_t k) {
  if (relevant.empty()) throw std::invalid_argument("recall_at_k: empty test set");
  std::vector<uint32_t> rel(relevant.begin(), relevant.end());
  std::sort(rel.begin(), rel.end());
  size_t hits = 0;
  for (size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (contains(rel, ranked[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rel.size());
}

double ndcg_at_k(std::span<const uint32_t> ranked,
                 std::span<const uint32_t> relevant, size_t k) {
  if (relevant.empty()) throw std::invalid_argument("ndcg_at_k: empty test set");
  std::vector<uint32_t> rel(relevant.begin(), relevant.end());
  std::sort(rel.begin(), rel.end());
  double dcg = 0.0;
  for (size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (contains(rel, ranked[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  double idcg = 0.0;
  for (size_t r = 0; r < std::min(k, rel.size()); ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

DenseMatrix score_matrix(const ForwardTrace& trace) {
  return trace.output[static_cast<int>(NodeType::kUser)].transpose() *
         trace.output[static_cast<int>(NodeType::kGroup)];
}

EvalReport evaluate_scores(const DenseMatrix& scores, const DatasetSplit& split,
                           EvalTarget target, std::span<const int> cutoffs,
                           int threads) {
  const TripartiteGraph& train = split.train;
  if (scores.rows() != static_cast<Eigen::Index>(train.num_users()) ||
      scores.cols() != static_cast<Eigen::Index>(train.num_groups())) {
    throw std::invalid_argument("evaluate_scores: score matrix shape");
  }
  if (cutoffs.empty()) throw std::invalid_argument("evaluate_scores: no cutoffs");
  for (int k : cutoffs) {
    if (k < 1) throw std::invalid_argument("evaluate_scores: cutoff < 1");
  }
  const std::vector<Edge>& targets =
      target == EvalTarget::kTest ? split.test_ug : split.validation_ug;
  if (!std::is_sorted(targets.begin(), targets.end())) {
    throw std::invalid_argument("evaluate_scores: target edges must be sorted");
  }
  std::vector<uint32_t> users;
  for (const Edge& e : targets) {
    if (users.empty() || users.back() != e.src) users.push_back(e.src);
  }
  const size_t max_k =
      static_cast<size_t>(*std::max_element(cutoffs.begin(), cutoffs.end()));

  EvalReport report;
  report.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  report.users.resize(users.size());
  // Row-major copy so each user's scores are contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      rows = scores;

#pragma omp parallel for num_threads(std::max(threads, 1)) schedule(static)
  for (size_t k = 0; k < users.size(); ++k) {
    const uint32_t u = users[k];
    std::vector<uint32_t> exclude(train.user_groups(u).begin(),
                                  train.user_groups(u).end());
    if (target == EvalTarget::kTest) {
      auto v = group_lists(split.validation_ug, u);
      exclude.insert(exclude.end(), v.begin(), v.end());
      std::sort(exclude.begin(), exclude.end());
    }
    const std::vector<uint32_t> relevant = group_lists(targets, u);
    const std::vector<uint32_t> ranked = rank_by_scores(
        std::span<const double>(rows.row(static_cast<Eigen::Index>(u)).data(),
                                static_cast<size_t>(rows.cols())),
        exclude, max_k);
    UserMetrics& um = report.users[k];
    um.user = u;
    um.test_size = relevant.size();
    for (int c : cutoffs) {
      um.recall.push_back(recall_at_k(ranked, relevant, static_cast<size_t>(c)));
      um.ndcg.push_back(ndcg_at_k(ranked, relevant, static_cast<size_t>(c)));
    }
  }

  report.recall.assign(cutoffs.size(), 0.0);
  report.ndcg.assign(cutoffs.size(), 0.0);
  for (const UserMetrics& um : report.users) {
    for (size_t c = 0; c < cutoffs.size(); ++c) {
      report.recall[c] += um.recall[c];
      report.ndcg[c] += um.ndcg[c];
    }
  }
  if (!report.users.empty()) {
    const double n = static_cast<double>(report.users.size());
    for (size_t c = 0; c < cutoffs.size(); ++c) {
      report.recall[c] /= n;
      report.ndcg[c] /= n;
    }
  }
  return report;
}

EvalReport evaluate(const ModelParams& params, const DatasetSplit& split,
                    const HyperParams& hp, EvalTarget target,
                    std::span<const int> cutoffs, int threads) {
  const PropagationGraph graph =
      PropagationGraph::build(split.train, hp.aggregation);
  const ForwardTrace trace = forward(params, graph, hp);
  const DenseMatrix scores = score_matrix(trace);
  check_finite(scores, "evaluation scores");
  return evaluate_scores(scores, split, target, cutoffs, threads);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["evaluated_users"] = report.evaluated_users();
  for (size_t c = 0; c < report.cutoffs.size(); ++c) {
    j["recall@" + std::to_string(report.cutoffs[c])] = report.recall[c];
  }
  for (size_t c = 0; c < report.cutoffs.size(); ++c) {
    j["ndcg@" + std::to_string(report.cutoffs[c])] = report.ndcg[c];
  }
  return j.dump(2) + "\n";
}

void write_report_json(const std::filesystem::path& path,
                       const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << report_to_json(report);
}

void write_user_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "user_id,test_size";
  for (int k : report.cutoffs) out << ",recall@" << k;
  for (int k : report.cutoffs) out << ",ndcg@" << k;
  out << '\n';
  out.precision(17);
  for (const UserMetrics& um : report.users) {
    out << um.user << ',' << um.test_size;
    for (double v : um.recall) out << ',' << v;
    for (double v : um.ndcg) out << ',' << v;
    out << '\n';
  }
}

}  // namespace cfag
