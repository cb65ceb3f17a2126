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

#ifndef CFAG_EVALUATION_H_
#define CFAG_EVALUATION_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfag/graph.h"
#include "cfag/model.h"

namespace cfag {

enum class EvalTarget { kValidation, kTest };

struct UserMetrics {
  uint32_t user = 0;
  size_t test_size = 0;
  // Parallel to EvalReport::cutoffs.
  std::vector<double> recall;
  std::vector<double> ndcg;
};

struct EvalReport {
  std::vector<int> cutoffs;
  // Means over evaluated users, parallel to cutoffs.
  std::vector<double> recall;
  std::vector<double> ndcg;
  // Users with a non-empty target set, ascending id.
  std::vector<UserMetrics> users;

  size_t evaluated_users() const { return users.size(); }
  // Throws std::out_of_range for a cutoff that was not evaluated.
  double recall_at(int k) const;
  double ndcg_at(int k) const;
};

// Groups not in `exclude` (sorted ascending) ordered by descending score,
// ties broken by ascending group id. Throws std::invalid_argument when every
// group is excluded.
std::vector<uint32_t> rank_by_scores(std::span<const double> scores,
                                     std::span<const uint32_t> exclude,
                                     size_t limit = SIZE_MAX);

// Scores every group against `user` (d) using the columns of `groups`
// (d x n_groups) and ranks them as above.
std::vector<uint32_t> rank_groups(const DenseVector& user,
                                  const DenseMatrix& groups,
                                  std::span<const uint32_t> exclude);

// |top-k ∩ relevant| / |relevant|. `relevant` must be non-empty.
double recall_at_k(std::span<const uint32_t> ranked,
                   std::span<const uint32_t> relevant, size_t k);
// Binary-relevance NDCG with the ideal DCG truncated at min(|relevant|, k).
double ndcg_at_k(std::span<const uint32_t> ranked,
                 std::span<const uint32_t> relevant, size_t k);

// users x groups inner-product scores from final embeddings.
DenseMatrix score_matrix(const ForwardTrace& trace);

// Ranks every user with a non-empty target set. Candidates exclude the
// user's training groups and, for the test target, validation groups too.
EvalReport evaluate_scores(const DenseMatrix& scores, const DatasetSplit& split,
                           EvalTarget target, std::span<const int> cutoffs,
                           int threads = 1);

// One forward pass over split.train followed by evaluate_scores.
EvalReport evaluate(const ModelParams& params, const DatasetSplit& split,
                    const HyperParams& hp, EvalTarget target,
                    std::span<const int> cutoffs, int threads = 1);

std::string report_to_json(const EvalReport& report);
void write_report_json(const std::filesystem::path& path,
                       const EvalReport& report);
void write_user_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace cfag

#endif  // CFAG_EVALUATION_H_
