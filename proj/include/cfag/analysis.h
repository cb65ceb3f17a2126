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

#ifndef CFAG_ANALYSIS_H_
#define CFAG_ANALYSIS_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cfag/graph.h"
#include "cfag/numeric.h"

namespace cfag {

struct Histogram {
  // bins + 1 strictly increasing edges; the last bin is closed on the right.
  std::vector<double> edges;
  std::vector<size_t> counts;
  size_t total = 0;
};

// Histogram of c_m . c_g over all ordered pairs m != g of the columns of
// `context`. Bins are uniform over the observed range; a zero-width range is
// widened to [v - 0.5, v + 0.5]. Throws std::invalid_argument for fewer than
// two columns or zero bins.
Histogram dot_product_distribution(const DenseMatrix& context,
                                   size_t bins = 100);

// Jaccard overlap of the user sets of two nodes of type `type` (group or
// item); 0 when both sets are empty.
double common_user_ratio(const TripartiteGraph& graph, uint32_t a, uint32_t b,
                         NodeType type = NodeType::kGroup);

struct PairRow {
  uint32_t a = 0;
  uint32_t b = 0;
  double relatedness = 0.0;
  double common_user_ratio = 0.0;
};

struct DecileRow {
  double mean_relatedness = 0.0;
  double mean_ratio = 0.0;
  size_t pairs = 0;
};

struct CorrelationReport {
  // Unordered pairs a < b, sorted by ascending relatedness.
  std::vector<PairRow> pairs;
  std::vector<DecileRow> deciles;
  // Pearson coefficient and least-squares line over the decile means; NaN
  // and degenerate == true when either coordinate has zero variance.
  double pearson = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  bool degenerate = false;
  // Pearson over the raw pairs.
  double raw_pearson = 0.0;
};

// Pearson correlation; NaN when either input has zero variance.
double pearson_correlation(const std::vector<double>& x,
                           const std::vector<double>& y);

// Pairs every two distinct nodes of `type`, scores them with the symmetric
// relatedness (R(a, b) + R(b, a)) / 2 and splits them into 10 near-equal
// deciles by relatedness. Throws std::invalid_argument for fewer than 10
// pairs or a non-square `relatedness`.
CorrelationReport relatedness_vs_ratio(const TripartiteGraph& graph,
                                       const DenseMatrix& relatedness,
                                       NodeType type = NodeType::kGroup);

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);
void write_pairs_csv(const std::filesystem::path& path,
                     const CorrelationReport& report);
void write_deciles_csv(const std::filesystem::path& path,
                       const CorrelationReport& report);

}  // namespace cfag

#endif  // CFAG_ANALYSIS_H_
