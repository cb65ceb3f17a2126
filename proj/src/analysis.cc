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

#include "cfag/analysis.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "cfag/errors.h"

namespace cfag {

Histogram dot_product_distribution(const DenseMatrix& context, size_t bins) {
  const Eigen::Index n = context.cols();
  if (n < 2) {
    throw std::invalid_argument("dot_product_distribution: need >= 2 columns");
  }
  if (bins == 0) throw std::invalid_argument("dot_product_distribution: bins");
  const DenseMatrix gram = context.transpose() * context;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index g = 0; g < n; ++g) {
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == g) continue;
      lo = std::min(lo, gram(m, g));
      hi = std::max(hi, gram(m, g));
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (size_t b = 0; b <= bins; ++b) {
    h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  }
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (Eigen::Index g = 0; g < n; ++g) {
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == g) continue;
      auto b = static_cast<size_t>(std::floor((gram(m, g) - lo) / width));
      ++h.counts[std::min(b, bins - 1)];
      ++h.total;
    }
  }
  return h;
}

double common_user_ratio(const TripartiteGraph& graph, uint32_t a, uint32_t b,
                         NodeType type) {
  if (type == NodeType::kUser) {
    throw std::invalid_argument("common_user_ratio: type must be group or item");
  }
  auto na = graph.neighbors(type, NodeType::kUser, a);
  auto nb = graph.neighbors(type, NodeType::kUser, b);
  size_t common = 0;
  auto i = na.begin();
  auto j = nb.begin();
  while (i != na.end() && j != nb.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const size_t uni = na.size() + nb.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

double pearson_correlation(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw std::invalid_argument("pearson_correlation: size mismatch");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationReport relatedness_vs_ratio(const TripartiteGraph& graph,
                                       const DenseMatrix& relatedness,
                                       NodeType type) {
  const size_t n = graph.num_nodes(type);
  if (relatedness.rows() != relatedness.cols() ||
      relatedness.rows() != static_cast<Eigen::Index>(n)) {
    throw std::invalid_argument("relatedness_vs_ratio: relatedness shape");
  }
  if (n * (n - 1) / 2 < 10) {
    throw std::invalid_argument("relatedness_vs_ratio: fewer than 10 pairs");
  }
  CorrelationReport rep;
  rep.pairs.reserve(n * (n - 1) / 2);
  for (uint32_t a = 0; a < n; ++a) {
    for (uint32_t b = a + 1; b < n; ++b) {
      rep.pairs.push_back({a, b, 0.5 * (relatedness(a, b) + relatedness(b, a)),
                           common_user_ratio(graph, a, b, type)});
    }
  }
  std::stable_sort(rep.pairs.begin(), rep.pairs.end(),
                   [](const PairRow& x, const PairRow& y) {
                     return x.relatedness < y.relatedness;
                   });

  constexpr size_t kDeciles = 10;
  const size_t total = rep.pairs.size();
  std::vector<double> xs, ys;
  for (size_t d = 0; d < kDeciles; ++d) {
    const size_t begin = d * total / kDeciles;
    const size_t end = (d + 1) * total / kDeciles;
    DecileRow row;
    row.pairs = end - begin;
    for (size_t k = begin; k < end; ++k) {
      row.mean_relatedness += rep.pairs[k].relatedness;
      row.mean_ratio += rep.pairs[k].common_user_ratio;
    }
    row.mean_relatedness /= static_cast<double>(row.pairs);
    row.mean_ratio /= static_cast<double>(row.pairs);
    xs.push_back(row.mean_relatedness);
    ys.push_back(row.mean_ratio);
    rep.deciles.push_back(row);
  }

  rep.pearson = pearson_correlation(xs, ys);
  rep.degenerate = std::isnan(rep.pearson);
  if (!rep.degenerate) {
    double mx = 0.0, my = 0.0;
    for (size_t k = 0; k < xs.size(); ++k) {
      mx += xs[k];
      my += ys[k];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - mx) * (ys[k] - my);
      sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    rep.slope = sxy / sxx;
    rep.intercept = my - rep.slope * mx;
  } else {
    rep.slope = std::numeric_limits<double>::quiet_NaN();
    rep.intercept = std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> raw_x, raw_y;
  raw_x.reserve(total);
  raw_y.reserve(total);
  for (const PairRow& p : rep.pairs) {
    raw_x.push_back(p.relatedness);
    raw_y.push_back(p.common_user_ratio);
  }
  rep.raw_pearson = pearson_correlation(raw_x, raw_y);
  return rep;
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "bin_low,bin_high,count\n";
  for (size_t b = 0; b < h.counts.size(); ++b) {
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
  }
}

void write_pairs_csv(const std::filesystem::path& path,
                     const CorrelationReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "a,b,relatedness,common_user_ratio\n";
  for (const PairRow& p : report.pairs) {
    out << p.a << ',' << p.b << ',' << p.relatedness << ','
        << p.common_user_ratio << '\n';
  }
}

void write_deciles_csv(const std::filesystem::path& path,
                       const CorrelationReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "# pearson=" << report.pearson << " slope=" << report.slope
      << " intercept=" << report.intercept
      << " raw_pearson=" << report.raw_pearson
      << " degenerate=" << (report.degenerate ? "true" : "false") << '\n';
  out << "decile,mean_relatedness,mean_common_user_ratio,pairs\n";
  for (size_t d = 0; d < report.deciles.size(); ++d) {
    const DecileRow& r = report.deciles[d];
    out << d << ',' << r.mean_relatedness << ',' << r.mean_ratio << ','
        << r.pairs << '\n';
  }
}

}  // namespace cfag
