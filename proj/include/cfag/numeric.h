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

#ifndef CFAG_NUMERIC_H_
#define CFAG_NUMERIC_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cfag {

// Column-major d x n storage; column j holds the vector of node j.
using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

// Deterministic random source.
//
// The bit stream is std::mt19937_64, whose output sequence is fixed by the
// C++ standard. All derived draws (uniform reals, bounded integers, normals,
// shuffles) are implemented here rather than through <random> distributions,
// whose algorithms are implementation-defined, so a seed reproduces the same
// numbers with any standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  uint64_t bounded(uint64_t n);

  // Box-Muller; the second variate is cached.
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(bounded(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// n draws uniform over [lo, hi) from a fresh generator seeded with `seed`.
std::vector<double> seeded_uniform(uint64_t seed, size_t n, double lo = 0.0,
                                   double hi = 1.0);

// Fills a matrix with i.i.d. normal(mean, stddev) entries in storage order.
void fill_normal(DenseMatrix& m, Rng& rng, double mean, double stddev);

// Throws NumericError naming `what` if any entry is NaN or infinite.
void check_finite(const DenseMatrix& m, std::string_view what);

struct AdamState {
  DenseMatrix m;
  DenseMatrix v;
  int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Zero moments shaped like `param`.
  static AdamState like(const DenseMatrix& param, double beta1 = 0.9,
                        double beta2 = 0.999, double epsilon = 1e-8);
};

// Bias-corrected Adam update applied to `param` in place. Throws
// std::invalid_argument on shape mismatch or lr <= 0 and NumericError on a
// non-finite gradient.
void adam_step(DenseMatrix& param, const DenseMatrix& grad, AdamState& state,
               double lr);

using ScalarFunction = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> x,
                                               double h);

// Same, restricted to the listed coordinates; result[k] is the partial
// derivative along coords[k].
std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> x,
                                               double h,
                                               std::span<const size_t> coords);

}  // namespace cfag

#endif  // CFAG_NUMERIC_H_
