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

#include "cfag/numeric.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cfag/errors.h"

namespace cfag {

uint64_t Rng::bounded(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::bounded: empty range");
  // Largest multiple of n representable; draws above it are rejected.
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % n;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(theta);
  has_spare_ = true;
  return mean + stddev * radius * std::cos(theta);
}

std::vector<double> seeded_uniform(uint64_t seed, size_t n, double lo,
                                   double hi) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& x : out) x = rng.uniform(lo, hi);
  return out;
}

void fill_normal(DenseMatrix& m, Rng& rng, double mean, double stddev) {
  double* data = m.data();
  for (Eigen::Index k = 0; k < m.size(); ++k) data[k] = rng.normal(mean, stddev);
}

void check_finite(const DenseMatrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericError("non-finite value in " + std::string(what));
  }
}

AdamState AdamState::like(const DenseMatrix& param, double beta1, double beta2,
                          double epsilon) {
  AdamState s;
  s.m = DenseMatrix::Zero(param.rows(), param.cols());
  s.v = DenseMatrix::Zero(param.rows(), param.cols());
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

void adam_step(DenseMatrix& param, const DenseMatrix& grad, AdamState& state,
               double lr) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols() ||
      param.rows() != state.m.rows() || param.cols() != state.m.cols() ||
      param.rows() != state.v.rows() || param.cols() != state.v.cols()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be > 0");
  check_finite(grad, "adam_step gradient");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);

  double* p = param.data();
  double* m = state.m.data();
  double* v = state.v.data();
  const double* g = grad.data();
  for (Eigen::Index k = 0; k < param.size(); ++k) {
    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
    const double m_hat = m[k] / bias1;
    const double v_hat = v[k] / bias2;
    p[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> x,
                                               double h,
                                               std::span<const size_t> coords) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("finite_difference_gradient: h must be > 0");
  }
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(coords.size());
  for (size_t k = 0; k < coords.size(); ++k) {
    const size_t i = coords[k];
    if (i >= point.size()) {
      throw std::out_of_range("finite_difference_gradient: coordinate");
    }
    const double saved = point[i];
    point[i] = saved + h;
    const double plus = f(point);
    point[i] = saved - h;
    const double minus = f(point);
    point[i] = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("finite_difference_gradient: non-finite f value");
    }
    grad[k] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

std::vector<double> finite_difference_gradient(const ScalarFunction& f,
                                               std::span<const double> x,
                                               double h) {
  std::vector<size_t> coords(x.size());
  for (size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  return finite_difference_gradient(f, x, h, coords);
}

}  // namespace cfag
