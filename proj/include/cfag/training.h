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

#ifndef CFAG_TRAINING_H_
#define CFAG_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cfag/graph.h"
#include "cfag/model.h"
#include "cfag/numeric.h"

namespace cfag {

struct BprTriple {
  uint32_t user = 0;
  uint32_t pos_group = 0;
  uint32_t neg_group = 0;
};

struct TrainConfig {
  int epochs = 300;
  int batch_size = 2048;
  double lr = 0.001;
  // L2 coefficient on the squared norm of every trainable matrix.
  double l2 = 1e-5;
  // Evaluations without validation NDCG@10 improvement before stopping.
  int patience = 10;
  // Validate every `eval_every` epochs.
  int eval_every = 1;
  uint64_t seed = 2023;
  int threads = 1;

  void validate() const;
};

// Positives are uniform over training user-group edges; each gets one negative
// drawn uniformly from the groups the user has not joined (rejection
// sampling). Users that joined every group are skipped. Throws DataError
// when no user admits a negative.
std::vector<BprTriple> sample_triples(const TripartiteGraph& train,
                                      size_t batch_size, Rng& rng);

// Mean of -log sigmoid(pos - neg) plus l2 * ||params||^2.
double bpr_loss(std::span<const double> scores_pos,
                std::span<const double> scores_neg, const ModelParams& params,
                double l2);

struct LossAndGradient {
  double loss = 0.0;
  ModelParams gradient;
};

// Loss of a fixed batch and its exact gradient for every trainable matrix.
LossAndGradient bpr_loss_and_gradient(const ModelParams& params,
                                      const PropagationGraph& graph,
                                      const HyperParams& hp,
                                      std::span<const BprTriple> batch,
                                      double l2);

// One Adam state per trainable matrix, in ModelParams::tensors() order.
struct OptimizerState {
  std::vector<AdamState> slots;
  static OptimizerState for_params(const ModelParams& params);
};

// Forward, backward and one Adam step per matrix. Returns the loss before the
// update. Throws NumericError if the loss or a gradient is not finite.
double train_step(ModelParams& params, std::span<const BprTriple> batch,
                  const PropagationGraph& graph, const HyperParams& hp,
                  double l2, double lr, OptimizerState& optimizer);

// Tracks the best monitored value; stops after `patience` consecutive
// non-improving updates.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  // Returns true when `value` is a new best.
  bool update(double value);
  bool should_stop() const { return bad_updates_ >= patience_; }
  double best() const { return best_; }
  int evaluations() const { return evaluations_; }

 private:
  int patience_;
  int bad_updates_ = 0;
  int evaluations_ = 0;
  double best_ = -1.0;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> val_recall10;
  std::optional<double> val_ndcg10;
  double wall_ms = 0.0;
};

struct FitResult {
  ModelParams params;
  std::vector<EpochLog> log;
  // Epoch whose parameters were returned.
  int best_epoch = 0;
  std::optional<double> best_val_ndcg10;
  bool early_stopped = false;
};

// Trains from init_params(hp, ..., config.seed). With a non-empty validation
// set, NDCG@10 is checked every config.eval_every epochs and the best
// parameters are returned; otherwise the final parameters are returned.
FitResult fit(const DatasetSplit& split, const HyperParams& hp,
              const TrainConfig& config);

// CSV columns: epoch,loss,val_recall@10,val_ndcg@10,wall_ms.
void write_training_log(const std::filesystem::path& path,
                        std::span<const EpochLog> log);

}  // namespace cfag

#endif  // CFAG_TRAINING_H_
