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

#ifndef CFAG_EXPERIMENT_H_
#define CFAG_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfag/analysis.h"
#include "cfag/evaluation.h"
#include "cfag/graph.h"
#include "cfag/model.h"
#include "cfag/training.h"

namespace cfag {

// Cold-start entry meaning "no cap".
inline constexpr size_t kNoCap = std::numeric_limits<size_t>::max();

struct ExperimentConfig {
  std::filesystem::path user_group_path;
  std::filesystem::path user_item_path;
  std::filesystem::path group_item_path;

  double train_ratio = 0.7;
  double valid_ratio = 0.1;
  uint64_t split_seed = 2023;

  HyperParams model;
  TrainConfig train;
  std::vector<int> cutoffs = {10, 20};

  std::filesystem::path output_dir = "runs/default";
  std::vector<size_t> cold_start_k = {1, 2, 3, 4};
  std::vector<std::string> ablation_variants = {"cfag", "no_pa", "no_item",
                                                "no_group"};
  size_t histogram_bins = 100;
  bool analyze_items = false;

  // Throws ConfigError.
  void validate() const;
};

// Parses a JSON config. Relative data and output paths are resolved against
// the config file's directory. Unknown keys and invalid enum values are
// rejected with ConfigError naming the key path.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig config_from_json_text(std::string_view text,
                                       const std::filesystem::path& base_dir,
                                       const std::string& origin);

// Applies "section.key=value" (e.g. "model.dim=128", "train.lr=0.005").
void apply_override(ExperimentConfig& config, std::string_view assignment);

std::string config_to_json(const ExperimentConfig& config);

// Loads the three edge lists; DataError messages name the config key.
TripartiteGraph load_dataset(const ExperimentConfig& config);
DatasetSplit make_split(const ExperimentConfig& config,
                        const TripartiteGraph& graph);

// Named ablation variants: cfag (default SPLIT + CONCAT + full PA), p1
// (LINEAR partition), m1 (FC_BEFORE merge), m2 (FC_AFTER merge), no_pa,
// no_item, no_group. Throws ConfigError for other names.
HyperParams apply_variant(HyperParams hp, std::string_view variant);

struct TrainOutcome {
  FitResult fit;
  EvalReport test_report;
};

// load -> split -> fit -> test evaluation. Writes into config.output_dir:
// checkpoint.bin, checkpoint.json, train_log.csv, eval_report.json,
// eval_users.csv and split/.
TrainOutcome run_train(const ExperimentConfig& config);

// Same as run_train on an already split dataset (shared by the ablation and
// cold-start drivers).
TrainOutcome train_and_report(const ExperimentConfig& config,
                              const DatasetSplit& split,
                              const std::filesystem::path& out_dir);

// Test-set evaluation of a saved checkpoint against the configured split.
EvalReport run_evaluate(const ExperimentConfig& config,
                        const std::filesystem::path& checkpoint);

struct AblationRow {
  std::string variant;
  bool ok = false;
  std::string error;
  double recall10 = 0.0;
  double ndcg10 = 0.0;
};

// Trains every variant on one shared split and seed; writes ablation.csv.
// A failing variant is reported with ok == false and does not stop the rest.
std::vector<AblationRow> run_ablation(const ExperimentConfig& config,
                                      const std::vector<std::string>& variants);

struct ColdStartRow {
  size_t k = 0;
  size_t train_ug_edges = 0;
  size_t max_user_degree = 0;
  EvalReport report;
};

// Caps training memberships at each k (kNoCap = uncapped), retrains and
// evaluates; writes cold_start.csv.
std::vector<ColdStartRow> run_cold_start(const ExperimentConfig& config,
                                         const std::vector<size_t>& ks);

struct AnalysisOutcome {
  Histogram group_histogram;
  CorrelationReport group_correlation;
  std::optional<Histogram> item_histogram;
  std::optional<CorrelationReport> item_correlation;
};

// Contextual-embedding diagnostics of a checkpoint; writes
// group_dot_products.csv, group_pairs.csv, group_deciles.csv (and item_*
// files when analyze_items is set).
AnalysisOutcome run_analyze(const ExperimentConfig& config,
                            const std::filesystem::path& checkpoint);

// Checkpoint with its JSON sidecar (<path>.json) recording the model
// hyperparameters and node counts.
void save_model(const std::filesystem::path& path, const ModelParams& params,
                const HyperParams& hp);
struct LoadedModel {
  ModelParams params;
  HyperParams hp;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace cfag

#endif  // CFAG_EXPERIMENT_H_
