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

// Command-line driver: train, evaluate, ablate, cold-start and analyze.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
// failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cfag/errors.h"
#include "cfag/experiment.h"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output_dir;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed,
                  "Seed for both the split and training (overrides config)");
  cmd->add_option("--threads", opts.threads,
                  "Evaluation worker threads (default: available cores)");
  cmd->add_option("-o,--output-dir", opts.output_dir, "Output directory");
  cmd->add_option("--set", opts.overrides,
                  "Override a config key, e.g. --set model.dim=128");
}

cfag::ExperimentConfig resolve(const CommonOptions& opts) {
  cfag::ExperimentConfig config = cfag::load_config(opts.config_path);
  for (const std::string& o : opts.overrides) cfag::apply_override(config, o);
  if (opts.seed) {
    config.split_seed = *opts.seed;
    config.train.seed = *opts.seed;
  }
  if (opts.output_dir) config.output_dir = *opts.output_dir;
  config.train.threads = opts.threads.value_or(
      static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  config.validate();
  return config;
}

void print_report(const cfag::EvalReport& report) {
  std::printf("evaluated_users=%zu", report.evaluated_users());
  for (size_t c = 0; c < report.cutoffs.size(); ++c) {
    std::printf(" recall@%d=%.4f", report.cutoffs[c], report.recall[c]);
  }
  for (size_t c = 0; c < report.cutoffs.size(); ++c) {
    std::printf(" ndcg@%d=%.4f", report.cutoffs[c], report.ndcg[c]);
  }
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CFAG group recommendation: training, evaluation and analysis"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, ablate_opts, cold_opts, analyze_opts;
  std::string eval_checkpoint, analyze_checkpoint;
  std::vector<std::string> variants;
  std::vector<std::string> ks;

  auto* train = app.add_subcommand("train", "Split, train, and evaluate on test");
  add_common(train, train_opts);

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on test");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--checkpoint", eval_checkpoint, "checkpoint.bin")
      ->required();

  auto* ablate = app.add_subcommand("ablate", "Train a list of model variants");
  add_common(ablate, ablate_opts);
  ablate->add_option("--variants", variants,
                     "cfag, p1, m1, m2, no_pa, no_item, no_group");

  auto* cold = app.add_subcommand("cold-start", "Cap memberships per user and retrain");
  add_common(cold, cold_opts);
  cold->add_option("--k", ks, "Thresholds, positive integers or 'inf'");

  auto* analyze = app.add_subcommand("analyze", "Contextual embedding diagnostics");
  add_common(analyze, analyze_opts);
  analyze->add_option("--checkpoint", analyze_checkpoint, "checkpoint.bin")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const auto config = resolve(train_opts);
      const auto outcome = cfag::run_train(config);
      std::printf("best_epoch=%d epochs_run=%zu\n", outcome.fit.best_epoch,
                  outcome.fit.log.size());
      print_report(outcome.test_report);
    } else if (*evaluate) {
      const auto config = resolve(eval_opts);
      print_report(cfag::run_evaluate(config, eval_checkpoint));
    } else if (*ablate) {
      const auto config = resolve(ablate_opts);
      const auto rows = cfag::run_ablation(
          config, variants.empty() ? config.ablation_variants : variants);
      bool all_ok = true;
      for (const auto& r : rows) {
        if (r.ok) {
          std::printf("%-10s recall@10=%.4f ndcg@10=%.4f\n", r.variant.c_str(),
                      r.recall10, r.ndcg10);
        } else {
          all_ok = false;
          std::printf("%-10s FAILED: %s\n", r.variant.c_str(), r.error.c_str());
        }
      }
      if (!all_ok) return kExitNumeric;
    } else if (*cold) {
      auto config = resolve(cold_opts);
      if (!ks.empty()) {
        config.cold_start_k.clear();
        for (const std::string& k : ks) {
          if (k == "inf") {
            config.cold_start_k.push_back(cfag::kNoCap);
            continue;
          }
          try {
            const long long v = std::stoll(k);
            if (v < 1) throw std::invalid_argument(k);
            config.cold_start_k.push_back(static_cast<size_t>(v));
          } catch (const std::exception&) {
            throw cfag::ConfigError("--k expects positive integers or 'inf', got " + k);
          }
        }
      }
      for (const auto& row : cfag::run_cold_start(config, config.cold_start_k)) {
        std::printf("k=%s train_ug_edges=%zu ",
                    row.k == cfag::kNoCap ? "inf" : std::to_string(row.k).c_str(),
                    row.train_ug_edges);
        print_report(row.report);
      }
    } else if (*analyze) {
      const auto config = resolve(analyze_opts);
      const auto out = cfag::run_analyze(config, analyze_checkpoint);
      std::printf("group pairs=%zu decile_pearson=%.4f raw_pearson=%.4f%s\n",
                  out.group_correlation.pairs.size(), out.group_correlation.pearson,
                  out.group_correlation.raw_pearson,
                  out.group_correlation.degenerate ? " (degenerate variance)" : "");
    }
  } catch (const cfag::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cfag::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const cfag::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
