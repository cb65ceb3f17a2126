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

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "cfag/errors.h"
#include "cfag/experiment.h"
#include "cfag/synthetic.h"
#include "test_util.h"

namespace cfag {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

size_t count_rows(const fs::path& p) {
  std::ifstream in(p);
  size_t n = 0;
  for (std::string s; std::getline(in, s);) n += !s.empty() && s[0] != '#';
  return n;
}

const fs::path& toy_data() {
  static const fs::path dir = [] {
    SyntheticSpec spec;
    spec.n_users = 60;
    spec.n_groups = 30;
    spec.n_items = 25;
    spec.user_group_edges = 240;
    spec.user_item_edges = 300;
    spec.group_item_edges = 90;
    spec.communities = 5;
    spec.seed = 4;
    const fs::path d = testing::temp_dir("toy_data");
    testing::write_dataset(generate_planted_graph(spec), d);
    return d;
  }();
  return dir;
}

ExperimentConfig toy_config(const std::string& out) {
  const std::string text = R"({
    "data": {"user_group": "user_group.txt", "user_item": "user_item.txt",
             "group_item": "group_item.txt"},
    "split": {"train_ratio": 0.7, "valid_ratio": 0.1, "seed": 5},
    "model": {"dim": 8, "layers": 1, "pa_beta": 0.5},
    "train": {"epochs": 4, "batch_size": 64, "lr": 0.01, "l2": 1e-5,
              "patience": 10, "seed": 6},
    "eval": {"cutoffs": [10, 20]},
    "cold_start": {"k": [1, 2, 3, 4]}
  })";
  ExperimentConfig c = config_from_json_text(text, toy_data(), "toy");
  c.output_dir = testing::temp_dir(out);
  return c;
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = toy_config("cfg");
  CHECK(c.model.dim == 8);
  CHECK(c.train.epochs == 4);
  CHECK(c.user_group_path == toy_data() / "user_group.txt");
  CHECK(c.cutoffs == std::vector<int>{10, 20});
  CHECK_THROWS_AS(config_from_json_text(R"({"modle": {}})", ".", "x"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"model": {"dimm": 3}})", ".", "x"),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"model": {"dim": "big"}})", ".", "x"),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json_text("{not json", ".", "x"), ConfigError);
  const ExperimentConfig inf = config_from_json_text(
      R"({"cold_start": {"k": [2, "inf"]}})", ".", "x");
  CHECK(inf.cold_start_k == std::vector<size_t>{2, kNoCap});
}

TEST_CASE("config overrides and round trip") {
  ExperimentConfig c = toy_config("cfg2");
  apply_override(c, "model.dim=16");
  apply_override(c, "model.pa_mode=no_item");
  apply_override(c, "train.lr=0.5");
  CHECK(c.model.dim == 16);
  CHECK(c.model.pa_mode == PaMode::kNoItem);
  CHECK(c.train.lr == 0.5);
  CHECK_THROWS_AS(apply_override(c, "model.size=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "nonsense"), ConfigError);
  const ExperimentConfig back = config_from_json_text(config_to_json(c), "/", "rt");
  CHECK(config_to_json(back) == config_to_json(c));
}

TEST_CASE("variant names") {
  HyperParams hp;
  CHECK(apply_variant(hp, "p1").partition == PartitionVariant::kLinear);
  CHECK(apply_variant(hp, "m1").merge == MergeVariant::kFcBefore);
  CHECK(apply_variant(hp, "m2").merge == MergeVariant::kFcAfter);
  CHECK(apply_variant(hp, "no_group").pa_mode == PaMode::kNoGroup);
  CHECK(apply_variant(hp, "cfag").pa_mode == PaMode::kFull);
  CHECK_THROWS_AS(apply_variant(hp, "huh"), ConfigError);
}

TEST_CASE("missing data files report the config key") {
  ExperimentConfig c = toy_config("missing");
  c.user_item_path = toy_data() / "nope.txt";
  try {
    load_dataset(c);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("data.user_item") != std::string::npos);
  }
}

TEST_CASE("train end to end is reproducible") {
  const ExperimentConfig c = toy_config("train_a");
  const TrainOutcome a = run_train(c);
  for (const char* f : {"checkpoint.bin", "checkpoint.bin.json", "train_log.csv",
                        "eval_report.json", "eval_users.csv", "config.json",
                        "split/test_ug.txt"}) {
    CHECK(fs::exists(c.output_dir / f));
  }
  CHECK(count_rows(c.output_dir / "train_log.csv") == a.fit.log.size() + 1);
  ExperimentConfig c2 = c;
  c2.output_dir = testing::temp_dir("train_b");
  const TrainOutcome b = run_train(c2);
  CHECK(read_file(c.output_dir / "eval_report.json") ==
        read_file(c2.output_dir / "eval_report.json"));
  CHECK(read_file(c.output_dir / "checkpoint.bin") ==
        read_file(c2.output_dir / "checkpoint.bin"));
  CHECK(read_file(c.output_dir / "eval_users.csv") ==
        read_file(c2.output_dir / "eval_users.csv"));

  ExperimentConfig ce = c;
  ce.output_dir = testing::temp_dir("evaluate");
  const EvalReport e = run_evaluate(ce, c.output_dir / "checkpoint.bin");
  CHECK(report_to_json(e) == report_to_json(a.test_report));
}

TEST_CASE("ablation tables") {
  ExperimentConfig c = toy_config("ablate");
  c.train.epochs = 2;
  const auto rows = run_ablation(c, {"cfag", "no_pa", "no_item", "no_group"});
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) CHECK(r.ok);
  CHECK(count_rows(c.output_dir / "ablation.csv") == 5);
  CHECK(fs::exists(c.output_dir / "no_pa" / "eval_report.json"));

  ExperimentConfig s = toy_config("ablate_struct");
  s.train.epochs = 2;
  const auto structural = run_ablation(s, {"cfag", "p1", "m1", "m2"});
  REQUIRE(structural.size() == 4);
  for (const auto& r : structural) CHECK(r.ok);

  ExperimentConfig one = toy_config("ablate_one");
  one.train.epochs = 2;
  const auto single = run_ablation(one, {"cfag"});
  ExperimentConfig t = toy_config("ablate_train");
  t.train.epochs = 2;
  const TrainOutcome direct = run_train(t);
  REQUIRE(single.size() == 1);
  CHECK(single[0].recall10 == direct.test_report.recall_at(10));
  CHECK(single[0].ndcg10 == direct.test_report.ndcg_at(10));
  CHECK_THROWS_AS(run_ablation(one, {}), ConfigError);
}

TEST_CASE("cold start sweep") {
  ExperimentConfig c = toy_config("cold");
  c.train.epochs = 2;
  const auto rows = run_cold_start(c, {1, 2, 3, 4, kNoCap});
  REQUIRE(rows.size() == 5);
  for (size_t i = 0; i < 4; ++i) {
    CHECK(rows[i].k == i + 1);
    CHECK(rows[i].max_user_degree <= rows[i].k);
    if (i > 0) CHECK(rows[i].train_ug_edges >= rows[i - 1].train_ug_edges);
  }
  CHECK(count_rows(c.output_dir / "cold_start.csv") == 6);
  ExperimentConfig t = toy_config("cold_train");
  t.train.epochs = 2;
  const TrainOutcome direct = run_train(t);
  CHECK(report_to_json(rows[4].report) == report_to_json(direct.test_report));
  CHECK(rows[4].train_ug_edges ==
        load_edge_list(t.output_dir / "split" / "train_ug.txt", Relation::kUserGroup)
            .edges.size());
}

TEST_CASE("analyze writes diagnostics") {
  ExperimentConfig c = toy_config("analyze_train");
  c.train.epochs = 1;
  run_train(c);
  ExperimentConfig a = c;
  a.output_dir = testing::temp_dir("analyze");
  a.analyze_items = true;
  const AnalysisOutcome out = run_analyze(a, c.output_dir / "checkpoint.bin");
  CHECK(out.group_histogram.total == 30 * 29);
  CHECK(out.group_correlation.pairs.size() == 30 * 29 / 2);
  CHECK(count_rows(a.output_dir / "group_pairs.csv") == 30 * 29 / 2 + 1);
  CHECK(fs::exists(a.output_dir / "group_deciles.csv"));
  CHECK(fs::exists(a.output_dir / "item_pairs.csv"));

  ExperimentConfig nopa = toy_config("analyze_nopa");
  nopa.train.epochs = 1;
  nopa.model.pa_mode = PaMode::kNoPa;
  run_train(nopa);
  CHECK_THROWS_AS(run_analyze(nopa, nopa.output_dir / "checkpoint.bin"), DataError);
}

TEST_CASE("fresh contexts give a histogram centred near zero") {
  HyperParams hp;
  hp.dim = 32;
  const ModelParams p = init_params(hp, 10, 200, 10, 1);
  const Histogram h = dot_product_distribution(p.group_context, 20);
  size_t peak = 0;
  for (size_t b = 0; b < h.counts.size(); ++b) {
    if (h.counts[b] > h.counts[peak]) peak = b;
  }
  const double centre = 0.5 * (h.edges[peak] + h.edges[peak + 1]);
  CHECK(std::abs(centre) < 0.1);
  for (size_t b = 1; b <= peak; ++b) CHECK(h.counts[b] + 200 >= h.counts[b - 1]);
  for (size_t b = peak + 1; b < h.counts.size(); ++b) CHECK(h.counts[b] <= h.counts[b - 1] + 200);
}

// Command-line behaviour.

std::string write_config(const fs::path& dir, const std::string& body) {
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << body;
  return (dir / "config.json").string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CFAG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string data_block() {
  const fs::path d = toy_data();
  return R"("data": {"user_group": ")" + (d / "user_group.txt").string() +
         R"(", "user_item": ")" + (d / "user_item.txt").string() +
         R"(", "group_item": ")" + (d / "group_item.txt").string() + R"("})";
}

TEST_CASE("cli exit codes") {
  const fs::path dir = testing::temp_dir("cli");
  const std::string good = write_config(
      dir / "good", "{" + data_block() +
                        R"(, "model": {"dim": 8}, "train": {"epochs": 1, "batch_size": 64}})");
  CHECK(run_cli("train -c " + good + " -o " + (dir / "out").string() + " --threads 2") == 0);
  CHECK(fs::exists(dir / "out" / "eval_report.json"));
  CHECK(run_cli("evaluate -c " + good + " -o " + (dir / "eval").string() +
                " --checkpoint " + (dir / "out" / "checkpoint.bin").string()) == 0);
  CHECK(read_file(dir / "eval" / "eval_report.json") ==
        read_file(dir / "out" / "eval_report.json"));

  const std::string typo = write_config(dir / "typo", "{" + data_block() + R"(, "modle": {}})");
  CHECK(run_cli("train -c " + typo + " -o " + (dir / "x").string()) == 1);
  CHECK(run_cli("train -c " + good + " --set model.dim=7 -o " + (dir / "x").string()) == 1);
  CHECK(run_cli("train") == 1);
  CHECK(run_cli("frobnicate") == 1);

  const std::string missing = write_config(
      dir / "missing", R"({"data": {"user_group": "a.txt", "user_item": "b.txt",
                                    "group_item": "c.txt"}})");
  CHECK(run_cli("train -c " + missing + " -o " + (dir / "x").string()) == 2);

  std::ofstream(dir / "bad_ug.txt") << "0\tzero\n";
  const std::string bad = write_config(
      dir / "bad", R"({"data": {"user_group": ")" + (dir / "bad_ug.txt").string() +
                       R"(", "user_item": ")" + (toy_data() / "user_item.txt").string() +
                       R"(", "group_item": ")" + (toy_data() / "group_item.txt").string() +
                       R"("}})");
  CHECK(run_cli("train -c " + bad + " -o " + (dir / "x").string()) == 2);

  CHECK(run_cli("train -c " + good + " --set model.init_std=1e200 -o " +
                (dir / "overflow").string()) == 3);
}

TEST_CASE("cli threads do not change results") {
  const fs::path dir = testing::temp_dir("cli_threads");
  const std::string cfg = write_config(
      dir, "{" + data_block() + R"(, "model": {"dim": 8}, "train": {"epochs": 2}})");
  REQUIRE(run_cli("train -c " + cfg + " --threads 1 -o " + (dir / "t1").string()) == 0);
  REQUIRE(run_cli("train -c " + cfg + " --threads 3 -o " + (dir / "t3").string()) == 0);
  CHECK(read_file(dir / "t1" / "eval_report.json") == read_file(dir / "t3" / "eval_report.json"));
}

}  // namespace
}  // namespace cfag
