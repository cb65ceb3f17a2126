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

#include "cfag/experiment.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cfag/checkpoint.h"
#include "cfag/errors.h"

namespace cfag {
namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Walks one JSON object, dispatching known keys and rejecting the rest.
class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  void on(const std::string& key, const std::function<void(const Json&, const std::string&)>& f) {
    handlers_[key] = f;
  }

  void run() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      const std::string key_path = path_.empty() ? it.key() : path_ + "." + it.key();
      auto h = handlers_.find(it.key());
      if (h == handlers_.end()) throw ConfigError("unknown config key: " + key_path);
      try {
        h->second(it.value(), key_path);
      } catch (const Json::exception& e) {
        throw ConfigError(key_path + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(key_path + ": " + e.what());
      }
    }
  }

 private:
  const Json& node_;
  std::string path_;
  std::map<std::string, std::function<void(const Json&, const std::string&)>> handlers_;
};

template <typename T>
std::function<void(const Json&, const std::string&)> set(T* target) {
  return [target](const Json& v, const std::string& key) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<int64_t>() < 0 && !v.is_number_unsigned()) {
          throw ConfigError(key + ": expected a non-negative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(key + ": expected a number");
    } else {
      if (!v.is_string()) throw ConfigError(key + ": expected a string");
    }
    *target = v.get<T>();
  };
}

template <typename E>
std::function<void(const Json&, const std::string&)> set_enum(
    E* target, E (*parse)(std::string_view)) {
  return [target, parse](const Json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError(key + ": expected a string");
    *target = parse(v.get<std::string>());
  };
}

std::function<void(const Json&, const std::string&)> set_path(
    fs::path* target, const fs::path& base) {
  return [target, base](const Json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError(key + ": expected a path string");
    fs::path p = v.get<std::string>();
    *target = p.is_relative() && !base.empty() ? base / p : p;
  };
}

Json hyperparams_to_json(const HyperParams& hp) {
  Json j;
  j["dim"] = hp.dim;
  j["layers"] = hp.layers;
  j["pa_beta"] = hp.pa_beta;
  j["leaky_slope"] = hp.leaky_slope;
  j["init_std"] = hp.init_std;
  j["partition"] = std::string(to_string(hp.partition));
  j["merge"] = std::string(to_string(hp.merge));
  j["aggregation"] = std::string(to_string(hp.aggregation));
  j["pa_mode"] = std::string(to_string(hp.pa_mode));
  j["relatedness_orientation"] = std::string(to_string(hp.orientation));
  return j;
}

void parse_hyperparams(const Json& node, const std::string& path, HyperParams* hp) {
  Section s(node, path);
  s.on("dim", set(&hp->dim));
  s.on("layers", set(&hp->layers));
  s.on("pa_beta", set(&hp->pa_beta));
  s.on("leaky_slope", set(&hp->leaky_slope));
  s.on("init_std", set(&hp->init_std));
  s.on("partition", set_enum(&hp->partition, &parse_partition_variant));
  s.on("merge", set_enum(&hp->merge, &parse_merge_variant));
  s.on("aggregation", set_enum(&hp->aggregation, &parse_aggregation_variant));
  s.on("pa_mode", set_enum(&hp->pa_mode, &parse_pa_mode));
  s.on("relatedness_orientation",
       set_enum(&hp->orientation, &parse_relatedness_orientation));
  s.run();
}

std::string annotate(const std::string& key, const fs::path& path,
                     const std::string& what) {
  return key + " (" + path.string() + "): " + what;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

size_t max_user_degree(const TripartiteGraph& g) {
  size_t best = 0;
  for (uint32_t u = 0; u < g.num_users(); ++u) {
    best = std::max(best, g.user_groups(u).size());
  }
  return best;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(train_ratio > 0.0 && train_ratio <= 1.0)) {
    throw ConfigError("split.train_ratio must be in (0, 1]");
  }
  if (!(valid_ratio >= 0.0 && valid_ratio < 1.0)) {
    throw ConfigError("split.valid_ratio must be in [0, 1)");
  }
  if (cutoffs.empty()) throw ConfigError("eval.cutoffs must not be empty");
  for (int k : cutoffs) {
    if (k < 1) throw ConfigError("eval.cutoffs entries must be >= 1");
  }
  for (size_t k : cold_start_k) {
    if (k < 1) throw ConfigError("cold_start.k entries must be >= 1");
  }
  if (histogram_bins < 1) throw ConfigError("analysis.histogram_bins must be >= 1");
  if (user_group_path.empty() || user_item_path.empty() ||
      group_item_path.empty()) {
    throw ConfigError("data.user_group, data.user_item and data.group_item are required");
  }
}

ExperimentConfig config_from_json_text(std::string_view text,
                                       const fs::path& base_dir,
                                       const std::string& origin) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  ExperimentConfig c;
  Section top(root, "");
  top.on("data", [&](const Json& v, const std::string& p) {
    Section s(v, p);
    s.on("user_group", set_path(&c.user_group_path, base_dir));
    s.on("user_item", set_path(&c.user_item_path, base_dir));
    s.on("group_item", set_path(&c.group_item_path, base_dir));
    s.run();
  });
  top.on("split", [&](const Json& v, const std::string& p) {
    Section s(v, p);
    s.on("train_ratio", set(&c.train_ratio));
    s.on("valid_ratio", set(&c.valid_ratio));
    s.on("seed", set(&c.split_seed));
    s.run();
  });
  top.on("model", [&](const Json& v, const std::string& p) {
    parse_hyperparams(v, p, &c.model);
  });
  top.on("train", [&](const Json& v, const std::string& p) {
    Section s(v, p);
    s.on("epochs", set(&c.train.epochs));
    s.on("batch_size", set(&c.train.batch_size));
    s.on("lr", set(&c.train.lr));
    s.on("l2", set(&c.train.l2));
    s.on("patience", set(&c.train.patience));
    s.on("eval_every", set(&c.train.eval_every));
    s.on("seed", set(&c.train.seed));
    s.run();
  });
  top.on("eval", [&](const Json& v, const std::string& p) {
    Section s(v, p);
    s.on("cutoffs", [&](const Json& list, const std::string& key) {
      if (!list.is_array()) throw ConfigError(key + ": expected an array");
      c.cutoffs = list.get<std::vector<int>>();
    });
    s.run();
  });
  top.on("output_dir", set_path(&c.output_dir, base_dir));
  top.on("threads", set(&c.train.threads));
  top.on("cold_start", [&](const Json& v, const std::string& p) {
    Section s(v, p);
    s.on("k", [&](const Json& list, const std::string& key) {
      if (!list.is_array()) throw ConfigError(key + ": expected an array");
      c.cold_start_k.clear();
      for (const Json& e : list) {
        if (e.is_string() && e.get<std::string>() == "inf") {
          c.cold_start_k.push_back(kNoCap);
        } else if (e.is_number_unsigned()) {
          c.cold_start_k.push_back(e.get<size_t>());
        } else {
          throw ConfigError(key + ": entries must be positive integers or \"inf\"");
        }
      }
    });
    s.run();
  });
  top.on("ablation", [&](const Json& v, const std::string& p) {
    Section s(v, p);
    s.on("variants", [&](const Json& list, const std::string& key) {
      if (!list.is_array()) throw ConfigError(key + ": expected an array");
      c.ablation_variants = list.get<std::vector<std::string>>();
      for (const auto& name : c.ablation_variants) (void)apply_variant(c.model, name);
    });
    s.run();
  });
  top.on("analysis", [&](const Json& v, const std::string& p) {
    Section s(v, p);
    s.on("histogram_bins", set(&c.histogram_bins));
    s.on("items", set(&c.analyze_items));
    s.run();
  });
  top.run();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig c =
      config_from_json_text(buf.str(), path.parent_path(), path.string());
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  Json root;
  root["data"]["user_group"] = c.user_group_path.string();
  root["data"]["user_item"] = c.user_item_path.string();
  root["data"]["group_item"] = c.group_item_path.string();
  root["split"]["train_ratio"] = c.train_ratio;
  root["split"]["valid_ratio"] = c.valid_ratio;
  root["split"]["seed"] = c.split_seed;
  root["model"] = hyperparams_to_json(c.model);
  root["train"]["epochs"] = c.train.epochs;
  root["train"]["batch_size"] = c.train.batch_size;
  root["train"]["lr"] = c.train.lr;
  root["train"]["l2"] = c.train.l2;
  root["train"]["patience"] = c.train.patience;
  root["train"]["eval_every"] = c.train.eval_every;
  root["train"]["seed"] = c.train.seed;
  root["eval"]["cutoffs"] = c.cutoffs;
  root["output_dir"] = c.output_dir.string();
  root["threads"] = c.train.threads;
  Json ks = Json::array();
  for (size_t k : c.cold_start_k) {
    if (k == kNoCap) {
      ks.push_back("inf");
    } else {
      ks.push_back(k);
    }
  }
  root["cold_start"]["k"] = ks;
  root["ablation"]["variants"] = c.ablation_variants;
  root["analysis"]["histogram_bins"] = c.histogram_bins;
  root["analysis"]["items"] = c.analyze_items;
  return root.dump(2) + "\n";
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like section.key=value: " +
                      std::string(assignment));
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  Json root = Json::parse(config_to_json(config));
  Json* node = &root;
  std::string_view rest = key;
  while (true) {
    const size_t dot = rest.find('.');
    const std::string part(rest.substr(0, dot));
    if (dot == std::string_view::npos) {
      if (!node->is_object() || !node->contains(part)) {
        throw ConfigError("unknown config key: " + key);
      }
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part)) throw ConfigError("unknown config key: " + key);
    node = &(*node)[part];
    rest = rest.substr(dot + 1);
  }
  config = config_from_json_text(root.dump(), fs::path(), "override " + key);
}

TripartiteGraph load_dataset(const ExperimentConfig& config) {
  auto load = [](const char* key, const fs::path& p, Relation r) {
    try {
      return load_edge_list(p, r);
    } catch (const DataError& e) {
      throw DataError(annotate(key, p, e.what()));
    }
  };
  EdgeList ug = load("data.user_group", config.user_group_path, Relation::kUserGroup);
  EdgeList ui = load("data.user_item", config.user_item_path, Relation::kUserItem);
  EdgeList gi = load("data.group_item", config.group_item_path, Relation::kGroupItem);
  const size_t n_users = std::max(ug.n_src, ui.n_src);
  const size_t n_groups = std::max(ug.n_dst, gi.n_src);
  const size_t n_items = std::max(ui.n_dst, gi.n_dst);
  return TripartiteGraph(n_users, n_groups, n_items, std::move(ug.edges),
                         std::move(ui.edges), std::move(gi.edges));
}

DatasetSplit make_split(const ExperimentConfig& config,
                        const TripartiteGraph& graph) {
  return split_per_user(graph, config.train_ratio, config.valid_ratio,
                        config.split_seed);
}

HyperParams apply_variant(HyperParams hp, std::string_view variant) {
  hp.partition = PartitionVariant::kSplit;
  hp.merge = MergeVariant::kConcat;
  hp.pa_mode = PaMode::kFull;
  if (variant == "cfag") return hp;
  if (variant == "p1") {
    hp.partition = PartitionVariant::kLinear;
  } else if (variant == "m1") {
    hp.merge = MergeVariant::kFcBefore;
  } else if (variant == "m2") {
    hp.merge = MergeVariant::kFcAfter;
  } else if (variant == "no_pa") {
    hp.pa_mode = PaMode::kNoPa;
  } else if (variant == "no_item") {
    hp.pa_mode = PaMode::kNoItem;
  } else if (variant == "no_group") {
    hp.pa_mode = PaMode::kNoGroup;
  } else {
    throw ConfigError("unknown ablation variant: " + std::string(variant));
  }
  return hp;
}

void save_model(const fs::path& path, const ModelParams& params,
                const HyperParams& hp) {
  write_checkpoint(path, params.to_named());
  OrderedJson side;
  side["format_version"] = kCheckpointVersion;
  side["n_users"] = params.n_users;
  side["n_groups"] = params.n_groups;
  side["n_items"] = params.n_items;
  side["model"] = hyperparams_to_json(hp);
  write_text(fs::path(path.string() + ".json"), side.dump(2) + "\n");
}

LoadedModel load_model(const fs::path& path) {
  const fs::path side_path = path.string() + ".json";
  std::ifstream in(side_path);
  if (!in) throw DataError("missing checkpoint sidecar " + side_path.string());
  Json side;
  try {
    side = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(side_path.string() + ": " + e.what());
  }
  LoadedModel m;
  size_t nu = 0, ng = 0, ni = 0;
  try {
    nu = side.at("n_users").get<size_t>();
    ng = side.at("n_groups").get<size_t>();
    ni = side.at("n_items").get<size_t>();
    parse_hyperparams(side.at("model"), "model", &m.hp);
  } catch (const Json::exception& e) {
    throw DataError(side_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(side_path.string() + ": " + e.what());
  }
  const auto matrices = read_checkpoint(path);
  m.params = params_from_named(matrices, m.hp, nu, ng, ni);
  return m;
}

TrainOutcome train_and_report(const ExperimentConfig& config,
                              const DatasetSplit& split, const fs::path& out_dir) {
  if (split.test_ug.empty()) throw DataError("split has no test edges");
  fs::create_directories(out_dir);
  TrainOutcome outcome;
  outcome.fit = fit(split, config.model, config.train);
  outcome.test_report =
      evaluate(outcome.fit.params, split, config.model, EvalTarget::kTest,
               config.cutoffs, config.train.threads);
  save_model(out_dir / "checkpoint.bin", outcome.fit.params, config.model);
  write_training_log(out_dir / "train_log.csv", outcome.fit.log);
  write_report_json(out_dir / "eval_report.json", outcome.test_report);
  write_user_csv(out_dir / "eval_users.csv", outcome.test_report);
  return outcome;
}

TrainOutcome run_train(const ExperimentConfig& config) {
  config.validate();
  const TripartiteGraph graph = load_dataset(config);
  const DatasetSplit split = make_split(config, graph);
  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "config.json", config_to_json(config));
  write_split_manifest(split,
                       {config.train_ratio, config.valid_ratio, config.split_seed, 0},
                       config.output_dir / "split");
  return train_and_report(config, split, config.output_dir);
}

EvalReport run_evaluate(const ExperimentConfig& config,
                        const fs::path& checkpoint) {
  config.validate();
  const LoadedModel model = load_model(checkpoint);
  const TripartiteGraph graph = load_dataset(config);
  if (model.params.n_users != graph.num_users() ||
      model.params.n_groups != graph.num_groups() ||
      model.params.n_items != graph.num_items()) {
    throw DataError("checkpoint " + checkpoint.string() +
                    " does not match the dataset node counts");
  }
  const DatasetSplit split = make_split(config, graph);
  EvalReport report = evaluate(model.params, split, model.hp, EvalTarget::kTest,
                               config.cutoffs, config.train.threads);
  fs::create_directories(config.output_dir);
  write_report_json(config.output_dir / "eval_report.json", report);
  write_user_csv(config.output_dir / "eval_users.csv", report);
  return report;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config,
                                      const std::vector<std::string>& variants) {
  config.validate();
  if (variants.empty()) throw ConfigError("ablation needs at least one variant");
  const TripartiteGraph graph = load_dataset(config);
  const DatasetSplit split = make_split(config, graph);
  fs::create_directories(config.output_dir);
  std::vector<AblationRow> rows;
  for (const std::string& v : variants) {
    AblationRow row;
    row.variant = v;
    try {
      ExperimentConfig vc = config;
      vc.model = apply_variant(config.model, v);
      TrainOutcome o = train_and_report(vc, split, config.output_dir / v);
      row.ok = true;
      row.recall10 = o.test_report.recall_at(10);
      row.ndcg10 = o.test_report.ndcg_at(10);
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(row);
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "variant,status,recall@10,ndcg@10\n";
  for (const AblationRow& r : rows) {
    csv << r.variant << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) csv << r.recall10 << ',' << r.ndcg10;
    else csv << ',';
    csv << '\n';
  }
  write_text(config.output_dir / "ablation.csv", csv.str());
  return rows;
}

std::vector<ColdStartRow> run_cold_start(const ExperimentConfig& config,
                                         const std::vector<size_t>& ks) {
  config.validate();
  if (ks.empty()) throw ConfigError("cold-start needs at least one k");
  const TripartiteGraph graph = load_dataset(config);
  const DatasetSplit split = make_split(config, graph);
  fs::create_directories(config.output_dir);
  std::vector<ColdStartRow> rows;
  for (size_t k : ks) {
    if (k < 1) throw ConfigError("cold-start k must be >= 1");
    const DatasetSplit capped =
        k == kNoCap ? split : cap_user_groups(split, k, config.split_seed + k);
    const std::string name = k == kNoCap ? "k_inf" : "k_" + std::to_string(k);
    TrainOutcome o = train_and_report(config, capped, config.output_dir / name);
    ColdStartRow row;
    row.k = k;
    row.train_ug_edges = capped.train.edges(Relation::kUserGroup).size();
    row.max_user_degree = max_user_degree(capped.train);
    row.report = std::move(o.test_report);
    rows.push_back(std::move(row));
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "k,train_ug_edges,max_user_degree";
  for (int c : config.cutoffs) csv << ",recall@" << c;
  for (int c : config.cutoffs) csv << ",ndcg@" << c;
  csv << '\n';
  for (const ColdStartRow& r : rows) {
    if (r.k == kNoCap) csv << "inf";
    else csv << r.k;
    csv << ',' << r.train_ug_edges << ',' << r.max_user_degree;
    for (double v : r.report.recall) csv << ',' << v;
    for (double v : r.report.ndcg) csv << ',' << v;
    csv << '\n';
  }
  write_text(config.output_dir / "cold_start.csv", csv.str());
  return rows;
}

AnalysisOutcome run_analyze(const ExperimentConfig& config,
                            const fs::path& checkpoint) {
  config.validate();
  const LoadedModel model = load_model(checkpoint);
  const TripartiteGraph graph = load_dataset(config);
  if (model.params.n_users != graph.num_users() ||
      model.params.n_groups != graph.num_groups() ||
      model.params.n_items != graph.num_items()) {
    throw DataError("checkpoint " + checkpoint.string() +
                    " does not match the dataset node counts");
  }
  if (model.params.group_context.size() == 0) {
    throw DataError("checkpoint " + checkpoint.string() +
                    " has no contextual embeddings");
  }
  fs::create_directories(config.output_dir);
  AnalysisOutcome out;
  out.group_histogram =
      dot_product_distribution(model.params.group_context, config.histogram_bins);
  out.group_correlation = relatedness_vs_ratio(
      graph, relatedness_matrix(model.params.group_context, model.hp.orientation),
      NodeType::kGroup);
  write_histogram_csv(config.output_dir / "group_dot_products.csv",
                      out.group_histogram);
  write_pairs_csv(config.output_dir / "group_pairs.csv", out.group_correlation);
  write_deciles_csv(config.output_dir / "group_deciles.csv", out.group_correlation);
  if (config.analyze_items) {
    out.item_histogram =
        dot_product_distribution(model.params.item_context, config.histogram_bins);
    out.item_correlation = relatedness_vs_ratio(
        graph, relatedness_matrix(model.params.item_context, model.hp.orientation),
        NodeType::kItem);
    write_histogram_csv(config.output_dir / "item_dot_products.csv",
                        *out.item_histogram);
    write_pairs_csv(config.output_dir / "item_pairs.csv", *out.item_correlation);
    write_deciles_csv(config.output_dir / "item_deciles.csv", *out.item_correlation);
  }
  return out;
}

}  // namespace cfag
