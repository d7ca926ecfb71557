// Copyright 2026 The LMRC Authors
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

// Pipeline driver: composable subcommands with persisted intermediates.
// Exit codes: 0 success, 1 internal failure, 2 configuration or input
// error, 3 partial batch failure (some requests failed; ledger has the rest).

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmrc/lmrc.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string train_corpus;
  std::string dev_corpus;
  std::string target_corpus;
  std::string relation_info;
  std::string output_dir;
  uint64_t seed = 0;
  int parallelism = 0;
  double rate_per_sec = 0.0;
  int max_tokens = 0;
  double temperature = 0.0;

  int k = 0;
  std::string mode;
  int n_shots = -1;
  int max_prompt_chars = -1;

  double tau = -1.0;
  int epochs = -1;
  int batch_size = 0;
  double lr_head = 0.0;
  double lr_encoder = 0.0;
  int patience = -1;

  double theta = -2.0;
  double fuzzy_threshold = -1.0;
  bool no_ood = false;

  std::string backend_type;
  std::string mock_behavior;
  double drop_rate = -1.0;
  double corrupt_rate = -1.0;
  std::string base_url;
  std::string model;
  std::string api_key_env;

  std::string checkpoint;
  std::string proposals;
  std::string ledger;
  std::string corpus;
  std::string grid_spec;
};

void add_common_options(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path, "JSON pipeline config; flags override its fields");
  sub->add_option("--train-corpus", o.train_corpus, "training split (JSON array or JSONL)");
  sub->add_option("--dev-corpus", o.dev_corpus, "development split");
  sub->add_option("--target-corpus", o.target_corpus, "split to propose/infer/score on");
  sub->add_option("--relation-info", o.relation_info, "relation id -> display name map");
  sub->add_option("--output-dir", o.output_dir, "artifact directory");
  sub->add_option("--seed", o.seed, "master seed for every stochastic choice");
  sub->add_option("--parallelism", o.parallelism, "worker threads for generation");
  sub->add_option("--rate-per-sec", o.rate_per_sec, "request rate limit (0 = unthrottled)");
  sub->add_option("--max-tokens", o.max_tokens, "generation token budget");
  sub->add_option("--temperature", o.temperature, "decoding temperature");
  sub->add_option("--k", o.k, "entity pairs per prompt");
  sub->add_option("--mode", o.mode, "baseline_docre | relation_classification");
  sub->add_option("--n-shots", o.n_shots, "few-shot exemplar count");
  sub->add_option("--max-prompt-chars", o.max_prompt_chars, "prompt budget (0 = unchecked)");
  sub->add_option("--tau", o.tau, "NA-probability proposal threshold");
  sub->add_option("--epochs", o.epochs, "training epochs");
  sub->add_option("--batch-size", o.batch_size, "documents per optimization step");
  sub->add_option("--lr-head", o.lr_head, "classifier head learning rate");
  sub->add_option("--lr-encoder", o.lr_encoder, "encoder learning rate");
  sub->add_option("--patience", o.patience, "early-stopping patience (0 = off)");
  sub->add_option("--theta", o.theta, "cosine threshold for out-of-domain relations");
  sub->add_option("--fuzzy-threshold", o.fuzzy_threshold, "entity fuzzy-match cutoff [0,100]");
  sub->add_flag("--no-ood", o.no_ood, "disable out-of-domain relation alignment");
  sub->add_option("--backend", o.backend_type, "mock | http");
  sub->add_option("--mock-behavior", o.mock_behavior,
                  "gold_echo | drop_rate | corrupt_rate | canned");
  sub->add_option("--drop-rate", o.drop_rate, "mock per-line drop probability");
  sub->add_option("--corrupt-rate", o.corrupt_rate, "mock per-line corruption probability");
  sub->add_option("--base-url", o.base_url, "http backend base URL");
  sub->add_option("--model", o.model, "http backend model name");
  sub->add_option("--api-key-env", o.api_key_env, "env var holding the API key");
}

lmrc::PipelineConfig build_config(const CLI::App* sub, const Options& o) {
  lmrc::PipelineConfig cfg;
  if (sub->count("--config") > 0) {
    nlohmann::json j = nlohmann::json::parse(lmrc::read_text_file(o.config_path), nullptr, false);
    if (j.is_discarded()) throw lmrc::ConfigError("config file is not valid JSON: " + o.config_path);
    cfg = j.get<lmrc::PipelineConfig>();
  }
  auto set = [&](const char* flag) { return sub->count(flag) > 0; };
  if (set("--train-corpus")) cfg.train_corpus = o.train_corpus;
  if (set("--dev-corpus")) cfg.dev_corpus = o.dev_corpus;
  if (set("--target-corpus")) cfg.target_corpus = o.target_corpus;
  if (set("--relation-info")) cfg.relation_info = o.relation_info;
  if (set("--output-dir")) cfg.output_dir = o.output_dir;
  if (set("--seed")) {
    cfg.seed = o.seed;
    cfg.rcp.seed = o.seed;
  }
  if (set("--parallelism")) cfg.parallelism = o.parallelism;
  if (set("--rate-per-sec")) cfg.rate_per_sec = o.rate_per_sec;
  if (set("--max-tokens")) cfg.max_tokens = o.max_tokens;
  if (set("--temperature")) cfg.temperature = o.temperature;
  if (set("--k")) cfg.prompt.k = o.k;
  if (set("--mode")) cfg.prompt.mode = lmrc::prompt_mode_from_string(o.mode);
  if (set("--n-shots")) cfg.prompt.n_shots = o.n_shots;
  if (set("--max-prompt-chars")) cfg.prompt.max_prompt_chars = o.max_prompt_chars;
  if (set("--tau")) cfg.rcp.na_threshold = o.tau;
  if (set("--epochs")) cfg.rcp.epochs = o.epochs;
  if (set("--batch-size")) cfg.rcp.batch_size = o.batch_size;
  if (set("--lr-head")) cfg.rcp.lr_head = o.lr_head;
  if (set("--lr-encoder")) cfg.rcp.lr_encoder = o.lr_encoder;
  if (set("--patience")) cfg.rcp.patience = o.patience;
  if (set("--theta")) cfg.align.theta = o.theta;
  if (set("--fuzzy-threshold")) cfg.align.fuzzy_threshold = o.fuzzy_threshold;
  if (set("--no-ood")) cfg.align.align_out_of_domain_enabled = false;
  if (set("--backend")) cfg.backend_spec["type"] = o.backend_type;
  if (set("--mock-behavior")) cfg.backend_spec["behavior"] = o.mock_behavior;
  if (set("--drop-rate")) cfg.backend_spec["drop_rate"] = o.drop_rate;
  if (set("--corrupt-rate")) cfg.backend_spec["corrupt_rate"] = o.corrupt_rate;
  if (set("--base-url")) cfg.backend_spec["base_url"] = o.base_url;
  if (set("--model")) cfg.backend_spec["model"] = o.model;
  if (set("--api-key-env")) cfg.backend_spec["api_key_env"] = o.api_key_env;
  return cfg;
}

// "a,b,c" or "start:stop:points"
std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> grid;
  if (spec.empty()) {
    for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) * 0.05);
    return grid;
  }
  if (spec.find(':') != std::string::npos) {
    double start = 0.0;
    double stop = 1.0;
    int points = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &start, &stop, &points) != 3 || points < 1) {
      throw lmrc::ConfigError("grid spec must be start:stop:points, got '" + spec + "'");
    }
    for (int i = 0; i < points; ++i) {
      grid.push_back(points == 1 ? start : start + (stop - start) * i / (points - 1));
    }
    return grid;
  }
  size_t pos = 0;
  while (pos <= spec.size()) {
    size_t comma = spec.find(',', pos);
    std::string item =
        spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!lmrc::trim(item).empty()) grid.push_back(std::stod(lmrc::trim(item)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (grid.empty()) throw lmrc::ConfigError("grid spec parsed to no values: '" + spec + "'");
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LMRC: two-stage document-level relation extraction pipeline"};
  app.require_subcommand(1);
  Options o;

  CLI::App* train = app.add_subcommand("train-rcp", "train the relation candidate proposer");
  add_common_options(train, o);

  CLI::App* propose = app.add_subcommand("propose", "score pairs and emit proposals");
  add_common_options(propose, o);
  propose->add_option("--checkpoint", o.checkpoint, "trained checkpoint path");

  CLI::App* runrc = app.add_subcommand("run-rc", "run relation classification over proposals");
  add_common_options(runrc, o);
  runrc->add_option("--proposals", o.proposals, "proposals file (relation_classification mode)");

  CLI::App* score = app.add_subcommand("score", "parse responses, align, and evaluate");
  add_common_options(score, o);
  score->add_option("--ledger", o.ledger, "responses ledger path");
  score->add_option("--proposals", o.proposals, "proposals file for RCP binary metrics");

  CLI::App* exportft = app.add_subcommand("export-ft", "export the fine-tuning dataset");
  add_common_options(exportft, o);

  CLI::App* sweep = app.add_subcommand("sweep-theta", "score across a theta grid");
  add_common_options(sweep, o);
  sweep->add_option("--ledger", o.ledger, "responses ledger path");
  sweep->add_option("--grid", o.grid_spec, "comma list or start:stop:points (default 0:1:21)");

  CLI::App* stats = app.add_subcommand("stats", "corpus statistics");
  add_common_options(stats, o);
  stats->add_option("--corpus", o.corpus, "corpus to summarize (default: target corpus)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      lmrc::PipelineConfig cfg = build_config(train, o);
      lmrc::TrainStageResult r = lmrc::stage_train_rcp(cfg);
      std::cout << "checkpoint: " << r.checkpoint_path << "\n"
                << "best_dev_f1: " << r.train.best_dev_f1 << " (epoch " << r.train.best_epoch
                << ", " << r.train.steps_taken << " steps)\n";
    } else if (propose->parsed()) {
      lmrc::PipelineConfig cfg = build_config(propose, o);
      double tau_override = propose->count("--tau") > 0 ? o.tau : -1.0;
      lmrc::ProposeStageResult r = lmrc::stage_propose(cfg, o.checkpoint, tau_override);
      std::cout << "proposals: " << r.proposals_path << "\n"
                << "proposed " << r.proposals.proposals.size() << " of "
                << r.proposals.total_pairs << " pairs at tau " << r.tau << " ("
                << r.proposals.truncated_pairs << " truncated, "
                << r.proposals.degenerate_contexts << " degenerate contexts)\n";
    } else if (runrc->parsed()) {
      lmrc::PipelineConfig cfg = build_config(runrc, o);
      lmrc::RunRcStageResult r = lmrc::stage_run_rc(cfg, o.proposals);
      std::cout << "ledger: " << r.ledger_path << "\n"
                << "requests " << r.requests << " (sent " << r.report.sent << ", resumed "
                << r.report.resumed << ", failed " << r.report.failed.size() << ")\n";
      if (!r.report.failed.empty()) {
        for (const lmrc::RequestTag& tag : r.report.failed) {
          std::cerr << "failed: " << tag.doc_id << " chunk " << tag.chunk_index << "\n";
        }
        return 3;
      }
    } else if (score->parsed()) {
      lmrc::PipelineConfig cfg = build_config(score, o);
      lmrc::ScoreStageResult r = lmrc::stage_score(cfg, o.ledger, o.proposals);
      std::cout << lmrc::format_metrics_text(r) << "metrics: " << r.metrics_path << "\n"
                << "predictions: " << r.predictions_path << "\n";
    } else if (exportft->parsed()) {
      lmrc::PipelineConfig cfg = build_config(exportft, o);
      lmrc::ExportStageResult r = lmrc::stage_export_ft(cfg);
      std::cout << "dataset: " << r.dataset_path << " (" << r.records << " records)\n";
    } else if (sweep->parsed()) {
      lmrc::PipelineConfig cfg = build_config(sweep, o);
      lmrc::SweepStageResult r = lmrc::stage_sweep_theta(cfg, parse_grid(o.grid_spec), o.ledger);
      std::cout << "sweep: " << r.table_path << " (" << r.rows.size() << " rows)\n";
    } else if (stats->parsed()) {
      lmrc::PipelineConfig cfg = build_config(stats, o);
      std::string corpus_path = o.corpus.empty() ? cfg.target_corpus : o.corpus;
      std::cout << lmrc::stage_stats(cfg, corpus_path).dump(2) << "\n";
    }
  } catch (const lmrc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lmrc::ValidationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const lmrc::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
