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

#ifndef LMRC_PIPELINE_HPP
#define LMRC_PIPELINE_HPP

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"
#include "lmrc/embedder.hpp"
#include "lmrc/encoder.hpp"
#include "lmrc/evaluation.hpp"
#include "lmrc/http_backend.hpp"
#include "lmrc/io.hpp"
#include "lmrc/llm_backend.hpp"
#include "lmrc/parsing.hpp"
#include "lmrc/prompting.hpp"
#include "lmrc/rcp_train.hpp"

namespace lmrc {

struct PipelineConfig {
  std::string train_corpus;
  std::string dev_corpus;
  std::string target_corpus;  // the split proposals / inference / scoring run on
  std::string relation_info;
  nlohmann::json encoder_spec = {
      {"type", "hash"}, {"dim", 64}, {"heads", 4}, {"max_length", 512}, {"seed", 13}};
  RCPConfig rcp;
  PromptConfig prompt;
  nlohmann::json backend_spec = {{"type", "mock"}, {"behavior", "gold_echo"}};
  AlignmentConfig align;
  nlohmann::json embedder_spec = {{"type", "trigram_hash"}};
  std::string output_dir = "out";
  uint64_t seed = 42;
  int parallelism = 1;
  double rate_per_sec = 0.0;  // 0 = unthrottled
  int max_tokens = 1024;
  double temperature = 0.0;
  std::vector<std::string> stop = {"\n\n"};

  void validate() const {
    rcp.validate();
    prompt.validate();
    align.validate();
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (rate_per_sec < 0.0) throw ConfigError("rate_per_sec must be >= 0");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
  }
};

inline void to_json(nlohmann::json& j, const AlignmentConfig& c) {
  j = nlohmann::json{{"fuzzy_threshold", c.fuzzy_threshold},
                     {"theta", c.theta},
                     {"align_out_of_domain_enabled", c.align_out_of_domain_enabled}};
}

inline void from_json(const nlohmann::json& j, AlignmentConfig& c) {
  AlignmentConfig d;
  c.fuzzy_threshold = j.value("fuzzy_threshold", d.fuzzy_threshold);
  c.theta = j.value("theta", d.theta);
  c.align_out_of_domain_enabled =
      j.value("align_out_of_domain_enabled", d.align_out_of_domain_enabled);
}

inline void to_json(nlohmann::json& j, const PromptConfig& c) {
  j = nlohmann::json{{"k", c.k},
                     {"mode", to_string(c.mode)},
                     {"n_shots", c.n_shots},
                     {"max_prompt_chars", c.max_prompt_chars}};
}

inline void from_json(const nlohmann::json& j, PromptConfig& c) {
  PromptConfig d;
  c.k = j.value("k", d.k);
  c.mode = prompt_mode_from_string(j.value("mode", to_string(d.mode)));
  c.n_shots = j.value("n_shots", d.n_shots);
  c.max_prompt_chars = j.value("max_prompt_chars", d.max_prompt_chars);
}

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"train_corpus", c.train_corpus},
                     {"dev_corpus", c.dev_corpus},
                     {"target_corpus", c.target_corpus},
                     {"relation_info", c.relation_info},
                     {"encoder", c.encoder_spec},
                     {"rcp", c.rcp},
                     {"prompt", c.prompt},
                     {"backend", c.backend_spec},
                     {"alignment", c.align},
                     {"embedder", c.embedder_spec},
                     {"output_dir", c.output_dir},
                     {"seed", c.seed},
                     {"parallelism", c.parallelism},
                     {"rate_per_sec", c.rate_per_sec},
                     {"max_tokens", c.max_tokens},
                     {"temperature", c.temperature},
                     {"stop", c.stop}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
  PipelineConfig d;
  c.train_corpus = j.value("train_corpus", d.train_corpus);
  c.dev_corpus = j.value("dev_corpus", d.dev_corpus);
  c.target_corpus = j.value("target_corpus", d.target_corpus);
  c.relation_info = j.value("relation_info", d.relation_info);
  c.encoder_spec = j.value("encoder", d.encoder_spec);
  if (j.contains("rcp")) c.rcp = j.at("rcp").get<RCPConfig>();
  if (j.contains("prompt")) c.prompt = j.at("prompt").get<PromptConfig>();
  c.backend_spec = j.value("backend", d.backend_spec);
  if (j.contains("alignment")) c.align = j.at("alignment").get<AlignmentConfig>();
  c.embedder_spec = j.value("embedder", d.embedder_spec);
  c.output_dir = j.value("output_dir", d.output_dir);
  c.seed = j.value("seed", d.seed);
  c.parallelism = j.value("parallelism", d.parallelism);
  c.rate_per_sec = j.value("rate_per_sec", d.rate_per_sec);
  c.max_tokens = j.value("max_tokens", d.max_tokens);
  c.temperature = j.value("temperature", d.temperature);
  c.stop = j.value("stop", d.stop);
  // the single pipeline seed fixes every stochastic choice unless a stage
  // seed is pinned explicitly
  if (j.contains("rcp") && !j.at("rcp").contains("seed")) c.rcp.seed = c.seed;
  if (!j.contains("rcp")) c.rcp.seed = c.seed;
}

namespace detail {

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is not configured");
  if (!std::filesystem::exists(path)) throw ConfigError(what + " not found: " + path);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

inline std::string out_path(const PipelineConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

}  // namespace detail

struct TrainStageResult {
  std::string checkpoint_path;
  std::string log_path;
  TrainResult train;
};

inline TrainStageResult stage_train_rcp(const PipelineConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  detail::require_file(cfg.relation_info, "relation_info");
  detail::require_file(cfg.train_corpus, "train corpus");
  RelationSet relations = load_relation_info(cfg.relation_info);
  std::vector<Document> train_docs = load_documents(cfg.train_corpus, relations);
  std::vector<Document> dev_docs;
  if (!cfg.dev_corpus.empty()) {
    detail::require_file(cfg.dev_corpus, "dev corpus");
    dev_docs = load_documents(cfg.dev_corpus, relations);
  }
  std::shared_ptr<EncoderProvider> encoder = make_encoder(cfg.encoder_spec);

  TrainStageResult out;
  out.train = train_rcp(train_docs, dev_docs, *encoder, cfg.rcp);

  Checkpoint ckpt;
  ckpt.params = out.train.params;
  ckpt.na_threshold = cfg.rcp.na_threshold;
  ckpt.encoder_spec = cfg.encoder_spec;
  ckpt.config = cfg.rcp;
  out.checkpoint_path = detail::out_path(cfg, "checkpoint.json");
  save_checkpoint(out.checkpoint_path, ckpt);

  std::vector<nlohmann::json> log;
  for (const EpochStats& e : out.train.trajectory) {
    log.push_back(nlohmann::json{{"epoch", e.epoch},
                                 {"train_loss", e.train_loss},
                                 {"dev_precision", e.dev.precision},
                                 {"dev_recall", e.dev.recall},
                                 {"dev_f1", e.dev.f1}});
  }
  out.log_path = detail::out_path(cfg, "train_log.jsonl");
  write_jsonl(out.log_path, log);

  RunManifest manifest{nlohmann::json(cfg)};
  manifest.add_artifact(out.checkpoint_path);
  manifest.add_artifact(out.log_path);
  manifest.add_timing("train_rcp", detail::elapsed_ms(t0));
  manifest.write(detail::out_path(cfg, "manifest_train.json"));
  return out;
}

struct ProposeStageResult {
  std::string proposals_path;
  ProposalResult proposals;
  double tau = 0.0;
};

// tau_override outside [0,1] means "use the checkpoint's threshold".
inline ProposeStageResult stage_propose(const PipelineConfig& cfg,
                                        const std::string& checkpoint_path_in = "",
                                        double tau_override = -1.0) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  std::string checkpoint_path = checkpoint_path_in.empty()
                                    ? detail::out_path(cfg, "checkpoint.json")
                                    : checkpoint_path_in;
  detail::require_file(checkpoint_path, "checkpoint");
  detail::require_file(cfg.relation_info, "relation_info");
  detail::require_file(cfg.target_corpus, "target corpus");

  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RelationSet relations = load_relation_info(cfg.relation_info);
  std::vector<Document> docs = load_documents(cfg.target_corpus, relations);
  std::shared_ptr<EncoderProvider> encoder = make_encoder(ckpt.encoder_spec);

  ProposeStageResult out;
  out.tau = (tau_override >= 0.0 && tau_override <= 1.0) ? tau_override : ckpt.na_threshold;
  out.proposals = propose_corpus(docs, *encoder, ckpt.params, out.tau);
  out.proposals_path = detail::out_path(cfg, "proposals.jsonl");
  write_proposals(out.proposals_path, out.proposals.proposals);

  nlohmann::json stats{{"tau", out.tau},
                       {"total_pairs", out.proposals.total_pairs},
                       {"proposed", static_cast<long>(out.proposals.proposals.size())},
                       {"truncated_pairs", out.proposals.truncated_pairs},
                       {"degenerate_contexts", out.proposals.degenerate_contexts}};
  std::string stats_path = detail::out_path(cfg, "propose_stats.json");
  write_text_file(stats_path, stats.dump(2) + "\n");

  RunManifest manifest{nlohmann::json(cfg)};
  manifest.add_artifact(out.proposals_path);
  manifest.add_artifact(stats_path);
  manifest.add_timing("propose", detail::elapsed_ms(t0));
  manifest.write(detail::out_path(cfg, "manifest_propose.json"));
  return out;
}

namespace detail {

// Chunks per document for the inference stage: the RC mode consumes the
// proposal file; the baseline mode chunks the full candidate space.
inline std::vector<std::pair<const Document*, std::vector<std::vector<EntityPair>>>>
plan_chunks(const std::vector<Document>& docs, const PipelineConfig& cfg,
            const std::vector<EntityPair>* proposals) {
  std::map<std::string, std::vector<EntityPair>> by_doc;
  if (cfg.prompt.mode == PromptMode::relation_classification) {
    if (proposals == nullptr) {
      throw ConfigError("relation_classification mode needs a proposals file");
    }
    for (const EntityPair& p : *proposals) by_doc[p.doc_id].push_back(p);
  }
  std::vector<std::pair<const Document*, std::vector<std::vector<EntityPair>>>> plan;
  for (const Document& doc : docs) {
    std::vector<EntityPair> pairs;
    if (cfg.prompt.mode == PromptMode::baseline_docre) {
      pairs = candidate_pairs(doc);
    } else {
      auto it = by_doc.find(doc.doc_id);
      if (it != by_doc.end()) pairs = it->second;
    }
    plan.emplace_back(&doc, chunk_pairs(pairs, cfg.prompt.k));
  }
  return plan;
}

inline std::unique_ptr<LlmBackend> make_mock_backend(
    const PipelineConfig& cfg, const RelationSet& relations,
    const std::vector<std::pair<const Document*, std::vector<std::vector<EntityPair>>>>& plan) {
  const nlohmann::json& spec = cfg.backend_spec;
  MockScript script;
  script.behavior = mock_behavior_from_string(spec.value("behavior", "gold_echo"));
  script.drop_rate = spec.value("drop_rate", 0.0);
  script.corrupt_rate = spec.value("corrupt_rate", 0.0);
  script.seed = spec.value("seed", cfg.seed);
  for (const auto& entry : relations.entries()) script.relation_names.push_back(entry.second);

  if (script.behavior == MockBehavior::canned) {
    for (const nlohmann::json& r : spec.value("responses", nlohmann::json::array())) {
      RequestTag tag{r.at("doc_id").get<std::string>(), r.at("chunk_index").get<int>()};
      script.responses[tag_key(tag)] = r.at("text").get<std::string>();
    }
  } else {
    for (const auto& [doc, chunks] : plan) {
      if (!doc->labels_present) {
        throw ConfigError("mock behavior '" + to_string(script.behavior) +
                          "' needs gold labels; document '" + doc->doc_id + "' has none");
      }
      for (size_t ci = 0; ci < chunks.size(); ++ci) {
        RequestTag tag{doc->doc_id, static_cast<int>(ci)};
        script.responses[tag_key(tag)] =
            gold_completion(*doc, chunks[ci], relations, cfg.prompt.mode);
      }
    }
  }
  return std::make_unique<MockBackend>(std::move(script));
}

inline std::unique_ptr<LlmBackend> make_http_backend(const PipelineConfig& cfg, Clock& clock) {
  const nlohmann::json& spec = cfg.backend_spec;
  HttpBackendConfig hc;
  hc.base_url = spec.value("base_url", hc.base_url);
  hc.path = spec.value("path", hc.path);
  hc.model = spec.value("model", hc.model);
  hc.system_prompt = spec.value("system_prompt", hc.system_prompt);
  hc.api_key_env = spec.value("api_key_env", hc.api_key_env);
  hc.timeout_ms = spec.value("timeout_ms", hc.timeout_ms);
  hc.max_retries = spec.value("max_retries", hc.max_retries);
  hc.backoff_base_ms = spec.value("backoff_base_ms", hc.backoff_base_ms);
  return std::make_unique<HttpBackend>(std::move(hc), clock);
}

}  // namespace detail

struct RunRcStageResult {
  std::string ledger_path;
  BatchReport report;
  long requests = 0;
};

inline RunRcStageResult stage_run_rc(const PipelineConfig& cfg,
                                     const std::string& proposals_path_in = "") {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  detail::require_file(cfg.relation_info, "relation_info");
  detail::require_file(cfg.target_corpus, "target corpus");
  RelationSet relations = load_relation_info(cfg.relation_info);
  std::vector<Document> docs = load_documents(cfg.target_corpus, relations);

  std::vector<EntityPair> proposals;
  const std::vector<EntityPair>* proposals_ptr = nullptr;
  if (cfg.prompt.mode == PromptMode::relation_classification) {
    std::string proposals_path = proposals_path_in.empty()
                                     ? detail::out_path(cfg, "proposals.jsonl")
                                     : proposals_path_in;
    detail::require_file(proposals_path, "proposals");
    proposals = read_proposals(proposals_path);
    proposals_ptr = &proposals;
  }
  auto plan = detail::plan_chunks(docs, cfg, proposals_ptr);

  std::string exemplars;
  if (cfg.prompt.n_shots > 0) {
    detail::require_file(cfg.train_corpus, "train corpus (few-shot exemplars)");
    std::vector<Document> train_docs = load_documents(cfg.train_corpus, relations);
    exemplars =
        build_fewshot_exemplars(train_docs, cfg.prompt.n_shots, relations, cfg.prompt, cfg.seed);
  }

  std::vector<GenerationRequest> requests;
  for (const auto& [doc, chunks] : plan) {
    for (size_t ci = 0; ci < chunks.size(); ++ci) {
      PromptInstance inst =
          build_prompt(*doc, chunks[ci], static_cast<int>(ci), relations, cfg.prompt);
      GenerationRequest req;
      req.prompt = exemplars + inst.text;
      if (cfg.prompt.max_prompt_chars > 0 &&
          static_cast<int>(req.prompt.size()) > cfg.prompt.max_prompt_chars) {
        throw ConfigError("prompt with exemplars for doc '" + doc->doc_id + "' chunk " +
                          std::to_string(ci) + " exceeds the backend budget; lower k (currently " +
                          std::to_string(cfg.prompt.k) + ") or n_shots");
      }
      req.max_tokens = cfg.max_tokens;
      req.temperature = cfg.temperature;
      req.stop = cfg.stop;
      req.tag = RequestTag{doc->doc_id, static_cast<int>(ci)};
      requests.push_back(std::move(req));
    }
  }

  std::string type = cfg.backend_spec.value("type", "mock");
  std::unique_ptr<Clock> clock;
  std::unique_ptr<LlmBackend> backend;
  if (type == "mock") {
    clock = std::make_unique<FakeClock>();  // deterministic ledgers for scripted runs
    backend = detail::make_mock_backend(cfg, relations, plan);
  } else if (type == "http") {
    clock = std::make_unique<SystemClock>();
    backend = detail::make_http_backend(cfg, *clock);
  } else {
    throw ConfigError("unknown backend type: " + type);
  }

  RunRcStageResult out;
  out.ledger_path = detail::out_path(cfg, "responses.jsonl");
  BatchRunner runner(*backend, *clock, cfg.parallelism, cfg.rate_per_sec, out.ledger_path);
  out.report = runner.run(requests);
  out.requests = static_cast<long>(requests.size());
  // A zero-request run still owes the manifest its ledger artifact.
  if (!std::filesystem::exists(out.ledger_path)) write_text_file(out.ledger_path, "");

  nlohmann::json failed = nlohmann::json::array();
  for (const RequestTag& tag : out.report.failed) {
    failed.push_back(nlohmann::json{{"doc_id", tag.doc_id}, {"chunk_index", tag.chunk_index}});
  }
  nlohmann::json run_report{{"requests", out.requests},
                            {"sent", out.report.sent},
                            {"resumed", out.report.resumed},
                            {"failed", failed}};
  std::string report_path = detail::out_path(cfg, "run_report.json");
  write_text_file(report_path, run_report.dump(2) + "\n");

  RunManifest manifest{nlohmann::json(cfg)};
  manifest.add_artifact(out.ledger_path);
  manifest.add_artifact(report_path);
  manifest.add_timing("run_rc", detail::elapsed_ms(t0));
  manifest.write(detail::out_path(cfg, "manifest_runrc.json"));
  return out;
}

struct ScoreStageResult {
  MetricsReport metrics;
  IntraInterReport intra_inter;
  std::vector<PerRelationRow> per_relation;
  BinaryMetrics rcp_binary;
  bool rcp_binary_present = false;
  std::vector<Prediction> predictions;
  long rejected_lines = 0;
  std::string metrics_path;
  std::string predictions_path;
};

inline std::string format_metrics_text(const ScoreStageResult& r) {
  char buf[256];
  std::string text;
  auto add = [&](const char* name, double value) {
    std::snprintf(buf, sizeof(buf), "%-18s %7.2f\n", name, value * 100.0);
    text += buf;
  };
  add("precision", r.metrics.precision);
  add("recall", r.metrics.recall);
  add("f1", r.metrics.f1);
  add("ign_f1", r.metrics.ign_f1);
  add("intra_f1", r.intra_inter.intra.f1);
  add("inter_f1", r.intra_inter.inter.f1);
  if (r.rcp_binary_present) add("rcp_binary_f1", r.rcp_binary.f1);
  std::snprintf(buf, sizeof(buf), "%-18s %7ld\n", "extracted_triples",
                r.metrics.extracted_triples);
  text += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %7ld\n", "correct", r.metrics.correct);
  text += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %7ld\n", "gold", r.metrics.gold);
  text += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %7ld\n", "correct_in_train",
                r.metrics.correct_in_train);
  text += buf;
  std::snprintf(buf, sizeof(buf), "%-18s %7ld\n", "rejected_lines", r.rejected_lines);
  text += buf;
  return text;
}

inline ScoreStageResult stage_score(const PipelineConfig& cfg,
                                    const std::string& ledger_path_in = "",
                                    const std::string& proposals_path_in = "") {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  detail::require_file(cfg.relation_info, "relation_info");
  detail::require_file(cfg.target_corpus, "target corpus");
  std::string ledger_path =
      ledger_path_in.empty() ? detail::out_path(cfg, "responses.jsonl") : ledger_path_in;
  detail::require_file(ledger_path, "responses ledger");

  RelationSet relations = load_relation_info(cfg.relation_info);
  std::vector<Document> docs = load_documents(cfg.target_corpus, relations);
  for (const Document& doc : docs) {
    if (!doc.labels_present) {
      throw ConfigError("score needs a labeled target corpus; document '" + doc.doc_id +
                        "' has no labels");
    }
  }
  auto by_id = detail::index_documents(docs);

  TrainFactSet train_facts;
  if (!cfg.train_corpus.empty()) {
    detail::require_file(cfg.train_corpus, "train corpus");
    train_facts = TrainFactSet::from_documents(load_documents(cfg.train_corpus, relations));
  }

  std::shared_ptr<EmbedderProvider> embedder;
  if (cfg.align.align_out_of_domain_enabled) {
    embedder = std::make_shared<MemoizingEmbedder>(make_embedder(cfg.embedder_spec));
  }

  std::map<std::string, std::vector<RawTriple>> triples_by_doc;
  std::vector<RejectedLine> rejected;
  for (const auto& [key, record] : load_ledger(ledger_path)) {
    if (record.finish_reason == FinishReason::error) continue;
    auto it = by_id.find(record.tag.doc_id);
    if (it == by_id.end()) {
      throw ValidationError("ledger references unknown document '" + record.tag.doc_id + "'");
    }
    ParseResult parsed =
        parse_response(record.text, record.tag.doc_id, record.tag.chunk_index, cfg.prompt.mode);
    auto& bucket = triples_by_doc[record.tag.doc_id];
    bucket.insert(bucket.end(), parsed.triples.begin(), parsed.triples.end());
    rejected.insert(rejected.end(), parsed.rejected.begin(), parsed.rejected.end());
  }

  ScoreStageResult out;
  for (const Document& doc : docs) {
    auto it = triples_by_doc.find(doc.doc_id);
    if (it == triples_by_doc.end()) continue;
    auto [preds, report] =
        assemble_predictions(it->second, doc, relations, cfg.align, embedder.get());
    out.predictions.insert(out.predictions.end(), preds.begin(), preds.end());
    rejected.insert(rejected.end(), report.lines.begin(), report.lines.end());
  }

  out.metrics = evaluate(out.predictions, docs, train_facts);
  out.intra_inter = intra_inter_f1(out.predictions, docs);
  out.per_relation = per_relation_f1(out.predictions, docs, relations);
  out.rejected_lines = static_cast<long>(rejected.size());

  std::string proposals_path =
      proposals_path_in.empty() ? detail::out_path(cfg, "proposals.jsonl") : proposals_path_in;
  if (std::filesystem::exists(proposals_path)) {
    out.rcp_binary = rcp_binary_metrics(read_proposals(proposals_path), docs);
    out.rcp_binary_present = true;
  }

  out.predictions_path = detail::out_path(cfg, "predictions.jsonl");
  write_predictions(out.predictions_path, out.predictions);
  std::string rejections_path = detail::out_path(cfg, "rejections.jsonl");
  write_rejections(rejections_path, rejected);

  nlohmann::json metrics_json{
      {"precision", out.metrics.precision},
      {"recall", out.metrics.recall},
      {"f1", out.metrics.f1},
      {"ign_precision", out.metrics.ign_precision},
      {"ign_f1", out.metrics.ign_f1},
      {"correct", out.metrics.correct},
      {"predicted", out.metrics.predicted},
      {"gold", out.metrics.gold},
      {"correct_in_train", out.metrics.correct_in_train},
      {"extracted_triples", out.metrics.extracted_triples},
      {"intra_f1", out.intra_inter.intra.f1},
      {"inter_f1", out.intra_inter.inter.f1},
      {"rejected_lines", out.rejected_lines}};
  if (out.rcp_binary_present) {
    metrics_json["rcp_binary"] = nlohmann::json{{"precision", out.rcp_binary.precision},
                                                {"recall", out.rcp_binary.recall},
                                                {"f1", out.rcp_binary.f1}};
  }
  out.metrics_path = detail::out_path(cfg, "metrics.json");
  write_text_file(out.metrics_path, metrics_json.dump(2) + "\n");
  std::string metrics_txt_path = detail::out_path(cfg, "metrics.txt");
  write_text_file(metrics_txt_path, format_metrics_text(out));

  std::string per_rel_path = detail::out_path(cfg, "per_relation.tsv");
  std::string tsv = "relation\tf1\tgold\tpredicted\tcorrect\n";
  char buf[160];
  for (const PerRelationRow& row : out.per_relation) {
    std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%ld\t%ld\t%ld\n", row.relation.c_str(), row.f1,
                  row.gold, row.predicted, row.correct);
    tsv += buf;
  }
  write_text_file(per_rel_path, tsv);

  RunManifest manifest{nlohmann::json(cfg)};
  manifest.add_artifact(out.predictions_path);
  manifest.add_artifact(rejections_path);
  manifest.add_artifact(out.metrics_path);
  manifest.add_artifact(metrics_txt_path);
  manifest.add_artifact(per_rel_path);
  manifest.add_timing("score", detail::elapsed_ms(t0));
  manifest.write(detail::out_path(cfg, "manifest_score.json"));
  return out;
}

struct ExportStageResult {
  std::string dataset_path;
  long records = 0;
};

inline ExportStageResult stage_export_ft(const PipelineConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  detail::require_file(cfg.relation_info, "relation_info");
  detail::require_file(cfg.train_corpus, "train corpus");
  RelationSet relations = load_relation_info(cfg.relation_info);
  std::vector<Document> docs = load_documents(cfg.train_corpus, relations);

  std::vector<FinetuneRecord> records = export_finetune_dataset(docs, relations, cfg.prompt);
  ExportStageResult out;
  out.records = static_cast<long>(records.size());
  out.dataset_path = detail::out_path(cfg, "finetune.jsonl");
  write_finetune_records(out.dataset_path, records);

  RunManifest manifest{nlohmann::json(cfg)};
  manifest.add_artifact(out.dataset_path);
  manifest.add_timing("export_ft", detail::elapsed_ms(t0));
  manifest.write(detail::out_path(cfg, "manifest_export.json"));
  return out;
}

struct SweepStageResult {
  std::vector<SweepRow> rows;
  std::string table_path;
};

inline SweepStageResult stage_sweep_theta(const PipelineConfig& cfg,
                                          const std::vector<double>& grid,
                                          const std::string& ledger_path_in = "") {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  detail::require_file(cfg.relation_info, "relation_info");
  detail::require_file(cfg.target_corpus, "target corpus");
  std::string ledger_path =
      ledger_path_in.empty() ? detail::out_path(cfg, "responses.jsonl") : ledger_path_in;
  detail::require_file(ledger_path, "responses ledger");

  RelationSet relations = load_relation_info(cfg.relation_info);
  std::vector<Document> docs = load_documents(cfg.target_corpus, relations);
  TrainFactSet train_facts;
  if (!cfg.train_corpus.empty()) {
    detail::require_file(cfg.train_corpus, "train corpus");
    train_facts = TrainFactSet::from_documents(load_documents(cfg.train_corpus, relations));
  }
  MemoizingEmbedder embedder(make_embedder(cfg.embedder_spec));

  std::map<std::string, std::vector<RawTriple>> triples_by_doc;
  for (const auto& [key, record] : load_ledger(ledger_path)) {
    if (record.finish_reason == FinishReason::error) continue;
    ParseResult parsed =
        parse_response(record.text, record.tag.doc_id, record.tag.chunk_index, cfg.prompt.mode);
    auto& bucket = triples_by_doc[record.tag.doc_id];
    bucket.insert(bucket.end(), parsed.triples.begin(), parsed.triples.end());
  }

  SweepStageResult out;
  out.rows = threshold_sweep(triples_by_doc, docs, relations, embedder, cfg.align, grid,
                             train_facts);

  std::string tsv = "theta\tprecision\trecall\tf1\tign_f1\textracted\n";
  char buf[160];
  for (const SweepRow& row : out.rows) {
    std::snprintf(buf, sizeof(buf), "%.4f\t%.4f\t%.4f\t%.4f\t%.4f\t%ld\n", row.theta,
                  row.report.precision, row.report.recall, row.report.f1, row.report.ign_f1,
                  row.report.extracted_triples);
    tsv += buf;
  }
  out.table_path = detail::out_path(cfg, "sweep.tsv");
  write_text_file(out.table_path, tsv);

  RunManifest manifest{nlohmann::json(cfg)};
  manifest.add_artifact(out.table_path);
  manifest.add_timing("sweep_theta", detail::elapsed_ms(t0));
  manifest.write(detail::out_path(cfg, "manifest_sweep.json"));
  return out;
}

inline nlohmann::json stage_stats(const PipelineConfig& cfg, const std::string& corpus_path) {
  detail::require_file(cfg.relation_info, "relation_info");
  detail::require_file(corpus_path, "corpus");
  RelationSet relations = load_relation_info(cfg.relation_info);
  std::vector<Document> docs = load_documents(corpus_path, relations);
  CorpusStats stats = corpus_statistics(docs);
  nlohmann::json j{{"documents", static_cast<long>(docs.size())},
                   {"candidate_space", stats.candidate_space},
                   {"has_labels", stats.has_labels}};
  if (stats.has_labels) {
    j["na_pairs"] = stats.na_pairs;
    j["relation_pairs"] = stats.relation_pairs;
    j["annotated_triples"] = stats.annotated_triples;
  }
  return j;
}

}  // namespace lmrc

#endif  // LMRC_PIPELINE_HPP
