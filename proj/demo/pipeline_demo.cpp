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

// Minimal end-to-end walk: writes a four-document corpus, trains the
// proposal classifier, generates completions with the scripted mock backend,
// and scores the transcript. Everything lands under a temp directory whose
// path is printed at the end.

#include <filesystem>
#include <iostream>

#include "lmrc/lmrc.hpp"

namespace {

const char* kCorpus = R"({"title": "demo_paris", "sents": [["Paris", "is", "the", "capital", "of", "France", "."]], "vertexSet": [[{"name": "Paris", "sent_id": 0, "pos": [0, 1], "type": "LOC"}], [{"name": "France", "sent_id": 0, "pos": [5, 6], "type": "LOC"}]], "labels": [{"h": 0, "t": 1, "r": "P17"}, {"h": 1, "t": 0, "r": "P36"}]}
{"title": "demo_kyoto", "sents": [["Kyoto", "lies", "in", "Japan", "."]], "vertexSet": [[{"name": "Kyoto", "sent_id": 0, "pos": [0, 1], "type": "LOC"}], [{"name": "Japan", "sent_id": 0, "pos": [3, 4], "type": "LOC"}]], "labels": [{"h": 0, "t": 1, "r": "P17"}]}
{"title": "demo_nile", "sents": [["The", "Nile", "flows", "through", "Egypt", "."]], "vertexSet": [[{"name": "Nile", "sent_id": 0, "pos": [1, 2], "type": "LOC"}], [{"name": "Egypt", "sent_id": 0, "pos": [4, 5], "type": "LOC"}]], "labels": [{"h": 0, "t": 1, "r": "P17"}]}
{"title": "demo_berlin", "sents": [["Berlin", "is", "in", "Germany", "."], ["It", "is", "the", "capital", "."]], "vertexSet": [[{"name": "Berlin", "sent_id": 0, "pos": [0, 1], "type": "LOC"}], [{"name": "Germany", "sent_id": 0, "pos": [3, 4], "type": "LOC"}]], "labels": [{"h": 0, "t": 1, "r": "P17"}, {"h": 1, "t": 0, "r": "P36"}]}
)";

const char* kRelations = R"({"P17": "country", "P36": "capital"})";

}  // namespace

int main() {
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / "lmrc_demo";
  fs::remove_all(root);
  fs::create_directories(root);

  std::string corpus_path = (root / "corpus.jsonl").string();
  std::string relations_path = (root / "relation_info.json").string();
  lmrc::write_text_file(corpus_path, kCorpus);
  lmrc::write_text_file(relations_path, kRelations);

  lmrc::PipelineConfig cfg;
  cfg.train_corpus = corpus_path;  // toy-sized: train on the target itself
  cfg.dev_corpus = corpus_path;
  cfg.target_corpus = corpus_path;
  cfg.relation_info = relations_path;
  cfg.output_dir = (root / "out").string();
  cfg.encoder_spec = {{"type", "hash"}, {"dim", 16}, {"heads", 2}, {"max_length", 64},
                      {"seed", 13}};
  cfg.rcp.epochs = 3;
  cfg.rcp.batch_size = 2;
  cfg.rcp.lr_head = 5e-3;
  cfg.prompt.mode = lmrc::PromptMode::relation_classification;
  cfg.prompt.k = 4;

  lmrc::TrainStageResult train = lmrc::stage_train_rcp(cfg);
  std::cout << "trained proposal head: best dev F1 " << train.train.best_dev_f1 << " after "
            << train.train.steps_taken << " steps\n";

  lmrc::ProposeStageResult propose = lmrc::stage_propose(cfg, "", 1.0);
  std::cout << "proposed " << propose.proposals.proposals.size() << " of "
            << propose.proposals.total_pairs << " candidate pairs at tau " << propose.tau
            << "\n";

  lmrc::RunRcStageResult run = lmrc::stage_run_rc(cfg);
  std::cout << "generated " << run.report.sent << " completions ("
            << run.report.failed.size() << " failed)\n";

  lmrc::ScoreStageResult score = lmrc::stage_score(cfg);
  std::cout << "\n" << lmrc::format_metrics_text(score);
  std::cout << "\nartifacts: " << cfg.output_dir << "\n";
  return score.metrics.f1 == 1.0 ? 0 : 1;
}
