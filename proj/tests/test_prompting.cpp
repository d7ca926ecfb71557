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

#include <catch2/catch_amalgamated.hpp>

#include <cctype>
#include <random>
#include <sstream>

#include "lmrc/prompting.hpp"
#include "support/toy_data.hpp"

using namespace lmrc;
using lmrc_test::make_doc;
using lmrc_test::toy_corpus;
using lmrc_test::toy_relations;

namespace {

std::vector<EntityPair> pairs_of(const Document& doc,
                                 std::initializer_list<std::pair<int, int>> hts) {
  std::vector<EntityPair> out;
  for (const auto& [h, t] : hts) out.push_back(EntityPair{doc.doc_id, h, t, -1.0});
  return out;
}

// Appearances of `needle` in `hay` as a whole token (neighbors not alnum).
bool contains_token(const std::string& hay, const std::string& needle) {
  size_t at = 0;
  while ((at = hay.find(needle, at)) != std::string::npos) {
    bool left_ok = at == 0 || !std::isalnum(static_cast<unsigned char>(hay[at - 1]));
    size_t after = at + needle.size();
    bool right_ok = after >= hay.size() || !std::isalnum(static_cast<unsigned char>(hay[after]));
    if (left_ok && right_ok) return true;
    ++at;
  }
  return false;
}

}  // namespace

TEST_CASE("pipe escaping round-trips") {
  CHECK(escape_pipes("AC|DC") == "AC\\u007CDC");
  CHECK(escape_pipes("no pipes") == "no pipes");
  CHECK(unescape_pipes("AC\\u007CDC") == "AC|DC");
  CHECK(unescape_pipes(escape_pipes("a|b|c")) == "a|b|c");
  CHECK(std::string("\\u007C").size() == 6);
}

TEST_CASE("render_entity_name uses the longest mention and escapes pipes") {
  auto docs = toy_corpus();
  const Document& einstein = docs[0];
  CHECK(render_entity_name(einstein, 0) == "Albert Einstein");
  CHECK(render_entity_name(einstein, 1) == "Ulm");

  const Document& pipe_doc = docs[16];
  CHECK(render_entity_name(pipe_doc, 0) == "AC\\u007CDC");
}

TEST_CASE("duplicate display names get an entity-index suffix") {
  Document mercury = toy_corpus()[15];
  CHECK(render_entity_name(mercury, 0) == "Mercury#0");
  CHECK(render_entity_name(mercury, 1) == "Mercury#1");
  CHECK(render_entity_name(mercury, 2) == "Sun");
}

TEST_CASE("format_pair renders the placeholder form") {
  Document einstein = toy_corpus()[0];
  EntityPair pair{einstein.doc_id, 0, 1, -1.0};
  CHECK(format_pair(einstein, pair) == "(Albert Einstein| -| Ulm)");
}

TEST_CASE("chunk_pairs splits into ceil(m/k) chunks, all full but the last") {
  std::vector<EntityPair> pairs(45);
  auto chunks = chunk_pairs(pairs, 10);
  REQUIRE(chunks.size() == 5);
  CHECK(chunks[0].size() == 10);
  CHECK(chunks[3].size() == 10);
  CHECK(chunks[4].size() == 5);

  CHECK(chunk_pairs({}, 10).empty());
  CHECK_THROWS_AS(chunk_pairs(pairs, 0), ConfigError);

  // 650 pairs (n = 26 candidate space) at k = 25 -> 26 inputs.
  std::vector<EntityPair> big(26 * 25);
  CHECK(chunk_pairs(big, 25).size() == 26);

  std::mt19937_64 rng(7);
  for (int it = 0; it < 50; ++it) {
    int m = static_cast<int>(rng() % 200);
    int k = 1 + static_cast<int>(rng() % 30);
    auto cs = chunk_pairs(std::vector<EntityPair>(m), k);
    CHECK(cs.size() == static_cast<size_t>((m + k - 1) / k));
    size_t total = 0;
    for (size_t i = 0; i < cs.size(); ++i) {
      total += cs[i].size();
      if (i + 1 < cs.size()) CHECK(cs[i].size() == static_cast<size_t>(k));
    }
    CHECK(total == static_cast<size_t>(m));
  }
}

TEST_CASE("build_prompt renders the exact section skeleton") {
  Document doc = make_doc("skel", {{"Bavaria", "is", "in", "Germany", "."}},
                          {{{0, 0, 1, "LOC"}}, {{0, 3, 4, "LOC"}}}, {{0, 1, "P17"}});
  RelationSet rs;
  rs.add("P17", "country");
  rs.add("P361", "part of");
  PromptConfig cfg;
  cfg.k = 5;
  cfg.mode = PromptMode::baseline_docre;
  PromptInstance inst = build_prompt(doc, pairs_of(doc, {{0, 1}, {1, 0}}), 0, rs, cfg);

  std::string expected =
      "Below is an instruction that describes a task, paired with an input that provides "
      "further context. Write a response that appropriately completes the request."
      "\n\n### Instruction:\n"
      "Your task is to determine whether there are relations between the entity pairs based on "
      "the information in the text. If there exists relations, select relations for the entity "
      "pairs from the relation set; if there is no relation, return None.\n"
      "The format of the input entity pair is '(head entity| -| tail entity)'.\n"
      "Your output format is '(head entity| relation/None| tail entity)'."
      "\n\n### Relation set:\n"
      "country, part of"
      "\n\n### Text:\n"
      "Bavaria is in Germany ."
      "\n\n### 2 Entity pairs:\n"
      "(Bavaria| -| Germany)\n"
      "(Germany| -| Bavaria)\n"
      "\n### Response:\n";
  CHECK(inst.text == expected);
  CHECK(inst.doc_id == "skel");
  CHECK(inst.chunk_index == 0);
  CHECK(inst.pair_list.size() == 2);
}

TEST_CASE("multi-sentence text joins with single spaces") {
  Document doc = toy_corpus()[0];
  PromptConfig cfg;
  PromptInstance inst = build_prompt(doc, pairs_of(doc, {{0, 1}}), 0, toy_relations(), cfg);
  CHECK(inst.text.find("Albert Einstein was born in Ulm . The scientist joined ETH Zurich .") !=
        std::string::npos);
  CHECK(inst.text.find("### 1 Entity pairs:\n") != std::string::npos);
}

TEST_CASE("prompts are byte-deterministic") {
  Document doc = toy_corpus()[2];
  PromptConfig cfg;
  cfg.mode = PromptMode::relation_classification;
  auto chunk = pairs_of(doc, {{0, 1}, {0, 2}});
  CHECK(build_prompt(doc, chunk, 0, toy_relations(), cfg).text ==
        build_prompt(doc, chunk, 0, toy_relations(), cfg).text);
}

TEST_CASE("baseline instruction mentions None, RC instruction never does") {
  Document doc = make_doc("d", {{"a", "b"}}, {{{0, 0, 1, "X"}}, {{0, 1, 2, "X"}}},
                          {{0, 1, "P17"}});
  PromptConfig base;
  base.mode = PromptMode::baseline_docre;
  std::string btext = build_prompt(doc, pairs_of(doc, {{0, 1}}), 0, toy_relations(), base).text;
  CHECK(btext.find("if there is no relation, return None") != std::string::npos);

  PromptConfig rc;
  rc.mode = PromptMode::relation_classification;
  std::string rtext = build_prompt(doc, pairs_of(doc, {{0, 1}}), 0, toy_relations(), rc).text;
  CHECK(rtext.find("relation classification task") != std::string::npos);
  // No NA vocabulary anywhere in the RC instruction or relation set region
  // (the region before the document text).
  std::string head = rtext.substr(0, rtext.find("### Text:"));
  CHECK_FALSE(contains_token(head, "None"));
  CHECK_FALSE(contains_token(head, "NA"));
}

TEST_CASE("RC prompts over the whole toy corpus never show NA vocabulary") {
  PromptConfig cfg;
  cfg.mode = PromptMode::relation_classification;
  cfg.k = 4;
  auto records = export_finetune_dataset(toy_corpus(), toy_relations(), cfg);
  for (const auto& rec : records) {
    std::string head = rec.prompt.substr(0, rec.prompt.find("### Text:"));
    CHECK_FALSE(contains_token(head, "None"));
    CHECK_FALSE(contains_token(head, "NA"));
    CHECK_FALSE(contains_token(rec.completion, "None"));
  }
}

TEST_CASE("build_prompt rejects chunk violations") {
  Document doc = toy_corpus()[0];
  PromptConfig cfg;
  cfg.k = 2;
  CHECK_THROWS_AS(build_prompt(doc, {}, 0, toy_relations(), cfg), ContractViolation);
  CHECK_THROWS_AS(
      build_prompt(doc, pairs_of(doc, {{0, 1}, {1, 0}, {0, 2}}), 0, toy_relations(), cfg),
      ContractViolation);
  std::vector<EntityPair> foreign = {EntityPair{"other_doc", 0, 1, -1.0}};
  CHECK_THROWS_AS(build_prompt(doc, foreign, 0, toy_relations(), cfg), ContractViolation);
}

TEST_CASE("prompt budget failure names the offending knob") {
  Document doc = toy_corpus()[0];
  PromptConfig cfg;
  cfg.max_prompt_chars = 50;
  try {
    build_prompt(doc, pairs_of(doc, {{0, 1}}), 3, toy_relations(), cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("toy_00") != std::string::npos);
    CHECK(msg.find("chunk 3") != std::string::npos);
    CHECK(msg.find("smaller k") != std::string::npos);
  }
}

TEST_CASE("gold_completion emits labels in pair order, multi-relation consecutively") {
  Document multi = toy_corpus()[14];  // (0,1) carries P17 and P131
  RelationSet rs = toy_relations();
  auto chunk = pairs_of(multi, {{0, 1}, {1, 0}});

  std::string rc = gold_completion(multi, chunk, rs, PromptMode::relation_classification);
  CHECK(rc ==
        "(Bavaria| country| Germany)\n"
        "(Bavaria| located in the administrative territorial entity| Germany)");

  std::string baseline = gold_completion(multi, chunk, rs, PromptMode::baseline_docre);
  CHECK(baseline ==
        "(Bavaria| country| Germany)\n"
        "(Bavaria| located in the administrative territorial entity| Germany)\n"
        "(Germany| None| Bavaria)");
}

TEST_CASE("gold_completion renders display names with suffixes and escapes") {
  RelationSet rs = toy_relations();
  Document mercury = toy_corpus()[15];
  std::string text = gold_completion(mercury, pairs_of(mercury, {{1, 0}}), rs,
                                     PromptMode::relation_classification);
  CHECK(text == "(Mercury#1| part of| Mercury#0)");

  Document pipe_doc = toy_corpus()[16];
  std::string ptext = gold_completion(pipe_doc, pairs_of(pipe_doc, {{1, 0}}), rs,
                                      PromptMode::relation_classification);
  CHECK(ptext == "(Back in Black| performer| AC\\u007CDC)");
}

TEST_CASE("RC-mode export covers exactly the gold pairs") {
  PromptConfig cfg;
  cfg.mode = PromptMode::relation_classification;
  cfg.k = 3;
  auto docs = toy_corpus();
  auto records = export_finetune_dataset(docs, toy_relations(), cfg);
  long expected = 0;
  for (const auto& doc : docs) {
    expected += (static_cast<long>(gold_pairs(doc).size()) + cfg.k - 1) / cfg.k;
  }
  CHECK(static_cast<long>(records.size()) == expected);
  for (const auto& rec : records) {
    CHECK_FALSE(rec.prompt.empty());
    CHECK_FALSE(rec.completion.empty());  // every RC chunk has >= 1 gold line
  }
}

TEST_CASE("baseline export covers the full candidate space") {
  PromptConfig cfg;
  cfg.mode = PromptMode::baseline_docre;
  cfg.k = 7;
  auto docs = toy_corpus();
  auto records = export_finetune_dataset(docs, toy_relations(), cfg);
  long expected = 0;
  for (const auto& doc : docs) {
    long n = doc.entity_count();
    expected += (n * (n - 1) + cfg.k - 1) / cfg.k;
  }
  CHECK(static_cast<long>(records.size()) == expected);

  // Determinism: a second export is byte-identical.
  auto again = export_finetune_dataset(docs, toy_relations(), cfg);
  REQUIRE(again.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(again[i].prompt == records[i].prompt);
    CHECK(again[i].completion == records[i].completion);
  }
}

TEST_CASE("export refuses unlabeled documents") {
  Document hidden = make_doc("h", {{"a", "b"}}, {{{0, 0, 1, "X"}}, {{0, 1, 2, "X"}}}, {});
  hidden.labels_present = false;
  PromptConfig cfg;
  CHECK_THROWS_AS(export_finetune_dataset({hidden}, toy_relations(), cfg), ContractViolation);
}

TEST_CASE("few-shot block renders n exemplars deterministically") {
  PromptConfig cfg;
  cfg.mode = PromptMode::baseline_docre;
  cfg.k = 6;
  auto docs = toy_corpus();
  RelationSet rs = toy_relations();

  CHECK(build_fewshot_exemplars(docs, 0, rs, cfg, 11).empty());

  std::string block = build_fewshot_exemplars(docs, 3, rs, cfg, 11);
  size_t count = 0;
  size_t at = 0;
  while ((at = block.find("### Response:\n", at)) != std::string::npos) {
    ++count;
    at += 1;
  }
  CHECK(count == 3);
  CHECK(block.substr(block.size() - 2) == "\n\n");
  CHECK(block == build_fewshot_exemplars(docs, 3, rs, cfg, 11));
  CHECK(block != build_fewshot_exemplars(docs, 3, rs, cfg, 12));

  // Baseline exemplars must demonstrate both a relation and a None line.
  size_t first_end = block.find("\n\n### Instruction");
  (void)first_end;
  CHECK(block.find("| None| ") != std::string::npos);
  bool has_relation_line = false;
  for (const auto& entry : rs.entries()) {
    if (block.find("| " + entry.second + "| ") != std::string::npos) has_relation_line = true;
  }
  CHECK(has_relation_line);
}

TEST_CASE("few-shot block fails loudly when the corpus cannot supply the shots") {
  PromptConfig cfg;
  cfg.mode = PromptMode::baseline_docre;
  cfg.k = 6;
  std::vector<Document> docs = {toy_corpus()[19]};  // single entity, no pairs
  try {
    build_fewshot_exemplars(docs, 2, toy_relations(), cfg, 5);
    FAIL("expected ContractViolation");
  } catch (const ContractViolation& e) {
    std::string msg = e.what();
    CHECK(msg.find("0 eligible") != std::string::npos);
    CHECK(msg.find("2 shots") != std::string::npos);
  }
}

TEST_CASE("RC few-shot exemplars contain only relation-bearing pairs") {
  PromptConfig cfg;
  cfg.mode = PromptMode::relation_classification;
  cfg.k = 6;
  std::string block = build_fewshot_exemplars(toy_corpus(), 2, toy_relations(), cfg, 3);
  CHECK(block.find("| None| ") == std::string::npos);
  CHECK(block.find("| -| ") != std::string::npos);  // input pairs still use the placeholder
}

TEST_CASE("every exported completion parses back to the chunk gold set") {
  // Round trip at the prompting level: completions are parseable and match
  // the chunk's gold triples rendered through display names.
  for (PromptMode mode : {PromptMode::baseline_docre, PromptMode::relation_classification}) {
    PromptConfig cfg;
    cfg.mode = mode;
    cfg.k = 5;
    auto docs = toy_corpus();
    auto records = export_finetune_dataset(docs, toy_relations(), cfg);
    CHECK_FALSE(records.empty());
    for (const auto& rec : records) {
      if (rec.completion.empty()) continue;
      std::istringstream in(rec.completion);
      std::string line;
      while (std::getline(in, line)) {
        REQUIRE_FALSE(line.empty());
        CHECK(line.front() == '(');
        CHECK(line.back() == ')');
      }
    }
  }
}
