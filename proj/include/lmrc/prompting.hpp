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

#ifndef LMRC_PROMPTING_HPP
#define LMRC_PROMPTING_HPP

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"

namespace lmrc {

enum class PromptMode {
  baseline_docre,           // whole candidate space, None lines for NA pairs
  relation_classification,  // proposed pairs only, no NA category
};

inline std::string to_string(PromptMode mode) {
  return mode == PromptMode::baseline_docre ? "baseline_docre" : "relation_classification";
}

inline PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "baseline_docre") return PromptMode::baseline_docre;
  if (s == "relation_classification") return PromptMode::relation_classification;
  throw ConfigError("unknown prompt mode: " + s);
}

struct PromptConfig {
  int k = 20;  // entity pairs per input instance
  PromptMode mode = PromptMode::baseline_docre;
  int n_shots = 0;
  int max_prompt_chars = 0;  // 0 = no budget check

  void validate() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (n_shots < 0) throw ConfigError("n_shots must be >= 0");
    if (max_prompt_chars < 0) throw ConfigError("max_prompt_chars must be >= 0");
  }
};

struct PromptInstance {
  std::string doc_id;
  int chunk_index = 0;
  std::vector<EntityPair> pair_list;
  std::string text;
  std::optional<std::string> expected_completion;
};

// The pair delimiter is "|"; a literal "|" inside an entity name is escaped
// to the 6-character sequence | on render and unescaped on parse.
inline constexpr const char* kPipeEscape = "\\u007C";

inline std::string escape_pipes(const std::string& s) {
  return replace_all(s, "|", kPipeEscape);
}

inline std::string unescape_pipes(const std::string& s) {
  return replace_all(s, kPipeEscape, "|");
}

// Canonical rendered name: longest-mention display name, pipe-escaped, with
// a "#<entity index>" suffix whenever another entity in the document shares
// the same display name.
inline std::string render_entity_name(const Document& doc, int entity_index) {
  if (entity_index < 0 || entity_index >= static_cast<int>(doc.entities.size())) {
    throw ContractViolation("render_entity_name: entity index out of range");
  }
  std::string name = display_name(doc.entities[entity_index]);
  int with_same_name = 0;
  for (const Entity& other : doc.entities) {
    if (display_name(other) == name) ++with_same_name;
  }
  std::string rendered = escape_pipes(name);
  if (with_same_name > 1) {
    rendered += "#" + std::to_string(entity_index);
  }
  return rendered;
}

// "(<head>| -| <tail>)" with the canonical rendered names.
inline std::string format_pair(const Document& doc, const EntityPair& pair) {
  return "(" + render_entity_name(doc, pair.head) + "| -| " +
         render_entity_name(doc, pair.tail) + ")";
}

inline std::string format_triple_line(const Document& doc, int head, int tail,
                                      const std::string& relation_name) {
  return "(" + render_entity_name(doc, head) + "| " + relation_name + "| " +
         render_entity_name(doc, tail) + ")";
}

// ceil(|pairs|/k) chunks in order; all full except possibly the last.
inline std::vector<std::vector<EntityPair>> chunk_pairs(const std::vector<EntityPair>& pairs,
                                                        int k) {
  if (k < 1) throw ConfigError("chunk_pairs: k must be >= 1");
  std::vector<std::vector<EntityPair>> chunks;
  for (size_t start = 0; start < pairs.size(); start += static_cast<size_t>(k)) {
    size_t stop = std::min(pairs.size(), start + static_cast<size_t>(k));
    chunks.emplace_back(pairs.begin() + static_cast<long>(start),
                        pairs.begin() + static_cast<long>(stop));
  }
  return chunks;
}

namespace detail {

inline constexpr const char* kPromptPreamble =
    "Below is an instruction that describes a task, paired with an input that provides further "
    "context. Write a response that appropriately completes the request.";

inline constexpr const char* kBaselineInstruction =
    "Your task is to determine whether there are relations between the entity pairs based on the "
    "information in the text. If there exists relations, select relations for the entity pairs "
    "from the relation set; if there is no relation, return None.\n"
    "The format of the input entity pair is '(head entity| -| tail entity)'.\n"
    "Your output format is '(head entity| relation/None| tail entity)'.";

inline constexpr const char* kRcInstruction =
    "This is a relation classification task. we will provide entity pairs that require relation "
    "classification. Your task is to select relations for each entity pair from the given "
    "relation set based on the information in the text. There may be multiple relations between "
    "an entity pair.\n"
    "The format of the input entity pair is '(head entity| -| tail entity)'.\n"
    "Your output format is '(head entity| relation| tail entity)'.";

inline std::string render_relation_set(const RelationSet& relations) {
  std::vector<std::string> names;
  names.reserve(relations.entries().size());
  for (const auto& entry : relations.entries()) names.push_back(entry.second);
  return join(names, ", ");
}

inline std::string render_text(const Document& doc) {
  std::vector<std::string> sentences;
  sentences.reserve(doc.sentences.size());
  for (const auto& sent : doc.sentences) sentences.push_back(join(sent, " "));
  return join(sentences, " ");
}

}  // namespace detail

// Full section skeleton; byte-deterministic in its inputs.
inline PromptInstance build_prompt(const Document& doc, const std::vector<EntityPair>& chunk,
                                   int chunk_index, const RelationSet& relations,
                                   const PromptConfig& config) {
  config.validate();
  if (chunk.empty()) throw ContractViolation("build_prompt: empty chunk");
  if (static_cast<int>(chunk.size()) > config.k) {
    throw ContractViolation("build_prompt: chunk larger than k");
  }

  std::string text;
  text += detail::kPromptPreamble;
  text += "\n\n### Instruction:\n";
  text += config.mode == PromptMode::baseline_docre ? detail::kBaselineInstruction
                                                    : detail::kRcInstruction;
  text += "\n\n### Relation set:\n";
  text += detail::render_relation_set(relations);
  text += "\n\n### Text:\n";
  text += detail::render_text(doc);
  text += "\n\n### " + std::to_string(chunk.size()) + " Entity pairs:\n";
  for (const EntityPair& pair : chunk) {
    if (pair.doc_id != doc.doc_id) {
      throw ContractViolation("build_prompt: pair belongs to another document");
    }
    text += format_pair(doc, pair);
    text += "\n";
  }
  text += "\n### Response:\n";

  if (config.max_prompt_chars > 0 && static_cast<int>(text.size()) > config.max_prompt_chars) {
    throw ConfigError("rendered prompt for doc '" + doc.doc_id + "' chunk " +
                      std::to_string(chunk_index) + " is " + std::to_string(text.size()) +
                      " chars, above the backend budget of " +
                      std::to_string(config.max_prompt_chars) +
                      "; re-run with a smaller k (currently " + std::to_string(config.k) + ")");
  }

  PromptInstance inst;
  inst.doc_id = doc.doc_id;
  inst.chunk_index = chunk_index;
  inst.pair_list = chunk;
  inst.text = std::move(text);
  return inst;
}

// Gold completion for a chunk: one line per gold relation of each pair, in
// pair order then label order; baseline mode adds a None line per unlabeled
// pair. RC mode emits nothing for unlabeled pairs (it has no NA category).
inline std::string gold_completion(const Document& doc, const std::vector<EntityPair>& chunk,
                                   const RelationSet& relations, PromptMode mode) {
  std::vector<std::string> lines;
  for (const EntityPair& pair : chunk) {
    bool labeled = false;
    for (const GoldLabel& g : doc.labels) {
      if (g.head == pair.head && g.tail == pair.tail) {
        lines.push_back(format_triple_line(doc, g.head, g.tail, relations.name_of(g.relation)));
        labeled = true;
      }
    }
    if (!labeled && mode == PromptMode::baseline_docre) {
      lines.push_back(format_triple_line(doc, pair.head, pair.tail, "None"));
    }
  }
  return join(lines, "\n");
}

struct FinetuneRecord {
  std::string doc_id;
  int chunk_index = 0;
  std::string prompt;
  std::string completion;
};

// Baseline mode chunks the whole candidate space; RC mode chunks only the
// gold relation-bearing pairs (a pair without a completion line would teach
// the model to skip pairs).
inline std::vector<FinetuneRecord> export_finetune_dataset(const std::vector<Document>& docs,
                                                           const RelationSet& relations,
                                                           const PromptConfig& config) {
  config.validate();
  std::vector<FinetuneRecord> records;
  for (const Document& doc : docs) {
    if (!doc.labels_present) {
      throw ContractViolation("export_finetune_dataset: document '" + doc.doc_id +
                              "' has no gold labels");
    }
    std::vector<EntityPair> pairs = config.mode == PromptMode::baseline_docre
                                        ? candidate_pairs(doc)
                                        : gold_pairs(doc);
    std::vector<std::vector<EntityPair>> chunks = chunk_pairs(pairs, config.k);
    for (size_t ci = 0; ci < chunks.size(); ++ci) {
      PromptInstance inst =
          build_prompt(doc, chunks[ci], static_cast<int>(ci), relations, config);
      FinetuneRecord rec;
      rec.doc_id = doc.doc_id;
      rec.chunk_index = static_cast<int>(ci);
      rec.prompt = std::move(inst.text);
      rec.completion = gold_completion(doc, chunks[ci], relations, config.mode);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

// Exemplar block: n_shots rendered prompt+completion pairs drawn from the
// corpus under a fixed seed. Baseline exemplars must show both relation and
// NA pairs; RC exemplars carry relation pairs only (no NA category exists).
inline std::string build_fewshot_exemplars(const std::vector<Document>& docs, int n_shots,
                                           const RelationSet& relations,
                                           const PromptConfig& config, uint64_t seed) {
  config.validate();
  if (n_shots < 0) throw ConfigError("n_shots must be >= 0");
  if (n_shots == 0) return "";

  std::vector<int> order(docs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ULL);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }

  std::string block;
  int used = 0;
  for (int idx : order) {
    if (used == n_shots) break;
    const Document& doc = docs[idx];
    if (!doc.labels_present) continue;
    std::vector<EntityPair> pairs = config.mode == PromptMode::baseline_docre
                                        ? candidate_pairs(doc)
                                        : gold_pairs(doc);
    if (pairs.empty()) continue;
    std::vector<EntityPair> chunk = chunk_pairs(pairs, config.k).front();
    if (config.mode == PromptMode::baseline_docre) {
      std::set<std::pair<int, int>> labeled;
      for (const GoldLabel& g : doc.labels) labeled.insert({g.head, g.tail});
      bool has_rel = false;
      bool has_na = false;
      for (const EntityPair& p : chunk) {
        if (labeled.count({p.head, p.tail})) {
          has_rel = true;
        } else {
          has_na = true;
        }
      }
      if (!has_rel || !has_na) continue;
    }
    PromptInstance inst = build_prompt(doc, chunk, 0, relations, config);
    block += inst.text;
    block += gold_completion(doc, chunk, relations, config.mode);
    block += "\n\n";
    ++used;
  }
  if (used < n_shots) {
    throw ContractViolation("build_fewshot_exemplars: corpus has only " + std::to_string(used) +
                            " eligible documents for " + std::to_string(n_shots) + " shots");
  }
  return block;
}

}  // namespace lmrc

#endif  // LMRC_PROMPTING_HPP
