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

#ifndef LMRC_CORPUS_HPP
#define LMRC_CORPUS_HPP

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"

namespace lmrc {

// One surface occurrence of an entity: a [start,end) token span inside a
// single sentence. `surface` is the joined tokens of the span.
struct Mention {
  std::string surface;
  int sent_id = 0;
  int start = 0;
  int end = 0;  // exclusive
  std::string type;
};

struct Entity {
  int index = 0;
  std::vector<Mention> mentions;
  std::string entity_type;
};

// A gold fact (head, tail, relation id). NA is the absence of labels.
struct GoldLabel {
  int head = 0;
  int tail = 0;
  std::string relation;

  friend auto operator<=>(const GoldLabel&, const GoldLabel&) = default;
};

struct Document {
  std::string doc_id;  // dataset "title"
  std::vector<std::vector<std::string>> sentences;
  std::vector<Entity> entities;
  std::vector<GoldLabel> labels;
  bool labels_present = true;  // false on hidden-label splits

  int entity_count() const { return static_cast<int>(entities.size()); }
};

// The predefined relation inventory R. Insertion order is preserved and is
// the deterministic tie-break order for similarity alignment.
class RelationSet {
 public:
  void add(const std::string& id, const std::string& name) {
    if (by_id_.count(id)) throw ValidationError("duplicate relation id: " + id);
    std::string folded = to_lower(normalize_whitespace(name));
    if (by_folded_name_.count(folded)) {
      throw ValidationError("duplicate relation display name (after case folding): " + name);
    }
    by_id_[id] = entries_.size();
    by_folded_name_[folded] = entries_.size();
    entries_.emplace_back(id, name);
  }

  bool contains(const std::string& id) const { return by_id_.count(id) > 0; }

  const std::string& name_of(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw ContractViolation("unknown relation id: " + id);
    return entries_[it->second].second;
  }

  // Case-insensitive, whitespace-normalized display-name lookup.
  std::optional<std::string> id_by_name(const std::string& name) const {
    auto it = by_folded_name_.find(to_lower(normalize_whitespace(name)));
    if (it == by_folded_name_.end()) return std::nullopt;
    return entries_[it->second].first;
  }

  int index_of(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw ContractViolation("unknown relation id: " + id);
    return static_cast<int>(it->second);
  }

  size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;  // (id, display name)
  std::unordered_map<std::string, size_t> by_id_;
  std::unordered_map<std::string, size_t> by_folded_name_;
};

// An ordered (head, tail) candidate. na_probability is filled by the
// proposal stage; < 0 means unscored.
struct EntityPair {
  std::string doc_id;
  int head = 0;
  int tail = 0;
  double na_probability = -1.0;

  bool scored() const { return na_probability >= 0.0; }
};

struct CorpusStats {
  long long candidate_space = 0;
  long long na_pairs = 0;
  long long relation_pairs = 0;
  long long annotated_triples = 0;
  bool has_labels = true;  // false when the split hides annotations
};

using GoldTriple = std::tuple<int, int, std::string>;  // (head, tail, relation)

namespace detail {

inline std::string joined_span(const std::vector<std::string>& sentence, int start, int end) {
  std::vector<std::string> toks(sentence.begin() + start, sentence.begin() + end);
  return join(toks, " ");
}

inline void validate_document(const Document& doc, const RelationSet& relations,
                              const std::string& where) {
  if (doc.entities.empty()) return;
  int n_sents = static_cast<int>(doc.sentences.size());
  for (size_t ei = 0; ei < doc.entities.size(); ++ei) {
    const Entity& ent = doc.entities[ei];
    if (ent.index != static_cast<int>(ei)) {
      throw ValidationError(where + ".vertexSet[" + std::to_string(ei) + "]: entity index " +
                            std::to_string(ent.index) + " is not dense");
    }
    if (ent.mentions.empty()) {
      throw ValidationError(where + ".vertexSet[" + std::to_string(ei) + "]: entity has no mentions");
    }
    for (size_t mi = 0; mi < ent.mentions.size(); ++mi) {
      const Mention& m = ent.mentions[mi];
      std::string mwhere =
          where + ".vertexSet[" + std::to_string(ei) + "][" + std::to_string(mi) + "]";
      if (m.sent_id < 0 || m.sent_id >= n_sents) {
        throw ValidationError(mwhere + ": sent_id " + std::to_string(m.sent_id) +
                              " out of range (document has " + std::to_string(n_sents) +
                              " sentences)");
      }
      int sent_len = static_cast<int>(doc.sentences[m.sent_id].size());
      if (m.start >= m.end) {
        throw ValidationError(mwhere + ": mention span [" + std::to_string(m.start) + "," +
                              std::to_string(m.end) + ") is empty or reversed");
      }
      if (m.start < 0 || m.end > sent_len) {
        throw ValidationError(mwhere + ": mention span [" + std::to_string(m.start) + "," +
                              std::to_string(m.end) + ") exceeds sentence length " +
                              std::to_string(sent_len));
      }
    }
  }
  int n = doc.entity_count();
  for (size_t li = 0; li < doc.labels.size(); ++li) {
    const GoldLabel& l = doc.labels[li];
    std::string lwhere = where + ".labels[" + std::to_string(li) + "]";
    if (l.head < 0 || l.head >= n || l.tail < 0 || l.tail >= n) {
      throw ValidationError(lwhere + ": head/tail (" + std::to_string(l.head) + "," +
                            std::to_string(l.tail) + ") out of range for " + std::to_string(n) +
                            " entities");
    }
    if (l.head == l.tail) {
      throw ValidationError(lwhere + ": self-loop label on entity " + std::to_string(l.head));
    }
    if (!relations.contains(l.relation)) {
      throw ValidationError(lwhere + ": unknown relation id '" + l.relation + "'");
    }
  }
}

inline Document document_from_json(const nlohmann::json& jd, const std::string& where) {
  Document doc;
  try {
    doc.doc_id = jd.at("title").get<std::string>();
    for (const auto& jsent : jd.at("sents")) {
      doc.sentences.push_back(jsent.get<std::vector<std::string>>());
    }
    int idx = 0;
    for (const auto& jent : jd.at("vertexSet")) {
      Entity ent;
      ent.index = idx++;
      for (const auto& jm : jent) {
        Mention m;
        m.sent_id = jm.at("sent_id").get<int>();
        const auto& pos = jm.at("pos");
        m.start = pos.at(0).get<int>();
        m.end = pos.at(1).get<int>();
        m.type = jm.value("type", "");
        // Canonical surface = joined span tokens; the dataset's `name`
        // field occasionally disagrees with the span by whitespace.
        if (m.sent_id >= 0 && m.sent_id < static_cast<int>(doc.sentences.size()) &&
            m.start >= 0 && m.start < m.end &&
            m.end <= static_cast<int>(doc.sentences[m.sent_id].size())) {
          m.surface = joined_span(doc.sentences[m.sent_id], m.start, m.end);
        } else {
          m.surface = jm.value("name", "");
        }
        ent.mentions.push_back(std::move(m));
      }
      if (!ent.mentions.empty()) ent.entity_type = ent.mentions.front().type;
      doc.entities.push_back(std::move(ent));
    }
    doc.labels_present = jd.contains("labels");
    if (doc.labels_present) {
      for (const auto& jl : jd.at("labels")) {
        GoldLabel l;
        l.head = jl.at("h").get<int>();
        l.tail = jl.at("t").get<int>();
        l.relation = jl.at("r").get<std::string>();
        // `evidence` arrays are accepted and ignored.
        doc.labels.push_back(std::move(l));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": " + e.what());
  }
  return doc;
}

inline nlohmann::ordered_json document_to_json(const Document& doc) {
  nlohmann::ordered_json jd;
  jd["title"] = doc.doc_id;
  jd["sents"] = doc.sentences;
  nlohmann::ordered_json jents = nlohmann::ordered_json::array();
  for (const Entity& ent : doc.entities) {
    nlohmann::ordered_json jent = nlohmann::ordered_json::array();
    for (const Mention& m : ent.mentions) {
      jent.push_back({{"name", m.surface},
                      {"sent_id", m.sent_id},
                      {"pos", {m.start, m.end}},
                      {"type", m.type}});
    }
    jents.push_back(std::move(jent));
  }
  jd["vertexSet"] = std::move(jents);
  if (doc.labels_present) {
    nlohmann::ordered_json jlabels = nlohmann::ordered_json::array();
    for (const GoldLabel& l : doc.labels) {
      jlabels.push_back({{"h", l.head}, {"t", l.tail}, {"r", l.relation}});
    }
    jd["labels"] = std::move(jlabels);
  }
  return jd;
}

}  // namespace detail

inline RelationSet load_relation_info(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open relation info file: " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError(path + ": expected an object mapping id -> name");
  RelationSet rs;
  for (auto it = j.begin(); it != j.end(); ++it) {
    rs.add(it.key(), it.value().get<std::string>());
  }
  return rs;
}

// Parses one corpus file: either a JSON array of documents (the DocRED
// distribution shape) or one JSON document per line.
inline std::vector<Document> load_documents(const std::string& path, const RelationSet& relations) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  std::vector<nlohmann::json> raw;
  char first = 0;
  in >> std::ws;
  first = static_cast<char>(in.peek());
  if (first == '[') {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
    for (auto& jd : j) raw.push_back(std::move(jd));
  } else {
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        raw.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  std::vector<Document> docs;
  docs.reserve(raw.size());
  std::unordered_set<std::string> seen_titles;
  for (size_t i = 0; i < raw.size(); ++i) {
    std::string where = path + ": document[" + std::to_string(i) + "]";
    Document doc = detail::document_from_json(raw[i], where);
    detail::validate_document(doc, relations, where + " (title '" + doc.doc_id + "')");
    if (!seen_titles.insert(doc.doc_id).second) {
      throw ValidationError(where + ": duplicate title '" + doc.doc_id + "'");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

inline std::pair<std::vector<Document>, RelationSet> load_corpus(
    const std::string& path, const std::string& relation_info_path) {
  RelationSet rs = load_relation_info(relation_info_path);
  std::vector<Document> docs = load_documents(path, rs);
  return {std::move(docs), std::move(rs)};
}

// Canonical corpus dump: one document per line.
inline void write_corpus_jsonl(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (const Document& doc : docs) {
    out << detail::document_to_json(doc).dump() << '\n';
  }
}

// All n(n-1) ordered pairs, ascending head then tail.
inline std::vector<EntityPair> candidate_pairs(const Document& doc) {
  int n = doc.entity_count();
  std::vector<EntityPair> pairs;
  if (n > 1) pairs.reserve(static_cast<size_t>(n) * (n - 1));
  for (int h = 0; h < n; ++h) {
    for (int t = 0; t < n; ++t) {
      if (h == t) continue;
      pairs.push_back(EntityPair{doc.doc_id, h, t, -1.0});
    }
  }
  return pairs;
}

inline std::set<GoldTriple> gold_triples(const Document& doc) {
  std::set<GoldTriple> out;
  for (const GoldLabel& l : doc.labels) out.emplace(l.head, l.tail, l.relation);
  return out;
}

// Ordered pairs of `doc` that carry at least one gold relation, in
// candidate order.
inline std::vector<EntityPair> gold_pairs(const Document& doc) {
  std::set<std::pair<int, int>> labeled;
  for (const GoldLabel& l : doc.labels) labeled.emplace(l.head, l.tail);
  std::vector<EntityPair> out;
  out.reserve(labeled.size());
  for (const auto& [h, t] : labeled) out.push_back(EntityPair{doc.doc_id, h, t, -1.0});
  return out;
}

inline CorpusStats corpus_statistics(const std::vector<Document>& corpus) {
  CorpusStats stats;
  stats.has_labels = !corpus.empty();
  for (const Document& doc : corpus) {
    long long n = doc.entity_count();
    stats.candidate_space += n * (n - 1);
    if (!doc.labels_present) stats.has_labels = false;
    std::set<std::pair<int, int>> labeled;
    for (const GoldLabel& l : doc.labels) labeled.emplace(l.head, l.tail);
    stats.relation_pairs += static_cast<long long>(labeled.size());
    stats.annotated_triples += static_cast<long long>(gold_triples(doc).size());
  }
  stats.na_pairs = stats.candidate_space - stats.relation_pairs;
  return stats;
}

// The entity's display name used in prompts: the longest mention surface,
// earliest mention winning ties.
inline const std::string& display_name(const Entity& entity) {
  if (entity.mentions.empty()) throw ContractViolation("entity has no mentions");
  const std::string* best = &entity.mentions.front().surface;
  for (const Mention& m : entity.mentions) {
    if (m.surface.size() > best->size()) best = &m.surface;
  }
  return *best;
}

}  // namespace lmrc

#endif  // LMRC_CORPUS_HPP
