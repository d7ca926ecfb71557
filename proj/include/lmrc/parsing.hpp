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

#ifndef LMRC_PARSING_HPP
#define LMRC_PARSING_HPP

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"
#include "lmrc/embedder.hpp"
#include "lmrc/fuzzy.hpp"
#include "lmrc/prompting.hpp"

namespace lmrc {

struct SourceTag {
  std::string doc_id;
  int chunk_index = 0;
  int line_number = 0;  // 1-based within the response text

  auto operator<=>(const SourceTag&) const = default;
};

struct RawTriple {
  std::string head_surface;
  std::string relation_surface;
  std::string tail_surface;
  std::string raw;  // original trimmed line, kept for reports
  SourceTag tag;
};

// Rejection categories are closed: every raw line or triple that does not
// become a Prediction lands in exactly one of these.
namespace reject {
inline constexpr const char* kMalformedLine = "malformed_line";
inline constexpr const char* kWrongFieldCount = "wrong_field_count";
inline constexpr const char* kEmptyField = "empty_field";
inline constexpr const char* kPlaceholderRelation = "placeholder_relation";
inline constexpr const char* kNoneInRcMode = "none_in_rc_mode";
inline constexpr const char* kEntityUnmatched = "entity_unmatched";
inline constexpr const char* kRelationDiscarded = "relation_discarded";
inline constexpr const char* kOutOfDomain = "out_of_domain";
inline constexpr const char* kEmbedderError = "embedder_error";
inline constexpr const char* kSelfLoop = "self_loop";
}  // namespace reject

struct RejectedLine {
  SourceTag tag;
  std::string raw;
  std::string reason;
  std::optional<double> similarity;  // set for relation_discarded
};

struct ParseResult {
  std::vector<RawTriple> triples;
  std::vector<RejectedLine> rejected;
};

// Parses "(<h>| <r>| <t>)" lines with flexible whitespace, unescaping the
// pipe escape. "None" relations vanish silently in baseline mode and are
// rejected in RC mode; the "-" input placeholder is always rejected.
inline ParseResult parse_response(const std::string& text, const std::string& doc_id,
                                  int chunk_index, PromptMode mode) {
  ParseResult out;
  int line_number = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++line_number;
    std::string trimmed = trim(line);
    if (trimmed.empty()) continue;

    SourceTag tag{doc_id, chunk_index, line_number};
    if (trimmed.front() != '(' || trimmed.back() != ')') {
      out.rejected.push_back({tag, trimmed, reject::kMalformedLine, std::nullopt});
      continue;
    }
    std::string body = trimmed.substr(1, trimmed.size() - 2);
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t bar = body.find('|', start);
      if (bar == std::string::npos) {
        fields.push_back(trim(body.substr(start)));
        break;
      }
      fields.push_back(trim(body.substr(start, bar - start)));
      start = bar + 1;
    }
    if (fields.size() != 3) {
      out.rejected.push_back({tag, trimmed, reject::kWrongFieldCount, std::nullopt});
      continue;
    }
    std::string head = unescape_pipes(fields[0]);
    std::string rel = unescape_pipes(fields[1]);
    std::string tail = unescape_pipes(fields[2]);
    if (head.empty() || rel.empty() || tail.empty()) {
      out.rejected.push_back({tag, trimmed, reject::kEmptyField, std::nullopt});
      continue;
    }
    if (rel == "-") {
      out.rejected.push_back({tag, trimmed, reject::kPlaceholderRelation, std::nullopt});
      continue;
    }
    if (to_lower(rel) == "none") {
      if (mode == PromptMode::relation_classification) {
        out.rejected.push_back({tag, trimmed, reject::kNoneInRcMode, std::nullopt});
      }
      continue;
    }
    out.triples.push_back(RawTriple{head, rel, tail, trimmed, tag});
  }
  return out;
}

// Maximum token-sort similarity between the surface and any mention of each
// entity; argmax wins when its score clears the threshold, ties to the
// lowest entity index. A trailing "#<index>" disambiguation suffix (our own
// renderer's collision rule) resolves directly when the base name matches.
inline std::optional<int> align_entity(const std::string& surface, const Document& doc,
                                       double fuzzy_threshold) {
  size_t hash = surface.rfind('#');
  if (hash != std::string::npos && hash + 1 < surface.size()) {
    bool digits = std::all_of(surface.begin() + static_cast<long>(hash) + 1, surface.end(),
                              [](unsigned char c) { return std::isdigit(c); });
    if (digits) {
      int idx = std::stoi(surface.substr(hash + 1));
      if (idx >= 0 && idx < static_cast<int>(doc.entities.size())) {
        std::string base = normalize_whitespace(to_lower(surface.substr(0, hash)));
        std::string name = normalize_whitespace(to_lower(display_name(doc.entities[idx])));
        if (base == name) return idx;
      }
    }
  }

  double best = -1.0;
  int best_idx = -1;
  for (size_t e = 0; e < doc.entities.size(); ++e) {
    double score = 0.0;
    for (const Mention& m : doc.entities[e].mentions) {
      score = std::max(score, fuzzy::token_sort_ratio(surface, m.surface));
    }
    if (score > best) {
      best = score;
      best_idx = static_cast<int>(e);
    }
  }
  if (best_idx >= 0 && best >= fuzzy_threshold) return best_idx;
  return std::nullopt;
}

// Case-insensitive exact match on whitespace-normalized display names.
inline std::optional<std::string> align_relation(const std::string& surface,
                                                 const RelationSet& relations) {
  std::string key = normalize_whitespace(to_lower(surface));
  for (const auto& entry : relations.entries()) {
    if (normalize_whitespace(to_lower(entry.second)) == key) return entry.first;
  }
  return std::nullopt;
}

struct OodAlignment {
  bool aligned = false;
  std::string relation;  // id when aligned
  double s_max = -1.0;
};

// Cosine of the surface embedding against every relation display name;
// aligned to the argmax when s_max >= theta, ties broken by relation-set
// order, otherwise discarded carrying s_max.
inline OodAlignment align_out_of_domain(const std::string& surface, const RelationSet& relations,
                                        const EmbedderProvider& embedder, double theta) {
  if (theta < -1.0 || theta > 1.0) throw ConfigError("theta must lie in [-1,1]");
  Eigen::VectorXd v = embedder.embed(surface);
  OodAlignment out;
  for (const auto& entry : relations.entries()) {
    double sim = v.dot(embedder.embed(entry.second));
    if (sim > out.s_max) {
      out.s_max = sim;
      out.relation = entry.first;
    }
  }
  out.aligned = !relations.entries().empty() && out.s_max >= theta;
  if (!out.aligned) out.relation.clear();
  return out;
}

struct AlignmentConfig {
  double fuzzy_threshold = 80.0;
  double theta = 0.55;
  bool align_out_of_domain_enabled = true;

  void validate() const {
    if (fuzzy_threshold < 0.0 || fuzzy_threshold > 100.0) {
      throw ConfigError("fuzzy_threshold must lie in [0,100]");
    }
    if (theta < -1.0 || theta > 1.0) throw ConfigError("theta must lie in [-1,1]");
  }
};

enum class Provenance { in_domain, aligned_out_of_domain };

struct Prediction {
  std::string doc_id;
  int head = 0;
  int tail = 0;
  std::string relation;
  Provenance provenance = Provenance::in_domain;
  double similarity = 1.0;  // s_max for out-of-domain alignments

  // identity excludes provenance; predictions are a set over (doc, pair, r)
  auto key() const { return std::tie(doc_id, head, tail, relation); }
  bool operator<(const Prediction& other) const { return key() < other.key(); }
};

struct RejectionReport {
  std::vector<RejectedLine> lines;
  long duplicates_collapsed = 0;
};

// Full alignment of one document's raw triples. Every triple either becomes
// a Prediction or is rejected once with a category; duplicates collapse into
// the first occurrence and are counted.
inline std::pair<std::vector<Prediction>, RejectionReport> assemble_predictions(
    const std::vector<RawTriple>& triples, const Document& doc, const RelationSet& relations,
    const AlignmentConfig& config, const EmbedderProvider* embedder = nullptr) {
  config.validate();
  std::vector<Prediction> preds;
  RejectionReport report;
  std::set<std::tuple<std::string, int, int, std::string>> seen;

  for (const RawTriple& t : triples) {
    std::optional<int> head = align_entity(t.head_surface, doc, config.fuzzy_threshold);
    std::optional<int> tail = align_entity(t.tail_surface, doc, config.fuzzy_threshold);
    if (!head || !tail) {
      report.lines.push_back({t.tag, t.raw, reject::kEntityUnmatched, std::nullopt});
      continue;
    }
    if (*head == *tail) {
      report.lines.push_back({t.tag, t.raw, reject::kSelfLoop, std::nullopt});
      continue;
    }
    Prediction p;
    p.doc_id = doc.doc_id;
    p.head = *head;
    p.tail = *tail;

    std::optional<std::string> rel = align_relation(t.relation_surface, relations);
    if (rel) {
      p.relation = *rel;
      p.provenance = Provenance::in_domain;
      p.similarity = 1.0;
    } else if (config.align_out_of_domain_enabled && embedder != nullptr) {
      OodAlignment ood;
      try {
        ood = align_out_of_domain(t.relation_surface, relations, *embedder, config.theta);
      } catch (const ContractViolation&) {
        report.lines.push_back({t.tag, t.raw, reject::kEmbedderError, std::nullopt});
        continue;
      }
      if (!ood.aligned) {
        report.lines.push_back({t.tag, t.raw, reject::kRelationDiscarded, ood.s_max});
        continue;
      }
      p.relation = ood.relation;
      p.provenance = Provenance::aligned_out_of_domain;
      p.similarity = ood.s_max;
    } else {
      report.lines.push_back({t.tag, t.raw, reject::kOutOfDomain, std::nullopt});
      continue;
    }

    if (!seen.insert({p.doc_id, p.head, p.tail, p.relation}).second) {
      ++report.duplicates_collapsed;
      continue;
    }
    preds.push_back(std::move(p));
  }
  return {std::move(preds), std::move(report)};
}

}  // namespace lmrc

#endif  // LMRC_PARSING_HPP
