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

#ifndef LMRC_EVALUATION_HPP
#define LMRC_EVALUATION_HPP

#include <array>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"
#include "lmrc/parsing.hpp"

namespace lmrc {

struct BinaryMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long proposed = 0;
  long gold_positive = 0;
  long true_positive = 0;
};

inline BinaryMetrics binary_metrics_from_counts(long tp, long proposed, long gold_positive) {
  BinaryMetrics m;
  m.true_positive = tp;
  m.proposed = proposed;
  m.gold_positive = gold_positive;
  m.precision = proposed > 0 ? static_cast<double>(tp) / proposed : 0.0;
  m.recall = gold_positive > 0 ? static_cast<double>(tp) / gold_positive : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ign_precision = 0.0;
  double ign_f1 = 0.0;
  long correct = 0;
  long predicted = 0;
  long gold = 0;
  long correct_in_train = 0;
  long extracted_triples = 0;  // distinct predictions scored
};

inline double harmonic_f1(double p, double r) {
  return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

// Training-split facts expanded over every (head mention name, relation,
// tail mention name) combination; lookups are case-exact.
class TrainFactSet {
 public:
  TrainFactSet() = default;

  static TrainFactSet from_documents(const std::vector<Document>& docs) {
    TrainFactSet out;
    for (const Document& doc : docs) {
      for (const GoldLabel& g : doc.labels) {
        for (const Mention& hm : doc.entities[g.head].mentions) {
          for (const Mention& tm : doc.entities[g.tail].mentions) {
            out.facts_.insert({hm.surface, g.relation, tm.surface});
          }
        }
      }
    }
    return out;
  }

  bool contains(const std::string& head_name, const std::string& relation,
                const std::string& tail_name) const {
    return facts_.count({head_name, relation, tail_name}) > 0;
  }

  size_t size() const { return facts_.size(); }

 private:
  std::set<std::array<std::string, 3>> facts_;
};

namespace detail {

inline std::map<std::string, const Document*> index_documents(const std::vector<Document>& docs) {
  std::map<std::string, const Document*> by_id;
  for (const Document& d : docs) by_id[d.doc_id] = &d;
  return by_id;
}

// A correct prediction is in-train iff any mention-name combination of its
// entity pair appears with its relation in the training facts.
inline bool prediction_in_train(const Prediction& p, const Document& doc,
                                const TrainFactSet& facts) {
  for (const Mention& hm : doc.entities[p.head].mentions) {
    for (const Mention& tm : doc.entities[p.tail].mentions) {
      if (facts.contains(hm.surface, p.relation, tm.surface)) return true;
    }
  }
  return false;
}

}  // namespace detail

// Micro P/R/F1 plus Ign F1 under the official semantics: in-train correct
// predictions leave both the precision numerator and denominator; recall is
// untouched. A zero Ign denominator scores 0.
inline MetricsReport evaluate(const std::vector<Prediction>& preds,
                              const std::vector<Document>& gold_docs,
                              const TrainFactSet& train_facts = TrainFactSet()) {
  auto by_id = detail::index_documents(gold_docs);

  std::set<std::tuple<std::string, int, int, std::string>> gold;
  for (const Document& doc : gold_docs) {
    for (const GoldLabel& g : doc.labels) {
      gold.insert({doc.doc_id, g.head, g.tail, g.relation});
    }
  }

  std::set<std::tuple<std::string, int, int, std::string>> pred_keys;
  std::vector<const Prediction*> distinct;
  for (const Prediction& p : preds) {
    auto it = by_id.find(p.doc_id);
    if (it == by_id.end()) {
      throw ContractViolation("evaluate: prediction references unknown document '" + p.doc_id +
                              "'");
    }
    if (pred_keys.insert({p.doc_id, p.head, p.tail, p.relation}).second) {
      distinct.push_back(&p);
    }
  }

  MetricsReport r;
  r.predicted = static_cast<long>(distinct.size());
  r.extracted_triples = r.predicted;
  r.gold = static_cast<long>(gold.size());
  for (const Prediction* p : distinct) {
    if (gold.count({p->doc_id, p->head, p->tail, p->relation})) {
      ++r.correct;
      if (detail::prediction_in_train(*p, *by_id.at(p->doc_id), train_facts)) {
        ++r.correct_in_train;
      }
    }
  }
  r.precision = r.predicted > 0 ? static_cast<double>(r.correct) / r.predicted : 0.0;
  r.recall = r.gold > 0 ? static_cast<double>(r.correct) / r.gold : 0.0;
  r.f1 = harmonic_f1(r.precision, r.recall);
  long ign_den = r.predicted - r.correct_in_train;
  r.ign_precision = ign_den > 0 ? static_cast<double>(r.correct - r.correct_in_train) / ign_den
                                : 0.0;
  r.ign_f1 = harmonic_f1(r.ign_precision, r.recall);
  return r;
}

// A pair is intra iff some single sentence mentions both entities.
inline bool pair_is_intra(const Document& doc, int head, int tail) {
  std::set<int> head_sents;
  for (const Mention& m : doc.entities[head].mentions) head_sents.insert(m.sent_id);
  for (const Mention& m : doc.entities[tail].mentions) {
    if (head_sents.count(m.sent_id)) return true;
  }
  return false;
}

struct IntraInterReport {
  MetricsReport intra;
  MetricsReport inter;
};

// Gold and predictions are partitioned by the same-sentence-co-mention rule
// and each side scored independently.
inline IntraInterReport intra_inter_f1(const std::vector<Prediction>& preds,
                                       const std::vector<Document>& gold_docs) {
  auto by_id = detail::index_documents(gold_docs);

  std::vector<Document> intra_docs;
  std::vector<Document> inter_docs;
  for (const Document& doc : gold_docs) {
    Document intra_doc = doc;
    Document inter_doc = doc;
    intra_doc.labels.clear();
    inter_doc.labels.clear();
    for (const GoldLabel& g : doc.labels) {
      (pair_is_intra(doc, g.head, g.tail) ? intra_doc : inter_doc).labels.push_back(g);
    }
    intra_docs.push_back(std::move(intra_doc));
    inter_docs.push_back(std::move(inter_doc));
  }

  std::vector<Prediction> intra_preds;
  std::vector<Prediction> inter_preds;
  for (const Prediction& p : preds) {
    auto it = by_id.find(p.doc_id);
    if (it == by_id.end()) {
      throw ContractViolation("intra_inter_f1: prediction references unknown document '" +
                              p.doc_id + "'");
    }
    (pair_is_intra(*it->second, p.head, p.tail) ? intra_preds : inter_preds).push_back(p);
  }

  IntraInterReport out;
  out.intra = evaluate(intra_preds, intra_docs);
  out.inter = evaluate(inter_preds, inter_docs);
  return out;
}

struct PerRelationRow {
  std::string relation;
  double f1 = 0.0;
  long gold = 0;
  long predicted = 0;
  long correct = 0;
};

// Per-relation restriction of evaluate, ordered by descending gold count,
// ties in relation-set order; rows with no gold and no predictions are
// omitted.
inline std::vector<PerRelationRow> per_relation_f1(const std::vector<Prediction>& preds,
                                                   const std::vector<Document>& gold_docs,
                                                   const RelationSet& relations) {
  std::set<std::tuple<std::string, int, int, std::string>> gold;
  for (const Document& doc : gold_docs) {
    for (const GoldLabel& g : doc.labels) gold.insert({doc.doc_id, g.head, g.tail, g.relation});
  }
  std::set<std::tuple<std::string, int, int, std::string>> distinct;
  for (const Prediction& p : preds) distinct.insert({p.doc_id, p.head, p.tail, p.relation});

  std::vector<PerRelationRow> rows;
  for (const auto& entry : relations.entries()) {
    const std::string& rid = entry.first;
    PerRelationRow row;
    row.relation = rid;
    for (const auto& g : gold) {
      if (std::get<3>(g) == rid) ++row.gold;
    }
    for (const auto& p : distinct) {
      if (std::get<3>(p) != rid) continue;
      ++row.predicted;
      if (gold.count(p)) ++row.correct;
    }
    if (row.gold == 0 && row.predicted == 0) continue;
    double prec = row.predicted > 0 ? static_cast<double>(row.correct) / row.predicted : 0.0;
    double rec = row.gold > 0 ? static_cast<double>(row.correct) / row.gold : 0.0;
    row.f1 = harmonic_f1(prec, rec);
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const PerRelationRow& a, const PerRelationRow& b) { return a.gold > b.gold; });
  return rows;
}

// Set overlap between proposed pairs and gold relation-bearing pairs;
// positive class = the pair expresses at least one relation.
inline BinaryMetrics rcp_binary_metrics(const std::vector<EntityPair>& proposals,
                                        const std::vector<Document>& gold_docs) {
  auto by_id = detail::index_documents(gold_docs);
  std::set<std::tuple<std::string, int, int>> gold_positive;
  for (const Document& doc : gold_docs) {
    for (const GoldLabel& g : doc.labels) gold_positive.insert({doc.doc_id, g.head, g.tail});
  }
  std::set<std::tuple<std::string, int, int>> proposed;
  for (const EntityPair& p : proposals) {
    if (by_id.find(p.doc_id) == by_id.end()) {
      throw ContractViolation("rcp_binary_metrics: proposal references unknown document '" +
                              p.doc_id + "'");
    }
    proposed.insert({p.doc_id, p.head, p.tail});
  }
  long tp = 0;
  for (const auto& pair : proposed) {
    if (gold_positive.count(pair)) ++tp;
  }
  return binary_metrics_from_counts(tp, static_cast<long>(proposed.size()),
                                    static_cast<long>(gold_positive.size()));
}

struct SweepRow {
  double theta = 0.0;
  MetricsReport report;
};

// Re-scores the corpus across an ascending theta grid. Entity alignment,
// exact relation matching, and the out-of-domain (argmax, s_max) pair are
// theta-independent, so they are computed once per triple.
inline std::vector<SweepRow> threshold_sweep(
    const std::map<std::string, std::vector<RawTriple>>& triples_by_doc,
    const std::vector<Document>& gold_docs, const RelationSet& relations,
    const EmbedderProvider& embedder, const AlignmentConfig& base_config,
    const std::vector<double>& grid, const TrainFactSet& train_facts = TrainFactSet()) {
  base_config.validate();
  for (size_t i = 0; i + 1 < grid.size(); ++i) {
    if (grid[i] > grid[i + 1]) throw ConfigError("threshold_sweep: grid must ascend");
  }
  auto by_id = detail::index_documents(gold_docs);

  struct Skeleton {
    std::string doc_id;
    int head = 0;
    int tail = 0;
    bool in_domain = false;
    std::string relation;  // exact id, or ood argmax id
    double s_max = -1.0;
  };
  std::vector<Skeleton> skeletons;
  std::map<std::string, std::pair<std::string, double>> ood_memo;

  for (const auto& [doc_id, triples] : triples_by_doc) {
    auto it = by_id.find(doc_id);
    if (it == by_id.end()) {
      throw ContractViolation("threshold_sweep: triples reference unknown document '" + doc_id +
                              "'");
    }
    const Document& doc = *it->second;
    for (const RawTriple& t : triples) {
      std::optional<int> head = align_entity(t.head_surface, doc, base_config.fuzzy_threshold);
      std::optional<int> tail = align_entity(t.tail_surface, doc, base_config.fuzzy_threshold);
      if (!head || !tail || *head == *tail) continue;
      Skeleton s;
      s.doc_id = doc_id;
      s.head = *head;
      s.tail = *tail;
      std::optional<std::string> rel = align_relation(t.relation_surface, relations);
      if (rel) {
        s.in_domain = true;
        s.relation = *rel;
      } else {
        auto memo = ood_memo.find(t.relation_surface);
        if (memo == ood_memo.end()) {
          OodAlignment ood =
              align_out_of_domain(t.relation_surface, relations, embedder, -1.0);
          memo = ood_memo.emplace(t.relation_surface,
                                  std::make_pair(ood.relation, ood.s_max)).first;
        }
        s.relation = memo->second.first;
        s.s_max = memo->second.second;
      }
      skeletons.push_back(std::move(s));
    }
  }

  std::vector<SweepRow> rows;
  for (double theta : grid) {
    std::vector<Prediction> preds;
    for (const Skeleton& s : skeletons) {
      if (!s.in_domain && s.s_max < theta) continue;
      Prediction p;
      p.doc_id = s.doc_id;
      p.head = s.head;
      p.tail = s.tail;
      p.relation = s.relation;
      p.provenance = s.in_domain ? Provenance::in_domain : Provenance::aligned_out_of_domain;
      p.similarity = s.in_domain ? 1.0 : s.s_max;
      preds.push_back(std::move(p));
    }
    SweepRow row;
    row.theta = theta;
    row.report = evaluate(preds, gold_docs, train_facts);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace lmrc

#endif  // LMRC_EVALUATION_HPP
