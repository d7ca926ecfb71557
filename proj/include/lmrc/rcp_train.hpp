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

#ifndef LMRC_RCP_TRAIN_HPP
#define LMRC_RCP_TRAIN_HPP

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"
#include "lmrc/encoder.hpp"
#include "lmrc/evaluation.hpp"
#include "lmrc/rcp_model.hpp"

namespace lmrc {

struct RCPConfig {
  double na_threshold = 0.5;  // propose pairs with P(NA) < na_threshold
  double lr_encoder = 3e-5;
  double lr_head = 1e-4;
  int epochs = 30;
  int batch_size = 4;  // documents per step
  double warmup_fraction = 0.06;
  double max_grad_norm = 1.0;  // 0 disables clipping
  double weight_decay = 0.01;
  std::string early_stopping_metric = "binary_f1";
  int patience = 5;  // epochs without dev improvement before stopping; 0 disables
  uint64_t seed = 42;

  void validate() const {
    if (!(na_threshold > 0.0 && na_threshold < 1.0)) {
      throw ConfigError("na_threshold must lie in (0,1)");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
      throw ConfigError("warmup_fraction must lie in [0,1)");
    }
    if (lr_encoder < 0.0 || lr_head <= 0.0) throw ConfigError("learning rates must be positive");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (early_stopping_metric != "binary_f1") {
      throw ConfigError("unsupported early_stopping_metric: " + early_stopping_metric);
    }
    if (patience < 0) throw ConfigError("patience must be >= 0");
  }
};

inline void to_json(nlohmann::json& j, const RCPConfig& c) {
  j = nlohmann::json{{"na_threshold", c.na_threshold},
                     {"lr_encoder", c.lr_encoder},
                     {"lr_head", c.lr_head},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"warmup_fraction", c.warmup_fraction},
                     {"max_grad_norm", c.max_grad_norm},
                     {"weight_decay", c.weight_decay},
                     {"early_stopping_metric", c.early_stopping_metric},
                     {"patience", c.patience},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, RCPConfig& c) {
  RCPConfig defaults;
  c.na_threshold = j.value("na_threshold", defaults.na_threshold);
  c.lr_encoder = j.value("lr_encoder", defaults.lr_encoder);
  c.lr_head = j.value("lr_head", defaults.lr_head);
  c.epochs = j.value("epochs", defaults.epochs);
  c.batch_size = j.value("batch_size", defaults.batch_size);
  c.warmup_fraction = j.value("warmup_fraction", defaults.warmup_fraction);
  c.max_grad_norm = j.value("max_grad_norm", defaults.max_grad_norm);
  c.weight_decay = j.value("weight_decay", defaults.weight_decay);
  c.early_stopping_metric = j.value("early_stopping_metric", defaults.early_stopping_metric);
  c.patience = j.value("patience", defaults.patience);
  c.seed = j.value("seed", defaults.seed);
}

// One scoreable ordered pair with its precomputed localized context.
struct PairFeature {
  int head = 0;
  int tail = 0;
  Eigen::VectorXd context;
  bool degenerate = false;
  bool is_na = true;
};

// A pair skipped because an endpoint lost every marker to truncation.
struct TruncatedPair {
  int head = 0;
  int tail = 0;
  bool is_na = true;
};

// Per-document feature cache. Bundled encoders are frozen, so pooling
// happens once per document and training touches only the head parameters.
struct DocFeatures {
  std::string doc_id;
  std::vector<Eigen::VectorXd> entity_embed;
  std::vector<bool> entity_visible;  // at least one marker survived truncation
  std::vector<PairFeature> pairs;
  std::vector<TruncatedPair> truncated_pairs;
  bool overflow = false;
  int degenerate_contexts = 0;

  int total_pairs() const {
    return static_cast<int>(pairs.size() + truncated_pairs.size());
  }
};

inline DocFeatures compute_doc_features(const Document& doc, const EncoderProvider& encoder) {
  DocFeatures out;
  out.doc_id = doc.doc_id;
  MarkedDocument marked = mark_entities(doc, encoder.max_length());
  out.overflow = marked.overflow;
  Encoded enc = encoder.encode(marked.tokens);
  check_encoded(enc, encoder);

  int n = static_cast<int>(doc.entities.size());
  out.entity_embed.resize(n);
  out.entity_visible.assign(n, false);
  std::vector<Eigen::MatrixXd> attn(n);
  for (int e = 0; e < n; ++e) {
    std::vector<int> positions = marked.surviving_markers(e);
    if (positions.empty()) continue;
    out.entity_visible[e] = true;
    out.entity_embed[e] = entity_embedding(enc, positions);
    attn[e] = entity_attention(enc, positions);
  }

  std::set<std::pair<int, int>> labeled;
  for (const GoldLabel& g : doc.labels) labeled.insert({g.head, g.tail});

  for (const EntityPair& pair : candidate_pairs(doc)) {
    bool pair_is_na = labeled.find({pair.head, pair.tail}) == labeled.end();
    if (!out.entity_visible[pair.head] || !out.entity_visible[pair.tail]) {
      out.truncated_pairs.push_back(TruncatedPair{pair.head, pair.tail, pair_is_na});
      continue;
    }
    LocalizedContext ctx = localized_context(enc.hidden, attn[pair.head], attn[pair.tail]);
    PairFeature f;
    f.head = pair.head;
    f.tail = pair.tail;
    f.context = std::move(ctx.context);
    f.degenerate = ctx.degenerate;
    f.is_na = pair_is_na;
    if (f.degenerate) ++out.degenerate_contexts;
    out.pairs.push_back(std::move(f));
  }
  return out;
}

// Binary dev score: positive class = pair carries a relation, predicted
// positive when P(NA) < tau. Truncated pairs score P(NA) = 1.
inline BinaryMetrics score_binary(const std::vector<DocFeatures>& docs, const RCPParams& params,
                                  double tau) {
  long tp = 0;
  long proposed = 0;
  long gold_positive = 0;
  for (const DocFeatures& doc : docs) {
    for (const PairFeature& f : doc.pairs) {
      bool gold_pos = !f.is_na;
      double p = clamp_probability(pair_probability(doc.entity_embed[f.head],
                                                    doc.entity_embed[f.tail], f.context, params));
      bool pred_pos = p < tau;
      if (gold_pos) ++gold_positive;
      if (pred_pos) ++proposed;
      if (gold_pos && pred_pos) ++tp;
    }
    // truncated pairs are never proposed but still count toward recall
    for (const TruncatedPair& t : doc.truncated_pairs) {
      if (!t.is_na) ++gold_positive;
    }
  }
  return binary_metrics_from_counts(tp, proposed, gold_positive);
}

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;  // summed over the epoch's pairs
  BinaryMetrics dev;
};

struct TrainResult {
  RCPParams params;  // best-dev checkpoint
  double best_dev_f1 = 0.0;
  int best_epoch = -1;
  long steps_taken = 0;
  bool stopped_early = false;
  std::vector<EpochStats> trajectory;
};

// AdamW moments for one parameter group (decoupled weight decay).
namespace detail {

struct AdamSlot {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;

  void init(int rows, int cols) {
    m = Eigen::MatrixXd::Zero(rows, cols);
    v = Eigen::MatrixXd::Zero(rows, cols);
  }

  void update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, double lr, double wd,
              double beta1, double beta2, double eps, double bc1, double bc2) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v.array().matrix() + (1.0 - beta2) * grad.array().square().matrix();
    Eigen::ArrayXXd mhat = m.array() / bc1;
    Eigen::ArrayXXd vhat = v.array() / bc2;
    param.array() -= lr * (mhat / (vhat.sqrt() + eps) + wd * param.array());
  }
};

struct AdamScalar {
  double m = 0.0;
  double v = 0.0;

  void update(double& param, double grad, double lr, double wd, double beta1, double beta2,
              double eps, double bc1, double bc2) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    double mhat = m / bc1;
    double vhat = v / bc2;
    param -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * param);
  }
};

// Deterministic Fisher-Yates; std::shuffle is implementation-defined.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace detail

// AdamW over the head parameters with linear warmup and global-norm
// clipping. The encoder learning-rate group exists for trainable providers;
// bundled encoders expose no trainable state, so that group is empty and the
// per-pair features are computed once up front.
inline TrainResult train_rcp(const std::vector<Document>& train_docs,
                             const std::vector<Document>& dev_docs,
                             const EncoderProvider& encoder, const RCPConfig& config) {
  config.validate();
  if (train_docs.empty()) throw ContractViolation("train_rcp: empty train corpus");
  for (const Document& d : train_docs) {
    if (!d.labels_present) {
      throw ContractViolation("train_rcp: train document '" + d.doc_id + "' has no labels");
    }
  }
  for (const Document& d : dev_docs) {
    if (!d.labels_present) {
      throw ContractViolation("train_rcp: dev document '" + d.doc_id + "' has no labels");
    }
  }

  std::vector<DocFeatures> train_feats;
  train_feats.reserve(train_docs.size());
  for (const Document& d : train_docs) train_feats.push_back(compute_doc_features(d, encoder));
  std::vector<DocFeatures> dev_feats;
  dev_feats.reserve(dev_docs.size());
  for (const Document& d : dev_docs) dev_feats.push_back(compute_doc_features(d, encoder));

  int d = encoder.hidden_dim();
  TrainResult result;
  result.params = RCPParams::init(d, config.seed);

  if (config.epochs == 0) {
    if (!dev_feats.empty()) {
      result.best_dev_f1 = score_binary(dev_feats, result.params, config.na_threshold).f1;
    }
    return result;
  }

  const double beta1 = 0.9;
  const double beta2 = 0.999;
  const double eps = 1e-8;
  detail::AdamSlot slot_ws, slot_wc, slot_wo, slot_wb;
  detail::AdamScalar slot_b;
  slot_ws.init(d, d);
  slot_wc.init(d, d);
  slot_wo.init(d, d);
  slot_wb.init(d, d);

  long steps_per_epoch =
      (static_cast<long>(train_feats.size()) + config.batch_size - 1) / config.batch_size;
  long total_steps = steps_per_epoch * config.epochs;
  long warmup_steps = static_cast<long>(config.warmup_fraction * static_cast<double>(total_steps));

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(train_feats.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  RCPParams best = result.params;
  double best_f1 = -1.0;
  int best_epoch = -1;
  int stale_epochs = 0;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    detail::deterministic_shuffle(order, rng);
    double epoch_loss = 0.0;
    for (long batch_start = 0; batch_start < static_cast<long>(order.size());
         batch_start += config.batch_size) {
      RCPGrads grads = RCPGrads::zeros(d);
      double batch_loss = 0.0;
      long batch_end =
          std::min<long>(batch_start + config.batch_size, static_cast<long>(order.size()));
      for (long bi = batch_start; bi < batch_end; ++bi) {
        const DocFeatures& doc = train_feats[order[bi]];
        for (const PairFeature& f : doc.pairs) {
          pair_loss_backward(doc.entity_embed[f.head], doc.entity_embed[f.tail], f.context,
                             f.is_na, result.params, grads, batch_loss);
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainError("train_rcp: non-finite loss at epoch " + std::to_string(epoch) +
                         " step " + std::to_string(step));
      }
      epoch_loss += batch_loss;

      if (config.max_grad_norm > 0.0) {
        double norm = std::sqrt(grads.squared_norm());
        if (norm > config.max_grad_norm) {
          grads.scale(config.max_grad_norm / norm);
        }
      }

      ++step;
      double warm = warmup_steps > 0 && step <= warmup_steps
                        ? static_cast<double>(step) / static_cast<double>(warmup_steps)
                        : 1.0;
      double lr = config.lr_head * warm;
      double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      slot_ws.update(result.params.w_s, grads.w_s, lr, config.weight_decay, beta1, beta2, eps,
                     bc1, bc2);
      slot_wc.update(result.params.w_c, grads.w_c, lr, config.weight_decay, beta1, beta2, eps,
                     bc1, bc2);
      slot_wo.update(result.params.w_o, grads.w_o, lr, config.weight_decay, beta1, beta2, eps,
                     bc1, bc2);
      slot_wb.update(result.params.w_bilinear, grads.w_bilinear, lr, config.weight_decay, beta1,
                     beta2, eps, bc1, bc2);
      // bias is exempt from weight decay
      slot_b.update(result.params.b, grads.b, lr, 0.0, beta1, beta2, eps, bc1, bc2);
    }
    if (!result.params.all_finite()) {
      throw TrainError("train_rcp: non-finite parameters after epoch " + std::to_string(epoch));
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss;
    if (!dev_feats.empty()) {
      stats.dev = score_binary(dev_feats, result.params, config.na_threshold);
    }
    result.trajectory.push_back(stats);

    if (dev_feats.empty() || stats.dev.f1 > best_f1) {
      best_f1 = dev_feats.empty() ? 0.0 : stats.dev.f1;
      best = result.params;
      best_epoch = epoch;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
      if (config.patience > 0 && stale_epochs >= config.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }

  result.params = best;
  result.best_dev_f1 = best_f1 < 0.0 ? 0.0 : best_f1;
  result.best_epoch = best_epoch;
  result.steps_taken = step;
  return result;
}

struct DocProposalResult {
  std::vector<EntityPair> proposals;
  int truncated_pairs = 0;
  int degenerate_contexts = 0;
  int total_pairs = 0;
};

// Scores every ordered pair and keeps those with P(NA) < tau. Pairs whose
// endpoints lost all markers to truncation score exactly 1 and are never
// proposed; scoreable pairs carry clamped probabilities, so tau = 1 admits
// all of them.
inline DocProposalResult propose_candidates_detail(const Document& doc,
                                                   const EncoderProvider& encoder,
                                                   const RCPParams& params, double tau) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("propose: tau must lie in [0,1]");
  DocFeatures feats = compute_doc_features(doc, encoder);
  DocProposalResult out;
  out.truncated_pairs = static_cast<int>(feats.truncated_pairs.size());
  out.degenerate_contexts = feats.degenerate_contexts;
  out.total_pairs = feats.total_pairs();
  for (const PairFeature& f : feats.pairs) {
    double p = clamp_probability(pair_probability(feats.entity_embed[f.head],
                                                  feats.entity_embed[f.tail], f.context, params));
    if (p < tau) {
      EntityPair pair;
      pair.doc_id = doc.doc_id;
      pair.head = f.head;
      pair.tail = f.tail;
      pair.na_probability = p;
      out.proposals.push_back(pair);
    }
  }
  return out;
}

inline std::vector<EntityPair> propose_candidates(const Document& doc,
                                                  const EncoderProvider& encoder,
                                                  const RCPParams& params, double tau) {
  return propose_candidates_detail(doc, encoder, params, tau).proposals;
}

struct ProposalResult {
  std::vector<EntityPair> proposals;
  long truncated_pairs = 0;
  long degenerate_contexts = 0;
  long total_pairs = 0;
};

inline ProposalResult propose_corpus(const std::vector<Document>& docs,
                                     const EncoderProvider& encoder, const RCPParams& params,
                                     double tau) {
  ProposalResult out;
  for (const Document& doc : docs) {
    DocProposalResult d = propose_candidates_detail(doc, encoder, params, tau);
    out.truncated_pairs += d.truncated_pairs;
    out.degenerate_contexts += d.degenerate_contexts;
    out.total_pairs += d.total_pairs;
    out.proposals.insert(out.proposals.end(), d.proposals.begin(), d.proposals.end());
  }
  return out;
}

// Versioned structured-text checkpoint holding the head parameters, the
// encoder construction spec, the proposal threshold, and the training config.
struct Checkpoint {
  RCPParams params;
  double na_threshold = 0.5;
  nlohmann::json encoder_spec;
  RCPConfig config;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw FormatError("checkpoint: " + name + " is not a 2-d array");
  }
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols) {
      throw FormatError("checkpoint: ragged rows in " + name);
    }
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace detail

inline constexpr const char* kCheckpointFormat = "lmrc.rcp_checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["dim"] = ckpt.params.dim();
  j["na_threshold"] = ckpt.na_threshold;
  j["encoder"] = ckpt.encoder_spec;
  j["config"] = ckpt.config;
  j["params"] = {{"w_s", detail::matrix_to_json(ckpt.params.w_s)},
                 {"w_c", detail::matrix_to_json(ckpt.params.w_c)},
                 {"w_o", detail::matrix_to_json(ckpt.params.w_o)},
                 {"w_bilinear", detail::matrix_to_json(ckpt.params.w_bilinear)},
                 {"b", ckpt.params.b}};
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
    throw FormatError("not an rcp checkpoint");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version");
  }
  Checkpoint ckpt;
  const nlohmann::json& p = j.at("params");
  ckpt.params.w_s = detail::matrix_from_json(p.at("w_s"), "w_s");
  ckpt.params.w_c = detail::matrix_from_json(p.at("w_c"), "w_c");
  ckpt.params.w_o = detail::matrix_from_json(p.at("w_o"), "w_o");
  ckpt.params.w_bilinear = detail::matrix_from_json(p.at("w_bilinear"), "w_bilinear");
  ckpt.params.b = p.at("b").get<double>();
  ckpt.na_threshold = j.at("na_threshold").get<double>();
  ckpt.encoder_spec = j.value("encoder", nlohmann::json::object());
  if (j.contains("config")) ckpt.config = j.at("config").get<RCPConfig>();
  int declared = j.value("dim", -1);
  if (declared != ckpt.params.dim()) {
    throw FormatError("checkpoint dim does not match stored matrices");
  }
  if (!ckpt.params.all_finite()) throw FormatError("checkpoint holds non-finite parameters");
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint path for writing: " + path);
  out << checkpoint_to_json(ckpt).dump(2) << "\n";
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint parse error: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace lmrc

#endif  // LMRC_RCP_TRAIN_HPP
