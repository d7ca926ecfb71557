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

#ifndef LMRC_RCP_MODEL_HPP
#define LMRC_RCP_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"
#include "lmrc/encoder.hpp"

namespace lmrc {

inline constexpr double kProbEps = 1e-7;  // probabilities clamped to [eps, 1-eps] before logs
inline constexpr const char* kEntityMarker = "*";

// A document flattened to one token sequence with a "*" wrapped around each
// mention. mention_marker_pos mirrors the entity/mention nesting and holds the index
// of each mention's opening marker, or -1 when truncation cut it away.
struct MarkedDocument {
  std::vector<std::string> tokens;
  std::vector<std::vector<int>> mention_marker_pos;
  bool overflow = false;
  int total_markers = 0;  // opening + closing markers kept after truncation

  // Opening-marker positions that survived truncation, per entity.
  std::vector<int> surviving_markers(int entity) const {
    std::vector<int> out;
    for (int p : mention_marker_pos[entity]) {
      if (p >= 0) out.push_back(p);
    }
    return out;
  }
};

// Wraps every mention in "*" markers and flattens the document. At a shared
// token boundary, closing markers are emitted before opening markers so
// adjacent mentions do not interleave; nested mentions open outermost-first
// and close innermost-first. Truncates at `capacity` tokens (0 = unlimited).
inline MarkedDocument mark_entities(const Document& doc, int capacity = 0) {
  struct Ref { int entity; int mention; };
  MarkedDocument out;
  out.mention_marker_pos.resize(doc.entities.size());
  for (size_t ei = 0; ei < doc.entities.size(); ++ei) {
    out.mention_marker_pos[ei].assign(doc.entities[ei].mentions.size(), -1);
  }

  std::vector<std::string> flat;
  for (int s = 0; s < static_cast<int>(doc.sentences.size()); ++s) {
    const auto& sent = doc.sentences[s];
    int len = static_cast<int>(sent.size());
    std::vector<std::vector<Ref>> opens(len + 1), closes(len + 1);
    for (size_t ei = 0; ei < doc.entities.size(); ++ei) {
      const Entity& ent = doc.entities[ei];
      for (size_t mi = 0; mi < ent.mentions.size(); ++mi) {
        const Mention& m = ent.mentions[mi];
        if (m.sent_id != s) continue;
        if (m.start < 0 || m.end > len || m.start >= m.end) {
          throw ValidationError("mention [" + std::to_string(m.start) + "," +
                                std::to_string(m.end) + ") of entity " + std::to_string(ei) +
                                " exceeds sentence " + std::to_string(s));
        }
        opens[m.start].push_back(Ref{static_cast<int>(ei), static_cast<int>(mi)});
        closes[m.end].push_back(Ref{static_cast<int>(ei), static_cast<int>(mi)});
      }
    }
    auto span_of = [&](const Ref& r) { return doc.entities[r.entity].mentions[r.mention]; };
    for (int g = 0; g <= len; ++g) {
      // innermost (latest start) closes first
      std::sort(closes[g].begin(), closes[g].end(), [&](const Ref& a, const Ref& b) {
        const Mention& ma = span_of(a);
        const Mention& mb = span_of(b);
        if (ma.start != mb.start) return ma.start > mb.start;
        return std::tie(a.entity, a.mention) < std::tie(b.entity, b.mention);
      });
      // outermost (latest end) opens first
      std::sort(opens[g].begin(), opens[g].end(), [&](const Ref& a, const Ref& b) {
        const Mention& ma = span_of(a);
        const Mention& mb = span_of(b);
        if (ma.end != mb.end) return ma.end > mb.end;
        return std::tie(a.entity, a.mention) < std::tie(b.entity, b.mention);
      });
      for (size_t c = 0; c < closes[g].size(); ++c) {
        flat.push_back(kEntityMarker);
      }
      for (const Ref& r : opens[g]) {
        out.mention_marker_pos[r.entity][r.mention] = static_cast<int>(flat.size());
        flat.push_back(kEntityMarker);
      }
      if (g < len) flat.push_back(sent[g]);
    }
  }

  if (capacity > 0 && static_cast<int>(flat.size()) > capacity) {
    flat.resize(capacity);
    out.overflow = true;
    for (auto& positions : out.mention_marker_pos) {
      for (int& p : positions) {
        if (p >= capacity) p = -1;
      }
    }
  }
  out.tokens = std::move(flat);
  out.total_markers = static_cast<int>(
      std::count(out.tokens.begin(), out.tokens.end(), kEntityMarker));
  return out;
}

// Elementwise logsumexp of the H rows at `positions`, max-shifted.
inline Eigen::VectorXd entity_embedding(const Encoded& enc, const std::vector<int>& positions) {
  if (positions.empty()) {
    throw ContractViolation("entity_embedding: no marker positions");
  }
  for (int p : positions) {
    if (p < 0 || p >= enc.length()) throw ContractViolation("entity_embedding: position out of range");
  }
  int d = enc.dim();
  Eigen::VectorXd mx = enc.hidden.row(positions[0]);
  for (int p : positions) {
    mx = mx.cwiseMax(enc.hidden.row(p).transpose());
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (int p : positions) {
    acc += (enc.hidden.row(p).transpose() - mx).array().exp().matrix();
  }
  return mx + acc.array().log().matrix();
}

// Mean over the entity's mention positions of the last-layer attention rows;
// result is heads x l.
inline Eigen::MatrixXd entity_attention(const Encoded& enc, const std::vector<int>& positions) {
  if (positions.empty()) {
    throw ContractViolation("entity_attention: no marker positions");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(enc.heads(), enc.length());
  for (int p : positions) {
    if (p < 0 || p >= enc.length()) throw ContractViolation("entity_attention: position out of range");
    for (int h = 0; h < enc.heads(); ++h) {
      out.row(h) += enc.attention[h].row(p);
    }
  }
  out /= static_cast<double>(positions.size());
  return out;
}

struct LocalizedContext {
  Eigen::VectorXd context;
  bool degenerate = false;  // the head products summed to zero; fell back to uniform
};

// Pair-specific context: q = sum over heads of (A_s . A_o), normalized to a
// distribution, then c = H^T q. Disjoint attention supports fall back to a
// uniform q.
inline LocalizedContext localized_context(const Eigen::MatrixXd& hidden,
                                          const Eigen::MatrixXd& attn_s,
                                          const Eigen::MatrixXd& attn_o) {
  if (attn_s.rows() != attn_o.rows() || attn_s.cols() != attn_o.cols() ||
      attn_s.cols() != hidden.rows()) {
    throw ContractViolation("localized_context: inconsistent shapes");
  }
  int l = static_cast<int>(hidden.rows());
  Eigen::VectorXd q = Eigen::VectorXd::Zero(l);
  for (int h = 0; h < attn_s.rows(); ++h) {
    q += attn_s.row(h).cwiseProduct(attn_o.row(h)).transpose();
  }
  LocalizedContext out;
  double total = q.sum();
  if (total <= 0.0) {
    q.setConstant(1.0 / static_cast<double>(l));
    out.degenerate = true;
  } else {
    q /= total;
  }
  out.context = hidden.transpose() * q;
  return out;
}

// Trainable head parameters: subject/object/context projections, the
// bilinear form, and its bias.
struct RCPParams {
  Eigen::MatrixXd w_s;
  Eigen::MatrixXd w_c;
  Eigen::MatrixXd w_o;
  Eigen::MatrixXd w_bilinear;
  double b = 0.0;

  int dim() const { return static_cast<int>(w_s.rows()); }

  static RCPParams zeros(int d) {
    RCPParams p;
    p.w_s = Eigen::MatrixXd::Zero(d, d);
    p.w_c = Eigen::MatrixXd::Zero(d, d);
    p.w_o = Eigen::MatrixXd::Zero(d, d);
    p.w_bilinear = Eigen::MatrixXd::Zero(d, d);
    p.b = 0.0;
    return p;
  }

  // Symmetric uniform fan-in init U(-1/sqrt(d), 1/sqrt(d)); b = 0.
  static RCPParams init(int d, uint64_t seed) {
    std::mt19937_64 rng(seed);
    double bound = 1.0 / std::sqrt(static_cast<double>(d));
    // Uniform draws built from raw bits so checkpoints replay identically
    // across standard libraries.
    auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    auto fill = [&](Eigen::MatrixXd& m) {
      m.resize(d, d);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) m(i, j) = bound * (2.0 * unit() - 1.0);
      }
    };
    RCPParams p;
    fill(p.w_s);
    fill(p.w_c);
    fill(p.w_o);
    fill(p.w_bilinear);
    p.b = 0.0;
    return p;
  }

  bool all_finite() const {
    return w_s.allFinite() && w_c.allFinite() && w_o.allFinite() && w_bilinear.allFinite() &&
           std::isfinite(b);
  }
};

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbEps, 1.0 - kProbEps);
}

// P(NA | e_s, e_o) = sigmoid(tanh(W_s h_s + W_c c)^T W tanh(W_o h_o + W_c c) + b).
inline double pair_probability(const Eigen::VectorXd& h_s, const Eigen::VectorXd& h_o,
                               const Eigen::VectorXd& context, const RCPParams& params) {
  Eigen::VectorXd z_s = (params.w_s * h_s + params.w_c * context).array().tanh();
  Eigen::VectorXd z_o = (params.w_o * h_o + params.w_c * context).array().tanh();
  double logit = z_s.dot(params.w_bilinear * z_o) + params.b;
  return sigmoid(logit);
}

// Summed binary cross entropy over the batch; probabilities are clamped to
// [kProbEps, 1-kProbEps] before the logs. is_na[i] == true means the pair
// carries no relation (the positive class of this classifier).
inline double bce_loss(const std::vector<double>& probs, const std::vector<bool>& is_na) {
  if (probs.size() != is_na.size()) {
    throw ContractViolation("bce_loss: probs and labels differ in length");
  }
  double loss = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    double p = clamp_probability(probs[i]);
    loss -= is_na[i] ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

// Gradient accumulator matching RCPParams.
struct RCPGrads {
  Eigen::MatrixXd w_s;
  Eigen::MatrixXd w_c;
  Eigen::MatrixXd w_o;
  Eigen::MatrixXd w_bilinear;
  double b = 0.0;

  static RCPGrads zeros(int d) {
    RCPGrads g;
    g.w_s = Eigen::MatrixXd::Zero(d, d);
    g.w_c = Eigen::MatrixXd::Zero(d, d);
    g.w_o = Eigen::MatrixXd::Zero(d, d);
    g.w_bilinear = Eigen::MatrixXd::Zero(d, d);
    g.b = 0.0;
    return g;
  }

  double squared_norm() const {
    return w_s.squaredNorm() + w_c.squaredNorm() + w_o.squaredNorm() + w_bilinear.squaredNorm() +
           b * b;
  }

  void scale(double f) {
    w_s *= f;
    w_c *= f;
    w_o *= f;
    w_bilinear *= f;
    b *= f;
  }
};

// One pair's forward pass plus analytic gradient of its BCE term,
// accumulated into `grads`. Returns the pair's P(NA).
inline double pair_loss_backward(const Eigen::VectorXd& h_s, const Eigen::VectorXd& h_o,
                                 const Eigen::VectorXd& context, bool is_na,
                                 const RCPParams& params, RCPGrads& grads, double& loss) {
  Eigen::VectorXd u_s = params.w_s * h_s + params.w_c * context;
  Eigen::VectorXd u_o = params.w_o * h_o + params.w_c * context;
  Eigen::VectorXd z_s = u_s.array().tanh();
  Eigen::VectorXd z_o = u_o.array().tanh();
  double logit = z_s.dot(params.w_bilinear * z_o) + params.b;
  double p = sigmoid(logit);

  double pc = clamp_probability(p);
  loss -= is_na ? std::log(pc) : std::log(1.0 - pc);

  // dL/dlogit = p - y for the clamped-interior case.
  double dlogit = p - (is_na ? 1.0 : 0.0);
  grads.b += dlogit;
  grads.w_bilinear += dlogit * (z_s * z_o.transpose());
  Eigen::VectorXd dz_s = dlogit * (params.w_bilinear * z_o);
  Eigen::VectorXd dz_o = dlogit * (params.w_bilinear.transpose() * z_s);
  Eigen::VectorXd du_s = dz_s.cwiseProduct((1.0 - z_s.array().square()).matrix());
  Eigen::VectorXd du_o = dz_o.cwiseProduct((1.0 - z_o.array().square()).matrix());
  grads.w_s += du_s * h_s.transpose();
  grads.w_o += du_o * h_o.transpose();
  grads.w_c += (du_s + du_o) * context.transpose();
  return p;
}

}  // namespace lmrc

#endif  // LMRC_RCP_MODEL_HPP
