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

#ifndef LMRC_ENCODER_HPP
#define LMRC_ENCODER_HPP

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"

namespace lmrc {

// Contextual embeddings H (l x d) and last-layer attentions A, one l x l
// row-stochastic matrix per head.
struct Encoded {
  Eigen::MatrixXd hidden;
  std::vector<Eigen::MatrixXd> attention;

  int length() const { return static_cast<int>(hidden.rows()); }
  int dim() const { return static_cast<int>(hidden.cols()); }
  int heads() const { return static_cast<int>(attention.size()); }
};

// Injected encoder contract. Implementations must produce attention rows
// that sum to 1 per head per query position (within 1e-4) and dimensions
// matching hidden_dim()/num_heads().
class EncoderProvider {
 public:
  virtual ~EncoderProvider() = default;
  virtual Encoded encode(const std::vector<std::string>& tokens) const = 0;
  virtual int max_length() const = 0;
  virtual int hidden_dim() const = 0;
  virtual int num_heads() const = 0;
};

inline void check_encoded(const Encoded& enc, const EncoderProvider& provider) {
  if (enc.dim() != provider.hidden_dim()) {
    throw ValidationError("encoder output dim " + std::to_string(enc.dim()) +
                          " does not match declared hidden_dim " +
                          std::to_string(provider.hidden_dim()));
  }
  if (enc.heads() != provider.num_heads()) {
    throw ValidationError("encoder produced " + std::to_string(enc.heads()) +
                          " attention heads, declared " + std::to_string(provider.num_heads()));
  }
  int l = enc.length();
  for (int h = 0; h < enc.heads(); ++h) {
    const Eigen::MatrixXd& a = enc.attention[h];
    if (a.rows() != l || a.cols() != l) {
      throw ValidationError("attention head " + std::to_string(h) + " is not l x l");
    }
    for (int q = 0; q < l; ++q) {
      double s = a.row(q).sum();
      if (std::abs(s - 1.0) > 1e-4) {
        throw ValidationError("attention row does not sum to 1 (head " + std::to_string(h) +
                              ", query " + std::to_string(q) + ", sum " + std::to_string(s) + ")");
      }
      if ((a.row(q).array() < 0.0).any()) {
        throw ValidationError("negative attention weight at head " + std::to_string(h));
      }
    }
  }
}

// Deterministic context-sensitive featurizer standing in for a pretrained
// encoder. Each token string hashes to a fixed Gaussian vector; a row mixes
// in its neighbors so marker positions pick up the mention they wrap.
// Attention head h spreads uniformly over a +/-(window+h) band.
class HashEncoder : public EncoderProvider {
 public:
  HashEncoder(int dim, int heads, int max_len, uint64_t seed, int window = 3,
              double neighbor_mix = 0.5)
      : dim_(dim), heads_(heads), max_len_(max_len), seed_(seed), window_(window),
        neighbor_mix_(neighbor_mix) {
    if (dim < 1 || heads < 1 || max_len < 1 || window < 0) {
      throw ConfigError("HashEncoder: dim, heads, max_len must be >= 1 and window >= 0");
    }
  }

  Encoded encode(const std::vector<std::string>& tokens) const override {
    int l = static_cast<int>(tokens.size());
    if (l == 0) throw ContractViolation("encode: empty token sequence");
    if (l > max_len_) throw ContractViolation("encode: sequence exceeds max_length");
    Eigen::MatrixXd base(l, dim_);
    for (int i = 0; i < l; ++i) base.row(i) = token_vector(tokens[i]);
    Encoded enc;
    enc.hidden = base;
    for (int i = 0; i < l; ++i) {
      if (i > 0) enc.hidden.row(i) += neighbor_mix_ * base.row(i - 1);
      if (i + 1 < l) enc.hidden.row(i) += neighbor_mix_ * base.row(i + 1);
    }
    enc.attention.reserve(heads_);
    for (int h = 0; h < heads_; ++h) {
      int w = window_ + h;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(l, l);
      for (int q = 0; q < l; ++q) {
        int lo = std::max(0, q - w);
        int hi = std::min(l - 1, q + w);
        double mass = 1.0 / static_cast<double>(hi - lo + 1);
        for (int k = lo; k <= hi; ++k) a(q, k) = mass;
      }
      enc.attention.push_back(std::move(a));
    }
    return enc;
  }

  int max_length() const override { return max_len_; }
  int hidden_dim() const override { return dim_; }
  int num_heads() const override { return heads_; }

 private:
  Eigen::VectorXd token_vector(const std::string& token) const {
    std::mt19937_64 rng(stable_hash(token, seed_));
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim_)));
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v[i] = dist(rng);
    return v;
  }

  int dim_;
  int heads_;
  int max_len_;
  uint64_t seed_;
  int window_;
  double neighbor_mix_;
};

// Builds an encoder from a spec like
//   {"type":"hash","dim":32,"heads":2,"max_length":512,"seed":13,
//    "window":3,"neighbor_mix":0.5}
inline std::shared_ptr<EncoderProvider> make_encoder(const nlohmann::json& spec) {
  std::string type = spec.value("type", "");
  if (type == "hash") {
    return std::make_shared<HashEncoder>(
        spec.value("dim", 32), spec.value("heads", 2), spec.value("max_length", 512),
        spec.value("seed", 13ull), spec.value("window", 3), spec.value("neighbor_mix", 0.5));
  }
  throw ConfigError("unknown encoder type: '" + type + "'");
}

}  // namespace lmrc

#endif  // LMRC_ENCODER_HPP
