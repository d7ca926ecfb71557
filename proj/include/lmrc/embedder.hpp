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

#ifndef LMRC_EMBEDDER_HPP
#define LMRC_EMBEDDER_HPP

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"

namespace lmrc {

// Sentence-embedding contract used for out-of-domain relation alignment.
// embed must return a unit-norm vector and tolerate concurrent calls.
class EmbedderProvider {
 public:
  virtual ~EmbedderProvider() = default;
  virtual Eigen::VectorXd embed(const std::string& text) const = 0;
  virtual int dim() const = 0;
  virtual std::string name() const = 0;
};

// Deterministic character-trigram hashing embedder: casefolds, collapses
// whitespace, pads with one boundary space per side, then signed-hashes each
// trigram into a fixed-width bucket vector and normalizes.
class TrigramHashEmbedder : public EmbedderProvider {
 public:
  explicit TrigramHashEmbedder(int dim = 256, uint64_t seed = 7) : dim_(dim), seed_(seed) {
    if (dim < 2) throw ConfigError("TrigramHashEmbedder: dim must be >= 2");
  }

  Eigen::VectorXd embed(const std::string& text) const override {
    std::string norm = normalize_whitespace(to_lower(text));
    if (norm.empty()) throw ContractViolation("embed: empty text");
    std::string padded = " " + norm + " ";
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    for (size_t i = 0; i + 3 <= padded.size(); ++i) {
      uint64_t h = stable_hash(padded.substr(i, 3), seed_);
      int bucket = static_cast<int>(h % static_cast<uint64_t>(dim_));
      v[bucket] += (h >> 63) ? 1.0 : -1.0;
    }
    double n = v.norm();
    if (n < 1e-12) {
      // all trigrams cancelled; deterministic unit fallback
      v.setZero();
      v[static_cast<int>(stable_hash(padded, seed_) % static_cast<uint64_t>(dim_))] = 1.0;
      return v;
    }
    return v / n;
  }

  int dim() const override { return dim_; }
  std::string name() const override { return "trigram_hash"; }

 private:
  int dim_;
  uint64_t seed_;
};

// Thread-safe memoizing wrapper; alignment sweeps re-embed the same relation
// names and surfaces many times.
class MemoizingEmbedder : public EmbedderProvider {
 public:
  explicit MemoizingEmbedder(std::shared_ptr<const EmbedderProvider> inner)
      : inner_(std::move(inner)) {
    if (!inner_) throw ContractViolation("MemoizingEmbedder: null inner provider");
  }

  Eigen::VectorXd embed(const std::string& text) const override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(text);
      if (it != cache_.end()) return it->second;
    }
    Eigen::VectorXd v = inner_->embed(text);
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(text, std::move(v)).first->second;
  }

  int dim() const override { return inner_->dim(); }
  std::string name() const override { return inner_->name() + "+memo"; }

 private:
  std::shared_ptr<const EmbedderProvider> inner_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, Eigen::VectorXd> cache_;
};

inline std::shared_ptr<EmbedderProvider> make_embedder(const nlohmann::json& spec) {
  std::string type = spec.value("type", "trigram_hash");
  if (type == "trigram_hash") {
    return std::make_shared<TrigramHashEmbedder>(spec.value("dim", 256),
                                                 spec.value("seed", uint64_t{7}));
  }
  throw ConfigError("unknown embedder type: " + type);
}

}  // namespace lmrc

#endif  // LMRC_EMBEDDER_HPP
