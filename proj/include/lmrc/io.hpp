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

#ifndef LMRC_IO_HPP
#define LMRC_IO_HPP

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"
#include "lmrc/corpus.hpp"
#include "lmrc/parsing.hpp"
#include "lmrc/prompting.hpp"

namespace lmrc {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  out << content;
  if (!out) throw ConfigError("failed writing file: " + path);
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw FormatError(path + ":" + std::to_string(line_number) + ": invalid JSON line");
    }
    out.push_back(std::move(j));
  }
  return out;
}

inline void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing: " + path);
  for (const nlohmann::json& j : records) {
    out << j.dump() << "\n";
  }
  if (!out) throw ConfigError("failed writing file: " + path);
}

// Proposal records: {doc_id, head, tail, na_probability}.
inline void write_proposals(const std::string& path, const std::vector<EntityPair>& proposals) {
  std::vector<nlohmann::json> records;
  records.reserve(proposals.size());
  for (const EntityPair& p : proposals) {
    records.push_back(nlohmann::json{{"doc_id", p.doc_id},
                                     {"head", p.head},
                                     {"tail", p.tail},
                                     {"na_probability", p.na_probability}});
  }
  write_jsonl(path, records);
}

inline std::vector<EntityPair> read_proposals(const std::string& path) {
  std::vector<EntityPair> out;
  for (const nlohmann::json& j : read_jsonl(path)) {
    EntityPair p;
    p.doc_id = j.at("doc_id").get<std::string>();
    p.head = j.at("head").get<int>();
    p.tail = j.at("tail").get<int>();
    p.na_probability = j.value("na_probability", -1.0);
    if (p.head == p.tail || p.head < 0 || p.tail < 0) {
      throw ValidationError("proposal with invalid pair (" + std::to_string(p.head) + "," +
                            std::to_string(p.tail) + ") in " + path);
    }
    out.push_back(std::move(p));
  }
  return out;
}

// Prediction records in the DocRED submission shape: {title, h_idx, t_idx, r}.
inline void write_predictions(const std::string& path, const std::vector<Prediction>& preds) {
  std::vector<nlohmann::json> records;
  records.reserve(preds.size());
  for (const Prediction& p : preds) {
    records.push_back(nlohmann::json{
        {"title", p.doc_id}, {"h_idx", p.head}, {"t_idx", p.tail}, {"r", p.relation}});
  }
  write_jsonl(path, records);
}

inline std::vector<Prediction> read_predictions(const std::string& path) {
  std::vector<Prediction> out;
  for (const nlohmann::json& j : read_jsonl(path)) {
    Prediction p;
    p.doc_id = j.at("title").get<std::string>();
    p.head = j.at("h_idx").get<int>();
    p.tail = j.at("t_idx").get<int>();
    p.relation = j.at("r").get<std::string>();
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_finetune_records(const std::string& path,
                                   const std::vector<FinetuneRecord>& records) {
  std::vector<nlohmann::json> rows;
  rows.reserve(records.size());
  for (const FinetuneRecord& r : records) {
    rows.push_back(nlohmann::json{{"prompt", r.prompt}, {"completion", r.completion}});
  }
  write_jsonl(path, rows);
}

inline void write_rejections(const std::string& path, const std::vector<RejectedLine>& lines) {
  std::vector<nlohmann::json> rows;
  rows.reserve(lines.size());
  for (const RejectedLine& r : lines) {
    nlohmann::json j{{"doc_id", r.tag.doc_id},
                     {"chunk_index", r.tag.chunk_index},
                     {"line_number", r.tag.line_number},
                     {"raw", r.raw},
                     {"reason", r.reason}};
    if (r.similarity) j["similarity"] = *r.similarity;
    rows.push_back(std::move(j));
  }
  write_jsonl(path, rows);
}

inline std::string file_checksum_hex(const std::string& path) {
  uint64_t h = fnv1a64(read_text_file(path));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// Run manifest: config snapshot, per-artifact checksums, stage timings.
class RunManifest {
 public:
  explicit RunManifest(nlohmann::json config_snapshot)
      : config_(std::move(config_snapshot)) {}

  void add_artifact(const std::string& path) {
    artifacts_[path] = nlohmann::json{
        {"checksum_fnv1a64", file_checksum_hex(path)},
        {"bytes", static_cast<int64_t>(std::filesystem::file_size(path))}};
  }

  void add_timing(const std::string& stage, double ms) { timings_[stage] = ms; }

  nlohmann::json to_json() const {
    return nlohmann::json{{"version", kVersion},
                          {"config", config_},
                          {"artifacts", artifacts_},
                          {"timings_ms", timings_}};
  }

  void write(const std::string& path) const { write_text_file(path, to_json().dump(2) + "\n"); }

 private:
  nlohmann::json config_;
  nlohmann::json artifacts_ = nlohmann::json::object();
  nlohmann::json timings_ = nlohmann::json::object();
};

}  // namespace lmrc

#endif  // LMRC_IO_HPP
