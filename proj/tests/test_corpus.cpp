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

#include <filesystem>
#include <fstream>

#include "lmrc/corpus.hpp"
#include "support/toy_data.hpp"

using namespace lmrc;
using lmrc_test::make_doc;
using lmrc_test::temp_dir;
using lmrc_test::toy_corpus;
using lmrc_test::toy_relations;

namespace {

std::string write_json(const std::filesystem::path& dir, const std::string& name,
                       const nlohmann::json& j) {
  auto path = dir / name;
  std::ofstream out(path);
  out << j.dump() << "\n";
  return path.string();
}

nlohmann::json docred_style_doc(const std::string& title) {
  return nlohmann::json{
      {"title", title},
      {"sents", {{"Albert", "Einstein", "was", "born", "in", "Ulm", "."}}},
      {"vertexSet",
       {{{{"name", "Albert Einstein"}, {"sent_id", 0}, {"pos", {0, 2}}, {"type", "PER"}}},
        {{{"name", "Ulm"}, {"sent_id", 0}, {"pos", {5, 6}}, {"type", "LOC"}}}}},
      {"labels", {{{"h", 0}, {"t", 1}, {"r", "P19"}}}}};
}

}  // namespace

TEST_CASE("RelationSet basics") {
  RelationSet rs = toy_relations();
  CHECK(rs.size() == 10);
  CHECK(rs.contains("P17"));
  CHECK_FALSE(rs.contains("P9999"));
  CHECK(rs.name_of("P569") == "date of birth");
  CHECK(rs.index_of("P17") == 0);
  CHECK(rs.id_by_name("date of birth").value() == "P569");
  CHECK(rs.id_by_name("Date  Of Birth").value() == "P569");
  CHECK_FALSE(rs.id_by_name("works at").has_value());
  CHECK_THROWS_AS(rs.name_of("P9999"), ContractViolation);
}

TEST_CASE("RelationSet rejects duplicates") {
  RelationSet rs;
  rs.add("P17", "country");
  CHECK_THROWS_AS(rs.add("P17", "other"), ValidationError);
  CHECK_THROWS_AS(rs.add("P18", "Country"), ValidationError);
}

TEST_CASE("load_documents accepts both JSON array and JSONL") {
  auto dir = temp_dir("corpus_load");
  RelationSet rs = toy_relations();

  nlohmann::json arr = nlohmann::json::array({docred_style_doc("d1"), docred_style_doc("d2")});
  auto docs = load_documents(write_json(dir, "arr.json", arr), rs);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].doc_id == "d1");
  CHECK(docs[0].entities.size() == 2);
  CHECK(docs[0].entities[0].mentions[0].surface == "Albert Einstein");
  CHECK(docs[0].labels.size() == 1);
  CHECK(docs[0].labels_present);

  std::ofstream out(dir / "lines.jsonl");
  out << docred_style_doc("l1").dump() << "\n" << docred_style_doc("l2").dump() << "\n";
  out.close();
  auto docs2 = load_documents((dir / "lines.jsonl").string(), rs);
  REQUIRE(docs2.size() == 2);
  CHECK(docs2[1].doc_id == "l2");
}

TEST_CASE("mention surface is the joined span, not the dataset name field") {
  auto dir = temp_dir("corpus_surface");
  nlohmann::json jd = docred_style_doc("d1");
  jd["vertexSet"][0][0]["name"] = "A. Einstein";  // disagrees with the span
  RelationSet rs = toy_relations();
  auto docs = load_documents(write_json(dir, "d.json", nlohmann::json::array({jd})), rs);
  CHECK(docs[0].entities[0].mentions[0].surface == "Albert Einstein");
}

TEST_CASE("validation failures name the offending pieces") {
  auto dir = temp_dir("corpus_invalid");
  RelationSet rs = toy_relations();

  SECTION("span end <= start") {
    nlohmann::json jd = docred_style_doc("d1");
    jd["vertexSet"][0][0]["pos"] = {2, 2};
    CHECK_THROWS_AS(load_documents(write_json(dir, "a.json", nlohmann::json::array({jd})), rs),
                    ValidationError);
    try {
      load_documents(write_json(dir, "a2.json", nlohmann::json::array({jd})), rs);
    } catch (const ValidationError& e) {
      std::string msg = e.what();
      CHECK(msg.find("d1") != std::string::npos);
      CHECK(msg.find("vertexSet") != std::string::npos);
    }
  }
  SECTION("span beyond sentence end") {
    nlohmann::json jd = docred_style_doc("d1");
    jd["vertexSet"][1][0]["pos"] = {5, 9};
    CHECK_THROWS_AS(load_documents(write_json(dir, "b.json", nlohmann::json::array({jd})), rs),
                    ValidationError);
  }
  SECTION("bad sentence index") {
    nlohmann::json jd = docred_style_doc("d1");
    jd["vertexSet"][1][0]["sent_id"] = 4;
    CHECK_THROWS_AS(load_documents(write_json(dir, "c.json", nlohmann::json::array({jd})), rs),
                    ValidationError);
  }
  SECTION("unknown relation id") {
    nlohmann::json jd = docred_style_doc("d1");
    jd["labels"][0]["r"] = "P9999";
    CHECK_THROWS_AS(load_documents(write_json(dir, "d.json", nlohmann::json::array({jd})), rs),
                    ValidationError);
  }
  SECTION("self-loop label") {
    nlohmann::json jd = docred_style_doc("d1");
    jd["labels"][0]["t"] = 0;
    CHECK_THROWS_AS(load_documents(write_json(dir, "e.json", nlohmann::json::array({jd})), rs),
                    ValidationError);
  }
  SECTION("label entity out of range") {
    nlohmann::json jd = docred_style_doc("d1");
    jd["labels"][0]["t"] = 7;
    CHECK_THROWS_AS(load_documents(write_json(dir, "f.json", nlohmann::json::array({jd})), rs),
                    ValidationError);
  }
  SECTION("entity with no mentions") {
    nlohmann::json jd = docred_style_doc("d1");
    jd["vertexSet"].push_back(nlohmann::json::array());
    CHECK_THROWS_AS(load_documents(write_json(dir, "g.json", nlohmann::json::array({jd})), rs),
                    ValidationError);
  }
  SECTION("duplicate titles") {
    nlohmann::json arr = nlohmann::json::array({docred_style_doc("same"), docred_style_doc("same")});
    CHECK_THROWS_AS(load_documents(write_json(dir, "h.json", arr), rs), ValidationError);
  }
}

TEST_CASE("hidden-label split loads with labels_present false") {
  auto dir = temp_dir("corpus_hidden");
  nlohmann::json jd = docred_style_doc("d1");
  jd.erase("labels");
  RelationSet rs = toy_relations();
  auto docs = load_documents(write_json(dir, "h.json", nlohmann::json::array({jd})), rs);
  CHECK_FALSE(docs[0].labels_present);
  CHECK(docs[0].labels.empty());

  CorpusStats stats = corpus_statistics(docs);
  CHECK_FALSE(stats.has_labels);
  CHECK(stats.candidate_space == 2);
}

TEST_CASE("candidate_pairs enumerates ordered pairs in row order") {
  Document doc = make_doc("d", {{"a", "b", "c"}},
                          {{{0, 0, 1, "X"}}, {{0, 1, 2, "X"}}, {{0, 2, 3, "X"}}}, {});
  auto pairs = candidate_pairs(doc);
  REQUIRE(pairs.size() == 6);
  std::vector<std::pair<int, int>> got;
  for (const auto& p : pairs) {
    got.push_back({p.head, p.tail});
    CHECK(p.doc_id == "d");
    CHECK_FALSE(p.scored());
  }
  std::vector<std::pair<int, int>> want = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
  CHECK(got == want);
}

TEST_CASE("candidate_pairs on a single-entity document is empty") {
  Document doc = make_doc("d", {{"a"}}, {{{0, 0, 1, "X"}}}, {});
  CHECK(candidate_pairs(doc).empty());
}

TEST_CASE("gold_triples and gold_pairs deduplicate") {
  Document doc = make_doc("d", {{"a", "b"}}, {{{0, 0, 1, "X"}}, {{0, 1, 2, "X"}}},
                          {{0, 1, "P17"}, {0, 1, "P131"}, {0, 1, "P17"}});
  auto triples = gold_triples(doc);
  CHECK(triples.size() == 2);
  CHECK(triples.count({0, 1, "P17"}) == 1);
  CHECK(triples.count({0, 1, "P131"}) == 1);
  auto pairs = gold_pairs(doc);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].head == 0);
  CHECK(pairs[0].tail == 1);
}

TEST_CASE("corpus_statistics on a single small document") {
  // Two entities, one labeled pair: candidate space 2, 1 NA pair, 1
  // relation pair, 1 triple.
  Document doc =
      make_doc("d", {{"a", "b"}}, {{{0, 0, 1, "X"}}, {{0, 1, 2, "X"}}}, {{0, 1, "P17"}});
  CorpusStats s = corpus_statistics({doc});
  CHECK(s.candidate_space == 2);
  CHECK(s.na_pairs == 1);
  CHECK(s.relation_pairs == 1);
  CHECK(s.annotated_triples == 1);
  CHECK(s.has_labels);
}

TEST_CASE("corpus_statistics identities hold on the toy corpus") {
  auto docs = toy_corpus();
  REQUIRE(docs.size() == 20);
  CorpusStats s = corpus_statistics(docs);
  CHECK(s.candidate_space == s.na_pairs + s.relation_pairs);
  CHECK(s.annotated_triples >= s.relation_pairs);
  CHECK(s.candidate_space == 112);
  CHECK(s.relation_pairs == 37);
  CHECK(s.annotated_triples == 38);
  long long pair_sum = 0;
  for (const auto& d : docs) {
    long long n = d.entity_count();
    pair_sum += n * (n - 1);
    CHECK(static_cast<long long>(candidate_pairs(d).size()) == n * (n - 1));
  }
  CHECK(pair_sum == s.candidate_space);
}

TEST_CASE("every gold label pair is in the candidate space") {
  for (const auto& doc : toy_corpus()) {
    auto pairs = candidate_pairs(doc);
    std::set<std::pair<int, int>> cand;
    for (const auto& p : pairs) cand.insert({p.head, p.tail});
    for (const auto& l : doc.labels) {
      CHECK(cand.count({l.head, l.tail}) == 1);
    }
  }
}

TEST_CASE("serialize round-trip preserves every field") {
  auto dir = temp_dir("corpus_roundtrip");
  auto docs = toy_corpus();
  std::string path = (dir / "out.jsonl").string();
  write_corpus_jsonl(docs, path);
  auto back = load_documents(path, toy_relations());
  REQUIRE(back.size() == docs.size());
  for (size_t i = 0; i < docs.size(); ++i) {
    CHECK(back[i].doc_id == docs[i].doc_id);
    CHECK(back[i].sentences == docs[i].sentences);
    CHECK(back[i].labels_present == docs[i].labels_present);
    REQUIRE(back[i].entities.size() == docs[i].entities.size());
    for (size_t e = 0; e < docs[i].entities.size(); ++e) {
      const Entity& a = docs[i].entities[e];
      const Entity& b = back[i].entities[e];
      REQUIRE(a.mentions.size() == b.mentions.size());
      for (size_t m = 0; m < a.mentions.size(); ++m) {
        CHECK(a.mentions[m].surface == b.mentions[m].surface);
        CHECK(a.mentions[m].sent_id == b.mentions[m].sent_id);
        CHECK(a.mentions[m].start == b.mentions[m].start);
        CHECK(a.mentions[m].end == b.mentions[m].end);
        CHECK(a.mentions[m].type == b.mentions[m].type);
      }
    }
    REQUIRE(back[i].labels.size() == docs[i].labels.size());
    for (size_t l = 0; l < docs[i].labels.size(); ++l) {
      CHECK(back[i].labels[l] == docs[i].labels[l]);
    }
  }
}

TEST_CASE("load_relation_info reads an id to name object") {
  auto dir = temp_dir("corpus_relinfo");
  std::string path = write_json(dir, "rel.json", lmrc_test::toy_relation_info_json());
  RelationSet rs = load_relation_info(path);
  CHECK(rs.size() == 10);
  CHECK(rs.name_of("P361") == "part of");
}

TEST_CASE("load_relation_info rejects junk") {
  auto dir = temp_dir("corpus_relinfo_bad");
  CHECK_THROWS_AS(load_relation_info((dir / "missing.json").string()), ConfigError);
  std::string arr = write_json(dir, "arr.json", nlohmann::json::array({1, 2}));
  CHECK_THROWS_AS(load_relation_info(arr), FormatError);
}

TEST_CASE("display_name picks the longest mention, earliest tie") {
  Entity e;
  e.mentions.push_back({"Obama", 0, 0, 1, "PER"});
  e.mentions.push_back({"Barack Obama", 1, 0, 2, "PER"});
  e.mentions.push_back({"Barack Hussein", 2, 0, 2, "PER"});  // same length as winner? no: 14 vs 12
  CHECK(display_name(e) == "Barack Hussein");
  Entity tie;
  tie.mentions.push_back({"abc", 0, 0, 1, "X"});
  tie.mentions.push_back({"xyz", 1, 0, 1, "X"});
  CHECK(display_name(tie) == "abc");
}
