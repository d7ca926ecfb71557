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

#include <fstream>
#include <set>
#include <sstream>

#include "lmrc/llm_backend.hpp"
#include "lmrc/parsing.hpp"
#include "support/toy_data.hpp"

using namespace lmrc;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

GenerationRequest req(const std::string& doc, int chunk, const std::string& prompt = "p") {
  GenerationRequest r;
  r.prompt = prompt;
  r.tag = RequestTag{doc, chunk};
  return r;
}

// Echo backend that throws for tags in `failing`; flip the set between runs
// to simulate a recovering service.
class FlakyBackend : public LlmBackend {
 public:
  explicit FlakyBackend(std::set<std::string> failing) : failing_(std::move(failing)) {}

  GenerationResult generate(const GenerationRequest& request) override {
    if (failing_.count(tag_key(request.tag))) {
      throw BackendError("synthetic outage for " + request.tag.doc_id);
    }
    GenerationResult r;
    r.text = "ok:" + tag_key(request.tag);
    return r;
  }
  std::string name() const override { return "flaky"; }

  void heal() { failing_.clear(); }

 private:
  std::set<std::string> failing_;
};

const std::string kThreeLines =
    "(Albert Einstein| place of birth| Ulm)\n"
    "(Albert Einstein| employer| ETH Zurich)\n"
    "(Ulm| country| Germany)";

}  // namespace

TEST_CASE("gold_echo returns the scripted text verbatim") {
  MockScript script;
  script.responses[tag_key({"d", 0})] = kThreeLines;
  MockBackend backend(script);
  GenerationResult r = backend.generate(req("d", 0));
  CHECK(r.text == kThreeLines);
  CHECK(r.finish_reason == FinishReason::stop);
  CHECK(backend.counters().requests == 1);
}

TEST_CASE("unscripted tags raise a backend error") {
  MockScript script;
  script.responses[tag_key({"d", 0})] = "x";
  MockBackend backend(script);
  CHECK_THROWS_AS(backend.generate(req("d", 1)), BackendError);
  CHECK_THROWS_AS(backend.generate(req("other", 0)), BackendError);
}

TEST_CASE("invalid generation parameters are rejected") {
  MockScript script;
  script.responses[tag_key({"d", 0})] = "x";
  MockBackend backend(script);
  GenerationRequest bad = req("d", 0);
  bad.max_tokens = 0;
  CHECK_THROWS_AS(backend.generate(bad), ConfigError);
  bad.max_tokens = 10;
  bad.temperature = -0.5;
  CHECK_THROWS_AS(backend.generate(bad), ConfigError);
}

TEST_CASE("mock script validation") {
  MockScript script;
  script.drop_rate = 1.5;
  CHECK_THROWS_AS(MockBackend{script}, ConfigError);
  script.drop_rate = 0.0;
  script.corrupt_rate = -0.1;
  CHECK_THROWS_AS(MockBackend{script}, ConfigError);
  script.corrupt_rate = 0.5;
  script.behavior = MockBehavior::corrupt_rate;
  script.relation_names = {"country"};  // pool too small to swap
  CHECK_THROWS_AS(MockBackend{script}, ConfigError);
  script.relation_names = {"country", "employer"};
  CHECK_NOTHROW(MockBackend{script});
}

TEST_CASE("drop_rate 1.0 drops every line") {
  MockScript script;
  script.behavior = MockBehavior::drop_rate;
  script.drop_rate = 1.0;
  script.seed = 5;
  script.responses[tag_key({"d", 0})] = kThreeLines;
  MockBackend backend(script);
  GenerationResult r = backend.generate(req("d", 0));
  CHECK(r.text.empty());
  MockCounters c = backend.counters();
  CHECK(c.lines_dropped == 3);
  CHECK(c.lines_emitted == 0);
}

TEST_CASE("drop_rate 0.0 keeps every line") {
  MockScript script;
  script.behavior = MockBehavior::drop_rate;
  script.drop_rate = 0.0;
  script.responses[tag_key({"d", 0})] = kThreeLines;
  MockBackend backend(script);
  CHECK(backend.generate(req("d", 0)).text == kThreeLines);
  CHECK(backend.counters().lines_emitted == 3);
  CHECK(backend.counters().lines_dropped == 0);
}

TEST_CASE("dropped plus emitted equals the line total") {
  MockScript script;
  script.behavior = MockBehavior::drop_rate;
  script.drop_rate = 0.5;
  script.seed = 11;
  for (int i = 0; i < 20; ++i) {
    script.responses[tag_key({"doc_" + std::to_string(i), 0})] = kThreeLines;
  }
  MockBackend backend(script);
  for (int i = 0; i < 20; ++i) backend.generate(req("doc_" + std::to_string(i), 0));
  MockCounters c = backend.counters();
  CHECK(c.requests == 20);
  CHECK(c.lines_dropped + c.lines_emitted == 60);
  CHECK(c.lines_dropped > 0);  // 2^-60 chance of a clean pass at rate 0.5
  CHECK(c.lines_emitted > 0);
}

TEST_CASE("per-tag seeding makes results independent of call order") {
  MockScript script;
  script.behavior = MockBehavior::drop_rate;
  script.drop_rate = 0.5;
  script.seed = 99;
  script.responses[tag_key({"a", 0})] = kThreeLines;
  script.responses[tag_key({"b", 0})] = kThreeLines;

  MockBackend forward(script);
  std::string a1 = forward.generate(req("a", 0)).text;
  std::string b1 = forward.generate(req("b", 0)).text;

  MockBackend reversed(script);
  std::string b2 = reversed.generate(req("b", 0)).text;
  std::string a2 = reversed.generate(req("a", 0)).text;

  CHECK(a1 == a2);
  CHECK(b1 == b2);

  // Distinct tags draw distinct streams; with three lines at rate 0.5 the
  // two tags agreeing on every line is possible but the seeds differ.
  MockBackend again(script);
  CHECK(again.generate(req("a", 0)).text == a1);
}

TEST_CASE("corrupt_rate 1.0 swaps the relation field of every line") {
  std::vector<std::string> pool = {"place of birth", "employer", "country", "part of"};
  MockScript script;
  script.behavior = MockBehavior::corrupt_rate;
  script.corrupt_rate = 1.0;
  script.seed = 3;
  script.relation_names = pool;
  script.responses[tag_key({"d", 0})] = kThreeLines;
  MockBackend backend(script);
  GenerationResult r = backend.generate(req("d", 0));
  CHECK(backend.counters().lines_corrupted == 3);
  CHECK(backend.counters().lines_emitted == 3);

  auto parsed = parse_response(r.text, "d", 0, PromptMode::relation_classification);
  REQUIRE(parsed.triples.size() == 3);  // corruption keeps lines parseable
  CHECK(parsed.rejected.empty());

  std::vector<std::string> orig_heads = {"Albert Einstein", "Albert Einstein", "Ulm"};
  std::vector<std::string> orig_rels = {"place of birth", "employer", "country"};
  std::vector<std::string> orig_tails = {"Ulm", "ETH Zurich", "Germany"};
  for (size_t i = 0; i < 3; ++i) {
    CHECK(parsed.triples[i].head_surface == orig_heads[i]);
    CHECK(parsed.triples[i].tail_surface == orig_tails[i]);
    CHECK(parsed.triples[i].relation_surface != orig_rels[i]);
    CHECK(std::find(pool.begin(), pool.end(), parsed.triples[i].relation_surface) != pool.end());
  }
}

TEST_CASE("corrupt_rate 0.0 leaves text untouched") {
  MockScript script;
  script.behavior = MockBehavior::corrupt_rate;
  script.corrupt_rate = 0.0;
  script.relation_names = {"country", "employer"};
  script.responses[tag_key({"d", 0})] = kThreeLines;
  MockBackend backend(script);
  CHECK(backend.generate(req("d", 0)).text == kThreeLines);
  CHECK(backend.counters().lines_corrupted == 0);
}

TEST_CASE("stop sequences truncate the response") {
  MockScript script;
  script.responses[tag_key({"d", 0})] = "line one\n\nleftover after blank";
  MockBackend backend(script);
  GenerationRequest r = req("d", 0);
  r.stop = {"\n\n"};
  CHECK(backend.generate(r).text == "line one");

  GenerationRequest multi = req("d", 0);
  multi.stop = {"after", "\n\n"};  // earliest occurrence wins
  CHECK(backend.generate(multi).text == "line one");
}

TEST_CASE("ledger records round-trip through json") {
  LedgerRecord rec;
  rec.tag = RequestTag{"doc with spaces", 7};
  rec.text = "line1\nline2";
  rec.finish_reason = FinishReason::length;
  rec.timestamp_ms = 12345;
  LedgerRecord back = ledger_record_from_json(ledger_record_to_json(rec));
  CHECK(back.tag.doc_id == rec.tag.doc_id);
  CHECK(back.tag.chunk_index == rec.tag.chunk_index);
  CHECK(back.text == rec.text);
  CHECK(back.finish_reason == rec.finish_reason);
  CHECK(back.timestamp_ms == rec.timestamp_ms);
}

TEST_CASE("load_ledger handles missing, truncated, and corrupt files") {
  auto dir = lmrc_test::temp_dir("ledger");
  CHECK(load_ledger((dir / "absent.jsonl").string()).empty());

  LedgerRecord a;
  a.tag = {"a", 0};
  a.text = "ta";
  LedgerRecord b;
  b.tag = {"b", 1};
  b.text = "tb";

  auto truncated = dir / "truncated.jsonl";
  {
    std::ofstream out(truncated);
    out << ledger_record_to_json(a).dump() << "\n";
    out << ledger_record_to_json(b).dump() << "\n";
    out << R"({"doc_id": "c", "chu)";  // interrupted append
  }
  auto loaded = load_ledger(truncated.string());
  CHECK(loaded.size() == 2);
  CHECK(loaded.at(tag_key({"a", 0})).text == "ta");
  CHECK(loaded.at(tag_key({"b", 1})).text == "tb");

  auto corrupt = dir / "corrupt.jsonl";
  {
    std::ofstream out(corrupt);
    out << ledger_record_to_json(a).dump() << "\n";
    out << "not json at all\n";
    out << ledger_record_to_json(b).dump() << "\n";
  }
  CHECK_THROWS_AS(load_ledger(corrupt.string()), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("batch runner preserves request order under parallelism") {
  MockScript script;
  std::vector<GenerationRequest> requests;
  for (int i = 0; i < 10; ++i) {
    script.responses[tag_key({"doc_" + std::to_string(i), i})] = "text_" + std::to_string(i);
    requests.push_back(req("doc_" + std::to_string(i), i));
  }
  MockBackend backend(script);
  FakeClock clock;
  BatchRunner runner(backend, clock, 4);
  BatchReport report = runner.run(requests);
  REQUIRE(report.results.size() == 10);
  CHECK(report.sent == 10);
  CHECK(report.resumed == 0);
  CHECK(report.failed.empty());
  for (int i = 0; i < 10; ++i) {
    CHECK(report.results[i].text == "text_" + std::to_string(i));
  }
}

TEST_CASE("duplicate request tags are a contract violation") {
  MockScript script;
  script.responses[tag_key({"d", 0})] = "x";
  MockBackend backend(script);
  FakeClock clock;
  BatchRunner runner(backend, clock, 2);
  CHECK_THROWS_AS(runner.run({req("d", 0), req("d", 0)}), ContractViolation);
}

TEST_CASE("runner configuration is validated") {
  MockScript script;
  MockBackend backend(script);
  FakeClock clock;
  CHECK_THROWS_AS(BatchRunner(backend, clock, 0), ConfigError);
  CHECK_THROWS_AS(BatchRunner(backend, clock, 1, -1.0), ConfigError);
}

TEST_CASE("failed requests are resent on resume, finished ones are not") {
  auto dir = lmrc_test::temp_dir("resume");
  std::string ledger_path = (dir / "ledger.jsonl").string();

  std::vector<GenerationRequest> requests;
  std::set<std::string> failing;
  for (int i = 0; i < 10; ++i) requests.push_back(req("doc_" + std::to_string(i), 0));
  for (int i = 0; i < 3; ++i) failing.insert(tag_key({"doc_" + std::to_string(i * 3), 0}));

  FlakyBackend backend(failing);
  FakeClock clock;

  BatchRunner first(backend, clock, 3, 0.0, ledger_path);
  BatchReport r1 = first.run(requests);
  CHECK(r1.sent == 10);
  CHECK(r1.resumed == 0);
  CHECK(r1.failed.size() == 3);

  backend.heal();
  BatchRunner second(backend, clock, 3, 0.0, ledger_path);
  BatchReport r2 = second.run(requests);
  CHECK(r2.sent == 3);
  CHECK(r2.resumed == 7);
  CHECK(r2.failed.empty());
  for (int i = 0; i < 10; ++i) {
    CHECK(r2.results[i].text == "ok:" + tag_key({"doc_" + std::to_string(i), 0}));
  }

  BatchRunner third(backend, clock, 3, 0.0, ledger_path);
  std::string before = slurp(ledger_path);
  BatchReport r3 = third.run(requests);
  CHECK(r3.sent == 0);
  CHECK(r3.resumed == 10);
  CHECK(slurp(ledger_path) == before);  // fully-resumed runs never reopen the file
  std::filesystem::remove_all(dir);
}

TEST_CASE("rate limiting schedules absolute slots") {
  MockScript script;
  std::vector<GenerationRequest> requests;
  for (int i = 0; i < 6; ++i) {
    script.responses[tag_key({"doc_" + std::to_string(i), 0})] = "x";
    requests.push_back(req("doc_" + std::to_string(i), 0));
  }
  MockBackend backend(script);
  FakeClock clock;
  BatchRunner runner(backend, clock, 3, 2.0);  // 2 requests per second
  BatchReport report = runner.run(requests);
  CHECK(report.failed.empty());
  // Slot j waits until j * 500ms; the last of 6 requests runs at >= 2500.
  CHECK(clock.now_ms() >= 2500);
}

TEST_CASE("rerun ledgers are byte-identical under a fake clock") {
  std::vector<GenerationRequest> requests;
  MockScript script;
  script.behavior = MockBehavior::drop_rate;
  script.drop_rate = 0.3;
  script.seed = 21;
  for (int i = 0; i < 8; ++i) {
    script.responses[tag_key({"doc_" + std::to_string(i), 0})] = kThreeLines;
    requests.push_back(req("doc_" + std::to_string(i), 0));
  }

  auto dir = lmrc_test::temp_dir("bytes");
  std::string run_a = (dir / "a.jsonl").string();
  std::string run_b = (dir / "b.jsonl").string();

  {
    MockBackend backend(script);
    FakeClock clock;
    BatchRunner runner(backend, clock, 4, 0.0, run_a);
    runner.run(requests);
  }
  {
    MockBackend backend(script);
    FakeClock clock;
    BatchRunner runner(backend, clock, 4, 0.0, run_b);
    runner.run(requests);
  }
  std::string bytes_a = slurp(run_a);
  CHECK_FALSE(bytes_a.empty());
  CHECK(bytes_a == slurp(run_b));
  std::filesystem::remove_all(dir);
}

TEST_CASE("ledger resume ignores error records but keeps their slots ordered") {
  auto dir = lmrc_test::temp_dir("errledger");
  std::string path = (dir / "ledger.jsonl").string();
  {
    std::ofstream out(path);
    LedgerRecord ok;
    ok.tag = {"a", 0};
    ok.text = "fine";
    out << ledger_record_to_json(ok).dump() << "\n";
    LedgerRecord err;
    err.tag = {"b", 0};
    err.finish_reason = FinishReason::error;
    out << ledger_record_to_json(err).dump() << "\n";
  }
  MockScript script;
  script.responses[tag_key({"a", 0})] = "ignored";  // resumed, never regenerated
  script.responses[tag_key({"b", 0})] = "regenerated";
  MockBackend backend(script);
  FakeClock clock;
  BatchRunner runner(backend, clock, 1, 0.0, path);
  BatchReport report = runner.run({req("a", 0), req("b", 0)});
  CHECK(report.resumed == 1);
  CHECK(report.sent == 1);
  CHECK(report.results[0].text == "fine");
  CHECK(report.results[1].text == "regenerated");
  std::filesystem::remove_all(dir);
}
