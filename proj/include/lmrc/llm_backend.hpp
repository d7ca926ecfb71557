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

#ifndef LMRC_LLM_BACKEND_HPP
#define LMRC_LLM_BACKEND_HPP

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"

namespace lmrc {

struct RequestTag {
  std::string doc_id;
  int chunk_index = 0;

  auto operator<=>(const RequestTag&) const = default;
};

// Ledger key; the unit separator cannot occur in document titles that came
// through JSON text fields unescaped by us, and never collides with "#".
inline std::string tag_key(const RequestTag& tag) {
  return tag.doc_id + "\x1f" + std::to_string(tag.chunk_index);
}

struct GenerationRequest {
  std::string prompt;
  int max_tokens = 1024;
  double temperature = 0.0;
  std::vector<std::string> stop;
  RequestTag tag;

  void validate() const {
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
  }
};

enum class FinishReason { stop, length, error };

inline std::string to_string(FinishReason r) {
  switch (r) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

inline FinishReason finish_reason_from_string(const std::string& s) {
  if (s == "stop") return FinishReason::stop;
  if (s == "length") return FinishReason::length;
  if (s == "error") return FinishReason::error;
  throw FormatError("unknown finish reason: " + s);
}

struct GenerationResult {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  double latency_ms = 0.0;
  long prompt_tokens = -1;      // -1 when the backend does not report usage
  long completion_tokens = -1;
  std::string error_message;
};

// Generation contract. Model-quality problems are data in the result;
// transport and configuration failures throw BackendError.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
  virtual std::string name() const = 0;
};

// Millisecond clock seam so batch timing is testable without real waiting.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t now_ms() = 0;
  virtual void sleep_until_ms(int64_t deadline_ms) = 0;
};

class SystemClock : public Clock {
 public:
  int64_t now_ms() override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }

  void sleep_until_ms(int64_t deadline_ms) override {
    int64_t now = now_ms();
    if (deadline_ms > now) {
      std::this_thread::sleep_for(std::chrono::milliseconds(deadline_ms - now));
    }
  }
};

// Virtual time: sleeping jumps the clock forward, so rate-limit schedules
// resolve instantly and deterministically.
class FakeClock : public Clock {
 public:
  explicit FakeClock(int64_t start_ms = 0) : now_(start_ms) {}

  int64_t now_ms() override {
    std::lock_guard<std::mutex> lock(mu_);
    return now_;
  }

  void sleep_until_ms(int64_t deadline_ms) override {
    std::lock_guard<std::mutex> lock(mu_);
    now_ = std::max(now_, deadline_ms);
  }

 private:
  std::mutex mu_;
  int64_t now_;
};

enum class MockBehavior { gold_echo, drop_rate, corrupt_rate, canned };

inline std::string to_string(MockBehavior b) {
  switch (b) {
    case MockBehavior::gold_echo: return "gold_echo";
    case MockBehavior::drop_rate: return "drop_rate";
    case MockBehavior::corrupt_rate: return "corrupt_rate";
    case MockBehavior::canned: return "canned";
  }
  return "gold_echo";
}

inline MockBehavior mock_behavior_from_string(const std::string& s) {
  if (s == "gold_echo") return MockBehavior::gold_echo;
  if (s == "drop_rate") return MockBehavior::drop_rate;
  if (s == "corrupt_rate") return MockBehavior::corrupt_rate;
  if (s == "canned") return MockBehavior::canned;
  throw ConfigError("unknown mock behavior: " + s);
}

struct MockScript {
  MockBehavior behavior = MockBehavior::gold_echo;
  double drop_rate = 0.0;
  double corrupt_rate = 0.0;
  uint64_t seed = 0;
  // tag_key -> gold completion (gold modes) or fixed text (canned)
  std::map<std::string, std::string> responses;
  std::vector<std::string> relation_names;  // corruption replacement pool

  void validate() const {
    if (drop_rate < 0.0 || drop_rate > 1.0) throw ConfigError("drop_rate must lie in [0,1]");
    if (corrupt_rate < 0.0 || corrupt_rate > 1.0) {
      throw ConfigError("corrupt_rate must lie in [0,1]");
    }
    if (behavior == MockBehavior::corrupt_rate && relation_names.size() < 2) {
      throw ConfigError("corrupt_rate needs >= 2 relation names to swap between");
    }
  }
};

struct MockCounters {
  long requests = 0;
  long lines_emitted = 0;
  long lines_dropped = 0;
  long lines_corrupted = 0;
};

// Deterministic scripted backend. Per-line randomness is seeded from the
// request tag, so results do not depend on scheduling order.
class MockBackend : public LlmBackend {
 public:
  explicit MockBackend(MockScript script) : script_(std::move(script)) { script_.validate(); }

  GenerationResult generate(const GenerationRequest& request) override {
    request.validate();
    std::string key = tag_key(request.tag);
    auto it = script_.responses.find(key);
    if (it == script_.responses.end()) {
      throw BackendError("mock backend has no script for tag '" + request.tag.doc_id + "'#" +
                         std::to_string(request.tag.chunk_index));
    }
    std::string text = it->second;
    std::mt19937_64 rng(stable_hash(key, script_.seed));
    auto unit = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    MockCounters delta;
    delta.requests = 1;
    if (script_.behavior == MockBehavior::drop_rate ||
        script_.behavior == MockBehavior::corrupt_rate) {
      std::vector<std::string> kept;
      size_t pos = 0;
      while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string line =
            text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        if (trim(line).empty()) continue;
        if (script_.behavior == MockBehavior::drop_rate) {
          if (unit() < script_.drop_rate) {
            ++delta.lines_dropped;
            continue;
          }
        } else if (unit() < script_.corrupt_rate) {
          line = corrupt_line(line, rng);
          ++delta.lines_corrupted;
        }
        kept.push_back(std::move(line));
      }
      text = join(kept, "\n");
      delta.lines_emitted = static_cast<long>(kept.size());
    }

    GenerationResult result;
    result.text = apply_stop(std::move(text), request.stop);
    result.finish_reason = FinishReason::stop;
    {
      std::lock_guard<std::mutex> lock(mu_);
      counters_.requests += delta.requests;
      counters_.lines_emitted += delta.lines_emitted;
      counters_.lines_dropped += delta.lines_dropped;
      counters_.lines_corrupted += delta.lines_corrupted;
    }
    return result;
  }

  std::string name() const override { return "mock:" + to_string(script_.behavior); }

  MockCounters counters() const {
    std::lock_guard<std::mutex> lock(mu_);
    return counters_;
  }

 private:
  static std::string apply_stop(std::string text, const std::vector<std::string>& stops) {
    size_t cut = std::string::npos;
    for (const std::string& s : stops) {
      if (s.empty()) continue;
      size_t at = text.find(s);
      if (at != std::string::npos) cut = std::min(cut, at);
    }
    if (cut != std::string::npos) text.resize(cut);
    return text;
  }

  // Swaps the middle field for a different name from the pool.
  std::string corrupt_line(const std::string& line, std::mt19937_64& rng) const {
    std::string trimmed = trim(line);
    if (trimmed.size() < 2 || trimmed.front() != '(' || trimmed.back() != ')') return line;
    std::string body = trimmed.substr(1, trimmed.size() - 2);
    size_t first = body.find('|');
    size_t last = body.rfind('|');
    if (first == std::string::npos || last == first) return line;
    std::string current = trim(body.substr(first + 1, last - first - 1));
    std::vector<const std::string*> pool;
    for (const std::string& name : script_.relation_names) {
      if (name != current) pool.push_back(&name);
    }
    if (pool.empty()) return line;
    const std::string& pick = *pool[rng() % pool.size()];
    return "(" + trim(body.substr(0, first)) + "| " + pick + "| " +
           trim(body.substr(last + 1)) + ")";
  }

  MockScript script_;
  mutable std::mutex mu_;
  MockCounters counters_;
};

struct LedgerRecord {
  RequestTag tag;
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  int64_t timestamp_ms = 0;
};

inline nlohmann::json ledger_record_to_json(const LedgerRecord& rec) {
  return nlohmann::json{{"doc_id", rec.tag.doc_id},
                        {"chunk_index", rec.tag.chunk_index},
                        {"text", rec.text},
                        {"finish_reason", to_string(rec.finish_reason)},
                        {"timestamp_ms", rec.timestamp_ms}};
}

inline LedgerRecord ledger_record_from_json(const nlohmann::json& j) {
  LedgerRecord rec;
  rec.tag.doc_id = j.at("doc_id").get<std::string>();
  rec.tag.chunk_index = j.at("chunk_index").get<int>();
  rec.text = j.at("text").get<std::string>();
  rec.finish_reason = finish_reason_from_string(j.at("finish_reason").get<std::string>());
  rec.timestamp_ms = j.value("timestamp_ms", int64_t{0});
  return rec;
}

// Loads completed entries. A truncated final line (interrupted append) is
// tolerated; corruption anywhere else is an error.
inline std::map<std::string, LedgerRecord> load_ledger(const std::string& path) {
  std::map<std::string, LedgerRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  for (size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) {
      if (i + 1 == lines.size()) break;
      throw FormatError("corrupt ledger line " + std::to_string(i + 1) + " in " + path);
    }
    LedgerRecord rec = ledger_record_from_json(j);
    out[tag_key(rec.tag)] = rec;
  }
  return out;
}

struct BatchReport {
  std::vector<GenerationResult> results;  // results[i] answers requests[i]
  std::vector<RequestTag> failed;
  long sent = 0;
  long resumed = 0;
};

// Order-preserving parallel driver with absolute-slot rate limiting and an
// append-only resume ledger. Ledger lines are written in request order so
// reruns with a fake clock are byte-identical.
class BatchRunner {
 public:
  BatchRunner(LlmBackend& backend, Clock& clock, int parallelism, double rate_per_sec = 0.0,
              std::string ledger_path = "")
      : backend_(backend),
        clock_(clock),
        parallelism_(parallelism),
        rate_per_sec_(rate_per_sec),
        ledger_path_(std::move(ledger_path)) {
    if (parallelism_ < 1) throw ConfigError("parallelism must be >= 1");
    if (rate_per_sec_ < 0.0) throw ConfigError("rate limit must be >= 0");
  }

  BatchReport run(const std::vector<GenerationRequest>& requests) {
    std::set<std::string> keys;
    for (const GenerationRequest& r : requests) {
      r.validate();
      if (!keys.insert(tag_key(r.tag)).second) {
        throw ContractViolation("duplicate request tag '" + r.tag.doc_id + "'#" +
                                std::to_string(r.tag.chunk_index));
      }
    }

    BatchReport report;
    report.results.resize(requests.size());

    std::map<std::string, LedgerRecord> done;
    if (!ledger_path_.empty()) done = load_ledger(ledger_path_);

    std::vector<size_t> to_send;
    for (size_t i = 0; i < requests.size(); ++i) {
      auto it = done.find(tag_key(requests[i].tag));
      if (it != done.end() && it->second.finish_reason != FinishReason::error) {
        report.results[i].text = it->second.text;
        report.results[i].finish_reason = it->second.finish_reason;
        ++report.resumed;
      } else {
        to_send.push_back(i);
      }
    }
    report.sent = static_cast<long>(to_send.size());
    if (to_send.empty()) return report;

    std::ofstream ledger;
    if (!ledger_path_.empty()) {
      ledger.open(ledger_path_, std::ios::app);
      if (!ledger) throw ConfigError("cannot open ledger for append: " + ledger_path_);
    }

    int64_t start = clock_.now_ms();
    double interval = rate_per_sec_ > 0.0 ? 1000.0 / rate_per_sec_ : 0.0;

    std::mutex mu;
    std::condition_variable cv;
    std::vector<char> ready(to_send.size(), 0);
    std::atomic<size_t> next{0};

    auto worker = [&]() {
      while (true) {
        size_t j = next.fetch_add(1);
        if (j >= to_send.size()) break;
        if (interval > 0.0) {
          clock_.sleep_until_ms(start + static_cast<int64_t>(interval * static_cast<double>(j)));
        }
        const GenerationRequest& req = requests[to_send[j]];
        int64_t t0 = clock_.now_ms();
        GenerationResult result;
        try {
          result = backend_.generate(req);
        } catch (const std::exception& e) {
          result.finish_reason = FinishReason::error;
          result.error_message = e.what();
        }
        result.latency_ms = static_cast<double>(clock_.now_ms() - t0);
        {
          std::lock_guard<std::mutex> lock(mu);
          report.results[to_send[j]] = std::move(result);
          ready[j] = 1;
        }
        cv.notify_all();
      }
    };

    // writer flushes results to the ledger in request order as they finish
    std::thread writer([&]() {
      if (ledger_path_.empty()) return;
      for (size_t j = 0; j < to_send.size(); ++j) {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&]() { return ready[j] != 0; });
        LedgerRecord rec;
        rec.tag = requests[to_send[j]].tag;
        rec.text = report.results[to_send[j]].text;
        rec.finish_reason = report.results[to_send[j]].finish_reason;
        lock.unlock();
        rec.timestamp_ms = clock_.now_ms();
        ledger << ledger_record_to_json(rec).dump() << "\n";
        ledger.flush();
      }
    });

    std::vector<std::thread> threads;
    int n_threads = std::min<int>(parallelism_, static_cast<int>(to_send.size()));
    threads.reserve(static_cast<size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    writer.join();

    for (size_t i = 0; i < requests.size(); ++i) {
      if (report.results[i].finish_reason == FinishReason::error) {
        report.failed.push_back(requests[i].tag);
      }
    }
    return report;
  }

 private:
  LlmBackend& backend_;
  Clock& clock_;
  int parallelism_;
  double rate_per_sec_;
  std::string ledger_path_;
};

}  // namespace lmrc

#endif  // LMRC_LLM_BACKEND_HPP
