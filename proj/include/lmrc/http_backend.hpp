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

#ifndef LMRC_HTTP_BACKEND_HPP
#define LMRC_HTTP_BACKEND_HPP

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "lmrc/common.hpp"
#include "lmrc/llm_backend.hpp"

namespace lmrc {

struct HttpBackendConfig {
  std::string base_url = "http://localhost:8080";
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string system_prompt;               // prepended as a system message when set
  std::string api_key_env = "LMRC_API_KEY";  // credentials come from the environment only
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_base_ms = 200;

  void validate() const {
    if (base_url.empty()) throw ConfigError("http backend needs a base_url");
    if (path.empty() || path.front() != '/') throw ConfigError("http path must start with '/'");
    if (timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (backoff_base_ms < 0) throw ConfigError("backoff_base_ms must be >= 0");
  }
};

// Chat-completions client. The rendered prompt travels as a single user
// message and the request tag rides in the "user" field for server-side
// correlation. Transport failures, 429s, and 5xx responses are retried with
// exponential backoff; other failures raise BackendError immediately.
class HttpBackend : public LlmBackend {
 public:
  HttpBackend(HttpBackendConfig config, Clock& clock)
      : config_(std::move(config)), clock_(clock) {
    config_.validate();
  }

  GenerationResult generate(const GenerationRequest& request) override {
    request.validate();
    nlohmann::json body;
    if (!config_.model.empty()) body["model"] = config_.model;
    nlohmann::json messages = nlohmann::json::array();
    if (!config_.system_prompt.empty()) {
      messages.push_back({{"role", "system"}, {"content", config_.system_prompt}});
    }
    messages.push_back({{"role", "user"}, {"content", request.prompt}});
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (!request.stop.empty()) body["stop"] = request.stop;
    body["user"] = tag_key(request.tag);
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        int64_t backoff = static_cast<int64_t>(config_.backoff_base_ms) << (attempt - 1);
        clock_.sleep_until_ms(clock_.now_ms() + backoff);
      }
      httplib::Client client(config_.base_url);
      client.set_connection_timeout(0, config_.timeout_ms * 1000);
      client.set_read_timeout(0, config_.timeout_ms * 1000);
      client.set_write_timeout(0, config_.timeout_ms * 1000);
      httplib::Headers headers;
      const char* key = config_.api_key_env.empty() ? nullptr
                                                    : std::getenv(config_.api_key_env.c_str());
      if (key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }

      int64_t t0 = clock_.now_ms();
      httplib::Result res = client.Post(config_.path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "http status " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw BackendError("http backend got status " + std::to_string(res->status) +
                           " for tag '" + request.tag.doc_id + "'#" +
                           std::to_string(request.tag.chunk_index) + ": " + res->body);
      }
      GenerationResult out = parse_completion(res->body, request);
      out.latency_ms = static_cast<double>(clock_.now_ms() - t0);
      return out;
    }
    throw BackendError("transport failure after " + std::to_string(config_.max_retries) +
                       " retries for tag '" + request.tag.doc_id + "'#" +
                       std::to_string(request.tag.chunk_index) + " (" + last_error + ")");
  }

  std::string name() const override { return "http:" + config_.base_url; }

 private:
  static GenerationResult parse_completion(const std::string& body,
                                           const GenerationRequest& request) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty()) {
      throw BackendError("malformed completion body for tag '" + request.tag.doc_id + "'#" +
                         std::to_string(request.tag.chunk_index));
    }
    const nlohmann::json& choice = j["choices"][0];
    GenerationResult out;
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      out.text = choice["message"]["content"].get<std::string>();
    } else if (choice.contains("text") && choice["text"].is_string()) {
      out.text = choice["text"].get<std::string>();
    } else {
      throw BackendError("completion body carries no text for tag '" + request.tag.doc_id +
                         "'#" + std::to_string(request.tag.chunk_index));
    }
    std::string reason = choice.value("finish_reason", "stop");
    out.finish_reason = reason == "length" ? FinishReason::length : FinishReason::stop;
    if (j.contains("usage") && j["usage"].is_object()) {
      out.prompt_tokens = j["usage"].value("prompt_tokens", -1);
      out.completion_tokens = j["usage"].value("completion_tokens", -1);
    }
    return out;
  }

  HttpBackendConfig config_;
  Clock& clock_;
};

}  // namespace lmrc

#endif  // LMRC_HTTP_BACKEND_HPP
