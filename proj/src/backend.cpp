// SPDX-License-Identifier: Apache-2.0
#include "todgen/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "todgen/errors.hpp"
#include "todgen/io.hpp"

namespace todgen {

const char* to_string(ChatMessage::Role role) {
  switch (role) {
    case ChatMessage::Role::System: return "system";
    case ChatMessage::Role::User: return "user";
    case ChatMessage::Role::Assistant: return "assistant";
  }
  return "system";
}

std::vector<MockRule> load_mock_script(const std::filesystem::path& path) {
  std::vector<MockRule> rules;
  const std::string content = read_file(path);
  for_each_line(content, [&](std::size_t line_number, const std::string& line) {
    nlohmann::json j = parse_json(line, path.string() + ":" + std::to_string(line_number));
    MockRule rule;
    rule.match = j.value("match", std::string("*"));
    rule.reply = j.value("reply", std::string());
    rule.echo = j.value("echo", false);
    rule.fail = j.value("fail", std::string());
    rules.push_back(std::move(rule));
  });
  return rules;
}

namespace {

void check_messages(const CompletionRequest& request) {
  if (request.messages.empty()) {
    raise(ErrorCode::BackendError, "empty message list");
  }
  for (const ChatMessage& message : request.messages) {
    if (message.content.empty()) {
      raise(ErrorCode::BackendError, "message with empty content");
    }
  }
}

}  // namespace

std::string MockBackend::complete(const CompletionRequest& request) {
  check_messages(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    recorded_.push_back(request);
  }
  std::string haystack;
  for (const ChatMessage& message : request.messages) {
    haystack += message.content;
    haystack += '\n';
  }
  for (const MockRule& rule : rules_) {
    if (rule.match != "*" && haystack.find(rule.match) == std::string::npos) continue;
    if (!rule.fail.empty()) {
      raise(ErrorCode::BackendError, "scripted failure: " + rule.fail);
    }
    if (rule.echo) return request.messages.back().content;
    return rule.reply;
  }
  raise(ErrorCode::BackendError, "no mock rule matched the request");
}

std::vector<CompletionRequest> MockBackend::recorded() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return recorded_;
}

std::size_t MockBackend::request_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return recorded_.size();
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j) {
  BackendConfig config;
  config.type = j.value("type", std::string("mock"));
  if (config.type == "mock") {
    config.script = j.value("script", std::string());
  } else if (config.type == "http") {
    if (!j.contains("endpoint")) {
      raise(ErrorCode::ConfigError, "http backend requires 'endpoint'");
    }
    config.endpoint = j.at("endpoint").get<std::string>();
    config.credential_env = j.value("credential_env", std::string());
    config.model = j.value("model", std::string());
  } else {
    raise(ErrorCode::ConfigError, "unknown backend type '" + config.type + "'");
  }
  config.concurrency = j.value("concurrency", 4);
  config.timeout_seconds = j.value("timeout_seconds", 60.0);
  config.retry_attempts = j.value("retry_attempts", 3);
  config.retry_base_ms = j.value("retry_base_ms", 500);
  if (config.concurrency < 1) {
    raise(ErrorCode::ConfigError, "concurrency must be >= 1");
  }
  return config;
}

BackendConfig BackendConfig::load(const std::filesystem::path& path) {
  return from_json(read_json(path));
}

namespace {

/// Splits "http://host:port/some/path" into base url and path.
void split_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
  std::size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos) {
    raise(ErrorCode::ConfigError, "endpoint must include a scheme: " + endpoint);
  }
  std::size_t slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) {
    base = endpoint;
    path = "/";
  } else {
    base = endpoint.substr(0, slash);
    path = endpoint.substr(slash);
  }
}

}  // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
  split_endpoint(config_.endpoint, base_url_, path_);
  if (!config_.credential_env.empty()) {
    const char* value = std::getenv(config_.credential_env.c_str());
    if (value != nullptr) api_key_ = value;
  }
}

void HttpChatBackend::acquire_slot() {
  std::unique_lock<std::mutex> lock(mutex_);
  slot_available_.wait(lock, [this] { return in_flight_ < config_.concurrency; });
  ++in_flight_;
}

void HttpChatBackend::release_slot() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    --in_flight_;
  }
  slot_available_.notify_one();
}

std::string HttpChatBackend::complete(const CompletionRequest& request) {
  check_messages(request);
  nlohmann::json body;
  body["model"] = request.model_id.empty() ? config_.model : request.model_id;
  body["messages"] = nlohmann::json::array();
  for (const ChatMessage& message : request.messages) {
    body["messages"].push_back({{"role", to_string(message.role)},
                                {"content", message.content}});
  }
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  const std::string payload = body.dump();

  int last_status = 0;
  std::string last_error;
  for (int attempt = 0; attempt < config_.retry_attempts; ++attempt) {
    if (attempt > 0) {
      int delay = config_.retry_base_ms * (1 << (attempt - 1));
      delay = std::min(delay, config_.retry_base_ms * 8);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }

    httplib::Client client(base_url_);
    auto timeout = std::chrono::milliseconds(
        static_cast<long>(config_.timeout_seconds * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key_);
    }

    acquire_slot();
    httplib::Result result = client.Post(path_, headers, payload, "application/json");
    release_slot();

    if (!result) {
      last_status = 0;
      last_error = httplib::to_string(result.error());
      continue;  // connection-level failure, transient
    }
    last_status = result->status;
    if (result->status == 401 || result->status == 403) {
      raise(ErrorCode::AuthError,
            "endpoint rejected credentials (HTTP " + std::to_string(result->status) + ")");
    }
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;  // transient, retry
    }
    if (result->status != 200) {
      raise(ErrorCode::BackendError,
            "unexpected HTTP " + std::to_string(result->status) + ": " + result->body);
    }
    nlohmann::json response = parse_json(result->body, "completion response");
    if (!response.contains("choices") || !response["choices"].is_array() ||
        response["choices"].empty() ||
        !response["choices"][0].contains("message") ||
        !response["choices"][0]["message"].contains("content") ||
        !response["choices"][0]["message"]["content"].is_string()) {
      raise(ErrorCode::MalformedResponse,
            "response has no choices[0].message.content: " + result->body);
    }
    return response["choices"][0]["message"]["content"].get<std::string>();
  }

  if (last_status == 429) {
    raise(ErrorCode::RateLimited,
          "rate limited after " + std::to_string(config_.retry_attempts) + " attempts");
  }
  if (last_status == 0) {
    raise(ErrorCode::Timeout, "request failed after " +
                                  std::to_string(config_.retry_attempts) +
                                  " attempts: " + last_error);
  }
  raise(ErrorCode::BackendError, "request failed after " +
                                     std::to_string(config_.retry_attempts) +
                                     " attempts: " + last_error);
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  if (config.type == "mock") {
    if (config.script.empty()) {
      return std::make_unique<MockBackend>(
          std::vector<MockRule>{MockRule{"*", "OK", false, ""}});
    }
    return std::make_unique<MockBackend>(load_mock_script(config.script));
  }
  if (config.type == "http") {
    return std::make_unique<HttpChatBackend>(config);
  }
  raise(ErrorCode::ConfigError, "unknown backend type '" + config.type + "'");
}

}  // namespace todgen
