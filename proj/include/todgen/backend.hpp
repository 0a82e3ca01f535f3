// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

namespace todgen {

struct ChatMessage {
  enum class Role { System, User, Assistant };
  Role role = Role::System;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

const char* to_string(ChatMessage::Role role);

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 512;
  std::string model_id;
};

/// Blocking chat-completion interface. Implementations must be safe to call
/// from multiple threads.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

/// One scripted rule. Exactly one of reply / echo / fail is meaningful:
///   {"match": "...", "reply": "text"}   canned reply
///   {"match": "...", "echo": true}      reply with the last message content
///   {"match": "...", "fail": "msg"}     raise BackendError
/// `match` is a plain substring; "*" matches everything. Rules are applied
/// first-match against the concatenated message contents.
struct MockRule {
  std::string match;
  std::string reply;
  bool echo = false;
  std::string fail;
};

/// Parses a JSONL rules file into mock rules.
std::vector<MockRule> load_mock_script(const std::filesystem::path& path);

/// Deterministic scripted backend; records every request for assertions.
class MockBackend : public ChatBackend {
 public:
  MockBackend() = default;
  explicit MockBackend(std::vector<MockRule> rules) : rules_(std::move(rules)) {}

  void add_rule(MockRule rule) { rules_.push_back(std::move(rule)); }

  std::string complete(const CompletionRequest& request) override;

  std::vector<CompletionRequest> recorded() const;
  std::size_t request_count() const;

 private:
  std::vector<MockRule> rules_;
  mutable std::mutex mutex_;
  std::vector<CompletionRequest> recorded_;
};

struct BackendConfig {
  std::string type = "mock";  // "mock" | "http"
  std::filesystem::path script;  // mock: rules file (JSONL)
  std::string endpoint;          // http: full URL of the chat-completions route
  std::string credential_env;    // http: env var holding the API key
  std::string model;
  int concurrency = 4;
  double timeout_seconds = 60.0;
  int retry_attempts = 3;
  int retry_base_ms = 500;

  static BackendConfig from_json(const nlohmann::json& j);
  static BackendConfig load(const std::filesystem::path& path);
};

/// Remote chat-completions client: JSON body {model, messages, temperature,
/// max_tokens}, answer read from choices[0].message.content. Transient
/// failures (429, 5xx, connection errors) are retried with capped
/// exponential backoff; the concurrency cap bounds in-flight requests.
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendConfig config);

  std::string complete(const CompletionRequest& request) override;

 private:
  void acquire_slot();
  void release_slot();

  BackendConfig config_;
  std::string base_url_;
  std::string path_;
  std::string api_key_;
  std::mutex mutex_;
  std::condition_variable slot_available_;
  int in_flight_ = 0;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

}  // namespace todgen
