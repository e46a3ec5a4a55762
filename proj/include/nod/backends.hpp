#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nod/json_util.hpp"
#include "nod/message.hpp"
#include "nod/tool_schema.hpp"

namespace nod::backends {

struct Sampling {
  std::uint64_t seed = 0;
  double temperature = 0.0;
};

struct ChatRequest {
  // Which role issued the call: navigator, operator, director_review,
  // director_gate, auditor, debate_judge, critic, judge, user.
  std::string role_tag;
  std::vector<Message> messages;
  std::vector<ToolSchema> tools;
  Sampling sampling;
  // The newest dialogue message the caller is reacting to. Not sent over the
  // wire; scripted backends may match on it.
  std::string observation;
};

struct ChatReply {
  std::string content;
  std::optional<ToolCall> tool_call;
  std::string raw;  // exact backend payload
};

enum class BackendKind { http_chat, scripted };

struct CallRecord {
  std::size_t index = 0;
  std::string backend_id;
  std::string role_tag;
  std::string prompt_hash;
  std::string reply;
};

Json to_json(const CallRecord& record);

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};
class BackendTimeout : public BackendError {
 public:
  using BackendError::BackendError;
};
class ScriptExhausted : public BackendError {
 public:
  using BackendError::BackendError;
};

// Flattened text of a request, the input to prompt hashing and to scripted
// regex matching.
std::string render_prompt_text(const ChatRequest& request);
std::string prompt_hash(const ChatRequest& request);

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual const std::string& id() const = 0;
  virtual BackendKind kind() const = 0;
  virtual bool supports_tools() const = 0;

  // Validates the request, dispatches, and appends to the call log.
  ChatReply chat(const ChatRequest& request);

  std::vector<CallRecord> call_log() const;

 protected:
  virtual ChatReply do_chat(const ChatRequest& request) = 0;

 private:
  mutable std::mutex log_mutex_;
  std::vector<CallRecord> log_;
};

// ---------------------------------------------------------------------------
// Scripted backend

struct RuleCondition {
  enum class Kind { nth_call, regex_on_prompt, regex_on_observation, role_tag };
  Kind kind = Kind::role_tag;
  std::size_t nth = 0;
  std::string pattern;  // regex source or role tag (alternatives joined by '|')
};

struct ScriptedRule {
  std::vector<RuleCondition> when;  // all must hold; empty matches anything
  std::string response;
  bool consume = false;
  std::string label;
};

// Reads either {"when": [...], "response"|"response_json": ..., "consume"}
// or the single-matcher form {"matcher": kind, "value": ..., "response": ...}.
ScriptedRule rule_from_json(const Json& value);
std::vector<ScriptedRule> rules_from_json(const Json& array);

class ScriptedBackend final : public ModelBackend {
 public:
  ScriptedBackend(std::string id, std::vector<ScriptedRule> rules);
  ~ScriptedBackend() override;

  const std::string& id() const override { return id_; }
  BackendKind kind() const override { return BackendKind::scripted; }
  bool supports_tools() const override { return true; }

  std::size_t calls_made() const { return cursor_; }

 protected:
  ChatReply do_chat(const ChatRequest& request) override;

 private:
  struct Compiled;
  std::string id_;
  std::vector<ScriptedRule> rules_;
  std::vector<bool> consumed_;
  std::unique_ptr<Compiled> compiled_;
  std::size_t cursor_ = 0;
};

// Parses a scripted reply: an inline envelope {"tool": ..., "arguments": ...}
// becomes a tool call when the request offered tools.
ChatReply parse_scripted_reply(const std::string& text, bool tools_offered);

// ---------------------------------------------------------------------------
// HTTP chat-completions backend

struct HttpConfig {
  std::string id;
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{60000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
};

// Reads NOD_BACKEND_<ID>_URL, _KEY, _MODEL, _TIMEOUT_MS; the id is
// upper-cased with non-alphanumerics mapped to '_'.
HttpConfig http_config_from_env(const std::string& id);

// Body of one chat-completions request.
Json build_chat_body(const HttpConfig& config, const ChatRequest& request);
// Reads choices[0].message (content and tool_calls).
ChatReply parse_chat_response(const std::string& body);

class HttpChatBackend final : public ModelBackend {
 public:
  explicit HttpChatBackend(HttpConfig config);

  const std::string& id() const override { return config_.id; }
  BackendKind kind() const override { return BackendKind::http_chat; }
  bool supports_tools() const override { return true; }

  int attempts_made() const;

 protected:
  ChatReply do_chat(const ChatRequest& request) override;

 private:
  HttpConfig config_;
  mutable std::mutex attempts_mutex_;
  int attempts_ = 0;
};

// ---------------------------------------------------------------------------

class BackendRegistry {
 public:
  void add(std::shared_ptr<ModelBackend> backend);
  bool contains(const std::string& id) const;
  ModelBackend& get(const std::string& id) const;
  std::shared_ptr<ModelBackend> shared(const std::string& id) const;
  std::vector<std::string> ids() const;

  // Call logs of every backend, ordered by backend id.
  std::vector<CallRecord> call_logs() const;

 private:
  std::map<std::string, std::shared_ptr<ModelBackend>> backends_;
};

// Scripted backend definitions for one task: {"backends": {name: {"rules": [...]}
// | {"alias_of": other}}}. Rules in `common` are appended after the task's own.
class ScriptLibrary {
 public:
  static ScriptLibrary from_json(const Json& document);
  static ScriptLibrary load(const std::filesystem::path& path);

  // Appends `other`'s rules after this library's rules, per backend name.
  void merge_fallback(const ScriptLibrary& other);

  bool contains(const std::string& name) const;
  std::vector<ScriptedRule> rules_for(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::vector<ScriptedRule>> rules_;
  std::map<std::string, std::string> aliases_;
};

}  // namespace nod::backends
