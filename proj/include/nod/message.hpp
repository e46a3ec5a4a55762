#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nod/json_util.hpp"

namespace nod {

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct ToolCall {
  std::string name;
  Json arguments = Json::object();

  bool operator==(const ToolCall& other) const {
    return name == other.name && same_content(arguments, other.arguments);
  }
};

// Throws std::invalid_argument when the name is empty or arguments is not an
// object.
ToolCall make_tool_call(std::string name, Json arguments);

// {"tool": name, "arguments": {...}}
Json to_envelope(const ToolCall& call);
// Accepts {"tool"|"name": ..., "arguments": {...}}; nullopt otherwise.
std::optional<ToolCall> from_envelope(const Json& value);

struct Message {
  Role role = Role::user;
  std::string content;
  std::optional<ToolCall> tool_call;  // assistant only
  std::optional<std::string> tool_name;  // tool only

  static Message system(std::string text) { return {Role::system, std::move(text), {}, {}}; }
  static Message user(std::string text) { return {Role::user, std::move(text), {}, {}}; }
  static Message assistant(std::string text) { return {Role::assistant, std::move(text), {}, {}}; }
  static Message assistant_call(ToolCall call) {
    return {Role::assistant, {}, std::move(call), {}};
  }
  static Message tool(std::string name, std::string result) {
    return {Role::tool, std::move(result), {}, std::move(name)};
  }

  bool operator==(const Message&) const = default;
};

using History = std::vector<Message>;

// Checks the role/tool_call/tool_name invariants; throws std::invalid_argument.
void check_invariants(const Message& message);

Json to_json(const Message& message);
Message message_from_json(const Json& value);

// Transcript-style rendering: "[3] User\n...", "[4] Assistant -> Tool: name\n{args}".
std::string render_history(const History& history, std::size_t first_index = 0);

// The text a model sees for one message (content or the call envelope).
std::string message_text(const Message& message);

}  // namespace nod
