#include "nod/message.hpp"

#include <sstream>

namespace nod {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "user";
}

Role role_from_string(std::string_view text) {
  if (text == "system") return Role::system;
  if (text == "user") return Role::user;
  if (text == "assistant") return Role::assistant;
  if (text == "tool") return Role::tool;
  throw std::invalid_argument("unknown message role: " + std::string(text));
}

ToolCall make_tool_call(std::string name, Json arguments) {
  if (name.empty()) throw std::invalid_argument("tool call name is empty");
  if (arguments.is_null()) arguments = Json::object();
  if (!arguments.is_object()) throw std::invalid_argument("tool call arguments must be an object");
  return ToolCall{std::move(name), std::move(arguments)};
}

Json to_envelope(const ToolCall& call) {
  Json env = Json::object();
  env["tool"] = call.name;
  env["arguments"] = call.arguments;
  return env;
}

std::optional<ToolCall> from_envelope(const Json& value) {
  if (!value.is_object()) return std::nullopt;
  const Json* name = nullptr;
  if (auto it = value.find("tool"); it != value.end()) name = &*it;
  else if (auto it2 = value.find("name"); it2 != value.end()) name = &*it2;
  if (name == nullptr || !name->is_string() || name->get<std::string>().empty()) return std::nullopt;
  Json args = Json::object();
  if (auto it = value.find("arguments"); it != value.end()) {
    args = *it;
    if (args.is_string()) {
      // Chat-completions wire format carries arguments as a JSON string.
      auto parsed = try_parse(args.get<std::string>());
      if (!parsed) return std::nullopt;
      args = *parsed;
    }
  }
  if (!args.is_object()) return std::nullopt;
  for (const auto& [key, _] : value.items()) {
    if (key != "tool" && key != "name" && key != "arguments") return std::nullopt;
  }
  return ToolCall{name->get<std::string>(), std::move(args)};
}

void check_invariants(const Message& message) {
  if (message.tool_call && message.role != Role::assistant) {
    throw std::invalid_argument("tool_call is only allowed on assistant messages");
  }
  if (message.tool_name && message.role != Role::tool) {
    throw std::invalid_argument("tool_name is only allowed on tool messages");
  }
  if (message.role == Role::tool && !message.tool_name) {
    throw std::invalid_argument("tool messages must name their tool");
  }
  if (message.role == Role::assistant) {
    const bool has_text = !message.content.empty();
    const bool has_call = message.tool_call.has_value();
    if (has_text == has_call) {
      throw std::invalid_argument("assistant messages carry either content or a tool call");
    }
  }
}

Json to_json(const Message& message) {
  Json j = Json::object();
  j["role"] = to_string(message.role);
  j["content"] = message.content;
  if (message.tool_call) j["tool_call"] = to_envelope(*message.tool_call);
  if (message.tool_name) j["tool_name"] = *message.tool_name;
  return j;
}

Message message_from_json(const Json& value) {
  Message m;
  m.role = role_from_string(value.at("role").get<std::string>());
  m.content = value.value("content", std::string());
  if (auto it = value.find("tool_call"); it != value.end() && !it->is_null()) {
    auto call = from_envelope(*it);
    if (!call) throw std::invalid_argument("malformed tool_call in message");
    m.tool_call = std::move(*call);
  }
  if (auto it = value.find("tool_name"); it != value.end() && !it->is_null()) {
    m.tool_name = it->get<std::string>();
  }
  return m;
}

std::string message_text(const Message& message) {
  if (message.tool_call) return compact_dump(to_envelope(*message.tool_call));
  return message.content;
}

std::string render_history(const History& history, std::size_t first_index) {
  std::ostringstream out;
  std::size_t index = first_index;
  for (const auto& m : history) {
    if (index != first_index) out << "\n\n";
    out << '[' << index++ << "] ";
    switch (m.role) {
      case Role::system: out << "System\n" << m.content; break;
      case Role::user: out << "User\n" << m.content; break;
      case Role::tool: out << "Tool\n" << m.content; break;
      case Role::assistant:
        if (m.tool_call) {
          out << "Assistant -> Tool: " << m.tool_call->name << '\n'
              << tool_style_dump(m.tool_call->arguments);
        } else {
          out << "Assistant\n" << m.content;
        }
        break;
    }
  }
  return out.str();
}

}  // namespace nod
