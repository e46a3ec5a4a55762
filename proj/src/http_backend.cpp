#include <cctype>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "nod/backends.hpp"

namespace nod::backends {

namespace {

std::string env_key(const std::string& id) {
  std::string out;
  for (char c : id) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(c)) : '_';
  return out;
}

std::string getenv_or(const std::string& name, const std::string& fallback = {}) {
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : fallback;
}

// Splits "http://host:port/v1" into ("http://host:port", "/v1").
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

}  // namespace

HttpConfig http_config_from_env(const std::string& id) {
  HttpConfig c;
  c.id = "http:" + id;
  std::string prefix = "NOD_BACKEND_" + env_key(id) + "_";
  c.base_url = getenv_or(prefix + "URL");
  if (c.base_url.empty()) throw BackendUnavailable("no endpoint for backend " + c.id + "; set " + prefix + "URL");
  c.api_key = getenv_or(prefix + "KEY");
  c.model = getenv_or(prefix + "MODEL", id);
  if (auto t = getenv_or(prefix + "TIMEOUT_MS"); !t.empty()) c.timeout = std::chrono::milliseconds(std::stoll(t));
  return c;
}

Json build_chat_body(const HttpConfig& config, const ChatRequest& request) {
  Json messages = Json::array();
  std::string last_call_id;
  for (std::size_t i = 0; i < request.messages.size(); ++i) {
    const Message& m = request.messages[i];
    Json wire = Json::object();
    wire["role"] = to_string(m.role);
    if (m.role == Role::assistant && m.tool_call) {
      last_call_id = "call_" + std::to_string(i);
      wire["content"] = nullptr;
      wire["tool_calls"] = Json::array({{{"id", last_call_id},
                                         {"type", "function"},
                                         {"function",
                                          {{"name", m.tool_call->name},
                                           {"arguments", compact_dump(m.tool_call->arguments)}}}}});
    } else if (m.role == Role::tool) {
      wire["tool_call_id"] = last_call_id;
      wire["content"] = m.content;
    } else {
      wire["content"] = m.content;
    }
    messages.push_back(std::move(wire));
  }
  Json body = Json::object();
  body["model"] = config.model;
  body["messages"] = std::move(messages);
  if (!request.tools.empty()) {
    Json tools = Json::array();
    for (const auto& t : request.tools) tools.push_back(to_function_spec(t));
    body["tools"] = std::move(tools);
    body["tool_choice"] = "auto";
  }
  body["temperature"] = request.sampling.temperature;
  body["seed"] = request.sampling.seed;
  return body;
}

ChatReply parse_chat_response(const std::string& body) {
  auto doc = try_parse(body);
  if (!doc || !doc->is_object()) throw BackendError("completion body is not a JSON object");
  auto choices = doc->find("choices");
  if (choices == doc->end() || !choices->is_array() || choices->empty())
    throw BackendError("completion has no choices");
  const Json& msg = (*choices)[0].value("message", Json::object());
  ChatReply reply;
  reply.raw = body;
  if (auto c = msg.find("content"); c != msg.end() && c->is_string()) reply.content = c->get<std::string>();
  if (auto calls = msg.find("tool_calls"); calls != msg.end() && calls->is_array() && !calls->empty()) {
    const Json& fn = (*calls)[0].value("function", Json::object());
    Json env = {{"name", fn.value("name", std::string())}, {"arguments", fn.value("arguments", Json("{}"))}};
    auto call = from_envelope(env);
    if (!call) throw BackendError("completion carries a malformed tool call");
    reply.tool_call = std::move(*call);
  }
  return reply;
}

HttpChatBackend::HttpChatBackend(HttpConfig config) : config_(std::move(config)) {}

int HttpChatBackend::attempts_made() const {
  std::lock_guard<std::mutex> lock(attempts_mutex_);
  return attempts_;
}

ChatReply HttpChatBackend::do_chat(const ChatRequest& request) {
  auto [origin, prefix] = split_url(config_.base_url);
  httplib::Client client(origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  std::string body = compact_dump(build_chat_body(config_, request));
  std::string path = prefix + "/chat/completions";

  auto backoff = config_.initial_backoff;
  httplib::Error last = httplib::Error::Unknown;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    {
      std::lock_guard<std::mutex> lock(attempts_mutex_);
      ++attempts_;
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (res) {
      // A response arrived: the request reached the model API, so it is
      // never sent again whatever the status.
      if (res->status < 200 || res->status >= 300)
        throw BackendError("backend " + config_.id + " answered HTTP " + std::to_string(res->status));
      return parse_chat_response(res->body);
    }
    last = res.error();
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  if (last == httplib::Error::ConnectionTimeout || last == httplib::Error::Read)
    throw BackendTimeout("backend " + config_.id + " timed out: " + httplib::to_string(last));
  throw BackendUnavailable("backend " + config_.id + " unreachable: " + httplib::to_string(last));
}

}  // namespace nod::backends
