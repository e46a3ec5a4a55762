#include "nod/backends.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <boost/regex.hpp>

namespace nod {

Json to_function_spec(const ToolSchema& schema) {
  Json props = Json::object();
  Json required = Json::array();
  for (const auto& p : schema.parameters) {
    Json prop = {{"type", p.type}};
    if (!p.description.empty()) prop["description"] = p.description;
    if (p.type == "array") prop["items"] = {{"type", p.item_type.empty() ? "string" : p.item_type}};
    props[p.name] = prop;
    if (p.required) required.push_back(p.name);
  }
  Json params = {{"type", "object"}, {"properties", props}, {"required", required}};
  return {{"type", "function"},
          {"function", {{"name", schema.name}, {"description", schema.description}, {"parameters", params}}}};
}

}  // namespace nod

namespace nod::backends {

Json to_json(const CallRecord& r) {
  return {{"index", r.index},
          {"backend_id", r.backend_id},
          {"role_tag", r.role_tag},
          {"prompt_hash", r.prompt_hash},
          {"reply", r.reply}};
}

std::string render_prompt_text(const ChatRequest& request) {
  std::string out;
  for (const auto& m : request.messages) {
    out += "<";
    out += to_string(m.role);
    if (m.role == Role::tool && m.tool_name) out += ":" + *m.tool_name;
    out += ">\n";
    out += message_text(m);
    out += "\n";
  }
  if (!request.tools.empty()) {
    out += "<tools>";
    for (const auto& t : request.tools) out += " " + t.name;
    out += "\n";
  }
  return out;
}

std::string prompt_hash(const ChatRequest& request) { return sha256_hex(render_prompt_text(request)); }

ChatReply ModelBackend::chat(const ChatRequest& request) {
  if (request.messages.empty()) throw std::invalid_argument("chat request has no messages");
  std::string hash = prompt_hash(request);
  ChatReply reply = do_chat(request);
  std::lock_guard<std::mutex> lock(log_mutex_);
  log_.push_back({log_.size(), id(), request.role_tag, std::move(hash), reply.raw});
  return reply;
}

std::vector<CallRecord> ModelBackend::call_log() const {
  std::lock_guard<std::mutex> lock(log_mutex_);
  return log_;
}

// ---------------------------------------------------------------------------
// Scripted

namespace {

RuleCondition condition(const std::string& kind, const Json& value) {
  RuleCondition c;
  if (kind == "nth_call") {
    c.kind = RuleCondition::Kind::nth_call;
    if (!value.is_number_unsigned() || value.get<std::size_t>() == 0)
      throw std::invalid_argument("nth_call needs a positive integer");
    c.nth = value.get<std::size_t>();
  } else if (kind == "role_tag") {
    c.kind = RuleCondition::Kind::role_tag;
    if (value.is_array()) {
      for (const auto& v : value) c.pattern += (c.pattern.empty() ? "" : "|") + v.get<std::string>();
    } else {
      c.pattern = value.get<std::string>();
    }
  } else if (kind == "regex_on_prompt" || kind == "regex_on_observation") {
    c.kind = kind == "regex_on_prompt" ? RuleCondition::Kind::regex_on_prompt : RuleCondition::Kind::regex_on_observation;
    c.pattern = value.get<std::string>();
  } else {
    throw std::invalid_argument("unknown rule matcher: " + kind);
  }
  return c;
}

}  // namespace

ScriptedRule rule_from_json(const Json& v) {
  if (!v.is_object()) throw std::invalid_argument("scripted rule must be an object");
  ScriptedRule r;
  if (auto it = v.find("when"); it != v.end()) {
    if (it->is_object()) {
      for (const auto& [k, val] : it->items()) r.when.push_back(condition(k, val));
    } else if (it->is_array()) {
      for (const auto& entry : *it) {
        if (!entry.is_object() || entry.size() != 1) throw std::invalid_argument("each condition is a one-key object");
        r.when.push_back(condition(entry.begin().key(), entry.begin().value()));
      }
    } else {
      throw std::invalid_argument("'when' must be an object or an array");
    }
  }
  if (auto it = v.find("matcher"); it != v.end()) r.when.push_back(condition(it->get<std::string>(), v.at("value")));
  if (auto it = v.find("response"); it != v.end()) {
    r.response = it->get<std::string>();
  } else if (auto js = v.find("response_json"); js != v.end()) {
    r.response = compact_dump(*js);
  } else {
    throw std::invalid_argument("scripted rule has no response");
  }
  r.consume = v.value("consume", false);
  r.label = v.value("label", std::string());
  return r;
}

std::vector<ScriptedRule> rules_from_json(const Json& array) {
  std::vector<ScriptedRule> out;
  if (!array.is_array()) throw std::invalid_argument("rules must be an array");
  for (const auto& v : array) out.push_back(rule_from_json(v));
  return out;
}

struct ScriptedBackend::Compiled {
  // One entry per condition; empty regex for non-regex conditions.
  std::vector<std::vector<boost::regex>> regexes;
};

ScriptedBackend::ScriptedBackend(std::string id, std::vector<ScriptedRule> rules)
    : id_(std::move(id)), rules_(std::move(rules)), consumed_(rules_.size(), false), compiled_(std::make_unique<Compiled>()) {
  for (const auto& r : rules_) {
    std::vector<boost::regex> row;
    for (const auto& c : r.when) {
      if (c.kind == RuleCondition::Kind::regex_on_prompt || c.kind == RuleCondition::Kind::regex_on_observation)
        row.emplace_back(c.pattern, boost::regex::perl);
      else
        row.emplace_back();
    }
    compiled_->regexes.push_back(std::move(row));
  }
}

ScriptedBackend::~ScriptedBackend() = default;

ChatReply parse_scripted_reply(const std::string& text, bool tools_offered) {
  ChatReply reply;
  reply.raw = text;
  reply.content = text;
  if (!tools_offered) return reply;
  std::string body = strip_code_fences(text);
  if (auto whole = try_parse(body); whole && whole->is_object()) {
    if (auto call = from_envelope(*whole)) {
      reply.tool_call = std::move(*call);
      reply.content.clear();
      return reply;
    }
  }
  // Prose around an envelope: keep both so the caller can reject it.
  if (auto embedded = extract_json_object(text)) {
    if (auto call = from_envelope(*embedded)) reply.tool_call = std::move(*call);
  }
  return reply;
}

ChatReply ScriptedBackend::do_chat(const ChatRequest& request) {
  std::size_t call_number = ++cursor_;
  std::string prompt;
  bool prompt_ready = false;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (consumed_[i]) continue;
    const ScriptedRule& rule = rules_[i];
    bool ok = true;
    for (std::size_t k = 0; ok && k < rule.when.size(); ++k) {
      const RuleCondition& c = rule.when[k];
      switch (c.kind) {
        case RuleCondition::Kind::nth_call:
          ok = call_number == c.nth;
          break;
        case RuleCondition::Kind::role_tag: {
          ok = false;
          std::istringstream alts(c.pattern);
          std::string alt;
          while (std::getline(alts, alt, '|')) ok = ok || alt == request.role_tag;
          break;
        }
        case RuleCondition::Kind::regex_on_prompt:
          if (!prompt_ready) {
            prompt = render_prompt_text(request);
            prompt_ready = true;
          }
          ok = boost::regex_search(prompt, compiled_->regexes[i][k]);
          break;
        case RuleCondition::Kind::regex_on_observation:
          ok = boost::regex_search(request.observation, compiled_->regexes[i][k]);
          break;
      }
    }
    if (!ok) continue;
    if (rule.consume) consumed_[i] = true;
    return parse_scripted_reply(rule.response, !request.tools.empty());
  }
  throw ScriptExhausted("backend " + id_ + ": no rule matches call " + std::to_string(call_number) + " (role " +
                        request.role_tag + ")");
}

// ---------------------------------------------------------------------------

void BackendRegistry::add(std::shared_ptr<ModelBackend> backend) {
  std::string id = backend->id();
  if (backends_.count(id)) throw std::invalid_argument("backend registered twice: " + id);
  backends_.emplace(std::move(id), std::move(backend));
}

bool BackendRegistry::contains(const std::string& id) const { return backends_.count(id) > 0; }

ModelBackend& BackendRegistry::get(const std::string& id) const { return *shared(id); }

std::shared_ptr<ModelBackend> BackendRegistry::shared(const std::string& id) const {
  auto it = backends_.find(id);
  if (it == backends_.end()) throw BackendUnavailable("no backend registered as " + id);
  return it->second;
}

std::vector<std::string> BackendRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : backends_) out.push_back(id);
  return out;
}

std::vector<CallRecord> BackendRegistry::call_logs() const {
  std::vector<CallRecord> out;
  for (const auto& [_, b] : backends_) {
    auto log = b->call_log();
    out.insert(out.end(), log.begin(), log.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

ScriptLibrary ScriptLibrary::from_json(const Json& document) {
  ScriptLibrary lib;
  auto it = document.find("backends");
  if (it == document.end() || !it->is_object()) throw std::invalid_argument("script file needs a 'backends' object");
  for (const auto& [name, def] : it->items()) {
    if (def.contains("alias_of")) {
      if (def.contains("rules")) throw std::invalid_argument("backend " + name + " has both rules and alias_of");
      lib.aliases_[name] = def.at("alias_of").get<std::string>();
    } else {
      lib.rules_[name] = rules_from_json(def.value("rules", Json::array()));
    }
  }
  return lib;
}

ScriptLibrary ScriptLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open script file " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("script file " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

void ScriptLibrary::merge_fallback(const ScriptLibrary& other) {
  for (const auto& [name, rules] : other.rules_) {
    if (aliases_.count(name)) continue;
    auto& mine = rules_[name];
    mine.insert(mine.end(), rules.begin(), rules.end());
  }
  for (const auto& [name, target] : other.aliases_) {
    if (!rules_.count(name) && !aliases_.count(name)) aliases_[name] = target;
  }
}

bool ScriptLibrary::contains(const std::string& name) const { return rules_.count(name) || aliases_.count(name); }

std::vector<ScriptedRule> ScriptLibrary::rules_for(const std::string& name) const {
  std::string current = name;
  for (int hops = 0; hops < 8; ++hops) {
    if (auto r = rules_.find(current); r != rules_.end()) return r->second;
    auto a = aliases_.find(current);
    if (a == aliases_.end()) break;
    current = a->second;
  }
  throw std::invalid_argument("no scripted backend named " + name);
}

std::vector<std::string> ScriptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : rules_) out.push_back(n);
  for (const auto& [n, _] : aliases_) out.push_back(n);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace nod::backends
