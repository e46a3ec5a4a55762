#include "nod/state.hpp"

#include <set>

#include "nod/prompts.hpp"

namespace nod::state {

std::string_view to_string(GoalStatus v) {
  return v == GoalStatus::ongoing ? "ongoing" : "completed";
}

std::string_view to_string(ItemRole v) {
  switch (v) {
    case ItemRole::target: return "target";
    case ItemRole::context: return "context";
    case ItemRole::unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(SubtaskStatus v) {
  switch (v) {
    case SubtaskStatus::pending: return "pending";
    case SubtaskStatus::in_progress: return "in_progress";
    case SubtaskStatus::completed: return "completed";
    case SubtaskStatus::aborted: return "aborted";
  }
  return "pending";
}

namespace {

Json opt(const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const GlobalState& s) {
  Json j = Json::object();
  j["task_goal"] = {{"goal_type", s.task_goal.goal_type},
                    {"description", s.task_goal.description},
                    {"status", to_string(s.task_goal.status)}};
  j["active_constraints"] = s.active_constraints;
  j["missing_information"] = s.missing_information;
  Json ke = Json::object();
  const auto& up = s.key_entities.user_profile;
  ke["user_profile"] = {{"user_id", opt(up.user_id)}, {"name", opt(up.name)}, {"authenticated", up.authenticated}};
  Json records = Json::array();
  for (const auto& r : s.key_entities.records_relevant)
    records.push_back({{"record_id", opt(r.record_id)}, {"status", opt(r.status)}, {"description", r.description}});
  ke["records_relevant"] = records;
  Json items = Json::array();
  for (const auto& i : s.key_entities.items_relevant)
    items.push_back({{"item_id", opt(i.item_id)},
                     {"record_id", opt(i.record_id)},
                     {"role", to_string(i.role)},
                     {"spec_details", i.spec_details}});
  ke["items_relevant"] = items;
  j["key_entities"] = ke;
  Json subs = Json::array();
  for (const auto& t : s.sub_tasks)
    subs.push_back({{"id", t.id}, {"description", t.description}, {"status", to_string(t.status)}});
  j["sub_tasks"] = subs;
  j["current_subtask"] = {{"id", opt(s.current_subtask.id)}, {"description", s.current_subtask.description}};
  j["conversation_summary"] = s.conversation_summary;
  return j;
}

std::string serialize(const GlobalState& state) { return compact_dump(to_json(state)); }

std::string describe(const ValidationIssue& issue) {
  std::string out = issue.path.empty() ? std::string("(document)") : issue.path;
  out += ": " + issue.rule;
  if (!issue.allowed.empty()) out += " (allowed: " + issue.allowed + ")";
  return out;
}

std::string ValidationFailure::summary() const {
  std::string out;
  for (const auto& i : issues) out += "- " + describe(i) + "\n";
  return out;
}

namespace {

// Walks a document against the schema, collecting every issue instead of
// stopping at the first.
class Checker {
 public:
  explicit Checker(ValidationMode mode) : mode_(mode) {}

  std::vector<ValidationIssue> issues;
  std::vector<ValidationIssue> warnings;

  void add(std::string path, std::string rule, std::string allowed = {}) {
    issues.push_back({std::move(path), std::move(rule), std::move(allowed)});
  }

  static std::string join(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
  }

  // Requires `keys` and reports unknown ones; returns false if not an object.
  bool object(const Json& v, const std::string& path, std::initializer_list<const char*> keys) {
    if (!v.is_object()) {
      add(path, path.empty() ? "not_object" : "wrong_type", "object");
      return false;
    }
    for (const char* k : keys)
      if (!v.contains(k)) add(join(path, k), "missing_field");
    for (const auto& [k, _] : v.items()) {
      bool known = false;
      for (const char* want : keys) known = known || k == want;
      if (known) continue;
      if (mode_ == ValidationMode::strict) add(join(path, k), "unknown_field");
      else warnings.push_back({join(path, k), "unknown_field", {}});
    }
    return true;
  }

  void string(const Json& parent, const std::string& path, const char* key) {
    auto it = parent.find(key);
    if (it == parent.end()) return;
    if (!it->is_string()) add(join(path, key), "wrong_type", "string");
  }

  void nullable_string(const Json& parent, const std::string& path, const char* key) {
    auto it = parent.find(key);
    if (it == parent.end()) return;
    if (!it->is_string() && !it->is_null()) add(join(path, key), "wrong_type", "string|null");
  }

  void boolean(const Json& parent, const std::string& path, const char* key) {
    auto it = parent.find(key);
    if (it == parent.end()) return;
    if (!it->is_boolean()) add(join(path, key), "wrong_type", "boolean");
  }

  void enumeration(const Json& parent, const std::string& path, const char* key,
                   std::initializer_list<const char*> allowed) {
    auto it = parent.find(key);
    if (it == parent.end()) return;
    std::string list;
    for (const char* a : allowed) list += (list.empty() ? "" : "|") + std::string(a);
    if (!it->is_string()) {
      add(join(path, key), "bad_enum", list);
      return;
    }
    for (const char* a : allowed)
      if (it->get<std::string>() == a) return;
    add(join(path, key), "bad_enum", list);
  }

  void string_list(const Json& parent, const std::string& path, const char* key) {
    auto it = parent.find(key);
    if (it == parent.end()) return;
    if (!it->is_array()) {
      add(join(path, key), "wrong_type", "array of string");
      return;
    }
    for (std::size_t i = 0; i < it->size(); ++i)
      if (!(*it)[i].is_string()) add(join(path, key) + "[" + std::to_string(i) + "]", "wrong_type", "string");
  }

  // Returns the array or nullptr after reporting a wrong type.
  const Json* array(const Json& parent, const std::string& path, const char* key) {
    auto it = parent.find(key);
    if (it == parent.end()) return nullptr;
    if (!it->is_array()) {
      add(join(path, key), "wrong_type", "array");
      return nullptr;
    }
    return &*it;
  }

  void warn(std::string path, std::string rule) { warnings.push_back({std::move(path), std::move(rule), {}}); }
  ValidationMode mode() const { return mode_; }

 private:
  ValidationMode mode_;
};

void check_document(const Json& doc, Checker& c) {
  if (!c.object(doc, "", {"task_goal", "active_constraints", "missing_information", "key_entities", "sub_tasks",
                          "current_subtask", "conversation_summary"}))
    return;

  if (auto it = doc.find("task_goal"); it != doc.end() && c.object(*it, "task_goal", {"goal_type", "description", "status"})) {
    c.string(*it, "task_goal", "goal_type");
    c.string(*it, "task_goal", "description");
    c.enumeration(*it, "task_goal", "status", {"ongoing", "completed"});
  }
  c.string_list(doc, "", "active_constraints");
  c.string_list(doc, "", "missing_information");

  if (auto it = doc.find("key_entities");
      it != doc.end() && c.object(*it, "key_entities", {"user_profile", "records_relevant", "items_relevant"})) {
    const Json& ke = *it;
    if (auto up = ke.find("user_profile");
        up != ke.end() && c.object(*up, "key_entities.user_profile", {"user_id", "name", "authenticated"})) {
      c.nullable_string(*up, "key_entities.user_profile", "user_id");
      c.nullable_string(*up, "key_entities.user_profile", "name");
      c.boolean(*up, "key_entities.user_profile", "authenticated");
    }
    if (const Json* recs = c.array(ke, "key_entities", "records_relevant")) {
      for (std::size_t i = 0; i < recs->size(); ++i) {
        std::string p = "key_entities.records_relevant[" + std::to_string(i) + "]";
        if (!c.object((*recs)[i], p, {"record_id", "status", "description"})) continue;
        c.nullable_string((*recs)[i], p, "record_id");
        c.nullable_string((*recs)[i], p, "status");
        c.string((*recs)[i], p, "description");
      }
    }
    if (const Json* items = c.array(ke, "key_entities", "items_relevant")) {
      for (std::size_t i = 0; i < items->size(); ++i) {
        std::string p = "key_entities.items_relevant[" + std::to_string(i) + "]";
        if (!c.object((*items)[i], p, {"item_id", "record_id", "role", "spec_details"})) continue;
        c.nullable_string((*items)[i], p, "item_id");
        c.nullable_string((*items)[i], p, "record_id");
        c.enumeration((*items)[i], p, "role", {"target", "context", "unknown"});
        c.string((*items)[i], p, "spec_details");
      }
    }
  }

  std::set<std::string> ids;
  if (const Json* subs = c.array(doc, "", "sub_tasks")) {
    for (std::size_t i = 0; i < subs->size(); ++i) {
      std::string p = "sub_tasks[" + std::to_string(i) + "]";
      const Json& t = (*subs)[i];
      if (!c.object(t, p, {"id", "description", "status"})) continue;
      c.string(t, p, "id");
      c.string(t, p, "description");
      c.enumeration(t, p, "status", {"pending", "in_progress", "completed", "aborted"});
      if (auto id = t.find("id"); id != t.end() && id->is_string()) {
        if (!ids.insert(id->get<std::string>()).second) c.add(p + ".id", "duplicate_id");
      }
    }
  }

  if (auto it = doc.find("current_subtask"); it != doc.end() && c.object(*it, "current_subtask", {"id", "description"})) {
    c.nullable_string(*it, "current_subtask", "id");
    c.string(*it, "current_subtask", "description");
    if (auto id = it->find("id"); id != it->end() && id->is_string() && !ids.count(id->get<std::string>())) {
      if (c.mode() == ValidationMode::strict) c.add("current_subtask.id", "dangling_reference");
      else c.warn("current_subtask.id", "dangling_reference");
    }
  }
  c.string(doc, "", "conversation_summary");
}

std::optional<std::string> get_opt(const Json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<std::string>();
}

GoalStatus goal_status(const std::string& s) { return s == "completed" ? GoalStatus::completed : GoalStatus::ongoing; }
ItemRole item_role(const std::string& s) {
  if (s == "target") return ItemRole::target;
  if (s == "context") return ItemRole::context;
  return ItemRole::unknown;
}
SubtaskStatus subtask_status(const std::string& s) {
  if (s == "in_progress") return SubtaskStatus::in_progress;
  if (s == "completed") return SubtaskStatus::completed;
  if (s == "aborted") return SubtaskStatus::aborted;
  return SubtaskStatus::pending;
}

// Assumes the document passed check_document.
GlobalState decode(const Json& d) {
  GlobalState s;
  const Json& tg = d.at("task_goal");
  s.task_goal = {tg.at("goal_type").get<std::string>(), tg.at("description").get<std::string>(),
                 goal_status(tg.at("status").get<std::string>())};
  s.active_constraints = d.at("active_constraints").get<std::vector<std::string>>();
  s.missing_information = d.at("missing_information").get<std::vector<std::string>>();
  const Json& ke = d.at("key_entities");
  const Json& up = ke.at("user_profile");
  s.key_entities.user_profile = {get_opt(up.at("user_id")), get_opt(up.at("name")), up.at("authenticated").get<bool>()};
  for (const auto& r : ke.at("records_relevant"))
    s.key_entities.records_relevant.push_back(
        {get_opt(r.at("record_id")), get_opt(r.at("status")), r.at("description").get<std::string>()});
  for (const auto& i : ke.at("items_relevant"))
    s.key_entities.items_relevant.push_back({get_opt(i.at("item_id")), get_opt(i.at("record_id")),
                                             item_role(i.at("role").get<std::string>()),
                                             i.at("spec_details").get<std::string>()});
  for (const auto& t : d.at("sub_tasks"))
    s.sub_tasks.push_back(
        {t.at("id").get<std::string>(), t.at("description").get<std::string>(), subtask_status(t.at("status").get<std::string>())});
  const Json& cs = d.at("current_subtask");
  s.current_subtask = {get_opt(cs.at("id")), cs.at("description").get<std::string>()};
  s.conversation_summary = d.at("conversation_summary").get<std::string>();
  return s;
}

}  // namespace

ValidationResult validate_state(const Json& document, ValidationMode mode) {
  Checker c(mode);
  check_document(document, c);
  ValidationResult r;
  r.warnings = std::move(c.warnings);
  if (!c.issues.empty()) {
    r.failure.issues = std::move(c.issues);
    return r;
  }
  r.state = decode(document);
  return r;
}

ValidationResult validate_state(std::string_view raw, ValidationMode mode) {
  auto doc = extract_json_object(raw);
  if (!doc) {
    ValidationResult r;
    bool any_json = try_parse(strip_code_fences(raw)).has_value();
    r.failure.issues.push_back({"", any_json ? "not_object" : "not_json", {}});
    return r;
  }
  return validate_state(*doc, mode);
}

GlobalState from_json(const Json& document) {
  auto r = validate_state(document, ValidationMode::lenient);
  if (!r.ok()) throw std::invalid_argument("not a valid global state:\n" + r.failure.summary());
  return *r.state;
}

// ---------------------------------------------------------------------------

std::string render_navigator_input(const StateUpdateInput& input) {
  prompts::Bindings b;
  b["previous_state"] = input.previous_state ? serialize(*input.previous_state) : std::string(kNoPriorState);
  b["observation"] = render_history({input.observation});
  b["recent_context"] = input.recent_context.empty() ? std::string("(none)") : render_history(input.recent_context);
  b["director_feedback_block"] =
      input.director_feedback ? prompts::render("navigator_feedback", {{"feedback", *input.director_feedback}}) : "";
  return prompts::render("navigator_input", b);
}

backends::ChatRequest navigator_request(const StateUpdateInput& input, backends::Sampling sampling) {
  backends::ChatRequest req;
  req.role_tag = "navigator";
  req.messages = {Message::system(prompts::render("navigator")), Message::user(render_navigator_input(input))};
  req.sampling = sampling;
  req.observation = message_text(input.observation);
  return req;
}

NavigationResult navigate(const StateUpdateInput& input, backends::ModelBackend& backend, const RepairPolicy& policy,
                          backends::Sampling sampling) {
  backends::ChatRequest req = navigator_request(input, sampling);
  std::vector<std::string> raws;
  ValidationFailure last;
  for (int attempt = 0; attempt <= policy.max_repairs; ++attempt) {
    backends::ChatReply reply = backend.chat(req);
    std::string raw = reply.content;
    if (reply.tool_call) raw = compact_dump(to_envelope(*reply.tool_call));
    raws.push_back(raw);
    ValidationResult r = validate_state(std::string_view(raw), policy.mode);
    if (r.ok()) return NavigationResult{std::move(*r.state), raw, attempt + 1, std::move(r.warnings)};
    last = r.failure;
    req.messages.push_back(Message::assistant(raw.empty() ? "(empty reply)" : raw));
    req.messages.push_back(Message::user(prompts::render("navigator_repair", {{"issues", last.summary()}})));
  }
  throw NavigationFailure(std::move(raws), std::move(last));
}

}  // namespace nod::state
