#include "nod/scenarios.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <fstream>

#include <boost/regex.hpp>

#include "nod/prompts.hpp"

namespace nod::scenarios {

namespace {

bool multiset_equal(const Json& a, const Json& b) {
  if (!a.is_array() || !b.is_array() || a.size() != b.size()) return false;
  std::vector<std::string> x, y;
  for (const auto& v : a) x.push_back(canonical_dump(v));
  for (const auto& v : b) y.push_back(canonical_dump(v));
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

MatchMode match_mode_from(const std::string& s) {
  if (s == "exact") return MatchMode::exact;
  if (s == "subset_args") return MatchMode::subset_args;
  throw std::invalid_argument("unknown match_mode '" + s + "'");
}

std::string to_string(MatchMode m) { return m == MatchMode::exact ? "exact" : "subset_args"; }

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace

bool matches(const GoldAction& gold, const ToolCall& executed) {
  if (gold.call.name != executed.name) return false;
  if (gold.match_mode == MatchMode::exact) return same_content(gold.call.arguments, executed.arguments);
  for (const auto& [k, v] : gold.call.arguments.items()) {
    if (!executed.arguments.contains(k)) return false;
    const Json& got = executed.arguments.at(k);
    if (v.is_array()) {
      if (!multiset_equal(v, got)) return false;
    } else if (canonical_dump(v) != canonical_dump(got)) {
      return false;
    }
  }
  return true;
}

TaskSpec task_from_json(const Json& doc, const std::filesystem::path& fixtures_root) {
  TaskSpec t;
  t.fixtures_root = fixtures_root;
  t.schema_version = doc.value("schema_version", kTaskSchemaVersion);
  if (t.schema_version != kTaskSchemaVersion)
    throw std::invalid_argument("task schema version " + std::to_string(t.schema_version) + " is not supported");
  t.task_id = doc.at("task_id").get<std::string>();
  t.domain = doc.at("domain").get<std::string>();
  t.category = doc.value("category", std::string());
  t.initial_db = doc.at("initial_db").get<std::string>();
  t.scripts = doc.value("scripts", std::string());
  t.goal_text = doc.value("goal_text", std::string());
  if (auto it = doc.find("user_script"); it != doc.end()) {
    for (const auto& s : *it) {
      UserStep step;
      std::string trig = s.value("trigger", std::string("always_next"));
      if (trig == "always_next") step.trigger = Trigger::always_next;
      else if (trig == "regex_on_agent_message") step.trigger = Trigger::regex_on_agent_message;
      else throw std::invalid_argument("task " + t.task_id + ": unknown trigger '" + trig + "'");
      step.pattern = s.value("pattern", std::string());
      step.utterance = s.at("utterance").get<std::string>();
      t.user_script.push_back(std::move(step));
    }
  }
  if (auto it = doc.find("persona"); it != doc.end() && it->is_string()) t.persona = it->get<std::string>();
  for (const auto& g : doc.value("gold_critical_actions", Json::array())) {
    GoldAction a;
    a.call = make_tool_call(g.at("name").get<std::string>(), g.value("arguments", Json::object()));
    a.match_mode = match_mode_from(g.value("match_mode", std::string("exact")));
    t.gold_critical_actions.push_back(std::move(a));
  }
  const Json& gold_db = doc.at("gold_final_db");
  t.gold_final_db_hash = gold_db.is_string() ? gold_db.get<std::string>() : gold_db.at("hash").get<std::string>();
  t.required_info = doc.value("required_info", Json::object());
  if (auto it = doc.find("baseline_dialogue_length"); it != doc.end() && it->is_number_integer())
    t.baseline_dialogue_length = it->get<int>();
  if (auto it = doc.find("trap"); it != doc.end()) {
    for (const auto& a : it->value("actions", Json::array()))
      t.trap_actions.push_back(make_tool_call(a.at("name").get<std::string>(), a.value("arguments", Json::object())));
  }
  return t;
}

Json to_json(const TaskSpec& t) {
  Json j = Json::object();
  j["schema_version"] = t.schema_version;
  j["task_id"] = t.task_id;
  j["domain"] = t.domain;
  j["category"] = t.category;
  j["initial_db"] = t.initial_db;
  j["scripts"] = t.scripts;
  j["goal_text"] = t.goal_text;
  Json script = Json::array();
  for (const auto& s : t.user_script) {
    Json step = Json::object();
    step["trigger"] = s.trigger == Trigger::always_next ? "always_next" : "regex_on_agent_message";
    if (!s.pattern.empty()) step["pattern"] = s.pattern;
    step["utterance"] = s.utterance;
    script.push_back(step);
  }
  j["user_script"] = script;
  if (t.persona) j["persona"] = *t.persona;
  Json gold = Json::array();
  for (const auto& g : t.gold_critical_actions)
    gold.push_back({{"name", g.call.name}, {"arguments", g.call.arguments}, {"match_mode", to_string(g.match_mode)}});
  j["gold_critical_actions"] = gold;
  j["gold_final_db"] = {{"hash", t.gold_final_db_hash}};
  j["required_info"] = t.required_info;
  j["baseline_dialogue_length"] = t.baseline_dialogue_length ? Json(*t.baseline_dialogue_length) : Json(nullptr);
  Json trap = Json::array();
  for (const auto& a : t.trap_actions) trap.push_back({{"name", a.name}, {"arguments", a.arguments}});
  j["trap"] = {{"actions", trap}};
  return j;
}

std::filesystem::path fixtures_root_of(const std::filesystem::path& task_path) {
  return std::filesystem::absolute(task_path).parent_path().parent_path().parent_path();
}

TaskSpec load_task(const std::filesystem::path& path) { return task_from_json(read_json(path), fixtures_root_of(path)); }

std::vector<TaskSpec> load_tasks(const std::filesystem::path& fixtures_root, const std::string& domain,
                                 const std::string& glob) {
  std::filesystem::path dir = fixtures_root / "tasks" / domain;
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("no task directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    std::string stem = e.path().stem().string();
    if (fnmatch(glob.c_str(), stem.c_str(), 0) == 0) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TaskSpec> out;
  for (const auto& f : files) out.push_back(load_task(f));
  return out;
}

env::Database initial_database(const TaskSpec& task) { return env::load_database(task.fixtures_root / task.initial_db); }

backends::ScriptLibrary script_library(const TaskSpec& task) {
  backends::ScriptLibrary lib;
  if (!task.scripts.empty()) lib = backends::ScriptLibrary::load(task.fixtures_root / task.scripts);
  auto common = task.fixtures_root / "scripts" / task.domain / "_common.json";
  if (std::filesystem::exists(common)) lib.merge_fallback(backends::ScriptLibrary::load(common));
  return lib;
}

GoldReplay apply_gold(const TaskSpec& task) {
  env::Environment e(initial_database(task), task.domain);
  GoldReplay out;
  for (const auto& g : task.gold_critical_actions) out.results.push_back(e.execute(g.call));
  out.db = e.db();
  return out;
}

std::vector<std::string> validate_task(const TaskSpec& task) {
  std::vector<std::string> problems;
  const env::CriticalRegistry* registry = nullptr;
  try {
    registry = &env::CriticalRegistry::for_domain(task.domain);
  } catch (const std::exception&) {
    problems.push_back("unknown domain '" + task.domain + "'");
    return problems;
  }
  for (std::size_t i = 0; i < task.gold_critical_actions.size(); ++i) {
    const auto& name = task.gold_critical_actions[i].call.name;
    if (!registry->is_critical(name))
      problems.push_back("gold action " + std::to_string(i) + " (" + name + "): not critical");
  }
  if (task.user_script.empty() && !task.persona) problems.push_back("task has neither a user script nor a persona");
  if (!task.user_script.empty()) {
    const std::string& last = task.user_script.back().utterance;
    if (last.find("###STOP###") == std::string::npos && last.find("###TRANSFER###") == std::string::npos)
      problems.push_back("user script does not end with a sentinel");
    for (std::size_t i = 0; i < task.user_script.size(); ++i) {
      const auto& s = task.user_script[i];
      if (s.trigger != Trigger::regex_on_agent_message) continue;
      try {
        boost::regex re(s.pattern, boost::regex::perl);
      } catch (const std::exception&) {
        problems.push_back("user step " + std::to_string(i) + " has a bad pattern");
      }
    }
  }
  if (!task.scripts.empty() && !std::filesystem::exists(task.fixtures_root / task.scripts))
    problems.push_back("scripts file " + task.scripts + " is missing");

  env::Database db;
  try {
    db = initial_database(task);
  } catch (const std::exception& e) {
    problems.push_back(std::string("initial database: ") + e.what());
    return problems;
  }
  for (const auto& p : env::integrity_problems(db)) problems.push_back("initial database: " + p);
  if (task.domain != "retail") return problems;

  try {
    GoldReplay gold = apply_gold(task);
    for (std::size_t i = 0; i < gold.results.size(); ++i)
      if (gold.results[i].error)
        problems.push_back("gold action " + std::to_string(i) + " fails: " + gold.results[i].text);
    std::string reached = env::db_hash(gold.db);
    if (reached != task.gold_final_db_hash) problems.push_back("unreachable gold: applied gold actions give " + reached);
    for (const auto& p : env::integrity_problems(gold.db)) problems.push_back("gold database: " + p);
  } catch (const env::UnknownTool& e) {
    problems.push_back(std::string("gold action: ") + e.what());
  }
  return problems;
}

// ---------------------------------------------------------------------------

struct ScriptedUser::Compiled {
  std::vector<boost::regex> patterns;
};

ScriptedUser::ScriptedUser(std::vector<UserStep> steps) : steps_(std::move(steps)), compiled_(std::make_unique<Compiled>()) {
  for (const auto& s : steps_)
    compiled_->patterns.emplace_back(s.trigger == Trigger::regex_on_agent_message ? s.pattern : std::string(),
                                     boost::regex::perl | boost::regex::icase);
}

ScriptedUser::~ScriptedUser() = default;

std::string ScriptedUser::next(const History& history) {
  std::string agent;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->role == Role::assistant && !it->tool_call) {
      agent = it->content;
      break;
    }
  }
  for (std::size_t i = cursor_; i < steps_.size(); ++i) {
    const UserStep& s = steps_[i];
    if (s.trigger == Trigger::always_next || boost::regex_search(agent, compiled_->patterns[i])) {
      cursor_ = i + 1;
      return s.utterance;
    }
  }
  throw backends::ScriptExhausted("user script has no step for the agent message");
}

ModelUser::ModelUser(std::string persona, backends::ModelBackend& backend, backends::Sampling sampling)
    : persona_(std::move(persona)), backend_(backend), sampling_(sampling) {}

std::string ModelUser::next(const History& history) {
  backends::ChatRequest req;
  req.role_tag = "user";
  req.sampling = sampling_;
  req.messages.push_back(Message::system(prompts::render("user_simulator_system", {{"persona", persona_}})));
  // Roles flip: the agent's messages are what this model receives.
  for (const auto& m : history) {
    if (m.role == Role::assistant && !m.tool_call) req.messages.push_back(Message::user(m.content));
    else if (m.role == Role::user) req.messages.push_back(Message::assistant(m.content));
  }
  for (auto it = history.rbegin(); it != history.rend(); ++it)
    if (it->role == Role::assistant && !it->tool_call) {
      req.observation = it->content;
      break;
    }
  return backend_.chat(req).content;
}

std::unique_ptr<UserSimulator> make_user(const TaskSpec& task, backends::ModelBackend* backend,
                                         backends::Sampling sampling) {
  if (!task.user_script.empty()) return std::make_unique<ScriptedUser>(task.user_script);
  if (!task.persona) throw std::invalid_argument("task " + task.task_id + " has no user script or persona");
  if (backend == nullptr) throw std::invalid_argument("task " + task.task_id + " needs a user backend");
  return std::make_unique<ModelUser>(*task.persona, *backend, sampling);
}

}  // namespace nod::scenarios
