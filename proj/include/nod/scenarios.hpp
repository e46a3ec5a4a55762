#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nod/backends.hpp"
#include "nod/environment.hpp"
#include "nod/message.hpp"

namespace nod::scenarios {

constexpr int kTaskSchemaVersion = 1;

enum class MatchMode { exact, subset_args };

struct GoldAction {
  ToolCall call;
  MatchMode match_mode = MatchMode::exact;
};

// exact: same name and argument object. subset_args: every gold argument is
// present and equal, list values compared as multisets.
bool matches(const GoldAction& gold, const ToolCall& executed);

enum class Trigger { always_next, regex_on_agent_message };

struct UserStep {
  Trigger trigger = Trigger::always_next;
  std::string pattern;
  std::string utterance;
};

struct TaskSpec {
  int schema_version = kTaskSchemaVersion;
  std::string task_id;
  std::string domain;
  std::string category;      // policy_trap, hallucination_trap, intent_trap, clean
  std::string initial_db;    // relative to the fixtures root
  std::string scripts;       // scripted backend definitions, relative to the fixtures root
  std::vector<UserStep> user_script;
  std::optional<std::string> persona;  // model-driven simulator
  std::string goal_text;
  std::vector<GoldAction> gold_critical_actions;
  std::string gold_final_db_hash;
  Json required_info = Json::object();
  std::optional<int> baseline_dialogue_length;
  std::vector<ToolCall> trap_actions;  // the wrong calls the trap invites

  std::filesystem::path fixtures_root;
};

TaskSpec task_from_json(const Json& doc, const std::filesystem::path& fixtures_root);
Json to_json(const TaskSpec& task);

// Tasks live at <root>/tasks/<domain>/<file>.json.
TaskSpec load_task(const std::filesystem::path& path);
std::filesystem::path fixtures_root_of(const std::filesystem::path& task_path);

// Task files of a domain whose stem matches the shell glob, sorted by file name.
std::vector<TaskSpec> load_tasks(const std::filesystem::path& fixtures_root, const std::string& domain,
                                 const std::string& glob = "*");

env::Database initial_database(const TaskSpec& task);

// The task's scripted backends with the domain's _common.json appended.
backends::ScriptLibrary script_library(const TaskSpec& task);

// Applies the gold actions to a fresh copy of the initial database.
struct GoldReplay {
  env::Database db;
  std::vector<env::ToolResult> results;
};
GoldReplay apply_gold(const TaskSpec& task);

std::vector<std::string> validate_task(const TaskSpec& task);

// ---------------------------------------------------------------------------

class UserSimulator {
 public:
  virtual ~UserSimulator() = default;
  virtual std::string next(const History& history) = 0;
};

// Scans forward from its cursor for the first step whose trigger matches the
// latest assistant message.
class ScriptedUser final : public UserSimulator {
 public:
  explicit ScriptedUser(std::vector<UserStep> steps);
  ~ScriptedUser() override;
  std::string next(const History& history) override;
  std::size_t cursor() const { return cursor_; }

 private:
  struct Compiled;
  std::vector<UserStep> steps_;
  std::unique_ptr<Compiled> compiled_;
  std::size_t cursor_ = 0;
};

class ModelUser final : public UserSimulator {
 public:
  ModelUser(std::string persona, backends::ModelBackend& backend, backends::Sampling sampling);
  std::string next(const History& history) override;

 private:
  std::string persona_;
  backends::ModelBackend& backend_;
  backends::Sampling sampling_;
};

// Scripted when the task has a script; otherwise needs a backend and a persona.
std::unique_ptr<UserSimulator> make_user(const TaskSpec& task, backends::ModelBackend* backend,
                                         backends::Sampling sampling);

}  // namespace nod::scenarios
