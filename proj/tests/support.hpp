#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nod/backends.hpp"
#include "nod/cli.hpp"
#include "nod/control.hpp"
#include "nod/environment.hpp"
#include "nod/metrics.hpp"
#include "nod/money.hpp"
#include "nod/scenarios.hpp"
#include "nod/state.hpp"
#include "nod/trajectory.hpp"

namespace nodtest {

using namespace nod;

inline std::filesystem::path fixtures() { return NOD_DEFAULT_FIXTURE_DIR; }

// Small deterministic generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int range(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(range(0, static_cast<int>(v.size()) - 1))];
  }
  std::string word() {
    static const std::vector<std::string> words = {"lamp", "order", "blue", "refund", "pending", "camera",
                                                   "gift card", "zip", "user", "exchange", "ünïcode", "to ship"};
    return pick(words);
  }
  std::string text(int max_words = 6) {
    std::string out;
    int n = range(0, max_words);
    for (int i = 0; i < n; ++i) out += (i ? " " : "") + word();
    return out;
  }
  std::string digits(int n) {
    std::string s;
    for (int i = 0; i < n; ++i) s += static_cast<char>('0' + range(0, 9));
    return s;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline state::GlobalState random_state(Gen& g) {
  using namespace state;
  GlobalState s;
  s.task_goal.goal_type = g.pick(std::vector<std::string>{"cancel", "modify_items", "exchange", "return"});
  s.task_goal.description = g.text();
  s.task_goal.status = g.coin() ? GoalStatus::ongoing : GoalStatus::completed;
  for (int i = g.range(0, 3); i > 0; --i) s.active_constraints.push_back(g.text());
  for (int i = g.range(0, 2); i > 0; --i) s.missing_information.push_back(g.text());
  auto& up = s.key_entities.user_profile;
  if (g.coin()) up.user_id = "user_" + g.digits(4);
  if (g.coin()) up.name = g.text(2);
  up.authenticated = g.coin();
  std::vector<std::string> record_ids;
  for (int i = g.range(0, 3); i > 0; --i) {
    RecordRef r;
    r.record_id = "#W" + g.digits(7);
    if (g.coin()) r.status = "pending";
    r.description = g.text();
    record_ids.push_back(*r.record_id);
    s.key_entities.records_relevant.push_back(r);
  }
  for (int i = g.range(0, 3); i > 0; --i) {
    ItemRef it;
    if (g.coin()) it.item_id = g.digits(10);
    if (!record_ids.empty() && g.coin()) it.record_id = g.pick(record_ids);
    it.role = g.pick(std::vector<ItemRole>{ItemRole::target, ItemRole::context, ItemRole::unknown});
    it.spec_details = g.text();
    s.key_entities.items_relevant.push_back(it);
  }
  int subs = g.range(0, 3);
  for (int i = 1; i <= subs; ++i) {
    SubTask t;
    t.id = std::to_string(i);
    t.description = g.text();
    t.status = g.pick(std::vector<SubtaskStatus>{SubtaskStatus::pending, SubtaskStatus::in_progress,
                                                 SubtaskStatus::completed, SubtaskStatus::aborted});
    s.sub_tasks.push_back(t);
  }
  if (subs > 0 && g.coin()) s.current_subtask.id = std::to_string(g.range(1, subs));
  s.current_subtask.description = g.text();
  s.conversation_summary = g.text(10);
  return s;
}

inline std::vector<scenarios::TaskSpec>& suite_tasks() {
  static std::vector<scenarios::TaskSpec> tasks = scenarios::load_tasks(fixtures(), "retail");
  return tasks;
}

inline const scenarios::TaskSpec& suite_task(const std::string& id) {
  for (const auto& t : suite_tasks())
    if (t.task_id == id) return t;
  throw std::invalid_argument("no fixture task " + id);
}

struct SuiteRun {
  std::vector<cli::EpisodeResult> episodes;
  std::vector<metrics::EpisodeRef> refs() const {
    std::vector<metrics::EpisodeRef> out;
    for (const auto& e : episodes) out.push_back({&e.trajectory, &suite_task(e.task_id), e.trial});
    return out;
  }
  metrics::EvalReport report(const std::string& label) const { return metrics::build_report(label, refs()); }
};

inline control::ControllerConfig config_for(control::Strategy s) {
  control::ControllerConfig c;
  c.strategy = s;
  return c;
}

inline SuiteRun run_suite(const control::ControllerConfig& config, int trials = 1, std::uint64_t seed = 0) {
  SuiteRun run;
  cli::BackendFactory factory;
  for (int trial = 1; trial <= trials; ++trial)
    for (const auto& t : suite_tasks()) run.episodes.push_back(cli::run_one(t, config, trial, seed, factory));
  return run;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json rules_json(const std::string& text) { return Json::parse(text); }

// A hand-built episode setup: one fixture task with inline backends.
struct World {
  scenarios::TaskSpec task;
  backends::BackendRegistry registry;

  explicit World(const std::string& task_id) : task(suite_task(task_id)) {}

  void backend(const std::string& id, const Json& rules) {
    registry.add(std::make_shared<backends::ScriptedBackend>(id, backends::rules_from_json(rules)));
  }

  trajectory::Trajectory run(const control::ControllerConfig& config, std::uint64_t seed = 1) {
    env::Environment env(scenarios::initial_database(task), task.domain);
    auto user = scenarios::make_user(task, nullptr, {});
    return control::run_episode(task, config, env, *user, registry, seed).trajectory;
  }
};

inline Json generic_state_json() {
  state::GlobalState s;
  s.task_goal = {"general", "help the user", state::GoalStatus::ongoing};
  return state::to_json(s);
}

}  // namespace nodtest
