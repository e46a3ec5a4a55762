#include "nod/cli.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "nod/environment.hpp"
#include "nod/judge.hpp"
#include "nod/prompts.hpp"

namespace nod::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RunError("cannot write " + path.string());
  out << text;
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw RunError("cannot open " + path.string());
  return Json::parse(in);
}

std::string episode_name(const std::string& task_id, int trial) {
  return task_id + "__trial" + std::to_string(trial);
}

std::map<std::string, scenarios::TaskSpec> tasks_by_id(const fs::path& root, const std::string& domain) {
  std::map<std::string, scenarios::TaskSpec> out;
  for (auto& t : scenarios::load_tasks(root, domain)) out.emplace(t.task_id, std::move(t));
  return out;
}


}  // namespace

Json to_json(const RunConfig& c) {
  Json j = Json::object();
  j["domain"] = c.domain;
  j["tasks"] = c.tasks;
  j["controller"] = control::to_json(c.controller);
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["parallel"] = c.parallel;
  j["keep_going"] = c.keep_going;
  j["fixtures"] = c.fixtures.string();
  return j;
}

RunConfig run_config_from_json(const Json& j, RunConfig c) {
  try {
    if (j.contains("domain")) c.domain = j["domain"].get<std::string>();
    if (j.contains("tasks")) c.tasks = j["tasks"].get<std::string>();
    if (j.contains("controller")) c.controller = control::config_from_json(j["controller"], c.controller);
    if (j.contains("trials")) c.trials = j["trials"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("parallel")) c.parallel = j["parallel"].get<int>();
    if (j.contains("keep_going")) c.keep_going = j["keep_going"].get<bool>();
    if (j.contains("fixtures")) c.fixtures = j["fixtures"].get<std::string>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
  } catch (const control::ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw control::ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

std::uint64_t episode_seed(std::uint64_t run_seed, const std::string& task_id, int trial) {
  std::string h = sha256_hex(std::to_string(run_seed) + ":" + task_id + ":" + std::to_string(trial));
  return std::stoull(h.substr(0, 16), nullptr, 16);
}

backends::BackendRegistry BackendFactory::for_task(const scenarios::TaskSpec& task,
                                                   const control::ControllerConfig& config) {
  backends::BackendRegistry reg;
  std::optional<backends::ScriptLibrary> lib;
  std::vector<std::string> roles = control::episode_roles(config, !task.user_script.empty());
  roles.push_back("judge");
  for (const auto& role : roles) {
    const std::string& id = config.backends.at(role);
    if (reg.contains(id)) continue;
    if (id.rfind("scripted:", 0) == 0) {
      if (!lib) lib = scenarios::script_library(task);
      std::string name = id.substr(9);
      if (!lib->contains(name)) {
        if (role == "judge") continue;  // only needed by the judge command
        throw backends::BackendUnavailable("task " + task.task_id + " defines no scripted backend '" + name + "'");
      }
      reg.add(std::make_shared<backends::ScriptedBackend>(id, lib->rules_for(name)));
    } else if (id.rfind("http:", 0) == 0) {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = shared_.find(id);
      if (it == shared_.end())
        it = shared_.emplace(id, std::make_shared<backends::HttpChatBackend>(backends::http_config_from_env(id))).first;
      reg.add(it->second);
    } else {
      throw control::ConfigError("backend id '" + id + "' must start with scripted: or http:");
    }
  }
  return reg;
}

EpisodeResult run_one(const scenarios::TaskSpec& task, const control::ControllerConfig& config, int trial,
                      std::uint64_t run_seed, BackendFactory& factory) {
  std::uint64_t seed = episode_seed(run_seed, task.task_id, trial);
  backends::BackendRegistry reg = factory.for_task(task, config);
  env::Environment env(scenarios::initial_database(task), task.domain);
  backends::ModelBackend* user_backend = nullptr;
  if (task.user_script.empty()) user_backend = &reg.get(config.backends.at("user"));
  auto user = scenarios::make_user(task, user_backend, {control::derive_seed(seed, 1u << 20), 0.0});
  auto outcome = control::run_episode(task, config, env, *user, reg, seed);
  EpisodeResult r;
  r.task_id = task.task_id;
  r.trial = trial;
  r.file = "trajectories/" + episode_name(task.task_id, trial) + ".jsonl";
  r.trajectory = std::move(outcome.trajectory);
  r.calls = reg.call_logs();
  return r;
}

std::string method_label(const control::ControllerConfig& c) {
  std::string m(control::to_string(c.strategy));
  if ((c.strategy == control::Strategy::nod || c.strategy == control::Strategy::nod_revise_only) &&
      c.director_policy != roles::PolicyName::balanced)
    m += "(" + std::string(roles::to_string(c.director_policy)) + ")";
  if (c.weak_director) m += "[weak]";
  return m;
}

RunResult cmd_run(const RunConfig& config) {
  control::validate(config.controller);
  if (config.trials < 1) throw control::ConfigError("trials must be at least 1");
  if (config.parallel < 1) throw control::ConfigError("parallel must be at least 1");
  if (config.out.empty()) throw control::ConfigError("an output directory is required (--out)");
  if (fs::exists(config.out / "manifest.json"))
    throw RunError(config.out.string() + " already holds a run; choose a new --out");

  std::vector<scenarios::TaskSpec> tasks = scenarios::load_tasks(config.fixtures, config.domain, config.tasks);
  if (tasks.empty()) throw control::ConfigError("no tasks match '" + config.tasks + "' in domain " + config.domain);
  for (const auto& t : tasks) {
    auto problems = scenarios::validate_task(t);
    if (!problems.empty()) throw control::ConfigError("task " + t.task_id + " is invalid: " + problems.front());
  }

  struct Slot {
    const scenarios::TaskSpec* task;
    int trial;
  };
  std::vector<Slot> slots;
  for (int trial = 1; trial <= config.trials; ++trial)
    for (const auto& t : tasks) slots.push_back({&t, trial});

  std::vector<std::optional<EpisodeResult>> results(slots.size());
  std::vector<std::string> errors(slots.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  BackendFactory factory;
  auto worker = [&] {
    for (;;) {
      if (stop) return;
      std::size_t i = next++;
      if (i >= slots.size()) return;
      try {
        results[i] = run_one(*slots[i].task, config.controller, slots[i].trial, config.seed, factory);
        if (results[i]->trajectory.outcome() == trajectory::Outcome::failed_turn && !config.keep_going) stop = true;
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (!config.keep_going) stop = true;
      }
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(config.parallel, static_cast<int>(slots.size()));
  for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  RunResult rr;
  rr.dir = config.out;
  Json episodes = Json::array();
  std::vector<metrics::EpisodeRef> refs;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    Json e = Json::object();
    e["task_id"] = slots[i].task->task_id;
    e["trial"] = slots[i].trial;
    e["seed"] = episode_seed(config.seed, slots[i].task->task_id, slots[i].trial);
    if (!errors[i].empty()) {
      ++rr.failed_episodes;
      std::cerr << "nodctl: " << slots[i].task->task_id << " trial " << slots[i].trial << ": " << errors[i] << "\n";
      e["error"] = errors[i];
      episodes.push_back(e);
      continue;
    }
    if (!results[i]) {
      rr.stopped_early = true;
      continue;
    }
    EpisodeResult& r = *results[i];
    r.trajectory.save(config.out / r.file);
    std::string calls;
    for (const auto& c : r.calls) calls += compact_dump(backends::to_json(c)) + "\n";
    write_file(config.out / "calls" / (episode_name(r.task_id, r.trial) + ".jsonl"), calls);
    std::string outcome(trajectory::to_string(*r.trajectory.outcome()));
    if (outcome == "failed_turn") ++rr.failed_episodes;
    e["file"] = r.file;
    e["outcome"] = outcome;
    episodes.push_back(e);
  }
  for (auto& r : results)
    if (r) rr.episodes.push_back(std::move(*r));
  std::map<std::string, const scenarios::TaskSpec*> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = &t;
  for (const auto& e : rr.episodes) refs.push_back({&e.trajectory, by_id.at(e.task_id), e.trial});

  rr.report = metrics::build_report(method_label(config.controller), refs);
  Json manifest = Json::object();
  manifest["method"] = rr.report.method;
  manifest["run_config"] = to_json(config);
  manifest["prompt_catalog_hash"] = prompts::Catalog::builtin().catalog_hash();
  Json ids = Json::array();
  for (const auto& t : tasks) ids.push_back(t.task_id);
  manifest["tasks"] = ids;
  manifest["episodes"] = episodes;
  manifest["failed_episodes"] = rr.failed_episodes;
  manifest["stopped_early"] = rr.stopped_early;
  write_file(config.out / "manifest.json", manifest.dump(2) + "\n");
  write_file(config.out / "report.json", metrics::to_json(rr.report).dump(2) + "\n");
  write_file(config.out / "report.txt", metrics::render_table({rr.report}));
  return rr;
}

std::vector<metrics::EpisodeRef> LoadedRun::refs() const {
  std::map<std::string, const scenarios::TaskSpec*> by_id;
  for (const auto& t : tasks) by_id[t.task_id] = &t;
  std::vector<metrics::EpisodeRef> out;
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    out.push_back({&trajectories[i], by_id.at(trajectories[i].task_id()), trials[i]});
  return out;
}

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.dir = dir;
  run.manifest = read_json_file(dir / "manifest.json");
  const Json& rc = run.manifest.at("run_config");
  auto all = tasks_by_id(rc.at("fixtures").get<std::string>(), rc.at("domain").get<std::string>());
  for (const auto& id : run.manifest.at("tasks")) {
    auto it = all.find(id.get<std::string>());
    if (it == all.end()) throw RunError("run references unknown task " + id.get<std::string>());
    run.tasks.push_back(it->second);
  }
  for (const auto& e : run.manifest.at("episodes")) {
    if (!e.contains("file")) continue;
    run.files.push_back(e["file"].get<std::string>());
    run.trajectories.push_back(trajectory::Trajectory::load(dir / run.files.back()));
    run.trials.push_back(e["trial"].get<int>());
  }
  return run;
}

std::string cmd_report(const std::vector<fs::path>& dirs, const std::optional<fs::path>& baseline, Json* json_out) {
  std::optional<LoadedRun> base;
  std::vector<metrics::EpisodeRef> base_refs;
  if (baseline) {
    base = load_run(*baseline);
    base_refs = base->refs();
  }
  std::vector<metrics::EvalReport> reports;
  std::vector<LoadedRun> runs;
  runs.reserve(dirs.size());
  for (const auto& d : dirs) {
    runs.push_back(load_run(d));
    reports.push_back(metrics::build_report(runs.back().manifest.at("method").get<std::string>(), runs.back().refs(),
                                            base ? &base_refs : nullptr));
  }
  std::string text = metrics::render_table(reports);
  if (json_out) {
    *json_out = Json::array();
    for (const auto& r : reports) json_out->push_back(metrics::to_json(r));
  }
  return text;
}

Json cmd_judge(const fs::path& run_dir, const JudgeOptions& options) {
  LoadedRun run = load_run(run_dir);
  control::ControllerConfig cc = control::config_from_json(run.manifest["run_config"]["controller"]);
  if (options.backend) cc.backends["judge"] = *options.backend;
  BackendFactory factory;
  std::vector<judge::LabeledEpisode> labeled;
  auto refs = run.refs();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (metrics::evaluate_success(*refs[i].trajectory, *refs[i].task)) continue;
    auto reg = factory.for_task(*refs[i].task, cc);
    const std::string& id = cc.backends.at("judge");
    if (!reg.contains(id)) throw backends::BackendUnavailable("judge backend " + id + " is not available");
    judge::LabeledEpisode e;
    e.task_id = refs[i].task->task_id;
    e.trial = refs[i].trial;
    e.trajectory_file = run.files[i];
    e.label = judge::label_failure(*refs[i].trajectory, *refs[i].task, reg.get(id));
    labeled.push_back(std::move(e));
  }
  std::string lines;
  for (const auto& e : labeled) lines += compact_dump(judge::to_json(e)) + "\n";
  write_file(run_dir / "judge.jsonl", lines);
  Json summary = judge::to_json(judge::summarize(static_cast<int>(refs.size()), labeled));
  summary["domain"] = run.manifest["run_config"]["domain"];
  summary["method"] = run.manifest["method"];
  write_file(run_dir / "judge_summary.json", summary.dump(2) + "\n");
  if (options.sample > 0) {
    std::string sample;
    for (const auto& e : judge::sample_for_audit(labeled, options.sample, options.sample_seed))
      sample += compact_dump(judge::to_json(e)) + "\n";
    write_file(run_dir / "judge_sample.jsonl", sample);
  }
  return summary;
}

ReplayReport replay(const trajectory::Trajectory& t, const fs::path& fixtures_root) {
  const auto& h = t.header();
  env::Database db = env::load_database(fixtures_root / h.db_fixture);
  if (env::db_hash(db) != h.initial_db_hash) throw ReplayDivergence(0, "initial database hash differs");
  env::Environment e(std::move(db), h.domain);
  ReplayReport rep;
  for (const auto& ev : t.events()) {
    std::size_t idx = ev["event_index"].get<std::size_t>();
    const std::string type = ev["type"].get<std::string>();
    if (type == "tool_execution") {
      ++rep.tool_events;
      if (e.hash() != ev["db_hash_before"].get<std::string>())
        throw ReplayDivergence(idx, "database before the call differs");
      auto call = from_envelope(ev["call"]);
      if (!call) throw ReplayDivergence(idx, "malformed call");
      std::string text;
      bool error = false, unknown = false;
      try {
        auto r = e.execute(*call);
        text = r.text;
        error = r.error;
      } catch (const env::UnknownTool&) {
        unknown = true;
        error = true;
        text = "Error: unknown tool '" + call->name + "'";
      }
      if (text != ev["result"].get<std::string>()) throw ReplayDivergence(idx, "tool result differs");
      if (error != ev["error"].get<bool>() || unknown != ev.value("unknown_tool", false))
        throw ReplayDivergence(idx, "error flag differs");
      bool critical = !unknown && e.is_critical(call->name);
      if (critical != ev["critical"].get<bool>()) throw ReplayDivergence(idx, "critical flag differs");
      if (e.hash() != ev["db_hash_after"].get<std::string>())
        throw ReplayDivergence(idx, "database after the call differs");
    } else if (type == "episode_end") {
      if (e.hash() != ev["db_final_hash"].get<std::string>()) throw ReplayDivergence(idx, "final database differs");
    }
  }
  if (!t.complete()) throw ReplayDivergence(t.events().size(), "trajectory has no episode_end");
  rep.final_hash = e.hash();
  rep.final_db = e.db();
  return rep;
}

ReplayReport cmd_replay(const fs::path& file, const fs::path& fixtures_root) {
  return replay(trajectory::Trajectory::load(file), fixtures_root);
}

std::vector<std::pair<std::string, std::vector<std::string>>> cmd_validate(const std::vector<fs::path>& files) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  std::set<std::string> seen;
  for (const auto& f : files) {
    std::vector<std::string> problems;
    try {
      auto t = scenarios::load_task(f);
      problems = scenarios::validate_task(t);
      if (!seen.insert(t.task_id).second) problems.push_back("duplicate task_id " + t.task_id);
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
    out.emplace_back(f.string(), std::move(problems));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// CLI11 cannot declare --backend.<role>; those are peeled off first.
std::map<std::string, std::string> take_backend_flags(std::vector<std::string>& args) {
  std::map<std::string, std::string> out;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--backend.", 0) != 0) {
      rest.push_back(a);
      continue;
    }
    std::string body = a.substr(10);
    auto eq = body.find('=');
    if (eq != std::string::npos) {
      out[body.substr(0, eq)] = body.substr(eq + 1);
    } else if (i + 1 < args.size()) {
      out[body] = args[++i];
    } else {
      throw control::ConfigError("flag " + a + " needs a backend id");
    }
  }
  args = std::move(rest);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::map<std::string, std::string> backend_flags;
  try {
    backend_flags = take_backend_flags(args);
  } catch (const std::exception& e) {
    std::cerr << "nodctl: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Navigator-Operator-Director control kernel and evaluation harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run tasks x trials episodes and write a run directory");
  std::string domain, tasks, strategy, policy, gate_ordering, out, config_file, fixtures;
  int revision_budget = 0, trials = 0, parallel = 0, max_turns = 0;
  std::uint64_t seed = 0;
  bool keep_going = false, weak = false;
  run->add_option("--domain", domain, "Task domain");
  run->add_option("--tasks", tasks, "Task file glob (stem)");
  run->add_option("--strategy", strategy, "Controller strategy");
  run->add_option("--policy", policy, "Director policy: conservative, balanced, strict");
  run->add_option("--gate-ordering", gate_ordering, "review_then_gate or gate_revised_only");
  run->add_option("--revision-budget", revision_budget, "REVISE cycles per critical proposal");
  run->add_option("--max-turns", max_turns, "Agent turn budget");
  run->add_option("--trials", trials, "Trials per task");
  run->add_option("--seed", seed, "Run seed");
  run->add_option("--parallel", parallel, "Concurrent episodes");
  run->add_option("--out", out, "Output run directory");
  run->add_option("--config", config_file, "JSON run config; flags override it");
  run->add_option("--fixtures", fixtures, "Fixtures root");
  run->add_flag("--keep-going", keep_going, "Exit 0 even when episodes fail");
  run->add_flag("--weak-director", weak, "Allow the Director to share the local backend");

  auto* report = app.add_subcommand("report", "Method x metric table over run directories");
  std::vector<std::string> report_dirs;
  std::string report_baseline, report_json;
  report->add_option("runs", report_dirs, "Run directories")->required();
  report->add_option("--baseline", report_baseline, "Baseline run for diagnostics and turn buckets");
  report->add_option("--json", report_json, "Also write the reports as JSON here");

  auto* judge_cmd = app.add_subcommand("judge", "Label failed episodes of a run");
  std::string judge_dir, judge_backend;
  std::size_t judge_sample = 0;
  std::uint64_t judge_seed = 0;
  judge_cmd->add_option("run", judge_dir, "Run directory")->required();
  judge_cmd->add_option("--backend", judge_backend, "Judge backend id");
  judge_cmd->add_option("--sample", judge_sample, "Export this many labeled episodes for manual audit");
  judge_cmd->add_option("--sample-seed", judge_seed, "Seed of the audit sample");

  auto* replay_cmd = app.add_subcommand("replay", "Re-execute a trajectory's tool calls and check them");
  std::vector<std::string> replay_files;
  std::string replay_fixtures = NOD_DEFAULT_FIXTURE_DIR;
  replay_cmd->add_option("trajectories", replay_files, "Trajectory JSONL files")->required();
  replay_cmd->add_option("--fixtures", replay_fixtures, "Fixtures root");

  auto* validate_cmd = app.add_subcommand("validate", "Check task files");
  std::vector<std::string> validate_files;
  validate_cmd->add_option("tasks", validate_files, "Task JSON files")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      RunConfig rc;
      if (!config_file.empty()) rc = run_config_from_json(read_json_file(config_file), rc);
      if (run->count("--domain")) rc.domain = domain;
      if (run->count("--tasks")) rc.tasks = tasks;
      if (run->count("--strategy")) rc.controller.strategy = control::strategy_from_string(strategy);
      if (run->count("--policy")) rc.controller.director_policy = roles::policy_from_string(policy);
      if (run->count("--gate-ordering")) rc.controller.gate_ordering = control::gate_ordering_from_string(gate_ordering);
      if (run->count("--revision-budget")) rc.controller.revision_budget = revision_budget;
      if (run->count("--max-turns")) rc.controller.max_turns = max_turns;
      if (run->count("--trials")) rc.trials = trials;
      if (run->count("--seed")) rc.seed = seed;
      if (run->count("--parallel")) rc.parallel = parallel;
      if (run->count("--out")) rc.out = out;
      if (run->count("--fixtures")) rc.fixtures = fixtures;
      if (keep_going) rc.keep_going = true;
      if (weak) rc.controller.weak_director = true;
      for (const auto& [role, id] : backend_flags) rc.controller.backends[role] = id;
      RunResult rr = cmd_run(rc);
      std::cout << metrics::render_table({rr.report});
      std::cout << rr.episodes.size() << " episodes written to " << rr.dir.string() << "\n";
      if ((rr.failed_episodes > 0 || rr.stopped_early) && !rc.keep_going) {
        std::cerr << "nodctl: " << rr.failed_episodes << " episode(s) failed\n";
        return 1;
      }
      return 0;
    }
    if (*report) {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      std::optional<fs::path> base;
      if (!report_baseline.empty()) base = report_baseline;
      Json j;
      std::cout << cmd_report(dirs, base, &j);
      if (!report_json.empty()) write_file(report_json, j.dump(2) + "\n");
      return 0;
    }
    if (*judge_cmd) {
      JudgeOptions o;
      if (!judge_backend.empty()) o.backend = judge_backend;
      o.sample = judge_sample;
      o.sample_seed = judge_seed;
      std::cout << cmd_judge(judge_dir, o).dump(2) << "\n";
      return 0;
    }
    if (*replay_cmd) {
      int bad = 0;
      for (const auto& f : replay_files) {
        try {
          auto rep = cmd_replay(f, replay_fixtures);
          std::cout << f << ": match (" << rep.tool_events << " tool events, final " << rep.final_hash << ")\n";
        } catch (const ReplayDivergence& e) {
          std::cout << f << ": " << e.what() << "\n";
          ++bad;
        }
      }
      return bad ? 1 : 0;
    }
    if (*validate_cmd) {
      std::vector<fs::path> files(validate_files.begin(), validate_files.end());
      int bad = 0;
      for (const auto& [file, problems] : cmd_validate(files)) {
        if (problems.empty()) {
          std::cout << file << ": ok\n";
          continue;
        }
        ++bad;
        for (const auto& p : problems) std::cout << file << ": " << p << "\n";
      }
      return bad ? 1 : 0;
    }
  } catch (const control::ConfigError& e) {
    std::cerr << "nodctl: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "nodctl: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "nodctl: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace nod::cli
