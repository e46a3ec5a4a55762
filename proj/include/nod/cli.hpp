#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nod/backends.hpp"
#include "nod/control.hpp"
#include "nod/metrics.hpp"
#include "nod/scenarios.hpp"
#include "nod/trajectory.hpp"

namespace nod::cli {

struct RunConfig {
  std::string domain = "retail";
  std::string tasks = "*";
  control::ControllerConfig controller;
  int trials = 3;
  std::uint64_t seed = 0;
  int parallel = 1;
  std::filesystem::path out;
  bool keep_going = false;
  std::filesystem::path fixtures = NOD_DEFAULT_FIXTURE_DIR;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j, RunConfig base = {});

// Seed of one episode, a pure function of the run seed, task and trial.
std::uint64_t episode_seed(std::uint64_t run_seed, const std::string& task_id, int trial);

// Per-episode backends: scripted ids ("scripted:<name>") are built fresh from
// the task's script library; http ids ("http:<name>") come from `shared`,
// which is filled on first use.
class BackendFactory {
 public:
  backends::BackendRegistry for_task(const scenarios::TaskSpec& task, const control::ControllerConfig& config);

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<backends::ModelBackend>> shared_;
};

struct EpisodeResult {
  std::string task_id;
  int trial = 0;
  std::string file;  // relative to the run directory
  trajectory::Trajectory trajectory;
  std::vector<backends::CallRecord> calls;
};

// One episode, start to finish, against a fresh environment.
EpisodeResult run_one(const scenarios::TaskSpec& task, const control::ControllerConfig& config, int trial,
                      std::uint64_t run_seed, BackendFactory& factory);

struct RunResult {
  std::filesystem::path dir;
  std::vector<EpisodeResult> episodes;
  metrics::EvalReport report;
  int failed_episodes = 0;
  bool stopped_early = false;
};

class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string method_label(const control::ControllerConfig& c);

// Writes manifest.json, trajectories/, calls/, report.json and report.txt
// under config.out, which must not already hold a run.
RunResult cmd_run(const RunConfig& config);

// A finished run read back from disk.
struct LoadedRun {
  std::filesystem::path dir;
  Json manifest;
  std::vector<scenarios::TaskSpec> tasks;
  std::vector<std::string> files;
  std::vector<trajectory::Trajectory> trajectories;
  std::vector<int> trials;
  std::vector<metrics::EpisodeRef> refs() const;
};

LoadedRun load_run(const std::filesystem::path& dir);

// Method x metric table over runs; with `baseline`, abort diagnostics and
// turn buckets for each run against it.
std::string cmd_report(const std::vector<std::filesystem::path>& dirs, const std::optional<std::filesystem::path>& baseline,
                       Json* json_out = nullptr);

struct JudgeOptions {
  std::optional<std::string> backend;  // overrides the run's judge binding
  std::size_t sample = 0;
  std::uint64_t sample_seed = 0;
};

// Labels failed episodes; writes judge.jsonl and judge_summary.json.
Json cmd_judge(const std::filesystem::path& run_dir, const JudgeOptions& options);

class ReplayDivergence : public std::runtime_error {
 public:
  ReplayDivergence(std::size_t event_index, const std::string& what)
      : std::runtime_error("replay diverges at event " + std::to_string(event_index) + ": " + what),
        event_index(event_index) {}
  std::size_t event_index;
};

struct ReplayReport {
  std::size_t tool_events = 0;
  std::string final_hash;
  env::Database final_db;
};

// Re-applies every executed call to the task's initial database and checks
// results and hashes bit-exactly.
ReplayReport replay(const trajectory::Trajectory& t, const std::filesystem::path& fixtures_root);
ReplayReport cmd_replay(const std::filesystem::path& trajectory_file, const std::filesystem::path& fixtures_root);

// Problems per task file; empty lists for sound tasks.
std::vector<std::pair<std::string, std::vector<std::string>>> cmd_validate(
    const std::vector<std::filesystem::path>& task_files);

// nodctl entry point; returns the process exit code.
int main(int argc, char** argv);

}  // namespace nod::cli
