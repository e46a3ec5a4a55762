#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nod/json_util.hpp"
#include "nod/scenarios.hpp"
#include "nod/trajectory.hpp"

namespace nod::metrics {

struct EpisodeRef {
  const trajectory::Trajectory* trajectory = nullptr;
  const scenarios::TaskSpec* task = nullptr;
  int trial = 0;
};

// One executed critical action with its gold-matching verdict.
struct CriticalLabel {
  std::size_t event_index = 0;
  ToolCall call;
  bool correct = false;
  int gold_index = -1;  // consumed gold action, -1 if none
};

// Greedy in execution order: an action is correct when it matches a gold
// action not consumed earlier. Errored executions are never correct.
std::vector<CriticalLabel> label_critical(const trajectory::Trajectory& t, const scenarios::TaskSpec& task);

bool evaluate_success(const trajectory::Trajectory& t, const scenarios::TaskSpec& task);

// num / den, null on an empty denominator.
struct Ratio {
  long long num = 0;
  long long den = 0;
  std::optional<double> value() const {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }
};

std::optional<double> compute_cap(const std::vector<EpisodeRef>& runs);
std::optional<double> compute_car(const std::vector<EpisodeRef>& runs);

struct DecisionCounts {
  int pass = 0;
  int revise = 0;
  int abort = 0;
  int consultations = 0;  // every Director call group for one proposal
  int escalations = 0;    // synthetic ABORTs, not consultations
};

// Groups a trajectory's director events by consultation; each group counts
// once under its final verdict.
DecisionCounts decision_counts(const trajectory::Trajectory& t);

struct DecisionStats {
  long long agent_turns = 0;
  long long trigger_count = 0;
  long long revise_count = 0;
  std::optional<double> trigger_share;
  std::optional<double> pass_pct;
  std::optional<double> revise_pct;
  std::optional<double> abort_pct;
};

DecisionStats decision_stats(const std::vector<const trajectory::Trajectory*>& runs);

struct AbortDiagnostics {
  long long abort_decisions = 0;
  long long hard_aborts = 0;
  long long abort_trajectories = 0;
  long long error_bearing = 0;
  std::optional<double> hard_rate;
  std::optional<double> error_bearing_rate;
};

// Tasks below this baseline SR are hard.
constexpr double kHardThreshold = 0.5;

// ABORT decisions include escalation ABORTs. Throws std::invalid_argument
// when a task with an ABORT has no baseline SR.
AbortDiagnostics abort_diagnostics(const std::vector<EpisodeRef>& runs,
                                   const std::map<std::string, double>& baseline_sr_by_task);

class InsufficientTasks : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BucketAssignment {
  std::vector<int> bucket;  // 0 short, 1 medium, 2 long, per input position
  int short_max = 0;        // inclusive upper bounds
  int medium_max = 0;
  bool degenerate = false;  // some bucket is empty
};

// Tertile boundaries from the sorted lengths; ties go to the lower bucket.
BucketAssignment assign_buckets(const std::vector<int>& lengths);

struct BucketRow {
  std::string name;
  int min_length = 0;
  int max_length = 0;
  std::vector<std::string> tasks;
  std::optional<double> baseline_sr;
  std::optional<double> treatment_sr;
};

struct BucketTable {
  std::vector<BucketRow> rows;
  bool degenerate = false;
};

// Baseline dialogue length per task comes from the task's annotation when
// present, otherwise from the baseline run with the lowest trial number.
BucketTable turn_buckets(const std::vector<EpisodeRef>& baseline, const std::vector<EpisodeRef>& treatment);

std::map<std::string, double> sr_by_task(const std::vector<EpisodeRef>& runs);

// ---------------------------------------------------------------------------

struct TaskRecord {
  std::string task_id;
  int trial = 0;
  std::string outcome;
  bool success = false;
  int executed_critical = 0;
  int correct_critical = 0;
  int gold_required = 0;
  DecisionCounts decisions;
  int agent_turns = 0;
  int dialogue_length = 0;
};

TaskRecord task_record(const EpisodeRef& ref);

// Folds episodes one at a time; result() matches a batch recount.
class Accumulator {
 public:
  void add(const EpisodeRef& ref);
  const std::vector<TaskRecord>& records() const { return records_; }

  Ratio sr() const { return {successes_, episodes_}; }
  Ratio cap() const { return {correct_, executed_}; }
  Ratio car() const { return {correct_, required_}; }
  DecisionStats decisions() const;

 private:
  std::vector<TaskRecord> records_;
  long long episodes_ = 0, successes_ = 0, executed_ = 0, correct_ = 0, required_ = 0;
  long long turns_ = 0, pass_ = 0, revise_ = 0, abort_ = 0, consultations_ = 0;
};

struct EvalReport {
  std::string method;
  std::vector<TaskRecord> per_task;
  Ratio sr, cap, car;
  DecisionStats decisions;
  std::optional<AbortDiagnostics> aborts;  // needs a baseline
  std::optional<BucketTable> buckets;      // needs a baseline
};

EvalReport build_report(const std::string& method, const std::vector<EpisodeRef>& runs,
                        const std::vector<EpisodeRef>* baseline = nullptr);

Json to_json(const EvalReport& r);
Json to_json(const TaskRecord& r);
Json to_json(const BucketTable& t);

// Aligned Method x {CAP, CAR, SR} table, percentages with two decimals.
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace nod::metrics
