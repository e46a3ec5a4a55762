#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nod/backends.hpp"
#include "nod/scenarios.hpp"
#include "nod/trajectory.hpp"

namespace nod::judge {

enum class Label { policy_violation, tool_hallucination, unfulfilled_valid_intent, safe_termination, other };

std::string_view to_string(Label l);
// nullopt for anything outside the five labels.
std::optional<Label> label_from_string(std::string_view s);
const std::vector<Label>& all_labels();

// The three modes reported as failure causes; the other two are kept raw.
bool is_rollup_mode(Label l);

constexpr std::string_view kUnparseableJudge = "unparseable judge output";

struct FailureLabel {
  Label label = Label::other;
  std::string reason;
  std::string evidence;
  bool flagged = false;  // fail-safe label after two unusable replies
};

class JudgeParseFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JudgePrecondition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Strict {"label", "reason", "evidence"} object.
FailureLabel parse_judge_reply(std::string_view text);

backends::ChatRequest judge_request(const trajectory::Trajectory& t, const std::string& domain,
                                    const std::string& policy_text, const std::string& goal_text,
                                    backends::Sampling sampling = {});

// Throws JudgePrecondition when the trajectory met the task's success predicate.
FailureLabel label_failure(const trajectory::Trajectory& t, const scenarios::TaskSpec& task,
                           backends::ModelBackend& backend, backends::Sampling sampling = {});

struct LabeledEpisode {
  std::string task_id;
  int trial = 0;
  std::string trajectory_file;
  FailureLabel label;
};

Json to_json(const LabeledEpisode& e);

struct JudgeSummary {
  int episodes = 0;
  int failed = 0;
  std::map<Label, int> counts;
};

JudgeSummary summarize(int episodes, const std::vector<LabeledEpisode>& labeled);
// Raw five-label rates over all episodes plus the three-mode roll-up.
Json to_json(const JudgeSummary& s);

// n labeled episodes drawn without replacement, deterministic in the seed.
std::vector<LabeledEpisode> sample_for_audit(const std::vector<LabeledEpisode>& labeled, std::size_t n,
                                             std::uint64_t seed);

}  // namespace nod::judge
