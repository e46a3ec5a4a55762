#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nod/json_util.hpp"
#include "nod/message.hpp"
#include "nod/roles.hpp"
#include "nod/state.hpp"

namespace nod::trajectory {

enum class Outcome { stopped, transferred, aborted, max_turns, abstained, failed_turn };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct ProposalEvent {
  std::size_t event_index = 0;
  int turn_index = 0;
  int revision = 0;  // 0 for the first proposal of a turn
  roles::OperatorProposal proposal;
  bool fixed = false;  // the opening greeting
};

struct NavigatorStateEvent {
  std::size_t event_index = 0;
  int turn_index = 0;
  std::string backend;
  std::string purpose;  // update, revise, rebuild
  std::string raw;
  state::GlobalState state;
  int attempts = 1;
};

struct DirectorEvent {
  std::size_t event_index = 0;
  int turn_index = 0;
  int consultation = 0;  // 1-based within the episode; 0 for escalations
  roles::Stage stage = roles::Stage::state_review;
  roles::Verdict verdict = roles::Verdict::PASS;
  std::string feedback;
  ToolCall proposal;
  bool escalation = false;  // synthetic ABORT after the revision budget
  bool parse_failure = false;
};

struct ExecutedAction {
  std::size_t event_index = 0;
  int turn_index = 0;
  ToolCall call;
  std::string result_text;
  bool was_critical = false;
  bool error = false;
  bool unknown_tool = false;
  std::string db_hash_before;
  std::string db_hash_after;
};

struct EpisodeHeader {
  std::string task_id;
  std::string domain;
  std::string strategy;
  std::string policy;
  std::string gate_ordering;
  int revision_budget = 3;
  int max_turns = 40;
  std::uint64_t seed = 0;
  std::string db_fixture;
  std::string initial_db_hash;
  std::string prompt_catalog_hash;
  Json backends = Json::object();
};

// Append-only event log of one episode. Every event is a JSON object whose
// first two keys are event_index and type.
class Trajectory {
 public:
  void begin(const EpisodeHeader& header);
  void add_message(const Message& m);
  void add_proposal(int turn_index, int revision, const roles::OperatorProposal& p, bool fixed = false);
  void add_navigator_state(int turn_index, const std::string& backend, const std::string& purpose,
                           const state::NavigationResult& result);
  void add_director(int turn_index, int consultation, const roles::DirectorDecision& d, const ToolCall& proposal,
                    bool escalation = false);
  void add_tool_execution(int turn_index, const ToolCall& call, const std::string& result, bool critical, bool error,
                          bool unknown_tool, const std::string& hash_before, const std::string& hash_after);
  void add_baseline_step(int turn_index, const std::string& strategy, const std::string& step, Json data);
  void add_turn_failure(int turn_index, const std::string& reason, Json detail = Json::object());
  // agent_turns is the number of proposal events, greeting included.
  void end(Outcome outcome, const std::string& db_final_hash);

  const std::vector<Json>& events() const { return events_; }
  bool complete() const { return outcome_.has_value(); }

  const EpisodeHeader& header() const { return header_; }
  const std::string& task_id() const { return header_.task_id; }
  std::optional<Outcome> outcome() const { return outcome_; }
  const std::string& db_final_hash() const { return db_final_hash_; }
  int agent_turns() const { return agent_turns_; }

  History messages() const;
  std::vector<ProposalEvent> proposals() const;
  std::vector<NavigatorStateEvent> navigator_states() const;
  std::vector<DirectorEvent> director_events() const;
  std::vector<ExecutedAction> executed_actions() const;

  // One event per line, trailing newline.
  std::string to_jsonl() const;
  static Trajectory from_jsonl(std::string_view text);
  static Trajectory load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  Json& push(std::string_view type);

  EpisodeHeader header_;
  std::vector<Json> events_;
  std::optional<Outcome> outcome_;
  std::string db_final_hash_;
  int agent_turns_ = 0;
};

Json to_json(const EpisodeHeader& h);
EpisodeHeader header_from_json(const Json& j);

// Assistant and user messages, tool traffic excluded.
int dialogue_length(const Trajectory& t);

}  // namespace nod::trajectory
