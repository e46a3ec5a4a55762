#include "nod/trajectory.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nod::trajectory {

namespace {

constexpr std::string_view kOutcomes[] = {"stopped", "transferred", "aborted", "max_turns", "abstained", "failed_turn"};

Json call_json(const ToolCall& c) { return to_envelope(c); }

ToolCall call_from(const Json& j) {
  auto c = from_envelope(j);
  if (!c) throw std::invalid_argument("malformed tool call in trajectory");
  return *c;
}

Json proposal_json(const roles::OperatorProposal& p) {
  Json j = Json::object();
  j["kind"] = p.is_call() ? "tool_call" : "user_message";
  if (p.is_call()) j["call"] = call_json(*p.call);
  else j["message"] = p.message.value_or("");
  j["raw"] = p.raw;
  return j;
}

roles::OperatorProposal proposal_from(const Json& j) {
  if (j.at("kind").get<std::string>() == "tool_call")
    return roles::OperatorProposal::invoke(call_from(j.at("call")), j.value("raw", std::string()));
  return roles::OperatorProposal::say(j.at("message").get<std::string>(), j.value("raw", std::string()));
}

}  // namespace

std::string_view to_string(Outcome o) { return kOutcomes[static_cast<int>(o)]; }

Outcome outcome_from_string(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (kOutcomes[i] == s) return static_cast<Outcome>(i);
  throw std::invalid_argument("unknown outcome '" + std::string(s) + "'");
}

Json to_json(const EpisodeHeader& h) {
  Json j = Json::object();
  j["task_id"] = h.task_id;
  j["domain"] = h.domain;
  j["strategy"] = h.strategy;
  j["policy"] = h.policy;
  j["gate_ordering"] = h.gate_ordering;
  j["revision_budget"] = h.revision_budget;
  j["max_turns"] = h.max_turns;
  j["seed"] = h.seed;
  j["db_fixture"] = h.db_fixture;
  j["initial_db_hash"] = h.initial_db_hash;
  j["prompt_catalog_hash"] = h.prompt_catalog_hash;
  j["backends"] = h.backends;
  return j;
}

EpisodeHeader header_from_json(const Json& j) {
  EpisodeHeader h;
  h.task_id = j.at("task_id").get<std::string>();
  h.domain = j.value("domain", std::string());
  h.strategy = j.value("strategy", std::string());
  h.policy = j.value("policy", std::string());
  h.gate_ordering = j.value("gate_ordering", std::string());
  h.revision_budget = j.value("revision_budget", 3);
  h.max_turns = j.value("max_turns", 40);
  h.seed = j.value("seed", std::uint64_t{0});
  h.db_fixture = j.value("db_fixture", std::string());
  h.initial_db_hash = j.value("initial_db_hash", std::string());
  h.prompt_catalog_hash = j.value("prompt_catalog_hash", std::string());
  h.backends = j.value("backends", Json::object());
  return h;
}

Json& Trajectory::push(std::string_view type) {
  if (outcome_) throw std::logic_error("trajectory already ended");
  Json e = Json::object();
  e["event_index"] = events_.size();
  e["type"] = type;
  events_.push_back(std::move(e));
  return events_.back();
}

void Trajectory::begin(const EpisodeHeader& header) {
  if (!events_.empty()) throw std::logic_error("trajectory already started");
  header_ = header;
  Json fields = to_json(header);
  Json& e = push("episode_start");
  for (auto& [k, v] : fields.items()) e[k] = v;
}

void Trajectory::add_message(const Message& m) {
  Json& e = push("message");
  e["message"] = to_json(m);
}

void Trajectory::add_proposal(int turn_index, int revision, const roles::OperatorProposal& p, bool fixed) {
  Json& e = push("proposal");
  e["turn_index"] = turn_index;
  e["revision"] = revision;
  Json fields = proposal_json(p);
  for (auto& [k, v] : fields.items()) e[k] = v;
  e["fixed"] = fixed;
}

void Trajectory::add_navigator_state(int turn_index, const std::string& backend, const std::string& purpose,
                                     const state::NavigationResult& r) {
  Json& e = push("navigator_state");
  e["turn_index"] = turn_index;
  e["backend"] = backend;
  e["purpose"] = purpose;
  e["raw"] = r.raw;
  e["state"] = state::to_json(r.state);
  e["attempts"] = r.attempts;
}

void Trajectory::add_director(int turn_index, int consultation, const roles::DirectorDecision& d,
                              const ToolCall& proposal, bool escalation) {
  Json& e = push("director");
  e["turn_index"] = turn_index;
  e["consultation"] = consultation;
  e["stage"] = roles::to_string(d.stage());
  e["verdict"] = roles::to_string(d.verdict());
  e["feedback"] = d.feedback();
  e["proposal"] = call_json(proposal);
  e["escalation"] = escalation;
  e["parse_failure"] = d.parse_failure();
}

void Trajectory::add_tool_execution(int turn_index, const ToolCall& call, const std::string& result, bool critical,
                                    bool error, bool unknown_tool, const std::string& hash_before,
                                    const std::string& hash_after) {
  Json& e = push("tool_execution");
  e["turn_index"] = turn_index;
  e["call"] = call_json(call);
  e["result"] = result;
  e["critical"] = critical;
  e["error"] = error;
  e["unknown_tool"] = unknown_tool;
  e["db_hash_before"] = hash_before;
  e["db_hash_after"] = hash_after;
}

void Trajectory::add_baseline_step(int turn_index, const std::string& strategy, const std::string& step, Json data) {
  Json& e = push("baseline_step");
  e["turn_index"] = turn_index;
  e["strategy"] = strategy;
  e["step"] = step;
  e["data"] = std::move(data);
}

void Trajectory::add_turn_failure(int turn_index, const std::string& reason, Json detail) {
  Json& e = push("turn_failure");
  e["turn_index"] = turn_index;
  e["reason"] = reason;
  e["detail"] = std::move(detail);
}

void Trajectory::end(Outcome outcome, const std::string& db_final_hash) {
  int agent_turns = 0;
  for (const auto& e : events_)
    if (e["type"] == "proposal") ++agent_turns;
  Json& e = push("episode_end");
  e["outcome"] = to_string(outcome);
  e["db_final_hash"] = db_final_hash;
  e["agent_turns"] = agent_turns;
  outcome_ = outcome;
  db_final_hash_ = db_final_hash;
  agent_turns_ = agent_turns;
}

History Trajectory::messages() const {
  History h;
  for (const auto& e : events_)
    if (e["type"] == "message") h.push_back(message_from_json(e["message"]));
  return h;
}

std::vector<ProposalEvent> Trajectory::proposals() const {
  std::vector<ProposalEvent> out;
  for (const auto& e : events_) {
    if (e["type"] != "proposal") continue;
    ProposalEvent p;
    p.event_index = e["event_index"].get<std::size_t>();
    p.turn_index = e["turn_index"].get<int>();
    p.revision = e.value("revision", 0);
    p.proposal = proposal_from(e);
    p.fixed = e.value("fixed", false);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<NavigatorStateEvent> Trajectory::navigator_states() const {
  std::vector<NavigatorStateEvent> out;
  for (const auto& e : events_) {
    if (e["type"] != "navigator_state") continue;
    NavigatorStateEvent n;
    n.event_index = e["event_index"].get<std::size_t>();
    n.turn_index = e["turn_index"].get<int>();
    n.backend = e["backend"].get<std::string>();
    n.purpose = e["purpose"].get<std::string>();
    n.raw = e["raw"].get<std::string>();
    n.state = state::from_json(e["state"]);
    n.attempts = e["attempts"].get<int>();
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<DirectorEvent> Trajectory::director_events() const {
  std::vector<DirectorEvent> out;
  for (const auto& e : events_) {
    if (e["type"] != "director") continue;
    DirectorEvent d;
    d.event_index = e["event_index"].get<std::size_t>();
    d.turn_index = e["turn_index"].get<int>();
    d.consultation = e["consultation"].get<int>();
    d.stage = roles::stage_from_string(e["stage"].get<std::string>());
    d.verdict = roles::verdict_from_string(e["verdict"].get<std::string>());
    d.feedback = e["feedback"].get<std::string>();
    d.proposal = call_from(e["proposal"]);
    d.escalation = e.value("escalation", false);
    d.parse_failure = e.value("parse_failure", false);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ExecutedAction> Trajectory::executed_actions() const {
  std::vector<ExecutedAction> out;
  for (const auto& e : events_) {
    if (e["type"] != "tool_execution") continue;
    ExecutedAction a;
    a.event_index = e["event_index"].get<std::size_t>();
    a.turn_index = e["turn_index"].get<int>();
    a.call = call_from(e["call"]);
    a.result_text = e["result"].get<std::string>();
    a.was_critical = e["critical"].get<bool>();
    a.error = e["error"].get<bool>();
    a.unknown_tool = e.value("unknown_tool", false);
    a.db_hash_before = e["db_hash_before"].get<std::string>();
    a.db_hash_after = e["db_hash_after"].get<std::string>();
    out.push_back(std::move(a));
  }
  return out;
}

std::string Trajectory::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    out += compact_dump(e);
    out += '\n';
  }
  return out;
}

Trajectory Trajectory::from_jsonl(std::string_view text) {
  Trajectory t;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json e = Json::parse(line);
    if (!e.is_object() || !e.contains("type") || !e.contains("event_index"))
      throw std::invalid_argument("trajectory line without type/event_index");
    if (e["event_index"].get<std::size_t>() != t.events_.size())
      throw std::invalid_argument("trajectory event_index out of sequence at " + std::to_string(t.events_.size()));
    if (t.outcome_) throw std::invalid_argument("trajectory has events after episode_end");
    const std::string type = e["type"].get<std::string>();
    if (type == "episode_start") {
      t.header_ = header_from_json(e);
    } else if (type == "episode_end") {
      t.outcome_ = outcome_from_string(e["outcome"].get<std::string>());
      t.db_final_hash_ = e["db_final_hash"].get<std::string>();
      t.agent_turns_ = e["agent_turns"].get<int>();
    }
    t.events_.push_back(std::move(e));
  }
  if (t.events_.empty() || t.events_.front()["type"] != "episode_start")
    throw std::invalid_argument("trajectory does not begin with episode_start");
  return t;
}

Trajectory Trajectory::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

void Trajectory::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_jsonl();
}

int dialogue_length(const Trajectory& t) {
  int n = 0;
  for (const auto& m : t.messages())
    if (m.role == Role::user || (m.role == Role::assistant && !m.tool_call)) ++n;
  return n;
}

}  // namespace nod::trajectory
