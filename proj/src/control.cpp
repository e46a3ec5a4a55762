#include "nod/control.hpp"

#include <algorithm>
#include <array>
#include <variant>

#include "nod/prompts.hpp"

namespace nod::control {

namespace {

constexpr std::array<std::string_view, 9> kStrategyNames = {
    "vanilla",         "nod",         "nod_revise_only", "nod_without_director", "nod_frontier_renav",
    "self_reflection", "abstention",  "debate",          "solver_critic",
};

constexpr std::string_view kRoles[] = {"navigator", "operator", "director", "judge", "user", "frontier"};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

bool contains_sentinel(const std::string& text, std::string_view s) { return text.find(s) != std::string::npos; }

}  // namespace

std::string_view to_string(Strategy s) { return kStrategyNames[static_cast<std::size_t>(s)]; }

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all = [] {
    std::vector<Strategy> v;
    for (std::size_t i = 0; i < kStrategyNames.size(); ++i) v.push_back(static_cast<Strategy>(i));
    return v;
  }();
  return all;
}

std::string strategy_list() {
  std::string out;
  for (auto n : kStrategyNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

Strategy strategy_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i)
    if (kStrategyNames[i] == s) return static_cast<Strategy>(i);
  throw ConfigError("unknown strategy '" + std::string(s) + "'; valid strategies: " + strategy_list());
}

bool is_stateful(Strategy s) {
  return s == Strategy::nod || s == Strategy::nod_revise_only || s == Strategy::nod_without_director ||
         s == Strategy::nod_frontier_renav;
}

bool is_baseline(Strategy s) { return !is_stateful(s); }

std::string_view to_string(GateOrdering g) {
  return g == GateOrdering::review_then_gate ? "review_then_gate" : "gate_revised_only";
}

GateOrdering gate_ordering_from_string(std::string_view s) {
  if (s == "review_then_gate") return GateOrdering::review_then_gate;
  if (s == "gate_revised_only") return GateOrdering::gate_revised_only;
  throw ConfigError("unknown gate ordering '" + std::string(s) + "'; valid: review_then_gate, gate_revised_only");
}

std::vector<std::string> config_problems(const ControllerConfig& c) {
  std::vector<std::string> out;
  if (c.revision_budget < 1) out.push_back("revision_budget must be at least 1");
  if (c.max_turns < 1) out.push_back("max_turns must be at least 1");
  for (auto r : kRoles) {
    auto it = c.backends.find(std::string(r));
    if (it == c.backends.end() || it->second.empty()) out.push_back("no backend bound to role " + std::string(r));
  }
  for (const auto& [role, id] : c.backends)
    if (std::find(std::begin(kRoles), std::end(kRoles), role) == std::end(kRoles))
      out.push_back("unknown backend role '" + role + "'");
  if (!out.empty()) return out;
  if (c.weak_director) return out;
  if (c.strategy == Strategy::nod && c.backends.at("director") == c.backends.at("operator"))
    out.push_back("director and operator share backend " + c.backends.at("director") +
                  "; set weak_director to run the weak-director ablation");
  if (c.strategy == Strategy::nod_frontier_renav && c.backends.at("frontier") == c.backends.at("navigator"))
    out.push_back("frontier and navigator share backend " + c.backends.at("frontier") +
                  "; set weak_director to allow it");
  return out;
}

void validate(const ControllerConfig& c) {
  auto problems = config_problems(c);
  if (problems.empty()) return;
  std::string msg = "invalid controller config:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

Json to_json(const ControllerConfig& c) {
  Json j = Json::object();
  j["strategy"] = to_string(c.strategy);
  j["director_policy"] = roles::to_string(c.director_policy);
  j["revision_budget"] = c.revision_budget;
  j["max_turns"] = c.max_turns;
  j["gate_ordering"] = to_string(c.gate_ordering);
  Json b = Json::object();
  for (const auto& [k, v] : c.backends) b[k] = v;
  j["backends"] = b;
  j["weak_director"] = c.weak_director;
  return j;
}

ControllerConfig config_from_json(const Json& j, ControllerConfig c) {
  try {
    if (j.contains("strategy")) c.strategy = strategy_from_string(j["strategy"].get<std::string>());
    if (j.contains("director_policy")) c.director_policy = roles::policy_from_string(j["director_policy"].get<std::string>());
    if (j.contains("revision_budget")) c.revision_budget = j["revision_budget"].get<int>();
    if (j.contains("max_turns")) c.max_turns = j["max_turns"].get<int>();
    if (j.contains("gate_ordering")) c.gate_ordering = gate_ordering_from_string(j["gate_ordering"].get<std::string>());
    if (j.contains("backends"))
      for (const auto& [k, v] : j["backends"].items()) c.backends[k] = v.get<std::string>();
    if (j.contains("weak_director")) c.weak_director = j["weak_director"].get<bool>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("controller config: ") + e.what());
  }
  return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t n) { return splitmix(splitmix(seed) ^ (n + 1)); }

// ---------------------------------------------------------------------------

namespace {

using roles::OperatorProposal;
using trajectory::Outcome;

// Ends the episode early; the reason lands in a turn_failure event.
struct TurnFailed {
  std::string reason;
  Json detail;
};

class Episode {
 public:
  Episode(const scenarios::TaskSpec& task, const ControllerConfig& config, env::Environment& env,
          scenarios::UserSimulator& user, const backends::BackendRegistry& registry, std::uint64_t seed)
      : task_(task), config_(config), env_(env), user_(user), registry_(registry), seed_(seed) {
    ctx_.tools = env.tool_schemas();
    ctx_.domain_policy = prompts::domain_policy(task.domain);
    policy_ = roles::director_policy(config.director_policy);
  }

  trajectory::Trajectory run();

 private:
  struct Gating {
    enum Kind { execute, abort, degraded } kind;
    OperatorProposal proposal;
    std::string feedback;
  };

  backends::ModelBackend& backend(const std::string& role) { return registry_.get(config_.backends.at(role)); }
  backends::Sampling sampling() { return {derive_seed(seed_, calls_++), 0.0}; }

  void say(const std::string& text) {
    history_.push_back(Message::assistant(text));
    traj_.add_message(history_.back());
  }

  void navigate(const std::string& role, const std::string& purpose, std::optional<std::string> feedback);
  OperatorProposal operate(int revision);
  // Returns the outcome when the call ends the episode.
  std::optional<Outcome> execute(const ToolCall& call);
  Gating gate(OperatorProposal p);
  // Handles one operator proposal through to delivery, execution or abort.
  enum class Next { user_turn, agent_turn };
  std::variant<Next, Outcome> handle(OperatorProposal p);

  const scenarios::TaskSpec& task_;
  const ControllerConfig& config_;
  env::Environment& env_;
  scenarios::UserSimulator& user_;
  const backends::BackendRegistry& registry_;
  std::uint64_t seed_;
  std::uint64_t calls_ = 0;

  roles::RoleContext ctx_;
  roles::DirectorPolicy policy_;
  trajectory::Trajectory traj_;
  History history_;
  std::optional<state::GlobalState> state_;
  Message observation_ = Message::user("");
  int turn_ = 0;
  int consultations_ = 0;
};

void Episode::navigate(const std::string& role, const std::string& purpose, std::optional<std::string> feedback) {
  state::StateUpdateInput in;
  in.previous_state = state_;
  in.observation = observation_;
  std::size_t n = history_.size();
  std::size_t from = n > 7 ? n - 7 : 0;
  // Context excludes the observation itself, which is the newest message.
  in.recent_context.assign(history_.begin() + static_cast<std::ptrdiff_t>(from),
                           history_.end() - (n > 0 && history_.back() == observation_ ? 1 : 0));
  in.director_feedback = std::move(feedback);
  auto& b = backend(role);
  try {
    auto result = state::navigate(in, b, {}, sampling());
    state_ = result.state;
    traj_.add_navigator_state(turn_, b.id(), purpose, result);
  } catch (const state::NavigationFailure& f) {
    Json detail = {{"raws", f.raws}, {"issues", f.last.summary()}};
    if (!state_) throw TurnFailed{"navigation", detail};
    // Proceed on the last valid state.
    traj_.add_turn_failure(turn_, "navigation_fallback", detail);
  }
}

OperatorProposal Episode::operate(int revision) {
  Json failed = Json::array();
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      OperatorProposal p;
      if (is_stateful(config_.strategy)) {
        roles::RoleContext c = ctx_;
        c.sampling = sampling();
        p = roles::operate(*state_, history_, c, backend("operator"));
        traj_.add_proposal(turn_, revision, p);
      } else {
        BaselineContext bc{ctx_.tools, ctx_.domain_policy, &backend("operator"), derive_seed(seed_, calls_++)};
        BaselineProposal bp = propose_baseline(config_.strategy, history_, bc);
        for (auto& s : bp.steps) traj_.add_baseline_step(turn_, std::string(to_string(config_.strategy)), s.step, s.data);
        if (bp.abstain) {
          p = OperatorProposal::say(bp.abstain_text);
          traj_.add_proposal(turn_, revision, p);
          return p;
        }
        p = *bp.proposal;
        traj_.add_proposal(turn_, revision, p);
      }
      return p;
    } catch (const roles::ProposalParseFailure& e) {
      failed.push_back(e.raw);
      traj_.add_turn_failure(turn_, "proposal_parse", {{"raw", e.raw}, {"attempt", attempt + 1}});
    }
  }
  throw TurnFailed{"proposal_parse", {{"raws", failed}}};
}

std::optional<Outcome> Episode::execute(const ToolCall& call) {
  std::string before = env_.hash();
  history_.push_back(Message::assistant_call(call));
  traj_.add_message(history_.back());
  env::ToolResult r;
  bool unknown = false;
  try {
    r = env_.execute(call);
  } catch (const env::UnknownTool&) {
    unknown = true;
    r.text = "Error: unknown tool '" + call.name + "'";
    r.error = true;
  }
  bool critical = !unknown && env_.is_critical(call.name);
  traj_.add_tool_execution(turn_, call, r.text, critical, r.error, unknown, before, env_.hash());
  history_.push_back(Message::tool(call.name, r.text));
  traj_.add_message(history_.back());
  observation_ = history_.back();
  if (r.ends_episode) return Outcome::transferred;
  return std::nullopt;
}

Episode::Gating Episode::gate(OperatorProposal p) {
  const Strategy s = config_.strategy;
  if (s == Strategy::nod_without_director) return {Gating::execute, p, {}};
  if (s == Strategy::nod_frontier_renav) {
    navigate("frontier", "rebuild", std::nullopt);
    OperatorProposal q = operate(1);
    if (q.is_call() && env_.is_critical(q.call->name)) return {Gating::execute, q, {}};
    return {Gating::degraded, q, {}};
  }

  std::string last_feedback;
  for (int cycle = 0;; ++cycle) {
    if (cycle == config_.revision_budget) {
      if (s == Strategy::nod_revise_only) return {Gating::execute, p, {}};
      std::string fb = "Revision budget exhausted. " + last_feedback;
      traj_.add_director(turn_, 0, roles::DirectorDecision(roles::Stage::action_gate, roles::Verdict::ABORT, fb),
                         *p.call, true);
      return {Gating::abort, p, fb};
    }
    int consultation = ++consultations_;
    roles::RoleContext c = ctx_;
    c.sampling = sampling();
    auto review = roles::review_state(*state_, history_, p, policy_, c, backend("director"));
    traj_.add_director(turn_, consultation, review, *p.call);
    if (review.verdict() == roles::Verdict::REVISE) {
      last_feedback = review.feedback();
      navigate("navigator", "revise", review.feedback());
      p = operate(cycle + 1);
      if (!p.is_call() || !env_.is_critical(p.call->name)) return {Gating::degraded, p, {}};
      continue;
    }
    if (s == Strategy::nod_revise_only) return {Gating::execute, p, {}};
    if (config_.gate_ordering == GateOrdering::gate_revised_only && cycle == 0) return {Gating::execute, p, {}};
    c.sampling = sampling();
    auto g = roles::gate_action(history_, p, policy_, c, backend("director"));
    traj_.add_director(turn_, consultation, g, *p.call);
    if (g.verdict() == roles::Verdict::PASS) return {Gating::execute, p, {}};
    return {Gating::abort, p, g.feedback()};
  }
}

std::variant<Episode::Next, Outcome> Episode::handle(OperatorProposal p) {
  for (;;) {
    if (!p.is_call()) {
      if (config_.strategy == Strategy::abstention && p.message->rfind(kAbstainSentinel, 0) == 0) {
        say(*p.message);
        return Outcome::abstained;
      }
      say(*p.message);
      return Next::user_turn;
    }
    const ToolCall& call = *p.call;
    bool gated = is_stateful(config_.strategy) && env_.has_tool(call.name) && env_.is_critical(call.name);
    if (!gated) {
      if (auto end = execute(call)) return *end;
      return Next::agent_turn;
    }
    Gating g = gate(p);
    switch (g.kind) {
      case Gating::execute:
        if (auto end = execute(*g.proposal.call)) return *end;
        return Next::agent_turn;
      case Gating::abort:
        say("I'm sorry, but I can't proceed with this action. " + g.feedback);
        return Outcome::aborted;
      case Gating::degraded:
        // Handled like a fresh proposal; a critical one is gated again.
        p = g.proposal;
        continue;
    }
  }
}

trajectory::Trajectory Episode::run() {
  trajectory::EpisodeHeader h;
  h.task_id = task_.task_id;
  h.domain = task_.domain;
  h.strategy = std::string(to_string(config_.strategy));
  h.policy = std::string(roles::to_string(config_.director_policy));
  h.gate_ordering = std::string(to_string(config_.gate_ordering));
  h.revision_budget = config_.revision_budget;
  h.max_turns = config_.max_turns;
  h.seed = seed_;
  h.db_fixture = task_.initial_db;
  h.initial_db_hash = env_.hash();
  h.prompt_catalog_hash = prompts::Catalog::builtin().catalog_hash();
  for (const auto& [role, id] : config_.backends) h.backends[role] = id;
  traj_.begin(h);

  // Turn 0 is the fixed greeting; it is an agent turn but not a budgeted one.
  OperatorProposal greeting = OperatorProposal::say(std::string(kGreeting));
  traj_.add_proposal(0, 0, greeting, true);
  say(std::string(kGreeting));

  Outcome outcome = Outcome::failed_turn;
  try {
    bool need_user = true;
    for (;;) {
      if (need_user) {
        std::string text;
        try {
          text = user_.next(history_);
        } catch (const backends::BackendError& e) {
          throw TurnFailed{"user_simulator", {{"error", e.what()}}};
        }
        history_.push_back(Message::user(text));
        traj_.add_message(history_.back());
        observation_ = history_.back();
        if (contains_sentinel(text, "###STOP###")) {
          outcome = Outcome::stopped;
          break;
        }
        if (contains_sentinel(text, "###TRANSFER###")) {
          outcome = Outcome::transferred;
          break;
        }
      }
      if (turn_ >= config_.max_turns) {
        outcome = Outcome::max_turns;
        break;
      }
      ++turn_;
      if (is_stateful(config_.strategy)) navigate("navigator", "update", std::nullopt);
      OperatorProposal p = operate(0);
      auto next = handle(std::move(p));
      if (auto* o = std::get_if<Outcome>(&next)) {
        outcome = *o;
        break;
      }
      need_user = std::get<Next>(next) == Next::user_turn;
    }
  } catch (const TurnFailed& f) {
    traj_.add_turn_failure(turn_, f.reason, f.detail);
    outcome = Outcome::failed_turn;
  } catch (const backends::BackendError& e) {
    traj_.add_turn_failure(turn_, "backend", {{"error", e.what()}});
    outcome = Outcome::failed_turn;
  }
  traj_.end(outcome, env_.hash());
  return std::move(traj_);
}

}  // namespace

std::vector<std::string> episode_roles(const ControllerConfig& c, bool scripted_user) {
  std::vector<std::string> roles = {"operator"};
  if (is_stateful(c.strategy)) roles.push_back("navigator");
  if (c.strategy == Strategy::nod || c.strategy == Strategy::nod_revise_only) roles.push_back("director");
  if (c.strategy == Strategy::nod_frontier_renav) roles.push_back("frontier");
  if (!scripted_user) roles.push_back("user");
  return roles;
}

EpisodeOutcome run_episode(const scenarios::TaskSpec& task, const ControllerConfig& config, env::Environment& env,
                           scenarios::UserSimulator& user, const backends::BackendRegistry& registry,
                           std::uint64_t seed) {
  validate(config);
  for (const auto& role : episode_roles(config, !task.user_script.empty())) {
    const std::string& id = config.backends.at(role);
    if (!registry.contains(id)) throw ConfigError("backend '" + id + "' for role " + role + " is not registered");
  }
  Episode e(task, config, env, user, registry, seed);
  return {e.run(), std::nullopt};
}

}  // namespace nod::control
