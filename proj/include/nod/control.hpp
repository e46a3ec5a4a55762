#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nod/backends.hpp"
#include "nod/environment.hpp"
#include "nod/roles.hpp"
#include "nod/scenarios.hpp"
#include "nod/trajectory.hpp"

namespace nod::control {

enum class Strategy {
  vanilla,
  nod,
  nod_revise_only,
  nod_without_director,
  nod_frontier_renav,
  self_reflection,
  abstention,
  debate,
  solver_critic,
};

std::string_view to_string(Strategy s);
const std::vector<Strategy>& all_strategies();
std::string strategy_list();  // "vanilla, nod, ..."

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Throws ConfigError naming the valid strategies.
Strategy strategy_from_string(std::string_view s);

// Strategies that maintain a Global State through the Navigator.
bool is_stateful(Strategy s);
bool is_baseline(Strategy s);

enum class GateOrdering { review_then_gate, gate_revised_only };

std::string_view to_string(GateOrdering g);
GateOrdering gate_ordering_from_string(std::string_view s);

constexpr std::string_view kGreeting = "Hi! How can I help you today?";
constexpr std::string_view kAbstainSentinel = "The request is beyond my capability.";

struct ControllerConfig {
  Strategy strategy = Strategy::nod;
  roles::PolicyName director_policy = roles::PolicyName::balanced;
  int revision_budget = 3;
  int max_turns = 40;
  GateOrdering gate_ordering = GateOrdering::review_then_gate;
  // role -> backend id for navigator, operator, director, judge, user, frontier.
  std::map<std::string, std::string> backends = {
      {"navigator", "scripted:local"}, {"operator", "scripted:local"}, {"director", "scripted:director"},
      {"judge", "scripted:judge"},     {"user", "scripted:local"},     {"frontier", "scripted:frontier"},
  };
  // Director (or frontier navigator) intentionally bound to the local backend.
  bool weak_director = false;
};

std::vector<std::string> config_problems(const ControllerConfig& config);

// Roles the strategy calls during an episode; the user role only when the
// task has no scripted user.
std::vector<std::string> episode_roles(const ControllerConfig& config, bool scripted_user);
void validate(const ControllerConfig& config);  // throws ConfigError

Json to_json(const ControllerConfig& config);
// Applies the keys present in `j` on top of `base`.
ControllerConfig config_from_json(const Json& j, ControllerConfig base = {});

struct EpisodeOutcome {
  trajectory::Trajectory trajectory;
  std::optional<bool> success;  // filled in by the metrics evaluator
};

// Sub-seed for the n-th sampled call of an episode.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t n);

EpisodeOutcome run_episode(const scenarios::TaskSpec& task, const ControllerConfig& config, env::Environment& env,
                           scenarios::UserSimulator& user, const backends::BackendRegistry& registry,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Baselines

struct BaselineStep {
  std::string step;
  Json data;
};

struct BaselineProposal {
  std::optional<roles::OperatorProposal> proposal;  // empty when abstaining
  bool abstain = false;
  std::string abstain_text;
  std::vector<BaselineStep> steps;
};

struct BaselineContext {
  std::vector<ToolSchema> tools;
  std::string domain_policy;
  backends::ModelBackend* backend = nullptr;  // every baseline role runs on the operator backend
  std::uint64_t seed = 0;
};

std::string vanilla_system_prompt(const std::string& domain_policy);
std::string abstention_system_prompt(const std::string& domain_policy);

// Throws roles::ProposalParseFailure when the backend's final reply is unusable.
BaselineProposal propose_baseline(Strategy strategy, const History& history, const BaselineContext& ctx);

}  // namespace nod::control
