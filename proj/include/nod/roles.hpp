#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nod/backends.hpp"
#include "nod/message.hpp"
#include "nod/state.hpp"
#include "nod/tool_schema.hpp"

namespace nod::roles {

enum class ProposalKind { user_message, tool_call };

struct OperatorProposal {
  ProposalKind kind = ProposalKind::user_message;
  std::optional<std::string> message;
  std::optional<ToolCall> call;
  std::string raw;

  static OperatorProposal say(std::string text, std::string raw = {});
  static OperatorProposal invoke(ToolCall call, std::string raw = {});

  bool is_call() const { return kind == ProposalKind::tool_call; }
  Message to_message() const;
  // Message text, or the compact call envelope.
  std::string text() const;

  bool operator==(const OperatorProposal&) const = default;
};

class ProposalParseFailure : public std::runtime_error {
 public:
  ProposalParseFailure(const std::string& why, std::string raw)
      : std::runtime_error("unusable operator reply: " + why), raw(std::move(raw)) {}
  std::string raw;
};

// Exactly one of content / tool call must be present.
OperatorProposal parse_proposal(const backends::ChatReply& reply);

enum class Stage { state_review, action_gate };
enum class Verdict { PASS, REVISE, ABORT };

std::string_view to_string(Stage s);
std::string_view to_string(Verdict v);
Stage stage_from_string(std::string_view s);
Verdict verdict_from_string(std::string_view s);

// Review verdicts are PASS or REVISE, gate verdicts PASS or ABORT; the
// constructor refuses anything else.
class DirectorDecision {
 public:
  DirectorDecision(Stage stage, Verdict verdict, std::string feedback, bool parse_failure = false);

  Stage stage() const { return stage_; }
  Verdict verdict() const { return verdict_; }
  const std::string& feedback() const { return feedback_; }
  // True when the verdict is the fail-safe for an unusable reply.
  bool parse_failure() const { return parse_failure_; }

  bool operator==(const DirectorDecision&) const = default;

 private:
  Stage stage_;
  Verdict verdict_;
  std::string feedback_;
  bool parse_failure_;
};

bool verdict_allowed(Stage stage, Verdict verdict);

class DecisionParseFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strict {"feedback", "decision"} object (key order free, fences allowed).
DirectorDecision parse_director_reply(std::string_view text, Stage stage);

constexpr std::string_view kUnparseableOversight = "unparseable oversight reply";

enum class PolicyName { conservative, balanced, strict };

std::string_view to_string(PolicyName p);
PolicyName policy_from_string(std::string_view s);  // throws std::invalid_argument

struct DirectorPolicy {
  PolicyName name = PolicyName::balanced;
  std::string state_prompt;
  std::string gate_prompt;
};

DirectorPolicy director_policy(PolicyName name);

// Everything a role call needs besides its own arguments.
struct RoleContext {
  std::vector<ToolSchema> tools;
  std::string domain_policy;
  backends::Sampling sampling;
};

backends::ChatRequest operator_request(const state::GlobalState& state, const History& history, const RoleContext& ctx);

OperatorProposal operate(const state::GlobalState& state, const History& history, const RoleContext& ctx,
                         backends::ModelBackend& backend);

// Director calls put the proposed action envelope in ChatRequest::observation.
DirectorDecision review_state(const state::GlobalState& state, const History& history, const OperatorProposal& proposal,
                              const DirectorPolicy& policy, const RoleContext& ctx, backends::ModelBackend& backend);

DirectorDecision gate_action(const History& history, const OperatorProposal& proposal, const DirectorPolicy& policy,
                             const RoleContext& ctx, backends::ModelBackend& backend);

}  // namespace nod::roles
