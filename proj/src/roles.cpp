#include "nod/roles.hpp"

#include "nod/prompts.hpp"

namespace nod::roles {

OperatorProposal OperatorProposal::say(std::string text, std::string raw) {
  OperatorProposal p;
  p.kind = ProposalKind::user_message;
  if (raw.empty()) raw = text;
  p.message = std::move(text);
  p.raw = std::move(raw);
  return p;
}

OperatorProposal OperatorProposal::invoke(ToolCall call, std::string raw) {
  OperatorProposal p;
  p.kind = ProposalKind::tool_call;
  if (raw.empty()) raw = compact_dump(to_envelope(call));
  p.call = std::move(call);
  p.raw = std::move(raw);
  return p;
}

Message OperatorProposal::to_message() const {
  return is_call() ? Message::assistant_call(*call) : Message::assistant(*message);
}

std::string OperatorProposal::text() const { return is_call() ? compact_dump(to_envelope(*call)) : *message; }

namespace {

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

OperatorProposal parse_proposal(const backends::ChatReply& reply) {
  bool has_text = !blank(reply.content);
  if (has_text && reply.tool_call) throw ProposalParseFailure("reply holds both a message and a tool call", reply.raw);
  if (reply.tool_call) return OperatorProposal::invoke(*reply.tool_call, reply.raw);
  if (!has_text) throw ProposalParseFailure("reply is empty", reply.raw);
  return OperatorProposal::say(reply.content, reply.raw);
}

std::string_view to_string(Stage s) { return s == Stage::state_review ? "state_review" : "action_gate"; }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::PASS: return "PASS";
    case Verdict::REVISE: return "REVISE";
    case Verdict::ABORT: return "ABORT";
  }
  return "PASS";
}

Stage stage_from_string(std::string_view s) {
  if (s == "state_review") return Stage::state_review;
  if (s == "action_gate") return Stage::action_gate;
  throw std::invalid_argument("unknown director stage: " + std::string(s));
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "PASS") return Verdict::PASS;
  if (s == "REVISE") return Verdict::REVISE;
  if (s == "ABORT") return Verdict::ABORT;
  throw std::invalid_argument("unknown verdict: " + std::string(s));
}

bool verdict_allowed(Stage stage, Verdict verdict) {
  if (verdict == Verdict::PASS) return true;
  return stage == Stage::state_review ? verdict == Verdict::REVISE : verdict == Verdict::ABORT;
}

DirectorDecision::DirectorDecision(Stage stage, Verdict verdict, std::string feedback, bool parse_failure)
    : stage_(stage), verdict_(verdict), feedback_(std::move(feedback)), parse_failure_(parse_failure) {
  if (!verdict_allowed(stage, verdict))
    throw std::invalid_argument(std::string(to_string(verdict)) + " is not a " + std::string(to_string(stage)) +
                                " verdict");
}

DirectorDecision parse_director_reply(std::string_view text, Stage stage) {
  std::optional<Json> doc = try_parse(strip_code_fences(text));
  if (!doc || !doc->is_object()) doc = extract_json_object(text);
  if (!doc) throw DecisionParseFailure("reply is not a JSON object");
  if (doc->size() != 2 || !doc->contains("feedback") || !doc->contains("decision"))
    throw DecisionParseFailure("reply must hold exactly the keys feedback and decision");
  const Json& fb = doc->at("feedback");
  const Json& dec = doc->at("decision");
  if (!fb.is_string()) throw DecisionParseFailure("feedback must be a string");
  if (!dec.is_string()) throw DecisionParseFailure("decision must be a string");
  Verdict v;
  try {
    v = verdict_from_string(dec.get<std::string>());
  } catch (const std::invalid_argument&) {
    throw DecisionParseFailure("decision '" + dec.get<std::string>() + "' is not a verdict");
  }
  if (!verdict_allowed(stage, v))
    throw DecisionParseFailure("decision " + dec.get<std::string>() + " is not allowed at " + std::string(to_string(stage)));
  return DirectorDecision(stage, v, fb.get<std::string>());
}

std::string_view to_string(PolicyName p) {
  switch (p) {
    case PolicyName::conservative: return "conservative";
    case PolicyName::balanced: return "balanced";
    case PolicyName::strict: return "strict";
  }
  return "balanced";
}

PolicyName policy_from_string(std::string_view s) {
  if (s == "conservative") return PolicyName::conservative;
  if (s == "balanced") return PolicyName::balanced;
  if (s == "strict") return PolicyName::strict;
  throw std::invalid_argument("unknown director policy '" + std::string(s) + "' (conservative, balanced, strict)");
}

DirectorPolicy director_policy(PolicyName name) {
  DirectorPolicy p;
  p.name = name;
  switch (name) {
    case PolicyName::balanced:
      p.state_prompt = prompts::render("director_review");
      p.gate_prompt = prompts::render("director_gate");
      break;
    case PolicyName::conservative:
      p.state_prompt = prompts::render("director_review_conservative");
      p.gate_prompt = prompts::render("director_gate") + "\n\n" + prompts::render("director_gate_conservative");
      break;
    case PolicyName::strict:
      p.state_prompt = prompts::render("director_review_strict");
      p.gate_prompt = prompts::render("director_gate") + "\n\n" + prompts::render("director_gate_strict");
      break;
  }
  return p;
}

backends::ChatRequest operator_request(const state::GlobalState& state, const History& history, const RoleContext& ctx) {
  backends::ChatRequest req;
  req.role_tag = "operator";
  std::string system = prompts::render("operator") + "\n\n" +
                       prompts::render("operator_context", {{"domain_policy", ctx.domain_policy},
                                                            {"global_state", state::serialize(state)}});
  req.messages.push_back(Message::system(std::move(system)));
  for (const auto& m : history)
    if (m.role != Role::system) req.messages.push_back(m);
  req.tools = ctx.tools;
  req.sampling = ctx.sampling;
  if (!history.empty()) req.observation = message_text(history.back());
  return req;
}

OperatorProposal operate(const state::GlobalState& state, const History& history, const RoleContext& ctx,
                         backends::ModelBackend& backend) {
  return parse_proposal(backend.chat(operator_request(state, history, ctx)));
}

namespace {

DirectorDecision consult(backends::ChatRequest req, Stage stage, backends::ModelBackend& backend) {
  const char* allowed = stage == Stage::state_review ? "PASS, REVISE" : "PASS, ABORT";
  for (int attempt = 0; attempt < 2; ++attempt) {
    backends::ChatReply reply = backend.chat(req);
    std::string raw = reply.tool_call ? compact_dump(to_envelope(*reply.tool_call)) : reply.content;
    try {
      return parse_director_reply(raw, stage);
    } catch (const DecisionParseFailure& e) {
      req.messages.push_back(Message::assistant(raw.empty() ? "(empty reply)" : raw));
      req.messages.push_back(
          Message::user(prompts::render("director_repair", {{"problem", e.what()}, {"allowed", allowed}})));
    }
  }
  // Fail-safe: a review failure is recoverable, a gate failure never executes.
  Verdict v = stage == Stage::state_review ? Verdict::REVISE : Verdict::ABORT;
  return DirectorDecision(stage, v, std::string(kUnparseableOversight), true);
}

}  // namespace

DirectorDecision review_state(const state::GlobalState& state, const History& history, const OperatorProposal& proposal,
                              const DirectorPolicy& policy, const RoleContext& ctx, backends::ModelBackend& backend) {
  backends::ChatRequest req;
  req.role_tag = "director_review";
  req.messages = {Message::system(policy.state_prompt),
                  Message::user(prompts::render("director_review_input",
                                                {{"domain_policy", ctx.domain_policy},
                                                 {"navigator_state", state::serialize(state)},
                                                 {"dialogue_history_string", render_history(history)},
                                                 {"proposed_action", proposal.text()}}))};
  req.sampling = ctx.sampling;
  req.observation = proposal.text();
  return consult(std::move(req), Stage::state_review, backend);
}

DirectorDecision gate_action(const History& history, const OperatorProposal& proposal, const DirectorPolicy& policy,
                             const RoleContext& ctx, backends::ModelBackend& backend) {
  backends::ChatRequest req;
  req.role_tag = "director_gate";
  req.messages = {Message::system(policy.gate_prompt),
                  Message::user(prompts::render("director_gate_input",
                                                {{"domain_policy", ctx.domain_policy},
                                                 {"dialogue_history_string", render_history(history)},
                                                 {"proposed_action", proposal.text()}}))};
  req.sampling = ctx.sampling;
  req.observation = proposal.text();
  return consult(std::move(req), Stage::action_gate, backend);
}

}  // namespace nod::roles
