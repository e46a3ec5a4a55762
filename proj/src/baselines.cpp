#include <string>

#include "nod/control.hpp"
#include "nod/prompts.hpp"

namespace nod::control {

namespace {

using backends::ChatRequest;
using roles::OperatorProposal;

ChatRequest dialogue_request(const std::string& system, const History& history, const BaselineContext& ctx,
                             std::uint64_t n) {
  ChatRequest req;
  req.role_tag = "operator";
  req.messages.push_back(Message::system(system));
  for (const auto& m : history)
    if (m.role != Role::system) req.messages.push_back(m);
  req.tools = ctx.tools;
  req.sampling.seed = derive_seed(ctx.seed, n);
  if (!history.empty()) req.observation = message_text(history.back());
  return req;
}

ChatRequest side_request(std::string role_tag, const std::string& system, const std::string& user,
                         const BaselineContext& ctx, std::uint64_t n, std::string observation) {
  ChatRequest req;
  req.role_tag = std::move(role_tag);
  req.messages = {Message::system(system), Message::user(user)};
  req.sampling.seed = derive_seed(ctx.seed, n);
  req.observation = std::move(observation);
  return req;
}

std::string history_string(const History& h) { return h.empty() ? std::string("(empty)") : render_history(h); }

OperatorProposal vanilla_once(const History& history, const BaselineContext& ctx, std::uint64_t n) {
  return roles::parse_proposal(ctx.backend->chat(dialogue_request(vanilla_system_prompt(ctx.domain_policy), history, ctx, n)));
}

Json proposal_json(const OperatorProposal& p) {
  return p.is_call() ? to_envelope(*p.call) : Json(p.message.value_or(""));
}

// A correction is either a call envelope (object or JSON text) or a message.
std::optional<OperatorProposal> correction_to_proposal(const Json& correction) {
  if (correction.is_null()) return std::nullopt;
  if (correction.is_object()) {
    if (auto call = from_envelope(correction)) return OperatorProposal::invoke(*call);
    return std::nullopt;
  }
  if (!correction.is_string()) return std::nullopt;
  std::string text = correction.get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return std::nullopt;
  if (auto doc = try_parse(strip_code_fences(text)); doc && doc->is_object()) {
    if (auto call = from_envelope(*doc)) return OperatorProposal::invoke(*call);
  }
  return OperatorProposal::say(text);
}

BaselineProposal self_reflection(const History& history, const BaselineContext& ctx) {
  BaselineProposal out;
  OperatorProposal first = vanilla_once(history, ctx, 0);
  out.steps.push_back({"propose", proposal_json(first)});
  std::string user = prompts::render("self_reflection_auditor_user",
                                     {{"dialogue_history_string", history_string(history)},
                                      {"proposed_agent_output", first.text()}});
  auto reply = ctx.backend->chat(
      side_request("auditor", prompts::render("self_reflection_auditor_system"), user, ctx, 1, first.text()));
  std::optional<Json> audit = extract_json_object(reply.content);
  if (!audit || !audit->contains("is_approved") || !(*audit)["is_approved"].is_boolean()) {
    out.steps.push_back({"audit_unparseable", reply.content});
    out.proposal = first;
    return out;
  }
  out.steps.push_back({"audit", *audit});
  if ((*audit)["is_approved"].get<bool>()) {
    out.proposal = first;
    return out;
  }
  if (auto fixed = correction_to_proposal(audit->value("correction", Json(nullptr)))) {
    out.steps.push_back({"substitute", proposal_json(*fixed)});
    out.proposal = *fixed;
    return out;
  }
  std::string reflection = audit->value("reflection", std::string("(no reflection)"));
  ChatRequest retry = dialogue_request(vanilla_system_prompt(ctx.domain_policy), history, ctx, 2);
  retry.messages.push_back(Message::assistant(first.text()));
  retry.messages.push_back(Message::user(prompts::render("self_reflection_retry", {{"reflection", reflection}})));
  retry.observation = reflection;
  OperatorProposal second = roles::parse_proposal(ctx.backend->chat(retry));
  out.steps.push_back({"repropose", proposal_json(second)});
  out.proposal = second;
  return out;
}

BaselineProposal abstention(const History& history, const BaselineContext& ctx) {
  BaselineProposal out;
  OperatorProposal p =
      roles::parse_proposal(ctx.backend->chat(dialogue_request(abstention_system_prompt(ctx.domain_policy), history, ctx, 0)));
  if (!p.is_call() && p.message->rfind(kAbstainSentinel, 0) == 0) {
    out.abstain = true;
    out.abstain_text = *p.message;
    out.steps.push_back({"abstain", *p.message});
    return out;
  }
  out.proposal = p;
  return out;
}

BaselineProposal debate(const History& history, const BaselineContext& ctx) {
  BaselineProposal out;
  std::vector<OperatorProposal> options;
  Json listed = Json::array();
  for (std::uint64_t i = 0; i < 3; ++i) {
    options.push_back(vanilla_once(history, ctx, i));
    listed.push_back(proposal_json(options.back()));
  }
  out.steps.push_back({"options", listed});
  std::string user = prompts::render("debate_judge_user", {{"dialogue_history_string", history_string(history)},
                                                          {"action_A_json_or_text", options[0].text()},
                                                          {"action_B_json_or_text", options[1].text()},
                                                          {"action_C_json_or_text", options[2].text()}});
  auto reply = ctx.backend->chat(
      side_request("debate_judge", prompts::render("debate_judge_system"), user, ctx, 3, history.empty() ? "" : message_text(history.back())));
  std::size_t pick = 0;
  bool parsed = false;
  if (auto doc = extract_json_object(reply.content); doc && (*doc)["vote"].is_string()) {
    std::string vote = (*doc)["vote"].get<std::string>();
    if (vote == "A" || vote == "B" || vote == "C") {
      pick = static_cast<std::size_t>(vote[0] - 'A');
      parsed = true;
    }
  }
  out.steps.push_back({"vote", Json{{"vote", std::string(1, static_cast<char>('A' + pick))}, {"parsed", parsed}}});
  out.proposal = options[pick];
  return out;
}

std::string after_marker(const std::string& text, std::string_view marker) {
  auto pos = text.find(marker);
  if (pos == std::string::npos) return text;
  std::string rest = text.substr(pos + marker.size());
  auto b = rest.find_first_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : rest.substr(b);
}

BaselineProposal solver_critic(const History& history, const BaselineContext& ctx) {
  BaselineProposal out;
  std::string chat;
  std::string feedback = "(none)";
  std::string hist = history_string(history);
  std::string obs = history.empty() ? std::string() : message_text(history.back());
  for (int round = 0; round < 3; ++round) {
    std::string solver_user = prompts::render(
        "solver_user", {{"dialogue_history_string", hist},
                        {"group_chat_history", chat.empty() ? std::string("(empty)") : chat},
                        {"critic_feedback", feedback}});
    auto s = ctx.backend->chat(side_request("solver", prompts::render("solver_system"), solver_user, ctx,
                                            static_cast<std::uint64_t>(2 * round), obs));
    std::string proposed = after_marker(s.content, "PROPOSED ACTION:");
    std::string critic_user = prompts::render(
        "critic_user", {{"domain_policy", ctx.domain_policy}, {"dialogue_history_string", hist}, {"solver_proposal", proposed}});
    auto c = ctx.backend->chat(side_request("critic", prompts::render("critic_system"), critic_user, ctx,
                                            static_cast<std::uint64_t>(2 * round + 1), proposed));
    chat += "Solver: " + s.content + "\nCritic: " + c.content + "\n";
    bool approved = c.content.rfind("APPROVE", 0) == 0;
    out.steps.push_back({"round", Json{{"round", round + 1}, {"proposed", proposed}, {"critic", c.content}, {"approved", approved}}});
    if (approved) break;
    feedback = c.content;
  }
  ChatRequest fin = dialogue_request(vanilla_system_prompt(ctx.domain_policy), history, ctx, 6);
  fin.messages.push_back(Message::user(prompts::render("group_chat_wrapper", {{"group_chat_history", chat}}) + "\n\n" +
                                       prompts::render("finalization_hint")));
  out.proposal = roles::parse_proposal(ctx.backend->chat(fin));
  out.steps.push_back({"finalize", proposal_json(*out.proposal)});
  return out;
}

}  // namespace

std::string vanilla_system_prompt(const std::string& domain_policy) {
  return prompts::render("vanilla_system",
                         {{"agent_instruction", prompts::render("vanilla_instruction")}, {"domain_policy", domain_policy}});
}

std::string abstention_system_prompt(const std::string& domain_policy) {
  return prompts::render("abstention_system", {{"agent_instruction", prompts::render("abstention_instruction")},
                                               {"domain_policy", domain_policy}}) +
         "\n\n" + prompts::render("abstention_meta_check");
}

BaselineProposal propose_baseline(Strategy strategy, const History& history, const BaselineContext& ctx) {
  if (ctx.backend == nullptr) throw std::invalid_argument("baseline needs a backend");
  switch (strategy) {
    case Strategy::vanilla: {
      BaselineProposal out;
      out.proposal = vanilla_once(history, ctx, 0);
      return out;
    }
    case Strategy::self_reflection:
      return self_reflection(history, ctx);
    case Strategy::abstention:
      return abstention(history, ctx);
    case Strategy::debate:
      return debate(history, ctx);
    case Strategy::solver_critic:
      return solver_critic(history, ctx);
    default:
      throw std::invalid_argument(std::string(to_string(strategy)) + " is not a baseline");
  }
}

}  // namespace nod::control
