#include "nod/judge.hpp"

#include <algorithm>
#include <random>

#include "nod/metrics.hpp"
#include "nod/prompts.hpp"

namespace nod::judge {

namespace {

constexpr std::string_view kNames[] = {"policy_violation", "tool_hallucination", "unfulfilled_valid_intent",
                                       "safe_termination", "other"};

std::string title_case(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

std::string_view to_string(Label l) { return kNames[static_cast<int>(l)]; }

std::optional<Label> label_from_string(std::string_view s) {
  for (int i = 0; i < 5; ++i)
    if (kNames[i] == s) return static_cast<Label>(i);
  return std::nullopt;
}

const std::vector<Label>& all_labels() {
  static const std::vector<Label> all = {Label::policy_violation, Label::tool_hallucination,
                                         Label::unfulfilled_valid_intent, Label::safe_termination, Label::other};
  return all;
}

bool is_rollup_mode(Label l) {
  return l == Label::policy_violation || l == Label::tool_hallucination || l == Label::unfulfilled_valid_intent;
}

FailureLabel parse_judge_reply(std::string_view text) {
  std::optional<Json> doc = try_parse(strip_code_fences(text));
  if (!doc || !doc->is_object()) doc = extract_json_object(text);
  if (!doc) throw JudgeParseFailure("reply is not a JSON object");
  for (const char* k : {"label", "reason", "evidence"})
    if (!doc->contains(k) || !(*doc)[k].is_string())
      throw JudgeParseFailure(std::string("field '") + k + "' is missing or not a string");
  for (const auto& [k, v] : doc->items())
    if (k != "label" && k != "reason" && k != "evidence") throw JudgeParseFailure("unexpected field '" + k + "'");
  auto label = label_from_string((*doc)["label"].get<std::string>());
  if (!label) throw JudgeParseFailure("label '" + (*doc)["label"].get<std::string>() + "' is not allowed");
  return {*label, (*doc)["reason"].get<std::string>(), (*doc)["evidence"].get<std::string>(), false};
}

backends::ChatRequest judge_request(const trajectory::Trajectory& t, const std::string& domain,
                                    const std::string& policy_text, const std::string& goal_text,
                                    backends::Sampling sampling) {
  backends::ChatRequest req;
  req.role_tag = "judge";
  req.sampling = sampling;
  req.messages.push_back(Message::system(
      prompts::render("failure_judge_system", {{"domain_title", title_case(domain)}, {"domain_lower", domain}})));
  History h = t.messages();
  req.messages.push_back(Message::user(prompts::render(
      "failure_judge_input",
      {{"domain_policy", policy_text}, {"goal_text", goal_text.empty() ? "(not given)" : goal_text},
       {"history", h.empty() ? std::string("(empty)") : render_history(h)}})));
  req.observation = t.task_id();
  return req;
}

FailureLabel label_failure(const trajectory::Trajectory& t, const scenarios::TaskSpec& task,
                           backends::ModelBackend& backend, backends::Sampling sampling) {
  if (metrics::evaluate_success(t, task))
    throw JudgePrecondition("trajectory for task " + task.task_id + " succeeded; only failures are labeled");
  auto req = judge_request(t, task.domain, prompts::domain_policy(task.domain), task.goal_text, sampling);
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = backend.chat(req);
    try {
      return parse_judge_reply(reply.content);
    } catch (const JudgeParseFailure& e) {
      req.messages.push_back(Message::assistant(reply.content.empty() ? "(empty reply)" : reply.content));
      req.messages.push_back(Message::user(prompts::render("judge_repair", {{"problem", e.what()}})));
    }
  }
  return {Label::other, std::string(kUnparseableJudge), "", true};
}

Json to_json(const LabeledEpisode& e) {
  Json j = Json::object();
  j["type"] = "judge";
  j["task_id"] = e.task_id;
  j["trial"] = e.trial;
  j["trajectory"] = e.trajectory_file;
  j["label"] = to_string(e.label.label);
  j["reason"] = e.label.reason;
  j["evidence"] = e.label.evidence;
  j["flagged"] = e.label.flagged;
  return j;
}

JudgeSummary summarize(int episodes, const std::vector<LabeledEpisode>& labeled) {
  JudgeSummary s;
  s.episodes = episodes;
  s.failed = static_cast<int>(labeled.size());
  for (Label l : all_labels()) s.counts[l] = 0;
  for (const auto& e : labeled) ++s.counts[e.label.label];
  return s;
}

Json to_json(const JudgeSummary& s) {
  auto rate = [&](int n) { return s.episodes == 0 ? Json(nullptr) : Json(static_cast<double>(n) / s.episodes); };
  Json raw = Json::object();
  Json rollup = Json::object();
  int rolled = 0;
  for (Label l : all_labels()) {
    int n = s.counts.count(l) ? s.counts.at(l) : 0;
    raw[std::string(to_string(l))] = {{"count", n}, {"rate", rate(n)}};
    if (is_rollup_mode(l)) {
      rollup[std::string(to_string(l))] = {{"count", n}, {"rate", rate(n)}};
      rolled += n;
    }
  }
  Json j = Json::object();
  j["episodes"] = s.episodes;
  j["failed"] = s.failed;
  j["failed_share"] = rate(s.failed);
  j["labels"] = raw;
  j["modes"] = rollup;
  j["modes_total_rate"] = rate(rolled);
  return j;
}

std::vector<LabeledEpisode> sample_for_audit(const std::vector<LabeledEpisode>& labeled, std::size_t n,
                                             std::uint64_t seed) {
  std::vector<std::size_t> idx(labeled.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Fisher-Yates with an explicit engine so the draw is portable.
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<LabeledEpisode> out;
  for (auto i : idx) out.push_back(labeled[i]);
  return out;
}

}  // namespace nod::judge
