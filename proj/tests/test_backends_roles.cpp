#include <doctest.h>
#include <httplib.h>

#include <thread>

#include "support.hpp"

using namespace nodtest;

namespace {

backends::ChatRequest req(const std::string& tag, const std::string& observation = "", bool tools = false) {
  backends::ChatRequest r;
  r.role_tag = tag;
  r.messages = {Message::system("sys"), Message::user(observation.empty() ? "hi" : observation)};
  r.observation = observation;
  if (tools) r.tools = env::retail_tool_schemas();
  return r;
}

}  // namespace

TEST_CASE("scripted rules: first match wins, consume, nth_call") {
  backends::ScriptedBackend b("s", backends::rules_from_json(Json::parse(R"([
    {"when": [{"nth_call": 1}], "response": "first"},
    {"when": [{"role_tag": "operator|user"}, {"regex_on_observation": "refund"}], "response": "once", "consume": true},
    {"when": [{"role_tag": "operator"}], "response": "fallback"}
  ])")));
  CHECK(b.chat(req("operator", "refund please")).content == "first");
  CHECK(b.chat(req("operator", "a REFUND please")).content == "fallback");
  CHECK(b.chat(req("operator", "a refund please")).content == "once");
  CHECK(b.chat(req("operator", "refund please")).content == "fallback");
  CHECK_THROWS_AS(b.chat(req("director_gate")), backends::ScriptExhausted);
  CHECK(b.call_log().size() == 4);
  CHECK(b.call_log()[0].prompt_hash == backends::prompt_hash(req("operator", "refund please")));
}

TEST_CASE("scripted envelope becomes a tool call only when tools are offered") {
  auto r = backends::parse_scripted_reply(R"({"tool": "calculate", "arguments": {"expression": "1+1"}})", true);
  REQUIRE(r.tool_call);
  CHECK(r.tool_call->name == "calculate");
  r = backends::parse_scripted_reply(R"({"tool": "calculate", "arguments": {"expression": "1+1"}})", false);
  CHECK_FALSE(r.tool_call);
}

TEST_CASE("script library aliases and fallbacks") {
  auto lib = backends::ScriptLibrary::from_json(Json::parse(R"({"backends": {
    "local": {"rules": [{"when": [], "response": "task"}]},
    "frontier": {"alias_of": "local"}}})"));
  auto common = backends::ScriptLibrary::from_json(Json::parse(R"({"backends": {
    "local": {"rules": [{"when": [], "response": "common"}]},
    "judge": {"rules": [{"when": [], "response": "j"}]}}})"));
  lib.merge_fallback(common);
  CHECK(lib.rules_for("local").size() == 2);
  CHECK(lib.rules_for("local")[0].response == "task");
  CHECK(lib.rules_for("frontier").size() == 2);
  CHECK(lib.contains("judge"));
}

TEST_CASE("http backend speaks chat completions") {
  httplib::Server srv;
  Json seen;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
    seen = Json::parse(rq.body);
    rs.set_content(R"({"choices": [{"message": {"role": "assistant", "content": null, "tool_calls": [
      {"id": "c1", "type": "function", "function": {"name": "get_order_details", "arguments": "{\"order_id\": \"#W1\"}"}}]}}]})",
                   "application/json");
  });
  srv.Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& rs) { rs.status = 500; });
  int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  backends::HttpConfig cfg;
  cfg.id = "http:test";
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.model = "m";
  backends::HttpChatBackend b(cfg);
  auto reply = b.chat(req("operator", "hi", true));
  REQUIRE(reply.tool_call);
  CHECK(reply.tool_call->arguments["order_id"] == "#W1");
  CHECK(seen["model"] == "m");
  CHECK(seen["tools"].size() == env::retail_tool_schemas().size());

  // A response that arrives is never retried.
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/bad";
  backends::HttpChatBackend bad(cfg);
  CHECK_THROWS_AS(bad.chat(req("operator")), backends::BackendError);
  CHECK(bad.attempts_made() == 1);

  srv.stop();
  th.join();

  // Nothing listening: retried up to max_attempts.
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.initial_backoff = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::milliseconds(500);
  backends::HttpChatBackend gone(cfg);
  CHECK_THROWS_AS(gone.chat(req("operator")), backends::BackendError);
  CHECK(gone.attempts_made() == 3);
}

TEST_CASE("http config from the environment") {
  ::setenv("NOD_BACKEND_HTTP_FRONTIER_URL", "http://example.invalid/v1", 1);
  ::setenv("NOD_BACKEND_HTTP_FRONTIER_MODEL", "big", 1);
  auto c = backends::http_config_from_env("http:frontier");
  CHECK(c.base_url == "http://example.invalid/v1");
  CHECK(c.model == "big");
  ::unsetenv("NOD_BACKEND_HTTP_FRONTIER_URL");
  CHECK_THROWS_AS(backends::http_config_from_env("http:frontier"), backends::BackendUnavailable);
}

TEST_CASE("parse_chat_response rejects malformed bodies") {
  CHECK_THROWS_AS(backends::parse_chat_response("[]"), backends::BackendError);
  CHECK_THROWS_AS(backends::parse_chat_response(R"({"choices": []})"), backends::BackendError);
  auto r = backends::parse_chat_response(R"({"choices": [{"message": {"content": "hello"}}]})");
  CHECK(r.content == "hello");
}

TEST_CASE("operator proposals need exactly one of text or call") {
  backends::ChatReply both{"hi", make_tool_call("calculate", {{"expression", "1"}}), ""};
  CHECK_THROWS_AS(roles::parse_proposal(both), roles::ProposalParseFailure);
  backends::ChatReply none{"", std::nullopt, ""};
  CHECK_THROWS_AS(roles::parse_proposal(none), roles::ProposalParseFailure);
  auto p = roles::parse_proposal({"Hello there", std::nullopt, "Hello there"});
  CHECK_FALSE(p.is_call());
  CHECK(p.text() == "Hello there");
}

TEST_CASE("director replies are strict") {
  auto d = roles::parse_director_reply("```json\n{\"decision\": \"REVISE\", \"feedback\": \"x\"}\n```", roles::Stage::state_review);
  CHECK(d.verdict() == roles::Verdict::REVISE);
  CHECK_THROWS_AS(roles::parse_director_reply(R"({"feedback": "", "decision": "ABORT"})", roles::Stage::state_review),
                  roles::DecisionParseFailure);
  CHECK_THROWS_AS(roles::parse_director_reply(R"({"feedback": "", "decision": "REVISE"})", roles::Stage::action_gate),
                  roles::DecisionParseFailure);
  CHECK_THROWS_AS(roles::parse_director_reply(R"({"feedback": "", "decision": "PASS", "extra": 1})", roles::Stage::action_gate),
                  roles::DecisionParseFailure);
  CHECK_THROWS_AS(roles::DirectorDecision(roles::Stage::action_gate, roles::Verdict::REVISE, ""), std::invalid_argument);
  CHECK(roles::verdict_allowed(roles::Stage::state_review, roles::Verdict::PASS));
  CHECK_FALSE(roles::verdict_allowed(roles::Stage::state_review, roles::Verdict::ABORT));
}

TEST_CASE("unparseable director replies fail safe") {
  backends::ScriptedBackend junk("d", backends::rules_from_json(Json::parse(R"([{"when": [], "response": "sure!"}])")));
  roles::RoleContext ctx;
  auto proposal = roles::OperatorProposal::invoke(make_tool_call("cancel_pending_order", {{"order_id", "#W1"}, {"reason", "no longer needed"}}));
  auto policy = roles::director_policy(roles::PolicyName::balanced);
  auto gate = roles::gate_action({}, proposal, policy, ctx, junk);
  CHECK(gate.verdict() == roles::Verdict::ABORT);
  CHECK(gate.parse_failure());
  auto review = roles::review_state(state::from_json(generic_state_json()), {}, proposal, policy, ctx, junk);
  CHECK(review.verdict() == roles::Verdict::REVISE);
  CHECK(review.parse_failure());
}

TEST_CASE("director sees the proposal envelope as its observation") {
  backends::ScriptedBackend d("d", backends::rules_from_json(Json::parse(R"([
    {"when": [{"role_tag": "director_gate"}, {"regex_on_observation": "^\\{\"tool\":\"cancel_pending_order\""}],
     "response_json": {"feedback": "", "decision": "PASS"}}])")));
  roles::RoleContext ctx;
  auto proposal = roles::OperatorProposal::invoke(make_tool_call("cancel_pending_order", {{"order_id", "#W1"}, {"reason", "no longer needed"}}));
  auto g = roles::gate_action({}, proposal, roles::director_policy(roles::PolicyName::strict), ctx, d);
  CHECK(g.verdict() == roles::Verdict::PASS);
  CHECK_FALSE(g.parse_failure());
}

TEST_CASE("config errors name valid choices") {
  CHECK_THROWS_WITH_AS(control::strategy_from_string("turbo"), doctest::Contains("vanilla"), control::ConfigError);
  CHECK_THROWS_AS(roles::policy_from_string("lax"), std::invalid_argument);
  control::ControllerConfig c;
  c.revision_budget = 0;
  CHECK_FALSE(control::config_problems(c).empty());
  CHECK_THROWS_AS(control::validate(c), control::ConfigError);
  c = {};
  c.backends.erase("director");
  CHECK_THROWS_AS(control::validate(c), control::ConfigError);
  auto round = control::config_from_json(control::to_json(config_for(control::Strategy::debate)));
  CHECK(round.strategy == control::Strategy::debate);
}

TEST_CASE("episode roles per strategy") {
  using control::Strategy;
  auto roles_of = [](Strategy s) { return control::episode_roles(config_for(s), true); };
  CHECK(roles_of(Strategy::vanilla) == std::vector<std::string>{"operator"});
  CHECK(roles_of(Strategy::nod) == std::vector<std::string>{"operator", "navigator", "director"});
  CHECK(roles_of(Strategy::nod_frontier_renav) == std::vector<std::string>{"operator", "navigator", "frontier"});
  auto with_user = control::episode_roles(config_for(Strategy::vanilla), false);
  CHECK(std::find(with_user.begin(), with_user.end(), "user") != with_user.end());
}

TEST_CASE("missing backends are reported before the episode starts") {
  World w("c1_cancel");
  w.backend("scripted:local", Json::array());
  CHECK_THROWS_WITH_AS(w.run(config_for(control::Strategy::nod)), doctest::Contains("scripted:director"),
                       control::ConfigError);
}

TEST_CASE("derived seeds are stable and distinct") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t n = 0; n < 100; ++n) seen.insert(control::derive_seed(42, n));
  CHECK(seen.size() == 100);
  CHECK(control::derive_seed(42, 3) == control::derive_seed(42, 3));
}
