#include <doctest.h>

#include "nod/prompts.hpp"
#include "support.hpp"

using namespace nodtest;

TEST_CASE("canonical dump sorts keys and ignores insertion order") {
  Json a = Json::parse(R"({"b": 1, "a": {"d": [1, 2], "c": null}})");
  Json b = Json::parse(R"({"a": {"c": null, "d": [1, 2]}, "b": 1})");
  CHECK(canonical_dump(a) == R"({"a":{"c":null,"d":[1,2]},"b":1})");
  CHECK(canonical_dump(a) == canonical_dump(b));
  CHECK(compact_dump(a) == R"({"b":1,"a":{"d":[1,2],"c":null}})");
  CHECK(same_content(a, b));
  CHECK_FALSE(same_content(a, Json::parse(R"({"b": 2, "a": {"c": null, "d": [1, 2]}})")));
}

TEST_CASE("tool style dump uses spaced separators") {
  Json a = Json::parse(R"({"order_id": "#W1", "items": [1, 2]})");
  CHECK(tool_style_dump(a) == R"({"order_id": "#W1", "items": [1, 2]})");
}

TEST_CASE("sha256 of known inputs") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("json extraction from model text") {
  CHECK(strip_code_fences("```json\n{\"a\": 1}\n```") == "{\"a\": 1}\n");
  auto j = extract_json_object("Sure, here it is: {\"a\": {\"b\": 2}} and then {\"c\": 3}");
  REQUIRE(j);
  CHECK((*j)["a"]["b"] == 2);
  CHECK_FALSE(extract_json_object("no braces here"));
  CHECK_FALSE(try_parse("{oops"));
}

TEST_CASE("money parsing and rendering") {
  using namespace money;
  CHECK(parse("502.28").hundredths() == 50228);
  CHECK(parse("-26.48").hundredths() == -2648);
  CHECK(to_string(parse("481.5")) == "481.5");
  CHECK(to_string(parse("20.00")) == "20");
  CHECK(to_string(Cents(3553)) == "35.53");
  CHECK(parse("0.125").hundredths() == 12);
  CHECK(parse("0.135").hundredths() == 14);
  CHECK(from_json(Json::parse("502.28")).hundredths() == 50228);
  CHECK(to_json(Cents(3553)).dump() == "35.53");
  CHECK_THROWS_AS(from_json(Json::parse("1.234")), MoneyError);
}

TEST_CASE("money round trip through JSON for random amounts") {
  Gen g(5);
  for (int i = 0; i < 2000; ++i) {
    money::Cents c(static_cast<std::int64_t>(g.range(-5000000, 5000000)));
    Json j = money::to_json(c);
    CHECK(money::from_json(Json::parse(j.dump())) == c);
    CHECK(money::parse(money::to_string(c)) == c);
  }
}

TEST_CASE("expression evaluation is exact") {
  using namespace money;
  CHECK(evaluate_expression("502.28 - 466.75") == parse("35.53"));
  CHECK(evaluate_expression("(0.1 + 0.2) * 3") == parse("0.9"));
  CHECK(evaluate_expression("10 / 3") == parse("3.33"));
  CHECK_THROWS_AS(evaluate_expression("1 / 0"), CalculationError);
  CHECK_THROWS_AS(evaluate_expression("2 +"), CalculationError);
}

TEST_CASE("message invariants and envelopes") {
  ToolCall c = make_tool_call("get_order_details", {{"order_id", "#W1"}});
  CHECK(compact_dump(to_envelope(c)) == R"({"tool":"get_order_details","arguments":{"order_id":"#W1"}})");
  auto back = from_envelope(Json::parse(R"({"name": "get_order_details", "arguments": {"order_id": "#W1"}})"));
  REQUIRE(back);
  CHECK(*back == c);
  CHECK_FALSE(from_envelope(Json::parse(R"({"tool": "x", "arguments": []})")));
  CHECK_THROWS_AS(make_tool_call("", Json::object()), std::invalid_argument);

  Message bad = Message::user("hi");
  bad.tool_call = c;
  CHECK_THROWS_AS(check_invariants(bad), std::invalid_argument);
  Message m = Message::assistant_call(c);
  CHECK(message_from_json(to_json(m)) == m);
  CHECK(message_text(m) == compact_dump(to_envelope(c)));
}

TEST_CASE("state round trip is byte exact for random states") {
  Gen g(11);
  for (int i = 0; i < 300; ++i) {
    state::GlobalState s = random_state(g);
    std::string bytes = state::serialize(s);
    auto r = state::validate_state(bytes);
    REQUIRE(r.ok());
    CHECK(*r.state == s);
    CHECK(state::serialize(*r.state) == bytes);
  }
}

TEST_CASE("state validation reports paths and rules") {
  Json doc = generic_state_json();
  doc["key_entities"]["items_relevant"] = Json::parse(R"([{"item_id": null, "record_id": null, "role": "maybe", "spec_details": ""}])");
  auto r = state::validate_state(doc);
  REQUIRE_FALSE(r.ok());
  bool found = false;
  for (const auto& i : r.failure.issues) found = found || (i.path == "key_entities.items_relevant[0].role" && i.rule == "bad_enum");
  CHECK(found);

  CHECK_FALSE(state::validate_state(doc, state::ValidationMode::lenient).ok());

  Json extra = generic_state_json();
  extra["mood"] = "calm";
  CHECK_FALSE(state::validate_state(extra).ok());
  auto lenient = state::validate_state(extra, state::ValidationMode::lenient);
  CHECK(lenient.ok());
  REQUIRE(lenient.warnings.size() == 1);
  CHECK(lenient.warnings[0].rule == "unknown_field");

  CHECK_FALSE(state::validate_state("not json at all").ok());
  CHECK(state::validate_state("```json\n" + compact_dump(generic_state_json()) + "\n```").ok());
}

TEST_CASE("duplicate subtask ids and dangling references are rejected") {
  Json doc = generic_state_json();
  doc["sub_tasks"] = Json::parse(R"([{"id": "1", "description": "", "status": "pending"},
                                     {"id": "1", "description": "", "status": "pending"}])");
  CHECK_FALSE(state::validate_state(doc).ok());
  doc = generic_state_json();
  doc["current_subtask"]["id"] = "9";
  CHECK_FALSE(state::validate_state(doc).ok());
}

TEST_CASE("navigator repairs once then gives up") {
  backends::BackendRegistry reg;
  auto bad_then_good = std::make_shared<backends::ScriptedBackend>(
      "nav", backends::rules_from_json(Json::parse(R"([
        {"when": [{"nth_call": 1}], "response": "{\"task_goal\": 1}"},
        {"when": [], "response_json": )" + compact_dump(generic_state_json()) + "}]")));
  state::StateUpdateInput in;
  in.observation = Message::user("I want to cancel an order.");
  auto res = state::navigate(in, *bad_then_good);
  CHECK(res.attempts == 2);
  CHECK(res.state.task_goal.goal_type == "general");

  backends::ScriptedBackend always_bad("nav2", backends::rules_from_json(Json::parse(R"([{"when": [], "response": "nope"}])")));
  CHECK_THROWS_AS(state::navigate(in, always_bad), state::NavigationFailure);
  CHECK(always_bad.calls_made() == 2);
}

TEST_CASE("navigator input carries prior state and feedback") {
  state::StateUpdateInput in;
  in.observation = Message::user("hello");
  CHECK(state::render_navigator_input(in).find(state::kNoPriorState) != std::string::npos);
  in.previous_state = state::from_json(generic_state_json());
  in.director_feedback = "Wrong order id.";
  std::string text = state::render_navigator_input(in);
  CHECK(text.find("help the user") != std::string::npos);
  CHECK(text.find("[DIRECTOR FEEDBACK]") != std::string::npos);
  CHECK(text.find("Wrong order id.") != std::string::npos);
}

TEST_CASE("prompt templates") {
  auto t = prompts::parse_template("---\nid: greet\nversion: 2\nplaceholders: name\n---\nHello {name}!");
  CHECK(t.id == "greet");
  CHECK(t.version == 2);
  CHECK(t.placeholders == std::vector<std::string>{"name"});
  CHECK_THROWS_AS(prompts::parse_template("---\nid: x\nversion: 1\nplaceholders:\n---\nHi {who}"),
                  prompts::TemplateError);
  CHECK(prompts::find_placeholders("a {x} b {y} {x} {not valid} {1x} {\"k\": 1}") == std::vector<std::string>{"x", "y"});

  auto cat = prompts::Catalog::from_files(
      {{"greet.txt", "---\nid: greet\nversion: 1\nplaceholders: name\n---\nHello {name}!"}});
  CHECK(cat.render("greet", {{"name", "{name}"}}) == "Hello {name}!");
  CHECK_THROWS_AS(cat.render("greet"), prompts::MissingPlaceholder);
  CHECK_THROWS_AS(cat.render("greet", {{"name", "a"}, {"other", "b"}}), prompts::UnexpectedBinding);
  CHECK_THROWS_AS(cat.render("missing"), prompts::UnknownTemplate);
}

TEST_CASE("builtin catalog covers every role") {
  const auto& cat = prompts::Catalog::builtin();
  for (const char* id : {"navigator", "operator", "director_review", "director_gate", "vanilla_system",
                         "failure_judge_system", "retail_policy"})
    CHECK(cat.contains(id));
  CHECK(cat.catalog_hash().size() == 64);
  CHECK(prompts::domain_policy("retail").find("cancel") != std::string::npos);
  CHECK_THROWS(prompts::domain_policy("airline"));
}
