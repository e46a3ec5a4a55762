#include <doctest.h>

#include "support.hpp"

using namespace nodtest;

namespace {

env::Environment fresh() { return env::Environment(env::load_database(fixtures() / "db/retail.json")); }

ToolCall call(const std::string& name, Json args) { return make_tool_call(name, std::move(args)); }

}  // namespace

TEST_CASE("fixture database is sound") {
  auto db = env::load_database(fixtures() / "db/retail.json");
  CHECK(env::integrity_problems(db).empty());
  CHECK(db["products"].size() == 50);
  CHECK(env::db_hash(db) == env::db_hash(Json::parse(canonical_dump(db))));
}

TEST_CASE("lookups return tool style text and never mutate") {
  auto e = fresh();
  std::string before = e.hash();
  auto r = e.execute(call("find_user_id_by_name_zip", {{"first_name", "James"}, {"last_name", "Sanchez"}, {"zip", "60623"}}));
  CHECK_FALSE(r.error);
  CHECK(r.text == "james_sanchez_3954");
  r = e.execute(call("get_order_details", {{"order_id", "#W7464385"}}));
  CHECK(r.text.find("\"order_id\": \"#W7464385\"") != std::string::npos);
  CHECK(e.hash() == before);
}

TEST_CASE("in-band errors leave the database untouched") {
  auto e = fresh();
  std::string before = e.hash();
  auto r = e.execute(call("get_order_details", {{"order_id", "#W0000000"}}));
  CHECK(r.error);
  CHECK(r.text == "Error: Order not found");
  r = e.execute(call("cancel_pending_order", {{"order_id", "#W7464385"}, {"reason", "too slow"}}));
  CHECK(r.text == "Error: invalid reason");
  r = e.execute(call("cancel_pending_order", {{"order_id", "#W8499625"}, {"reason", "no longer needed"}}));
  CHECK(r.text == "Error: non-pending order cannot be cancelled");
  r = e.execute(call("get_order_details", {{"order_id", 5}}));
  CHECK(r.text == "Error: argument 'order_id' must be a string");
  r = e.execute(call("get_order_details", {{"order_id", "#W7464385"}, {"extra", 1}}));
  CHECK(r.text == "Error: unexpected argument 'extra'");
  CHECK(e.hash() == before);
  CHECK_THROWS_AS(e.execute(call("teleport", Json::object())), env::UnknownTool);
}

TEST_CASE("cancel refunds the original payment") {
  auto e = fresh();
  auto r = e.execute(call("cancel_pending_order", {{"order_id", "#W7464385"}, {"reason", "no longer needed"}}));
  REQUIRE_FALSE(r.error);
  CHECK(r.mutated);
  const auto& o = e.db()["orders"]["#W7464385"];
  CHECK(o["status"] == "cancelled");
  const auto& last = o["payment_history"].back();
  CHECK(last["transaction_type"] == "refund");
  CHECK(money::from_json(last["amount"]) == money::parse("502.28"));
  CHECK(env::integrity_problems(e.db()).empty());
  auto changes = env::diff(env::load_database(fixtures() / "db/retail.json"), e.db());
  CHECK_FALSE(changes.empty());
}

TEST_CASE("transfer ends the episode") {
  auto e = fresh();
  auto r = e.execute(call("transfer_to_human_agents", {{"summary", "needs a human"}}));
  CHECK(r.ends_episode);
  CHECK_FALSE(r.mutated);
}

TEST_CASE("critical registry") {
  const auto& reg = env::CriticalRegistry::for_domain("retail");
  for (const char* t : {"cancel_pending_order", "modify_pending_order_items", "modify_pending_order_address",
                        "modify_pending_order_payment", "modify_user_address", "exchange_delivered_order_items",
                        "return_delivered_order_items"})
    CHECK(reg.is_critical(t));
  for (const char* t : {"get_order_details", "calculate", "transfer_to_human_agents", "find_user_id_by_email"})
    CHECK_FALSE(reg.is_critical(t));
  for (const auto& s : env::retail_tool_schemas()) CHECK(s.mutating == reg.is_critical(s.name));
}

TEST_CASE("snapshots restore exactly") {
  auto e = fresh();
  auto snap = env::snapshot(e.db());
  e.execute(call("cancel_pending_order", {{"order_id", "#W7464385"}, {"reason", "no longer needed"}}));
  CHECK(e.hash() != snap.hash);
  e.reset(env::restore(snap));
  CHECK(e.hash() == snap.hash);
  CHECK(env::diff(e.db(), snap.db).empty());
}

TEST_CASE("every suite task validates and its gold reaches the gold hash") {
  REQUIRE(suite_tasks().size() == 12);
  for (const auto& t : suite_tasks()) {
    INFO(t.task_id);
    CHECK(scenarios::validate_task(t).empty());
    CHECK(env::db_hash(scenarios::apply_gold(t).db) == t.gold_final_db_hash);
    auto back = scenarios::task_from_json(scenarios::to_json(t), t.fixtures_root);
    CHECK(canonical_dump(scenarios::to_json(back)) == canonical_dump(scenarios::to_json(t)));
  }
}

TEST_CASE("validate_task flags a wrong gold hash") {
  auto t = suite_task("c1_cancel");
  t.gold_final_db_hash = std::string(64, '0');
  auto problems = scenarios::validate_task(t);
  REQUIRE_FALSE(problems.empty());
  CHECK(problems[0].find("unreachable gold") != std::string::npos);
}

TEST_CASE("gold matching modes") {
  ToolCall gold = call("modify_pending_order_items",
                       {{"order_id", "#W1"}, {"item_ids", {"a", "b"}}, {"new_item_ids", {"c", "d"}}, {"payment_method_id", "p"}});
  ToolCall reordered = call("modify_pending_order_items",
                            {{"payment_method_id", "p"}, {"order_id", "#W1"}, {"item_ids", {"a", "b"}}, {"new_item_ids", {"c", "d"}}});
  CHECK(scenarios::matches({gold, scenarios::MatchMode::exact}, reordered));
  ToolCall swapped = call("modify_pending_order_items",
                          {{"order_id", "#W1"}, {"item_ids", {"b", "a"}}, {"new_item_ids", {"d", "c"}}, {"payment_method_id", "p"}});
  CHECK_FALSE(scenarios::matches({gold, scenarios::MatchMode::exact}, swapped));
  CHECK(scenarios::matches({gold, scenarios::MatchMode::subset_args}, swapped));
  ToolCall partial = call("modify_pending_order_items", {{"order_id", "#W1"}});
  CHECK_FALSE(scenarios::matches({gold, scenarios::MatchMode::subset_args}, partial));
}

TEST_CASE("scripted user scans forward for a matching trigger") {
  std::vector<scenarios::UserStep> steps = {
      {scenarios::Trigger::always_next, "", "I need help."},
      {scenarios::Trigger::regex_on_agent_message, "order id", "It is #W1."},
      {scenarios::Trigger::always_next, "", "Thanks. ###STOP###"},
  };
  scenarios::ScriptedUser u(steps);
  History h = {Message::assistant("Hi! How can I help you today?")};
  CHECK(u.next(h) == "I need help.");
  h.push_back(Message::assistant("What is your ORDER ID?"));
  CHECK(u.next(h) == "It is #W1.");
  CHECK(u.next(h) == "Thanks. ###STOP###");
  CHECK(u.cursor() == 3);
}
