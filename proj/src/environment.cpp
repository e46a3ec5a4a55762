#include "nod/environment.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "nod/money.hpp"

namespace nod::env {

Database load_database(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open database fixture " + path.string());
  Database db = Database::parse(in);
  for (const char* key : {"users", "orders", "products"})
    if (!db.contains(key) || !db[key].is_object())
      throw std::runtime_error("database fixture " + path.string() + " lacks the '" + key + "' table");
  return db;
}

std::string db_hash(const Database& db) { return sha256_hex(canonical_dump(db)); }

Snapshot snapshot(const Database& db) { return {db_hash(db), db}; }

Database restore(const Snapshot& snap) {
  if (db_hash(snap.db) != snap.hash) throw std::runtime_error("snapshot content does not match its hash");
  return snap.db;
}

std::string_view to_string(Change::Kind kind) {
  switch (kind) {
    case Change::Kind::added: return "added";
    case Change::Kind::removed: return "removed";
    case Change::Kind::changed: return "changed";
  }
  return "changed";
}

namespace {

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

void diff_into(const Json& a, const Json& b, const std::string& path, std::vector<Change>& out) {
  if (a.is_object() && b.is_object()) {
    std::vector<std::string> keys;
    for (const auto& [k, _] : a.items()) keys.push_back(k);
    for (const auto& [k, _] : b.items())
      if (!a.contains(k)) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    for (const auto& k : keys) {
      std::string p = path + "/" + escape_pointer(k);
      bool in_a = a.contains(k), in_b = b.contains(k);
      if (in_a && in_b) diff_into(a.at(k), b.at(k), p, out);
      else if (in_a) out.push_back({Change::Kind::removed, p, a.at(k), nullptr});
      else out.push_back({Change::Kind::added, p, nullptr, b.at(k)});
    }
    return;
  }
  if (a.is_array() && b.is_array()) {
    std::size_t n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      std::string p = path + "/" + std::to_string(i);
      if (i < a.size() && i < b.size()) diff_into(a[i], b[i], p, out);
      else if (i < a.size()) out.push_back({Change::Kind::removed, p, a[i], nullptr});
      else out.push_back({Change::Kind::added, p, nullptr, b[i]});
    }
    return;
  }
  if (canonical_dump(a) != canonical_dump(b)) out.push_back({Change::Kind::changed, path, a, b});
}

const std::set<std::string>& order_statuses() {
  static const std::set<std::string> s = {"pending",   "processed",          "delivered",        "cancelled",
                                          "pending (item modified)", "exchange requested", "return requested"};
  return s;
}

}  // namespace

std::vector<Change> diff(const Database& a, const Database& b) {
  std::vector<Change> out;
  diff_into(a, b, "", out);
  return out;
}

std::vector<std::string> integrity_problems(const Database& db) {
  std::vector<std::string> out;
  const Json& users = db.at("users");
  const Json& orders = db.at("orders");
  const Json& products = db.at("products");
  for (const auto& [oid, order] : orders.items()) {
    std::string uid = order.value("user_id", std::string());
    if (!users.contains(uid)) out.push_back("order " + oid + " names missing user " + uid);
    std::string status = order.value("status", std::string());
    if (!order_statuses().count(status)) out.push_back("order " + oid + " has status '" + status + "'");
    for (const auto& item : order.value("items", Json::array())) {
      std::string pid = item.value("product_id", std::string());
      std::string iid = item.value("item_id", std::string());
      if (!products.contains(pid) || !products[pid]["variants"].contains(iid))
        out.push_back("order " + oid + " holds unknown item " + iid);
    }
    for (const auto& p : order.value("payment_history", Json::array())) {
      try {
        money::from_json(p.at("amount"));
      } catch (const std::exception&) {
        out.push_back("order " + oid + " has a payment amount that is not a 2-place decimal");
      }
    }
  }
  for (const auto& [uid, user] : users.items()) {
    for (const auto& oid : user.value("orders", Json::array()))
      if (!orders.contains(oid.get<std::string>())) out.push_back("user " + uid + " lists missing order " + oid.get<std::string>());
  }
  return out;
}

// ---------------------------------------------------------------------------

const CriticalRegistry& CriticalRegistry::for_domain(const std::string& domain) {
  static const CriticalRegistry retail({"cancel_pending_order", "exchange_delivered_order_items",
                                        "modify_pending_order_address", "modify_pending_order_items",
                                        "modify_pending_order_payment", "modify_user_address",
                                        "return_delivered_order_items"});
  // Names only; the airline tools are not implemented.
  static const CriticalRegistry airline({"book_reservation", "cancel_reservation", "send_certificate",
                                         "update_reservation_baggages", "update_reservation_flights",
                                         "update_reservation_passengers"});
  if (domain == "retail") return retail;
  if (domain == "airline") return airline;
  throw std::invalid_argument("unknown domain: " + domain);
}

std::vector<std::string> CriticalRegistry::domains() { return {"airline", "retail"}; }

namespace {

ToolParameter str(std::string name, std::string description = {}) {
  return {std::move(name), "string", true, std::move(description), {}};
}
ToolParameter str_list(std::string name, std::string description = {}) {
  return {std::move(name), "array", true, std::move(description), "string"};
}

std::vector<ToolParameter> address_params() {
  return {str("address1"), str("address2"), str("city"), str("state"), str("country"), str("zip")};
}

}  // namespace

std::vector<ToolSchema> retail_tool_schemas() {
  std::vector<ToolSchema> s;
  s.push_back({"calculate", "Evaluate an arithmetic expression with + - * / and parentheses.",
               {str("expression")}, false});
  s.push_back({"cancel_pending_order", "Cancel a pending order. Reason is 'no longer needed' or 'ordered by mistake'.",
               {str("order_id"), str("reason")}, true});
  s.push_back({"exchange_delivered_order_items", "Exchange items of a delivered order for other variants of the same products.",
               {str("order_id"), str_list("item_ids"), str_list("new_item_ids"), str("payment_method_id")}, true});
  s.push_back({"find_user_id_by_email", "Find a user id by email.", {str("email")}, false});
  s.push_back({"find_user_id_by_name_zip", "Find a user id by first name, last name and zip code.",
               {str("first_name"), str("last_name"), str("zip")}, false});
  s.push_back({"get_order_details", "Get the details of an order.", {str("order_id")}, false});
  s.push_back({"get_product_details", "Get the details and variants of a product.", {str("product_id")}, false});
  s.push_back({"get_user_details", "Get the details of a user.", {str("user_id")}, false});
  s.push_back({"list_all_product_types", "List product names and their product ids.", {}, false});
  auto addr = address_params();
  std::vector<ToolParameter> order_addr = {str("order_id")};
  order_addr.insert(order_addr.end(), addr.begin(), addr.end());
  s.push_back({"modify_pending_order_address", "Change the shipping address of a pending order.", order_addr, true});
  s.push_back({"modify_pending_order_items", "Swap items of a pending order for other variants of the same products. Allowed once per order.",
               {str("order_id"), str_list("item_ids"), str_list("new_item_ids"), str("payment_method_id")}, true});
  s.push_back({"modify_pending_order_payment", "Change the payment method of a pending order.",
               {str("order_id"), str("payment_method_id")}, true});
  std::vector<ToolParameter> user_addr = {str("user_id")};
  user_addr.insert(user_addr.end(), addr.begin(), addr.end());
  s.push_back({"modify_user_address", "Change the default address of a user.", user_addr, true});
  s.push_back({"return_delivered_order_items", "Return items of a delivered order.",
               {str("order_id"), str_list("item_ids"), str("payment_method_id")}, true});
  s.push_back({"transfer_to_human_agents", "Transfer the customer to a human agent with a summary.", {str("summary")},
               false});
  return s;
}

// ---------------------------------------------------------------------------

namespace {

// In-band tool failure: becomes "Error: <reason>".
struct ToolFailure {
  std::string reason;
};

class Args {
 public:
  Args(const ToolSchema& schema, const Json& args) : args_(args) {
    for (const auto& [k, _] : args.items()) {
      bool known = false;
      for (const auto& p : schema.parameters) known = known || p.name == k;
      if (!known) throw ToolFailure{"unexpected argument '" + k + "'"};
    }
    for (const auto& p : schema.parameters) {
      if (!p.required) continue;
      if (!args.contains(p.name)) throw ToolFailure{"missing argument '" + p.name + "'"};
      const Json& v = args.at(p.name);
      if (p.type == "string" && !v.is_string()) throw ToolFailure{"argument '" + p.name + "' must be a string"};
      if (p.type == "array") {
        if (!v.is_array()) throw ToolFailure{"argument '" + p.name + "' must be a list"};
        for (const auto& e : v)
          if (!e.is_string()) throw ToolFailure{"argument '" + p.name + "' must be a list of strings"};
      }
    }
  }
  std::string s(const char* key) const { return args_.at(key).get<std::string>(); }
  std::vector<std::string> list(const char* key) const { return args_.at(key).get<std::vector<std::string>>(); }

 private:
  const Json& args_;
};

Json& order_of(Database& db, const std::string& id) {
  auto& orders = db["orders"];
  if (!orders.contains(id)) throw ToolFailure{"Order not found"};
  return orders[id];
}

Json& user_of(Database& db, const std::string& id) {
  auto& users = db["users"];
  if (!users.contains(id)) throw ToolFailure{"User not found"};
  return users[id];
}

Json& payment_method_of(Database& db, const Json& order, const std::string& pm) {
  Json& user = user_of(db, order.at("user_id").get<std::string>());
  auto& methods = user["payment_methods"];
  if (!methods.contains(pm)) throw ToolFailure{"Payment method not found"};
  return methods[pm];
}

bool is_gift_card(const Json& method) { return method.value("source", std::string()) == "gift_card"; }

money::Cents balance_of(const Json& method) { return money::from_json(method.at("balance")); }

void check_items_in_order(const Json& order, const std::vector<std::string>& ids) {
  std::map<std::string, int> have;
  for (const auto& item : order.at("items")) ++have[item.at("item_id").get<std::string>()];
  std::map<std::string, int> want;
  for (const auto& id : ids) ++want[id];
  for (const auto& [id, n] : want)
    if (have[id] < n) throw ToolFailure{"item " + id + " not found in order"};
}

Json& item_in_order(Json& order, const std::string& id) {
  for (auto& item : order["items"])
    if (item.at("item_id").get<std::string>() == id) return item;
  throw ToolFailure{"item " + id + " not found in order"};
}

// Sum of new-minus-old prices for a swap; checks variant availability.
money::Cents swap_difference(const Database& db, Json& order, const std::vector<std::string>& old_ids,
                             const std::vector<std::string>& new_ids) {
  if (old_ids.size() != new_ids.size()) throw ToolFailure{"the number of items to be exchanged should match"};
  if (old_ids.empty()) throw ToolFailure{"no items given"};
  check_items_in_order(order, old_ids);
  money::Cents diff;
  for (std::size_t i = 0; i < old_ids.size(); ++i) {
    const Json& item = item_in_order(order, old_ids[i]);
    if (old_ids[i] == new_ids[i]) throw ToolFailure{"the new item id should be different from the old item id"};
    std::string pid = item.at("product_id").get<std::string>();
    const Json& variants = db.at("products").at(pid).at("variants");
    if (!variants.contains(new_ids[i]) || !variants.at(new_ids[i]).value("available", false))
      throw ToolFailure{"new item " + new_ids[i] + " not found or available"};
    diff += money::from_json(variants.at(new_ids[i]).at("price")) - money::from_json(item.at("price"));
  }
  return diff;
}

Json sorted(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  return Json(ids);
}

Json address_from(const Args& a) {
  return {{"address1", a.s("address1")}, {"address2", a.s("address2")}, {"city", a.s("city")},
          {"country", a.s("country")},   {"state", a.s("state")},       {"zip", a.s("zip")}};
}

Json payment_entry(const char* type, money::Cents amount, const std::string& method) {
  return {{"transaction_type", type}, {"amount", money::to_json(amount)}, {"payment_method_id", method}};
}

struct Outcome {
  std::string text;
  bool mutated = false;
  bool ends_episode = false;
};

Outcome run_tool(const std::string& name, const Args& a, Database& db) {
  if (name == "find_user_id_by_email") {
    for (const auto& [uid, user] : db.at("users").items())
      if (user.value("email", std::string()) == a.s("email")) return {uid};
    throw ToolFailure{"User not found"};
  }
  if (name == "find_user_id_by_name_zip") {
    auto lower = [](std::string s) {
      for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      return s;
    };
    for (const auto& [uid, user] : db.at("users").items()) {
      const Json& n = user.at("name");
      if (lower(n.value("first_name", "")) == lower(a.s("first_name")) &&
          lower(n.value("last_name", "")) == lower(a.s("last_name")) &&
          user.at("address").value("zip", "") == a.s("zip"))
        return {uid};
    }
    throw ToolFailure{"User not found"};
  }
  if (name == "get_user_details") return {tool_style_dump(user_of(db, a.s("user_id")))};
  if (name == "get_order_details") return {tool_style_dump(order_of(db, a.s("order_id")))};
  if (name == "get_product_details") {
    auto& products = db["products"];
    if (!products.contains(a.s("product_id"))) throw ToolFailure{"Product not found"};
    return {tool_style_dump(products[a.s("product_id")])};
  }
  if (name == "list_all_product_types") {
    std::map<std::string, std::string> by_name;
    for (const auto& [pid, p] : db.at("products").items()) by_name[p.at("name").get<std::string>()] = pid;
    Json out = Json::object();
    for (const auto& [n, pid] : by_name) out[n] = pid;
    return {tool_style_dump(out)};
  }
  if (name == "calculate") {
    try {
      return {money::to_string(money::evaluate_expression(a.s("expression")))};
    } catch (const money::CalculationError& e) {
      throw ToolFailure{e.what()};
    }
  }
  if (name == "transfer_to_human_agents") return {"Transfer successful", false, true};

  if (name == "cancel_pending_order") {
    Json& order = order_of(db, a.s("order_id"));
    if (order.at("status") != "pending") throw ToolFailure{"non-pending order cannot be cancelled"};
    std::string reason = a.s("reason");
    if (reason != "no longer needed" && reason != "ordered by mistake") throw ToolFailure{"invalid reason"};
    Json refunds = Json::array();
    for (const auto& p : order.at("payment_history")) {
      money::Cents amount = money::from_json(p.at("amount"));
      std::string pm = p.at("payment_method_id").get<std::string>();
      refunds.push_back(payment_entry("refund", amount, pm));
      Json& method = payment_method_of(db, order, pm);
      if (is_gift_card(method)) method["balance"] = money::to_json(balance_of(method) + amount);
    }
    for (auto& r : refunds) order["payment_history"].push_back(r);
    order["status"] = "cancelled";
    order["cancel_reason"] = reason;
    return {tool_style_dump(order), true};
  }
  if (name == "modify_pending_order_items") {
    Json& order = order_of(db, a.s("order_id"));
    if (order.at("status") != "pending") throw ToolFailure{"non-pending order cannot be modified"};
    auto old_ids = a.list("item_ids");
    auto new_ids = a.list("new_item_ids");
    money::Cents diff = swap_difference(db, order, old_ids, new_ids);
    std::string pm = a.s("payment_method_id");
    Json& method = payment_method_of(db, order, pm);
    if (is_gift_card(method) && balance_of(method) < diff)
      throw ToolFailure{"insufficient gift card balance to pay for the new item"};
    order["payment_history"].push_back(payment_entry(diff > money::Cents() ? "payment" : "refund", money::abs(diff), pm));
    if (is_gift_card(method)) method["balance"] = money::to_json(balance_of(method) - diff);
    for (std::size_t i = 0; i < old_ids.size(); ++i) {
      Json& item = item_in_order(order, old_ids[i]);
      const Json& variant = db.at("products").at(item.at("product_id").get<std::string>()).at("variants").at(new_ids[i]);
      item["item_id"] = new_ids[i];
      item["price"] = variant.at("price");
      item["options"] = variant.at("options");
    }
    order["status"] = "pending (item modified)";
    return {tool_style_dump(order), true};
  }
  if (name == "modify_pending_order_address") {
    Json& order = order_of(db, a.s("order_id"));
    if (order.at("status") != "pending") throw ToolFailure{"non-pending order cannot be modified"};
    order["address"] = address_from(a);
    return {tool_style_dump(order), true};
  }
  if (name == "modify_pending_order_payment") {
    Json& order = order_of(db, a.s("order_id"));
    if (order.at("status") != "pending") throw ToolFailure{"non-pending order cannot be modified"};
    std::string pm = a.s("payment_method_id");
    Json& method = payment_method_of(db, order, pm);
    const Json& history = order.at("payment_history");
    if (history.size() != 1 || history[0].at("transaction_type") != "payment")
      throw ToolFailure{"there should be exactly one payment for a pending order"};
    std::string old_pm = history[0].at("payment_method_id").get<std::string>();
    if (old_pm == pm) throw ToolFailure{"the new payment method should be different from the current one"};
    money::Cents amount = money::from_json(history[0].at("amount"));
    if (is_gift_card(method) && balance_of(method) < amount)
      throw ToolFailure{"insufficient gift card balance to pay for the order"};
    Json& old_method = payment_method_of(db, order, old_pm);
    order["payment_history"].push_back(payment_entry("payment", amount, pm));
    order["payment_history"].push_back(payment_entry("refund", amount, old_pm));
    if (is_gift_card(method)) method["balance"] = money::to_json(balance_of(method) - amount);
    if (is_gift_card(old_method)) old_method["balance"] = money::to_json(balance_of(old_method) + amount);
    return {tool_style_dump(order), true};
  }
  if (name == "modify_user_address") {
    Json& user = user_of(db, a.s("user_id"));
    user["address"] = address_from(a);
    return {tool_style_dump(user), true};
  }
  if (name == "exchange_delivered_order_items") {
    Json& order = order_of(db, a.s("order_id"));
    if (order.at("status") != "delivered") throw ToolFailure{"non-delivered order cannot be exchanged"};
    auto old_ids = a.list("item_ids");
    auto new_ids = a.list("new_item_ids");
    money::Cents diff = swap_difference(db, order, old_ids, new_ids);
    std::string pm = a.s("payment_method_id");
    Json& method = payment_method_of(db, order, pm);
    if (is_gift_card(method) && balance_of(method) < diff)
      throw ToolFailure{"insufficient gift card balance to pay for the price difference"};
    order["status"] = "exchange requested";
    order["exchange_items"] = sorted(old_ids);
    order["exchange_new_items"] = sorted(new_ids);
    order["exchange_payment_method_id"] = pm;
    order["exchange_price_difference"] = money::to_json(diff);
    return {tool_style_dump(order), true};
  }
  if (name == "return_delivered_order_items") {
    Json& order = order_of(db, a.s("order_id"));
    if (order.at("status") != "delivered") throw ToolFailure{"non-delivered order cannot be returned"};
    std::string pm = a.s("payment_method_id");
    Json& method = payment_method_of(db, order, pm);
    std::string original = order.at("payment_history").at(0).at("payment_method_id").get<std::string>();
    if (pm != original && !is_gift_card(method))
      throw ToolFailure{"payment method should be either the original payment method or a gift card"};
    auto ids = a.list("item_ids");
    if (ids.empty()) throw ToolFailure{"no items given"};
    check_items_in_order(order, ids);
    order["status"] = "return requested";
    order["return_items"] = sorted(ids);
    order["return_payment_method_id"] = pm;
    return {tool_style_dump(order), true};
  }
  throw ToolFailure{"tool " + name + " is not implemented"};
}

}  // namespace

Environment::Environment(Database initial, std::string domain)
    : db_(std::move(initial)), domain_(std::move(domain)), registry_(&CriticalRegistry::for_domain(domain_)) {
  if (domain_ != "retail") throw std::invalid_argument("only the retail tools are implemented");
  schemas_ = retail_tool_schemas();
}

bool Environment::has_tool(const std::string& name) const {
  for (const auto& s : schemas_)
    if (s.name == name) return true;
  return false;
}

ToolResult Environment::execute(const ToolCall& call) {
  const ToolSchema* schema = nullptr;
  for (const auto& s : schemas_)
    if (s.name == call.name) schema = &s;
  if (schema == nullptr) throw UnknownTool(call.name);
  // Work on a copy so a failure halfway through leaves no trace.
  Database work = db_;
  try {
    Args args(*schema, call.arguments);
    Outcome o = run_tool(call.name, args, work);
    ToolResult r{std::move(o.text), false, o.mutated, o.ends_episode};
    if (o.mutated) db_ = std::move(work);
    return r;
  } catch (const ToolFailure& f) {
    return {"Error: " + f.reason, true, false, false};
  } catch (const money::MoneyError& e) {
    return {std::string("Error: ") + e.what(), true, false, false};
  }
}

}  // namespace nod::env
