// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <set>

#include <unistd.h>

#include "nod/judge.hpp"
#include "nod/roles.hpp"
#include "support.hpp"

using namespace nodtest;
using nod::control::Strategy;

namespace {

struct Check {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
};

// ---------------------------------------------------------------------------
// 1. metric oracle

struct Synthetic {
  std::vector<scenarios::TaskSpec> tasks;
  std::vector<trajectory::Trajectory> trajs;
};

ToolCall pool_call(Gen& g) {
  return make_tool_call(g.coin() ? "cancel_pending_order" : "return_delivered_order_items",
                        {{"order_id", "#W" + std::to_string(g.range(1, 4))}, {"reason", "no longer needed"}});
}

Synthetic synthetic_set(Gen& g) {
  Synthetic s;
  int n = g.range(1, 12);
  s.tasks.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& t = s.tasks[static_cast<std::size_t>(i)];
    t.task_id = "t" + std::to_string(i);
    t.domain = "retail";
    t.gold_final_db_hash = "gold" + std::to_string(g.range(0, 1));
    for (int k = g.range(0, 3); k > 0; --k) t.gold_critical_actions.push_back({pool_call(g), scenarios::MatchMode::exact});
  }
  for (int i = 0; i < n; ++i) {
    trajectory::Trajectory tr;
    trajectory::EpisodeHeader h;
    h.task_id = s.tasks[static_cast<std::size_t>(i)].task_id;
    tr.begin(h);
    for (int k = g.range(0, 5); k > 0; --k) {
      ToolCall c;
      const auto& gold = s.tasks[static_cast<std::size_t>(i)].gold_critical_actions;
      c = (!gold.empty() && g.coin(0.6)) ? gold[static_cast<std::size_t>(g.range(0, static_cast<int>(gold.size()) - 1))].call
                                         : pool_call(g);
      bool critical = g.coin(0.8);
      bool error = g.coin(0.2);
      tr.add_proposal(k, 0, roles::OperatorProposal::invoke(c));
      tr.add_tool_execution(k, c, error ? "Error: x" : "{}", critical, error, false, "h", "h");
    }
    if (g.coin(0.9)) {
      auto outcome = g.pick(std::vector<trajectory::Outcome>{trajectory::Outcome::stopped, trajectory::Outcome::aborted,
                                                             trajectory::Outcome::failed_turn});
      tr.end(outcome, g.coin(0.7) ? "gold0" : "gold1");
    }
    s.trajs.push_back(std::move(tr));
  }
  return s;
}

// Recount straight from the serialized events.
struct Recount {
  long long episodes = 0, success = 0, executed = 0, correct = 0, required = 0;
};

Recount recount(const Synthetic& s) {
  Recount r;
  for (std::size_t i = 0; i < s.trajs.size(); ++i) {
    const auto& task = s.tasks[i];
    std::vector<bool> used(task.gold_critical_actions.size(), false);
    long long correct_here = 0;
    bool ended = false;
    std::string final_hash;
    std::istringstream lines(s.trajs[i].to_jsonl());
    std::string line;
    while (std::getline(lines, line)) {
      Json e = Json::parse(line);
      if (e["type"] == "episode_end") {
        ended = true;
        final_hash = e["db_final_hash"].get<std::string>();
      }
      if (e["type"] != "tool_execution" || !e["critical"].get<bool>()) continue;
      ++r.executed;
      if (e["error"].get<bool>()) continue;
      for (std::size_t k = 0; k < used.size(); ++k) {
        const auto& gc = task.gold_critical_actions[k].call;
        if (!used[k] && gc.name == e["call"]["tool"].get<std::string>() &&
            canonical_dump(gc.arguments) == canonical_dump(e["call"]["arguments"])) {
          used[k] = true;
          ++correct_here;
          break;
        }
      }
    }
    r.correct += correct_here;
    r.required += static_cast<long long>(task.gold_critical_actions.size());
    ++r.episodes;
    if (ended && final_hash == task.gold_final_db_hash &&
        correct_here == static_cast<long long>(task.gold_critical_actions.size()))
      ++r.success;
  }
  return r;
}

Check criterion1() {
  Check c;
  Gen g(101);
  for (int set = 0; set < 50 && c.ok; ++set) {
    Synthetic s = synthetic_set(g);
    std::vector<metrics::EpisodeRef> refs;
    for (std::size_t i = 0; i < s.trajs.size(); ++i) refs.push_back({&s.trajs[i], &s.tasks[i], 1});
    auto rep = metrics::build_report("m", refs);
    metrics::Accumulator acc;
    for (const auto& r : refs) acc.add(r);
    Recount o = recount(s);
    std::string tag = "set " + std::to_string(set);
    c.expect(rep.sr.num == o.success && rep.sr.den == o.episodes, tag + ": SR differs from recount");
    c.expect(rep.cap.num == o.correct && rep.cap.den == o.executed, tag + ": CAP differs from recount");
    c.expect(rep.car.num == o.correct && rep.car.den == o.required, tag + ": CAR differs from recount");
    c.expect(acc.sr().num == o.success && acc.cap().num == o.correct && acc.car().den == o.required,
             tag + ": streaming accumulator differs");
    c.expect(metrics::compute_cap(refs) == metrics::Ratio{o.correct, o.executed}.value(), tag + ": compute_cap");
  }
  return c;
}

// ---------------------------------------------------------------------------
// suite runs shared by several criteria

struct Runs {
  SuiteRun nod, vanilla, revise_only, without_director, frontier, strict;
};

Runs& runs() {
  static Runs r = [] {
    Runs out;
    out.nod = run_suite(config_for(Strategy::nod));
    out.vanilla = run_suite(config_for(Strategy::vanilla));
    out.revise_only = run_suite(config_for(Strategy::nod_revise_only));
    out.without_director = run_suite(config_for(Strategy::nod_without_director));
    out.frontier = run_suite(config_for(Strategy::nod_frontier_renav));
    auto strict = config_for(Strategy::nod);
    strict.director_policy = roles::PolicyName::strict;
    out.strict = run_suite(strict);
    return out;
  }();
  return r;
}

// 2. every executed critical action under nod passed the gate; no
// consultation ever concerned a read-only tool.
Check criterion2() {
  Check c;
  const auto& registry = env::CriticalRegistry::for_domain("retail");
  int checked = 0;
  auto check_run = [&](const SuiteRun& run) {
    for (const auto& e : run.episodes) {
      const auto& events = e.trajectory.events();
      for (const auto& d : e.trajectory.director_events())
        c.expect(registry.is_critical(d.proposal.name), e.task_id + ": director consulted on " + d.proposal.name);
      for (const auto& x : e.trajectory.executed_actions()) {
        if (!x.was_critical) continue;
        bool gated = false;
        for (std::size_t i = x.event_index; i-- > 0;) {
          const Json& ev = events[i];
          if (ev["type"] == "tool_execution") break;
          if (ev["type"] == "director" && ev["stage"] == "action_gate" && ev["verdict"] == "PASS" &&
              make_tool_call(ev["proposal"]["tool"].get<std::string>(), ev["proposal"]["arguments"]) == x.call) {
            gated = true;
            break;
          }
        }
        c.expect(gated, e.task_id + ": critical " + x.call.name + " executed without a gate PASS");
        ++checked;
      }
    }
  };
  check_run(runs().nod);
  check_run(runs().strict);
  c.expect(checked >= 12, "too few critical actions to check");
  return c;
}

// Hash at the last ABORT versus the final hash, for every aborted episode.
void check_abort_hashes(Check& c, const trajectory::Trajectory& t, const std::string& tag) {
  if (t.outcome() != trajectory::Outcome::aborted) return;
  std::size_t last_abort = 0;
  bool found = false;
  for (const auto& d : t.director_events())
    if (d.verdict == roles::Verdict::ABORT) {
      last_abort = d.event_index;
      found = true;
    }
  c.expect(found, tag + ": aborted without an ABORT event");
  std::string hash = t.header().initial_db_hash;
  for (const auto& x : t.executed_actions())
    if (x.event_index < last_abort) hash = x.db_hash_after;
  c.expect(hash == t.db_final_hash(), tag + ": database changed after the ABORT");
}

// Inline world where the operator insists on one critical call and the
// Director always asks for a revision.
Json stubborn_operator_rules() {
  return Json::parse(R"([
    {"when": [{"role_tag": "navigator"}], "response_json": )" + compact_dump(generic_state_json()) + R"(},
    {"when": [{"role_tag": "operator"}, {"regex_on_observation": "cancelled"}], "response": "Your order is cancelled."},
    {"when": [{"role_tag": "operator"}],
     "response_json": {"tool": "cancel_pending_order", "arguments": {"order_id": "#W3916020", "reason": "no longer needed"}}}
  ])");
}

Json always_revise_rules() {
  return Json::parse(R"([
    {"when": [{"role_tag": "director_review"}], "response_json": {"feedback": "Check the order once more.", "decision": "REVISE"}},
    {"when": [{"role_tag": "director_gate"}], "response_json": {"feedback": "", "decision": "PASS"}}
  ])");
}

trajectory::Trajectory stubborn_episode(Strategy s, int budget) {
  World w("c1_cancel");
  w.backend("scripted:local", stubborn_operator_rules());
  w.backend("scripted:director", always_revise_rules());
  auto cfg = config_for(s);
  cfg.revision_budget = budget;
  return w.run(cfg);
}

Check criterion3() {
  Check c;
  int aborted = 0;
  for (const auto* run : {&runs().nod, &runs().strict})
    for (const auto& e : run->episodes) {
      aborted += e.trajectory.outcome() == trajectory::Outcome::aborted;
      check_abort_hashes(c, e.trajectory, e.task_id);
    }
  for (int budget : {1, 2, 3}) {
    auto t = stubborn_episode(Strategy::nod, budget);
    aborted += t.outcome() == trajectory::Outcome::aborted;
    check_abort_hashes(c, t, "stubborn budget " + std::to_string(budget));
  }
  c.expect(aborted >= 2, "expected aborted episodes to check, saw " + std::to_string(aborted));
  return c;
}

// 4. reruns are byte-identical and shipped transcripts replay.
Check criterion4() {
  Check c;
  auto tmp = std::filesystem::temp_directory_path() / ("nod_accept_" + std::to_string(::getpid()));
  std::filesystem::remove_all(tmp);
  for (const char* name : {"a", "b"}) {
    cli::RunConfig rc;
    rc.trials = 2;
    rc.seed = 17;
    rc.parallel = name[0] == 'a' ? 1 : 4;
    rc.out = tmp / name;
    cli::cmd_run(rc);
  }
  std::size_t compared = 0;
  for (const auto& f : std::filesystem::recursive_directory_iterator(tmp / "a")) {
    if (!f.is_regular_file()) continue;
    auto rel = std::filesystem::relative(f.path(), tmp / "a");
    std::string a = read_file(f.path()), b = read_file(tmp / "b" / rel);
    if (rel == "manifest.json") {
      // The manifest records the worker count, the one setting that differs.
      Json ja = Json::parse(a), jb = Json::parse(b);
      ja["run_config"].erase("parallel");
      jb["run_config"].erase("parallel");
      a = ja.dump();
      b = jb.dump();
    }
    c.expect(a == b, "rerun differs in " + rel.string());
    ++compared;
  }
  c.expect(compared > 24, "too few files compared");
  std::filesystem::remove_all(tmp);

  bool saw_refund = false;
  int replayed = 0;
  for (const auto& f : std::filesystem::directory_iterator(fixtures() / "transcripts")) {
    try {
      auto rep = cli::cmd_replay(f.path(), fixtures());
      ++replayed;
      if (f.path().filename() == "p1_camera_variant__nod.jsonl") {
        for (const auto& p : rep.final_db["orders"]["#W7464385"]["payment_history"])
          if (p["transaction_type"] == "refund" && money::from_json(p["amount"]) == money::parse("35.53"))
            saw_refund = true;
      }
    } catch (const std::exception& e) {
      c.expect(false, f.path().filename().string() + ": " + e.what());
    }
  }
  c.expect(replayed >= 6, "expected six shipped transcripts");
  c.expect(saw_refund, "replayed P1 transcript lacks the 35.53 refund");
  return c;
}

// 5. headline numbers.
Check criterion5() {
  Check c;
  auto nod = runs().nod.report("nod");
  auto van = runs().vanilla.report("vanilla");
  c.expect(nod.sr.num == 12 && nod.sr.den == 12, "nod SR " + std::to_string(nod.sr.num) + "/12");
  c.expect(nod.cap.value() == 1.0, "nod CAP below 1");
  c.expect(van.cap.value() && *van.cap.value() <= 0.75, "vanilla CAP above 0.75");
  c.expect(van.sr.num <= 6, "vanilla SR above 6/12");
  return c;
}

// 6. variants stay inside their lanes.
Check criterion6() {
  Check c;
  auto count = [](const SuiteRun& run, const std::function<bool(const Json&)>& pred) {
    long long n = 0;
    for (const auto& e : run.episodes)
      for (const auto& ev : e.trajectory.events()) n += pred(ev);
    return n;
  };
  auto is_director = [](const Json& e) { return e["type"] == "director"; };
  c.expect(count(runs().revise_only, [](const Json& e) { return e["type"] == "director" && e["stage"] == "action_gate"; }) == 0,
           "revise_only produced gate events");
  c.expect(count(runs().without_director, is_director) == 0, "without_director produced director events");
  c.expect(count(runs().vanilla, is_director) == 0, "vanilla produced director events");
  c.expect(count(runs().frontier, is_director) == 0, "frontier_renav produced verdicts");
  c.expect(count(runs().frontier, [](const Json& e) { return e["type"] == "navigator_state" && e["purpose"] == "rebuild"; }) > 0,
           "frontier_renav never rebuilt the state");
  return c;
}

// 7. the revision budget bounds an always-REVISE Director.
Check criterion7() {
  Check c;
  for (int budget : {1, 2, 3, 5}) {
    for (Strategy s : {Strategy::nod, Strategy::nod_revise_only}) {
      auto fut = std::async(std::launch::async, [=] { return stubborn_episode(s, budget); });
      if (fut.wait_for(std::chrono::seconds(5)) != std::future_status::ready) {
        std::cout << "criterion 7: FAIL (watchdog: episode did not finish within 5 s)" << std::endl;
        std::_Exit(1);
      }
      auto t = fut.get();
      std::string tag = std::string(control::to_string(s)) + " budget " + std::to_string(budget);
      int revise = 0, escalations = 0;
      for (const auto& d : t.director_events()) {
        revise += d.verdict == roles::Verdict::REVISE;
        escalations += d.escalation;
      }
      c.expect(revise == budget, tag + ": " + std::to_string(revise) + " REVISE events");
      int critical = 0;
      for (const auto& x : t.executed_actions()) critical += x.was_critical;
      if (s == Strategy::nod) {
        c.expect(escalations == 1 && t.outcome() == trajectory::Outcome::aborted, tag + ": no escalation abort");
        c.expect(critical == 0, tag + ": executed after escalation");
      } else {
        c.expect(escalations == 0 && critical == 1, tag + ": did not execute after the budget");
      }
    }
  }
  return c;
}

// 8. schema mutations.
void collect_paths(const Json& doc, std::vector<std::vector<std::string>>& out, std::vector<std::string> prefix = {}) {
  if (doc.is_object()) {
    for (const auto& [k, v] : doc.items()) {
      auto p = prefix;
      p.push_back(k);
      out.push_back(p);
      collect_paths(v, out, p);
    }
  } else if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto p = prefix;
      p.push_back("#" + std::to_string(i));
      collect_paths(doc[i], out, p);
    }
  }
}

Json& at_path(Json& doc, const std::vector<std::string>& path, std::size_t depth) {
  Json* cur = &doc;
  for (std::size_t i = 0; i < depth; ++i)
    cur = path[i][0] == '#' ? &(*cur)[std::stoul(path[i].substr(1))] : &(*cur)[path[i]];
  return *cur;
}

Check criterion8() {
  Check c;
  Gen g(808);
  static const std::set<std::string> enums = {"status", "role"};
  long long mutations = 0;
  for (int n = 0; n < 200 && c.ok; ++n) {
    state::GlobalState s = random_state(g);
    std::string bytes = state::serialize(s);
    auto back = state::validate_state(bytes);
    c.expect(back.ok() && *back.state == s, "valid state rejected or changed");
    if (back.ok()) c.expect(state::serialize(*back.state) == bytes, "round trip is not byte-exact");
    Json doc = Json::parse(bytes);
    std::vector<std::vector<std::string>> paths;
    collect_paths(doc, paths);
    for (const auto& p : paths) {
      if (p.back()[0] == '#') continue;
      Json& parent = at_path(doc, p, p.size() - 1);
      {
        Json m = doc;
        at_path(m, p, p.size() - 1).erase(p.back());
        c.expect(!state::validate_state(m).ok(), "dropping " + p.back() + " accepted");
      }
      {
        Json m = doc;
        Json& par = at_path(m, p, p.size() - 1);
        Json v = par[p.back()];
        par.erase(p.back());
        par[p.back() + "_renamed"] = v;
        c.expect(!state::validate_state(m).ok(), "renaming " + p.back() + " accepted");
      }
      // records_relevant[].status is free text; the other status and role fields are enums.
      bool free_text = p.size() >= 3 && p[p.size() - 3] == "records_relevant";
      if (enums.count(p.back()) && parent[p.back()].is_string() && !free_text) {
        Json m = doc;
        at_path(m, p, p.size() - 1)[p.back()] = "not_a_value";
        c.expect(!state::validate_state(m).ok(), "bad enum in " + p.back() + " accepted");
        ++mutations;
      }
      mutations += 2;
    }
  }
  // Director and judge replies follow the same discipline.
  for (auto [text, stage] : {std::pair{R"({"feedback":"","decision":"PASS"})", roles::Stage::state_review},
                             std::pair{R"({"feedback":"x","decision":"ABORT"})", roles::Stage::action_gate}}) {
    roles::parse_director_reply(text, stage);
    Json doc = Json::parse(text);
    for (const auto& [k, _] : doc.items()) {
      Json drop = doc, rename = doc;
      drop.erase(k);
      rename[k + "_x"] = rename[k];
      rename.erase(k);
      for (const Json& m : {drop, rename}) {
        bool rejected = false;
        try {
          roles::parse_director_reply(m.dump(), stage);
        } catch (const roles::DecisionParseFailure&) {
          rejected = true;
        }
        c.expect(rejected, "director reply mutation accepted");
      }
    }
    Json bad = doc;
    bad["decision"] = "MAYBE";
    bool rejected = false;
    try {
      roles::parse_director_reply(bad.dump(), stage);
    } catch (const roles::DecisionParseFailure&) {
      rejected = true;
    }
    c.expect(rejected, "director bad verdict accepted");
  }
  Json label = {{"label", "policy_violation"}, {"reason", "r"}, {"evidence", "e"}};
  judge::parse_judge_reply(label.dump());
  for (const auto& [k, _] : label.items()) {
    Json drop = label, rename = label;
    drop.erase(k);
    rename[k + "_x"] = rename[k];
    rename.erase(k);
    for (const Json& m : {drop, rename}) {
      bool rejected = false;
      try {
        judge::parse_judge_reply(m.dump());
      } catch (const judge::JudgeParseFailure&) {
        rejected = true;
      }
      c.expect(rejected, "judge reply mutation accepted");
    }
  }
  Json bad = label;
  bad["label"] = "not_a_label";
  bool rejected = false;
  try {
    judge::parse_judge_reply(bad.dump());
  } catch (const judge::JudgeParseFailure&) {
    rejected = true;
  }
  c.expect(rejected, "judge bad label accepted");
  c.expect(mutations > 1000, "too few mutations tried");
  return c;
}

// 9. abort diagnostics on a constructed set and the bucket oracle.
Check criterion9() {
  Check c;
  std::vector<scenarios::TaskSpec> tasks(3);
  const char* ids[] = {"hard_a", "easy_b", "hard_c"};
  for (int i = 0; i < 3; ++i) {
    tasks[static_cast<std::size_t>(i)].task_id = ids[i];
    tasks[static_cast<std::size_t>(i)].gold_critical_actions.push_back(
        {make_tool_call("cancel_pending_order", {{"order_id", "#W1"}, {"reason", "no longer needed"}}),
         scenarios::MatchMode::exact});
  }
  std::map<std::string, double> baseline = {{"hard_a", 0.0}, {"easy_b", 1.0}, {"hard_c", 0.25}};
  ToolCall gold = tasks[0].gold_critical_actions[0].call;
  ToolCall wrong = make_tool_call("cancel_pending_order", {{"order_id", "#W2"}, {"reason", "no longer needed"}});
  auto gate_abort = roles::DirectorDecision(roles::Stage::action_gate, roles::Verdict::ABORT, "no");
  auto gate_pass = roles::DirectorDecision(roles::Stage::action_gate, roles::Verdict::PASS, "");
  auto make = [&](const char* task, std::function<void(trajectory::Trajectory&)> body, trajectory::Outcome o) {
    trajectory::Trajectory t;
    trajectory::EpisodeHeader h;
    h.task_id = task;
    t.begin(h);
    body(t);
    t.end(o, "x");
    return t;
  };
  std::vector<trajectory::Trajectory> trajs;
  // wrong action executed, then an ABORT: error-bearing, hard
  trajs.push_back(make("hard_a", [&](auto& t) {
    t.add_tool_execution(1, wrong, "{}", true, false, false, "a", "b");
    t.add_director(2, 1, gate_abort, gold);
  }, trajectory::Outcome::aborted));
  // escalation ABORT on an easy task, nothing executed
  trajs.push_back(make("easy_b", [&](auto& t) { t.add_director(1, 0, gate_abort, gold, true); },
                       trajectory::Outcome::aborted));
  // correct action, then ABORT: hard, not error-bearing
  trajs.push_back(make("hard_c", [&](auto& t) {
    t.add_tool_execution(1, gold, "{}", true, false, false, "a", "b");
    t.add_director(2, 1, gate_abort, wrong);
  }, trajectory::Outcome::aborted));
  // wrong action, no ABORT
  trajs.push_back(make("easy_b", [&](auto& t) { t.add_tool_execution(1, wrong, "{}", true, false, false, "a", "b"); },
                       trajectory::Outcome::stopped));
  // errored gold call counts as incorrect, then ABORT
  trajs.push_back(make("hard_c", [&](auto& t) {
    t.add_tool_execution(1, gold, "Error: Order not found", true, true, false, "a", "a");
    t.add_director(2, 1, gate_abort, gold);
  }, trajectory::Outcome::aborted));
  // PASS only
  trajs.push_back(make("easy_b", [&](auto& t) { t.add_director(1, 1, gate_pass, gold); }, trajectory::Outcome::stopped));
  std::vector<metrics::EpisodeRef> refs;
  const std::map<std::string, const scenarios::TaskSpec*> by_id = {
      {"hard_a", &tasks[0]}, {"easy_b", &tasks[1]}, {"hard_c", &tasks[2]}};
  for (auto& t : trajs) refs.push_back({&t, by_id.at(t.task_id()), 1});
  auto d = metrics::abort_diagnostics(refs, baseline);
  c.expect(d.abort_decisions == 4 && d.hard_aborts == 3, "abort decision counts");
  c.expect(d.hard_rate && std::abs(*d.hard_rate - 0.75) < 1e-12, "hard_rate is not 3/4");
  c.expect(d.abort_trajectories == 4 && d.error_bearing == 2, "error-bearing counts");
  c.expect(d.error_bearing_rate && std::abs(*d.error_bearing_rate - 0.5) < 1e-12, "error_bearing_rate is not 1/2");

  Gen g(909);
  for (int n = 0; n < 1000 && c.ok; ++n) {
    int size = g.range(3, 40);
    std::vector<int> v;
    int spread = g.pick(std::vector<int>{2, 5, 60});
    for (int i = 0; i < size; ++i) v.push_back(g.range(1, spread));
    auto a = metrics::assign_buckets(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::size_t k1 = static_cast<std::size_t>(std::ceil(size / 3.0));
    std::size_t k2 = k1 + static_cast<std::size_t>(std::ceil((size - static_cast<double>(k1)) / 2.0));
    bool filled[3] = {false, false, false};
    for (std::size_t i = 0; i < v.size(); ++i) {
      // First sorted position of the value decides; ties stay together.
      std::size_t first = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), v[i]) - sorted.begin());
      int want = first < k1 ? 0 : first < k2 ? 1 : 2;
      c.expect(a.bucket[i] == want, "bucket mismatch on vector " + std::to_string(n));
      filled[want] = true;
    }
    c.expect(a.degenerate == !(filled[0] && filled[1] && filled[2]), "degenerate flag mismatch");
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"metrics match an independent recount on 50 random sets", criterion1},
      {"critical actions under nod always pass the gate first", criterion2},
      {"an ABORT leaves the database as it was", criterion3},
      {"reruns are byte-identical and transcripts replay", criterion4},
      {"nod 12/12 with CAP 1.0, vanilla CAP <= 0.75 and SR <= 6/12", criterion5},
      {"strategy variants emit only their own events", criterion6},
      {"revision budget bounds an always-REVISE director", criterion7},
      {"schema mutations are rejected and valid documents round-trip", criterion8},
      {"abort diagnostics and turn buckets match their oracles", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.ok = false;
      r.why = std::string("exception: ") + e.what();
    }
    std::cout << "criterion " << i + 1 << ": " << (r.ok ? "PASS" : "FAIL") << " - " << criteria[i].first;
    if (!r.ok) std::cout << " (" << r.why << ")";
    std::cout << std::endl;
    failed += !r.ok;
  }
  return failed == 0 ? 0 : 1;
}
