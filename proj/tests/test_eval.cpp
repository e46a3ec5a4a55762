#include <doctest.h>

#include <unistd.h>

#include "nod/judge.hpp"
#include "support.hpp"

using namespace nodtest;

namespace {

scenarios::TaskSpec one_gold_task() {
  scenarios::TaskSpec t;
  t.task_id = "t";
  t.gold_final_db_hash = "h1";
  t.gold_critical_actions = {{make_tool_call("cancel_pending_order", {{"order_id", "#W1"}, {"reason", "no longer needed"}}),
                              scenarios::MatchMode::exact}};
  return t;
}

trajectory::Trajectory one_action(const ToolCall& c, bool error, trajectory::Outcome o, const std::string& hash) {
  trajectory::Trajectory t;
  trajectory::EpisodeHeader h;
  h.task_id = "t";
  t.begin(h);
  t.add_tool_execution(1, c, error ? "Error: x" : "{}", true, error, false, "h0", error ? "h0" : hash);
  t.end(o, hash);
  return t;
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("nod_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("success needs completion, the gold hash and every gold action") {
  auto task = one_gold_task();
  ToolCall gold = task.gold_critical_actions[0].call;
  CHECK(metrics::evaluate_success(one_action(gold, false, trajectory::Outcome::stopped, "h1"), task));
  CHECK_FALSE(metrics::evaluate_success(one_action(gold, false, trajectory::Outcome::stopped, "h2"), task));
  CHECK_FALSE(metrics::evaluate_success(one_action(gold, true, trajectory::Outcome::stopped, "h1"), task));
  trajectory::Trajectory open;
  open.begin({});
  CHECK_FALSE(metrics::evaluate_success(open, task));
}

TEST_CASE("greedy labeling consumes each gold action once") {
  auto task = one_gold_task();
  ToolCall gold = task.gold_critical_actions[0].call;
  trajectory::Trajectory t;
  t.begin({});
  t.add_tool_execution(1, gold, "{}", true, false, false, "a", "b");
  t.add_tool_execution(2, gold, "{}", true, false, false, "b", "b");
  auto labels = metrics::label_critical(t, task);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].correct);
  CHECK(labels[0].gold_index == 0);
  CHECK_FALSE(labels[1].correct);
}

TEST_CASE("ratios report null on empty denominators") {
  CHECK_FALSE(metrics::Ratio{0, 0}.value());
  CHECK(metrics::compute_cap({}) == std::nullopt);
  auto task = one_gold_task();
  trajectory::Trajectory t;
  t.begin({});
  t.end(trajectory::Outcome::stopped, "h0");
  std::vector<metrics::EpisodeRef> refs = {{&t, &task, 1}};
  CHECK_FALSE(metrics::compute_cap(refs));
  CHECK(metrics::compute_car(refs) == 0.0);
}

TEST_CASE("decision counts group a consultation under its final verdict") {
  ToolCall c = make_tool_call("cancel_pending_order", {{"order_id", "#W1"}, {"reason", "no longer needed"}});
  trajectory::Trajectory t;
  t.begin({});
  t.add_proposal(1, 0, roles::OperatorProposal::invoke(c));
  t.add_director(1, 1, {roles::Stage::state_review, roles::Verdict::REVISE, "x"}, c);
  t.add_director(1, 1, {roles::Stage::state_review, roles::Verdict::PASS, ""}, c);
  t.add_director(1, 1, {roles::Stage::action_gate, roles::Verdict::PASS, ""}, c);
  t.add_proposal(2, 0, roles::OperatorProposal::invoke(c));
  t.add_director(2, 2, {roles::Stage::action_gate, roles::Verdict::ABORT, "no"}, c);
  t.add_director(2, 0, {roles::Stage::action_gate, roles::Verdict::ABORT, "budget"}, c, true);
  auto d = metrics::decision_counts(t);
  CHECK(d.consultations == 2);
  CHECK(d.pass == 1);
  CHECK(d.abort == 1);
  CHECK(d.escalations == 1);
}

TEST_CASE("bucket boundaries on small inputs") {
  auto a = metrics::assign_buckets({10, 20, 30});
  CHECK(a.bucket == std::vector<int>{0, 1, 2});
  CHECK_FALSE(a.degenerate);
  a = metrics::assign_buckets({5, 5, 5, 5});
  CHECK(a.bucket == std::vector<int>{0, 0, 0, 0});
  CHECK(a.degenerate);
  a = metrics::assign_buckets({8, 2, 4, 6, 10, 12});
  CHECK(a.short_max == 4);
  CHECK(a.medium_max == 8);
  CHECK_THROWS_AS(metrics::assign_buckets({1, 2}), metrics::InsufficientTasks);
}

TEST_CASE("streaming accumulator equals the batch report on the fixture suite") {
  auto run = run_suite(config_for(control::Strategy::nod));
  auto refs = run.refs();
  metrics::Accumulator acc;
  for (const auto& r : refs) acc.add(r);
  auto rep = metrics::build_report("nod", refs);
  CHECK(acc.sr().num == rep.sr.num);
  CHECK(acc.cap().num == rep.cap.num);
  CHECK(acc.car().den == rep.car.den);
  CHECK(acc.records().size() == 12);
  std::string table = metrics::render_table({rep});
  CHECK(table.find("100.00") != std::string::npos);
}

TEST_CASE("trajectories round trip through JSONL") {
  auto run = run_suite(config_for(control::Strategy::nod));
  for (const auto& e : run.episodes) {
    auto text = e.trajectory.to_jsonl();
    auto back = trajectory::Trajectory::from_jsonl(text);
    CHECK(back.to_jsonl() == text);
    CHECK(back.outcome() == e.trajectory.outcome());
    CHECK(trajectory::dialogue_length(back) == trajectory::dialogue_length(e.trajectory));
  }
}

TEST_CASE("judge replies are strict and fail safe after two bad replies") {
  auto l = judge::parse_judge_reply(R"({"label": "tool_hallucination", "reason": "r", "evidence": "e"})");
  CHECK(l.label == judge::Label::tool_hallucination);
  CHECK_THROWS_AS(judge::parse_judge_reply(R"({"label": "not_a_label", "reason": "", "evidence": ""})"),
                  judge::JudgeParseFailure);

  const auto& task = suite_task("p1_camera_variant");
  auto traj = trajectory::Trajectory::load(fixtures() / "transcripts/p1_camera_variant__vanilla.jsonl");
  REQUIRE_FALSE(metrics::evaluate_success(traj, task));
  backends::ScriptedBackend junk("j", backends::rules_from_json(Json::parse(
      R"([{"when": [], "response_json": {"label": "not_a_label", "reason": "", "evidence": ""}}])")));
  auto fallback = judge::label_failure(traj, task, junk);
  CHECK(fallback.label == judge::Label::other);
  CHECK(fallback.flagged);
  CHECK(junk.calls_made() == 2);

  auto lib = scenarios::script_library(task);
  backends::ScriptedBackend scripted("scripted:judge", lib.rules_for("judge"));
  CHECK(judge::label_failure(traj, task, scripted).label == judge::Label::policy_violation);

  auto good = trajectory::Trajectory::load(fixtures() / "transcripts/p1_camera_variant__nod.jsonl");
  CHECK_THROWS_AS(judge::label_failure(good, task, scripted), judge::JudgePrecondition);
}

TEST_CASE("judge summary rolls up three failure modes") {
  std::vector<judge::LabeledEpisode> labeled = {
      {"a", 1, "a.jsonl", {judge::Label::policy_violation, "", "", false}},
      {"b", 1, "b.jsonl", {judge::Label::safe_termination, "", "", false}},
  };
  auto s = judge::summarize(4, labeled);
  CHECK(s.failed == 2);
  Json j = judge::to_json(s);
  CHECK(j.dump().find("policy_violation") != std::string::npos);
  auto sample = judge::sample_for_audit(labeled, 1, 3);
  CHECK(sample.size() == 1);
  CHECK(sample[0].task_id == judge::sample_for_audit(labeled, 1, 3)[0].task_id);
}

TEST_CASE("episode seeds are a pure function of their inputs") {
  CHECK(cli::episode_seed(7, "p1_camera_variant", 1) == cli::episode_seed(7, "p1_camera_variant", 1));
  CHECK(cli::episode_seed(7, "p1_camera_variant", 1) != cli::episode_seed(7, "p1_camera_variant", 2));
  CHECK(cli::episode_seed(7, "p1_camera_variant", 1) != cli::episode_seed(8, "p1_camera_variant", 1));
  CHECK(cli::episode_seed(7, "p1_camera_variant", 1) != cli::episode_seed(7, "p2_foreign_order", 1));
}

TEST_CASE("run directories are never overwritten") {
  auto dir = temp_dir("run");
  cli::RunConfig rc;
  rc.tasks = "c1_*";
  rc.trials = 1;
  rc.out = dir;
  auto res = cli::cmd_run(rc);
  CHECK(res.episodes.size() == 1);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK_THROWS_AS(cli::cmd_run(rc), cli::RunError);

  auto loaded = cli::load_run(dir);
  CHECK(loaded.trajectories.size() == 1);
  Json j;
  std::string table = cli::cmd_report({dir}, dir, &j);
  CHECK(table.find("nod") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("nodctl exit codes") {
  auto exit_of = [](std::vector<std::string> args) {
    args.insert(args.begin(), "nodctl");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::main(static_cast<int>(argv.size()), argv.data());
  };
  auto dir = temp_dir("cli");
  CHECK(exit_of({"run", "--strategy", "turbo", "--out", dir.string()}) == 2);
  CHECK_FALSE(std::filesystem::exists(dir));
  CHECK(exit_of({"validate", (fixtures() / "tasks/retail/c1_cancel.json").string()}) == 0);
  CHECK(exit_of({"replay", (fixtures() / "transcripts/h1_payment_method__nod.jsonl").string()}) == 0);
}
