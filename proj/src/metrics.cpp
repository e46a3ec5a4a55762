#include "nod/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace nod::metrics {

using trajectory::Trajectory;

std::vector<CriticalLabel> label_critical(const Trajectory& t, const scenarios::TaskSpec& task) {
  std::vector<bool> used(task.gold_critical_actions.size(), false);
  std::vector<CriticalLabel> out;
  for (const auto& a : t.executed_actions()) {
    if (!a.was_critical) continue;
    CriticalLabel l;
    l.event_index = a.event_index;
    l.call = a.call;
    if (!a.error) {
      for (std::size_t g = 0; g < used.size(); ++g) {
        if (!used[g] && scenarios::matches(task.gold_critical_actions[g], a.call)) {
          used[g] = true;
          l.correct = true;
          l.gold_index = static_cast<int>(g);
          break;
        }
      }
    }
    out.push_back(std::move(l));
  }
  return out;
}

bool evaluate_success(const Trajectory& t, const scenarios::TaskSpec& task) {
  if (!t.complete()) return false;
  if (t.db_final_hash() != task.gold_final_db_hash) return false;
  std::size_t matched = 0;
  for (const auto& l : label_critical(t, task)) matched += l.correct ? 1 : 0;
  return matched == task.gold_critical_actions.size();
}

TaskRecord task_record(const EpisodeRef& ref) {
  TaskRecord r;
  r.task_id = ref.task->task_id;
  r.trial = ref.trial;
  r.outcome = ref.trajectory->outcome() ? std::string(trajectory::to_string(*ref.trajectory->outcome())) : "incomplete";
  r.success = evaluate_success(*ref.trajectory, *ref.task);
  for (const auto& l : label_critical(*ref.trajectory, *ref.task)) {
    ++r.executed_critical;
    r.correct_critical += l.correct ? 1 : 0;
  }
  r.gold_required = static_cast<int>(ref.task->gold_critical_actions.size());
  r.decisions = decision_counts(*ref.trajectory);
  r.agent_turns = static_cast<int>(ref.trajectory->proposals().size());
  r.dialogue_length = trajectory::dialogue_length(*ref.trajectory);
  return r;
}

std::optional<double> compute_cap(const std::vector<EpisodeRef>& runs) {
  Ratio r;
  for (const auto& ref : runs)
    for (const auto& l : label_critical(*ref.trajectory, *ref.task)) {
      ++r.den;
      r.num += l.correct ? 1 : 0;
    }
  return r.value();
}

std::optional<double> compute_car(const std::vector<EpisodeRef>& runs) {
  Ratio r;
  for (const auto& ref : runs) {
    r.den += static_cast<long long>(ref.task->gold_critical_actions.size());
    for (const auto& l : label_critical(*ref.trajectory, *ref.task)) r.num += l.correct ? 1 : 0;
  }
  return r.value();
}

DecisionCounts decision_counts(const Trajectory& t) {
  DecisionCounts c;
  std::map<int, roles::Verdict> last;
  for (const auto& d : t.director_events()) {
    if (d.escalation) {
      ++c.escalations;
      continue;
    }
    last[d.consultation] = d.verdict;
  }
  for (const auto& [k, v] : last) {
    ++c.consultations;
    if (v == roles::Verdict::PASS) ++c.pass;
    else if (v == roles::Verdict::REVISE) ++c.revise;
    else ++c.abort;
  }
  return c;
}

namespace {

DecisionStats finish(long long turns, long long pass, long long revise, long long abort, long long consultations) {
  DecisionStats s;
  s.agent_turns = turns;
  s.trigger_count = consultations;
  s.revise_count = revise;
  s.trigger_share = Ratio{consultations, turns}.value();
  s.pass_pct = Ratio{pass, turns}.value();
  s.revise_pct = Ratio{revise, turns}.value();
  s.abort_pct = Ratio{abort, turns}.value();
  return s;
}

}  // namespace

DecisionStats decision_stats(const std::vector<const Trajectory*>& runs) {
  long long turns = 0, pass = 0, revise = 0, abort = 0, cons = 0;
  for (const Trajectory* t : runs) {
    turns += static_cast<long long>(t->proposals().size());
    DecisionCounts c = decision_counts(*t);
    pass += c.pass;
    revise += c.revise;
    abort += c.abort;
    cons += c.consultations;
  }
  return finish(turns, pass, revise, abort, cons);
}

AbortDiagnostics abort_diagnostics(const std::vector<EpisodeRef>& runs,
                                   const std::map<std::string, double>& baseline_sr_by_task) {
  AbortDiagnostics d;
  for (const auto& ref : runs) {
    const Trajectory& t = *ref.trajectory;
    std::size_t last_abort = 0;
    bool any_abort = false;
    for (const auto& e : t.director_events()) {
      if (e.verdict != roles::Verdict::ABORT) continue;
      any_abort = true;
      last_abort = e.event_index;
      ++d.abort_decisions;
      auto it = baseline_sr_by_task.find(ref.task->task_id);
      if (it == baseline_sr_by_task.end())
        throw std::invalid_argument("no baseline success rate for task " + ref.task->task_id);
      if (it->second < kHardThreshold) ++d.hard_aborts;
    }
    if (any_abort && t.outcome() == trajectory::Outcome::aborted) {
      ++d.abort_trajectories;
      for (const auto& l : label_critical(t, *ref.task))
        if (!l.correct && l.event_index < last_abort) {
          ++d.error_bearing;
          break;
        }
    }
  }
  d.hard_rate = Ratio{d.hard_aborts, d.abort_decisions}.value();
  d.error_bearing_rate = Ratio{d.error_bearing, d.abort_trajectories}.value();
  return d;
}

BucketAssignment assign_buckets(const std::vector<int>& lengths) {
  const std::size_t n = lengths.size();
  if (n < 3) throw InsufficientTasks("turn buckets need at least 3 tasks, got " + std::to_string(n));
  std::vector<int> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  std::size_t k1 = (n + 2) / 3;
  std::size_t k2 = k1 + (n - k1 + 1) / 2;
  BucketAssignment a;
  a.short_max = sorted[k1 - 1];
  a.medium_max = sorted[k2 - 1];
  int counts[3] = {0, 0, 0};
  for (int len : lengths) {
    int b = len <= a.short_max ? 0 : len <= a.medium_max ? 1 : 2;
    a.bucket.push_back(b);
    ++counts[b];
  }
  a.degenerate = counts[0] == 0 || counts[1] == 0 || counts[2] == 0;
  return a;
}

std::map<std::string, double> sr_by_task(const std::vector<EpisodeRef>& runs) {
  std::map<std::string, std::pair<int, int>> acc;
  for (const auto& ref : runs) {
    auto& [ok, total] = acc[ref.task->task_id];
    ok += evaluate_success(*ref.trajectory, *ref.task) ? 1 : 0;
    ++total;
  }
  std::map<std::string, double> out;
  for (const auto& [id, p] : acc) out[id] = static_cast<double>(p.first) / p.second;
  return out;
}

BucketTable turn_buckets(const std::vector<EpisodeRef>& baseline, const std::vector<EpisodeRef>& treatment) {
  std::map<std::string, std::pair<int, int>> length;  // task -> (trial, length)
  for (const auto& ref : baseline) {
    int len = ref.task->baseline_dialogue_length ? *ref.task->baseline_dialogue_length
                                                 : trajectory::dialogue_length(*ref.trajectory);
    auto it = length.find(ref.task->task_id);
    if (it == length.end() || ref.trial < it->second.first) length[ref.task->task_id] = {ref.trial, len};
  }
  std::vector<std::string> ids;
  std::vector<int> lens;
  for (const auto& [id, p] : length) {
    ids.push_back(id);
    lens.push_back(p.second);
  }
  BucketAssignment a = assign_buckets(lens);
  auto base_sr = sr_by_task(baseline);
  auto treat_sr = sr_by_task(treatment);

  BucketTable table;
  table.degenerate = a.degenerate;
  const char* names[3] = {"short", "medium", "long"};
  for (int b = 0; b < 3; ++b) {
    BucketRow row;
    row.name = names[b];
    double bs = 0, ts = 0;
    int bn = 0, tn = 0;
    bool first = true;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (a.bucket[i] != b) continue;
      row.tasks.push_back(ids[i]);
      row.min_length = first ? lens[i] : std::min(row.min_length, lens[i]);
      row.max_length = first ? lens[i] : std::max(row.max_length, lens[i]);
      first = false;
      if (auto it = base_sr.find(ids[i]); it != base_sr.end()) bs += it->second, ++bn;
      if (auto it = treat_sr.find(ids[i]); it != treat_sr.end()) ts += it->second, ++tn;
    }
    if (bn) row.baseline_sr = bs / bn;
    if (tn) row.treatment_sr = ts / tn;
    table.rows.push_back(std::move(row));
  }
  return table;
}

void Accumulator::add(const EpisodeRef& ref) {
  TaskRecord r = task_record(ref);
  ++episodes_;
  successes_ += r.success ? 1 : 0;
  executed_ += r.executed_critical;
  correct_ += r.correct_critical;
  required_ += r.gold_required;
  turns_ += r.agent_turns;
  pass_ += r.decisions.pass;
  revise_ += r.decisions.revise;
  abort_ += r.decisions.abort;
  consultations_ += r.decisions.consultations;
  records_.push_back(std::move(r));
}

DecisionStats Accumulator::decisions() const { return finish(turns_, pass_, revise_, abort_, consultations_); }

EvalReport build_report(const std::string& method, const std::vector<EpisodeRef>& runs,
                        const std::vector<EpisodeRef>* baseline) {
  Accumulator acc;
  for (const auto& r : runs) acc.add(r);
  EvalReport rep;
  rep.method = method;
  rep.per_task = acc.records();
  rep.sr = acc.sr();
  rep.cap = acc.cap();
  rep.car = acc.car();
  rep.decisions = acc.decisions();
  if (baseline && !baseline->empty()) {
    rep.aborts = abort_diagnostics(runs, sr_by_task(*baseline));
    try {
      rep.buckets = turn_buckets(*baseline, runs);
    } catch (const InsufficientTasks&) {
    }
  }
  return rep;
}

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json ratio_json(const Ratio& r) { return {{"num", r.num}, {"den", r.den}, {"value", opt(r.value())}}; }

std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

}  // namespace

Json to_json(const TaskRecord& r) {
  Json j = Json::object();
  j["task_id"] = r.task_id;
  j["trial"] = r.trial;
  j["outcome"] = r.outcome;
  j["success"] = r.success;
  j["executed_critical"] = r.executed_critical;
  j["correct_critical"] = r.correct_critical;
  j["gold_required"] = r.gold_required;
  j["decisions"] = {{"pass", r.decisions.pass},
                    {"revise", r.decisions.revise},
                    {"abort", r.decisions.abort},
                    {"consultations", r.decisions.consultations},
                    {"escalations", r.decisions.escalations}};
  j["agent_turns"] = r.agent_turns;
  j["dialogue_length"] = r.dialogue_length;
  return j;
}

Json to_json(const BucketTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"bucket", r.name},
                    {"min_length", r.tasks.empty() ? Json(nullptr) : Json(r.min_length)},
                    {"max_length", r.tasks.empty() ? Json(nullptr) : Json(r.max_length)},
                    {"tasks", r.tasks},
                    {"baseline_sr", opt(r.baseline_sr)},
                    {"treatment_sr", opt(r.treatment_sr)}});
  return {{"rows", rows}, {"degenerate", t.degenerate}};
}

Json to_json(const EvalReport& r) {
  Json j = Json::object();
  j["method"] = r.method;
  Json per = Json::array();
  for (const auto& t : r.per_task) per.push_back(to_json(t));
  j["per_task"] = per;
  Json agg = Json::object();
  agg["sr"] = ratio_json(r.sr);
  agg["cap"] = ratio_json(r.cap);
  agg["car"] = ratio_json(r.car);
  agg["decision_rates"] = {{"pass", opt(r.decisions.pass_pct)},
                           {"revise", opt(r.decisions.revise_pct)},
                           {"abort", opt(r.decisions.abort_pct)}};
  agg["director_trigger_share"] = opt(r.decisions.trigger_share);
  agg["agent_turns"] = r.decisions.agent_turns;
  agg["trigger_count"] = r.decisions.trigger_count;
  agg["revise_count"] = r.decisions.revise_count;
  agg["hard_rate"] = r.aborts ? opt(r.aborts->hard_rate) : Json(nullptr);
  agg["error_bearing_rate"] = r.aborts ? opt(r.aborts->error_bearing_rate) : Json(nullptr);
  agg["bucket_table"] = r.buckets ? to_json(*r.buckets) : Json(nullptr);
  j["aggregate"] = agg;
  return j;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::size_t w = 6;
  for (const auto& r : reports) w = std::max(w, r.method.size());
  auto pad = [](std::string s, std::size_t n, bool right) {
    if (s.size() >= n) return s;
    return right ? std::string(n - s.size(), ' ') + s : s + std::string(n - s.size(), ' ');
  };
  std::string out = pad("Method", w, false) + "  " + pad("CAP", 7, true) + "  " + pad("CAR", 7, true) + "  " +
                    pad("SR", 7, true) + "\n";
  out += std::string(w + 27, '-') + "\n";
  for (const auto& r : reports)
    out += pad(r.method, w, false) + "  " + pad(pct(r.cap.value()), 7, true) + "  " + pad(pct(r.car.value()), 7, true) +
           "  " + pad(pct(r.sr.value()), 7, true) + "\n";
  return out;
}

}  // namespace nod::metrics
