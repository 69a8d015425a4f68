// comply/planner.hpp - Goals, bounded-lookahead candidates, label algebra and selection
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comply/env/environment.hpp"
#include "comply/grounder.hpp"

namespace comply
{

// ---------------------------------------------------------------------------
// Value knowledge base
// ---------------------------------------------------------------------------

/// constraintId -> priority (higher is more important). Absent entries stay absent.
struct ValueKB
{
  std::map<std::string, std::int64_t> priorities;

  std::optional<std::int64_t> get(const std::string & id) const
  {
    auto it = priorities.find(id);
    if (it == priorities.end()) return std::nullopt;
    return it->second;
  }

  /// True when both have priorities and they differ.
  bool ordered(const std::string & a, const std::string & b) const
  {
    auto pa = get(a);
    auto pb = get(b);
    return pa && pb && *pa != *pb;
  }

  /// Records that `winner` outranks `loser`, adjusting only what is needed.
  void install(const std::string & winner, const std::string & loser)
  {
    auto pw = get(winner);
    auto pl = get(loser);
    if (!pw && !pl) {
      priorities[winner] = 1;
      priorities[loser] = 0;
    } else if (pw && !pl) {
      priorities[loser] = *pw - 1;
    } else if (!pw && pl) {
      priorities[winner] = *pl + 1;
    } else if (*pw <= *pl) {
      priorities[winner] = *pl + 1;
    }
  }
};

/// Constraint-declared priorities, overridden by the scenario's values block.
inline ValueKB merge_kb(
  const std::vector<InternalConstraint> & constraints, const std::map<std::string, std::int64_t> & values)
{
  ValueKB kb;
  for (const auto & c : constraints) {
    if (c.priority) kb.priorities[c.id] = *c.priority;
  }
  for (const auto & [id, p] : values) kb.priorities[id] = p;
  return kb;
}

// ---------------------------------------------------------------------------
// Goals
// ---------------------------------------------------------------------------

struct Goal
{
  enum class Kind { maintain, restore, task };

  Kind kind = Kind::maintain;
  std::string constraint_id;  // empty for task goals
  std::optional<Condition> expression;  // holds clause with variables replaced by entity ids
  std::string description;
};

inline const char * to_string(Goal::Kind k)
{
  switch (k) {
    case Goal::Kind::maintain: return "maintain";
    case Goal::Kind::restore: return "restore";
    case Goal::Kind::task: return "task";
  }
  return "?";
}

namespace detail
{
inline void substitute(Term & t, const std::map<std::string, std::string> & b)
{
  if (t.kind == Term::Kind::attribute) {
    auto it = b.find(t.var);
    if (it != b.end()) t.var = it->second;
  }
  for (auto & o : t.operands) substitute(o, b);
}

inline void substitute(Condition & c, const std::map<std::string, std::string> & b)
{
  for (auto & t : c.terms) substitute(t, b);
  for (auto & k : c.children) substitute(k, b);
}
}  // namespace detail

/// Compliant hard evaluations become maintain goals, violated ones restore goals.
inline std::vector<Goal> constraints_to_goals(
  const std::vector<ConstraintEvaluation> & evaluations,
  const std::map<std::string, const InternalConstraint *> & constraints)
{
  std::vector<Goal> out;
  for (const auto & ev : evaluations) {
    auto it = constraints.find(ev.grounding.constraint_id);
    if (it == constraints.end() || !is_hard(it->second->modality)) continue;
    if (ev.status == Compliance::unknown) continue;
    Goal g;
    g.kind = ev.status == Compliance::compliant ? Goal::Kind::maintain : Goal::Kind::restore;
    g.constraint_id = ev.grounding.constraint_id;
    std::map<std::string, std::string> b(ev.grounding.bindings.begin(), ev.grounding.bindings.end());
    Condition expr = it->second->holds;
    detail::substitute(expr, b);
    if (it->second->modality == Modality::forbid) expr = Condition::negate(std::move(expr));
    g.description = print_condition(expr);
    g.expression = std::move(expr);
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Candidates and labels
// ---------------------------------------------------------------------------

enum class Label { required_by, prohibited_by, desirable_for, undesirable_for, enables_grounding, repairs, achieves_task };

inline const char * to_string(Label l)
{
  switch (l) {
    case Label::required_by: return "requiredBy";
    case Label::prohibited_by: return "prohibitedBy";
    case Label::desirable_for: return "desirableFor";
    case Label::undesirable_for: return "undesirableFor";
    case Label::enables_grounding: return "enablesGrounding";
    case Label::repairs: return "repairs";
    case Label::achieves_task: return "achievesTask";
  }
  return "?";
}

/// Score contribution of one label. Hard labels do not score.
inline int label_weight(Label l)
{
  switch (l) {
    case Label::desirable_for:
    case Label::enables_grounding:
    case Label::repairs:
    case Label::achieves_task: return 1;
    case Label::undesirable_for: return -1;
    case Label::required_by:
    case Label::prohibited_by: return 0;
  }
  return 0;
}

enum class Provenance { planner, measurement, mitigation };

inline const char * to_string(Provenance p)
{
  switch (p) {
    case Provenance::planner: return "planner";
    case Provenance::measurement: return "measurement";
    case Provenance::mitigation: return "mitigation";
  }
  return "?";
}

/// Constraint id used by the task label.
inline const std::string kTaskLabelId = "task";

struct Candidate
{
  std::vector<Action> plan;
  std::set<std::pair<std::string, Label>> labels;
  int score = 0;
  Provenance provenance = Provenance::planner;
  bool achieves_task = false;  // the whole plan reaches the task goal
  /// (measure now, projected measure) for currently violated hard constraints.
  std::map<std::string, std::pair<Number, Number>> measures;

  const Action & first() const { return plan.front(); }

  bool has(Label l) const
  {
    return std::any_of(labels.begin(), labels.end(), [&](const auto & p) { return p.second == l; });
  }

  bool has(const std::string & id, Label l) const { return labels.count({id, l}) > 0; }

  std::set<std::string> with(Label l) const
  {
    std::set<std::string> out;
    for (const auto & [id, lab] : labels) {
      if (lab == l) out.insert(id);
    }
    return out;
  }

  /// Desirable and undesirable labels at once.
  bool mixed() const { return has(Label::desirable_for) && has(Label::undesirable_for); }

  /// Required and prohibited labels at once.
  bool label_conflict() const { return has(Label::required_by) && has(Label::prohibited_by); }

  void rescore()
  {
    score = 0;
    for (const auto & [id, l] : labels) score += label_weight(l);
  }

  std::string plan_str() const
  {
    std::string s;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      if (i) s += ";";
      s += plan[i].str();
    }
    return s;
  }

  std::string labels_str() const
  {
    std::string s;
    for (const auto & [id, l] : labels) {
      if (!s.empty()) s += ",";
      s += std::string(to_string(l)) + "(" + id + ")";
    }
    return s.empty() ? "-" : s;
  }
};

/// Labels a candidate by projecting its first action from the grounded situation.
/// `state` must be at the grounded situation; it is restored before returning.
inline void label_candidate(
  Candidate & cand, SearchState & state, const Environment & env,
  const std::set<std::string> & enabled = {})
{
  const GroundingSet & gs = state.grounding();
  const auto patch = env.project(state.table(), cand.first());
  state.apply(patch);
  const auto & now = gs.tallies;
  const auto & next = state.tallies();
  for (std::size_t i = 0; i < gs.constraints.size(); ++i) {
    const InternalConstraint & c = gs.constraints[i]->def;
    if (!now[i].error.empty()) continue;
    if (is_hard(c.modality)) {
      const Compliance a = now[i].status();
      const Compliance b = next[i].status();
      // A step that shrinks an existing violation is a repair, not a prohibition.
      const bool improving = a == Compliance::violated && b == Compliance::violated && next[i].measure < now[i].measure;
      if (b == Compliance::violated && !improving) cand.labels.insert({c.id, Label::prohibited_by});
      if (a == Compliance::violated && b == Compliance::compliant) {
        cand.labels.insert({c.id, Label::required_by});
      }
      if (a == Compliance::violated) cand.measures[c.id] = {now[i].measure, next[i].measure};
    } else if (next[i].status() != Compliance::unknown && next[i].groundings > 0) {
      if (c.modality == Modality::prefer && next[i].holds_true == next[i].groundings) {
        cand.labels.insert({c.id, Label::desirable_for});
      }
      if (c.modality == Modality::avoid && next[i].holds_true > 0) {
        cand.labels.insert({c.id, Label::undesirable_for});
      }
    }
  }
  for (const auto & id : enabled) cand.labels.insert({id, Label::enables_grounding});
  if (cand.achieves_task || env.task_achieved(state.table())) {
    cand.labels.insert({kTaskLabelId, Label::achieves_task});
  }
  state.undo();
  cand.rescore();
}

/// +1 per open violation whose measure the candidate strictly decreases, provided the
/// candidate is prohibited by nothing except that constraint.
inline void repair_bias(const std::set<std::string> & open_violations, std::vector<Candidate> & candidates)
{
  for (auto & cand : candidates) {
    const auto prohibited = cand.with(Label::prohibited_by);
    for (const auto & id : open_violations) {
      auto it = cand.measures.find(id);
      if (it == cand.measures.end() || !(it->second.second < it->second.first)) continue;
      if (std::any_of(prohibited.begin(), prohibited.end(), [&](const std::string & p) { return p != id; })) {
        continue;
      }
      cand.labels.insert({id, Label::repairs});
    }
    cand.rescore();
  }
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

struct Impasse
{
  enum class Kind { no_acceptable_candidate, label_conflict };

  Kind kind = Kind::no_acceptable_candidate;
  std::set<std::string> involved;
  std::vector<Candidate> candidates;
};

inline const char * to_string(Impasse::Kind k)
{
  return k == Impasse::Kind::no_acceptable_candidate ? "noAcceptableCandidate" : "labelConflict";
}

struct Decision
{
  std::optional<Candidate> chosen;
  std::vector<Candidate> runners_up;
  std::optional<Impasse> impasse;
};

/// Higher score first, then lexicographic first action, then shorter plan, then plan text.
inline bool better(const Candidate & a, const Candidate & b)
{
  if (a.score != b.score) return a.score > b.score;
  const std::string fa = a.first().str();
  const std::string fb = b.first().str();
  if (fa != fb) return fa < fb;
  if (a.plan.size() != b.plan.size()) return a.plan.size() < b.plan.size();
  return a.plan_str() < b.plan_str();
}

/// The desirable and undesirable sides of a mixed candidate, if some pair across the
/// sides lacks a strict priority ordering.
inline std::optional<std::set<std::string>> unordered_sides(const Candidate & c, const ValueKB & kb)
{
  if (!c.mixed()) return std::nullopt;
  const auto plus = c.with(Label::desirable_for);
  const auto minus = c.with(Label::undesirable_for);
  for (const auto & p : plus) {
    for (const auto & m : minus) {
      if (!kb.ordered(p, m)) {
        std::set<std::string> all = plus;
        all.insert(minus.begin(), minus.end());
        return all;
      }
    }
  }
  return std::nullopt;
}

inline Decision select(const std::vector<Candidate> & candidates, const ValueKB & kb)
{
  Decision d;
  std::vector<const Candidate *> ok;
  std::set<std::string> prohibiting;
  for (const auto & c : candidates) {
    auto p = c.with(Label::prohibited_by);
    if (p.empty()) ok.push_back(&c);
    prohibiting.insert(p.begin(), p.end());
  }
  if (ok.empty()) {
    if (!candidates.empty()) {
      d.impasse = Impasse{Impasse::Kind::no_acceptable_candidate, prohibiting, candidates};
    } else {
      d.impasse = Impasse{Impasse::Kind::no_acceptable_candidate, {}, {}};
    }
    return d;
  }
  std::stable_sort(ok.begin(), ok.end(), [](const Candidate * a, const Candidate * b) { return better(*a, *b); });
  if (auto sides = unordered_sides(*ok.front(), kb)) {
    d.impasse = Impasse{Impasse::Kind::label_conflict, *sides, candidates};
    return d;
  }
  d.chosen = *ok.front();
  for (std::size_t i = 1; i < ok.size(); ++i) d.runners_up.push_back(*ok[i]);
  return d;
}

// ---------------------------------------------------------------------------
// Candidate generation
// ---------------------------------------------------------------------------

struct SearchLimits
{
  std::int64_t depth = 3;
  std::int64_t node_budget = 200000;
};

namespace detail
{

/// Depth-limited forward search over projected states. Steps that newly violate a
/// grounding are pruned. With choice groups the search branches on the most constrained
/// group and stops at the first plan reaching the task; otherwise it keeps, per first
/// action, the shortest plan satisfying `accept`.
template <class Accept>
class PlanSearch
{
public:
  PlanSearch(SearchState & state, const Environment & env, SearchLimits limits, Accept accept)
  : state_(state), env_(env), limits_(limits), accept_(std::move(accept))
  {
  }

  std::map<std::string, std::vector<Action>> run()
  {
    std::vector<Action> path;
    const auto acts = env_.actions(state_.table());
    grouped_ = !acts.empty() && env_.choice_group(acts.front()).has_value();
    dfs(path);
    return best_;
  }

  bool exhausted() const { return nodes_ >= limits_.node_budget; }

private:
  void consider(const std::vector<Action> & path)
  {
    auto & slot = best_[path.front().str()];
    if (slot.empty() || path.size() < slot.size()) slot = path;
  }

  void dfs(std::vector<Action> & path)
  {
    if (done_ || ++nodes_ > limits_.node_budget) return;
    if (!path.empty() && accept_(state_)) {
      consider(path);
      if (grouped_) done_ = true;
      return;
    }
    if (static_cast<std::int64_t>(path.size()) >= limits_.depth) return;
    const auto acts = env_.actions(state_.table());
    if (!grouped_) {
      for (const auto & a : acts) {
        if (!state_.apply(env_.project(state_.table(), a))) {
          path.push_back(a);
          dfs(path);
          path.pop_back();
        }
        state_.undo();
        if (done_) return;
      }
      return;
    }
    // Most constrained group first; an empty group is a dead end.
    std::map<std::string, std::vector<Action>> legal;
    std::vector<std::string> order;
    for (const auto & a : acts) {
      const std::string g = *env_.choice_group(a);
      if (!legal.count(g)) order.push_back(g);
      auto & v = legal[g];
      if (!state_.apply(env_.project(state_.table(), a))) v.push_back(a);
      state_.undo();
    }
    const std::string * pick = nullptr;
    for (const auto & g : order) {
      if (legal[g].empty()) return;
      if (!pick || legal[g].size() < legal[*pick].size()) pick = &g;
    }
    if (!pick) return;
    for (const auto & a : legal[*pick]) {
      state_.apply(env_.project(state_.table(), a));
      path.push_back(a);
      dfs(path);
      path.pop_back();
      state_.undo();
      if (done_) return;
    }
  }

  SearchState & state_;
  const Environment & env_;
  SearchLimits limits_;
  Accept accept_;
  bool grouped_ = false;
  bool done_ = false;
  std::int64_t nodes_ = 0;
  std::map<std::string, std::vector<Action>> best_;
};

}  // namespace detail

/// Plans (keyed by first action) that reach a restore or task goal within the limits.
inline std::map<std::string, std::vector<Action>> search_goal_plans(
  SearchState & state, const Environment & env, const std::vector<Goal> & goals, SearchLimits limits)
{
  std::vector<int> restore;
  bool task = false;
  for (const auto & g : goals) {
    if (g.kind == Goal::Kind::task) task = true;
    if (g.kind == Goal::Kind::restore) {
      const int i = state.grounding().index_of(g.constraint_id);
      if (i >= 0 && std::find(restore.begin(), restore.end(), i) == restore.end()) restore.push_back(i);
    }
  }
  if (restore.empty() && !task) return {};
  auto accept = [&](const SearchState & s) {
    if (task && env.task_achieved(s.table())) return true;
    for (int i : restore) {
      if (s.tallies()[static_cast<std::size_t>(i)].status() == Compliance::compliant) return true;
    }
    return false;
  };
  detail::PlanSearch search(state, env, limits, accept);
  return search.run();
}

/// Plans (keyed by first action) ending in a state with no violated grounding.
inline std::map<std::string, std::vector<Action>> search_clean_plans(
  SearchState & state, const Environment & env, SearchLimits limits)
{
  auto accept = [](const SearchState & s) { return s.violations() == 0; };
  detail::PlanSearch search(state, env, limits, accept);
  return search.run();
}

/// Whether `plan` stays applicable, never newly violates a grounding and ends with the
/// task achieved. Only meaningful for environments with choice groups, where the search
/// stops at the first such plan; a surviving plan from the previous tick is then reused.
inline bool plan_reaches_task(
  SearchState & state, const Environment & env, const std::vector<Action> & plan, std::int64_t depth)
{
  const auto acts = env.actions(state.table());
  if (acts.empty() || !env.choice_group(acts.front())) return false;
  if (static_cast<std::int64_t>(plan.size()) > depth) return false;
  std::size_t applied = 0;
  bool ok = true;
  for (const auto & a : plan) {
    const auto now = env.actions(state.table());
    if (std::find(now.begin(), now.end(), a) == now.end()) {
      ok = false;
      break;
    }
    ++applied;
    if (state.apply(env.project(state.table(), a))) {
      ok = false;
      break;
    }
  }
  ok = ok && env.task_achieved(state.table());
  for (std::size_t i = 0; i < applied; ++i) state.undo();
  return ok;
}

/// Depth-1 candidates for every applicable action, one candidate per measurement
/// proposal, and deeper plans reaching restore or task goals. Candidates come back
/// labeled and sorted by first action, then plan length.
inline std::vector<Candidate> generate_candidates(
  SearchState & state, const Environment & env, const std::vector<Goal> & goals,
  const std::vector<MeasurementProposal> & proposals, SearchLimits limits,
  const std::vector<Action> * hint = nullptr)
{
  std::vector<Candidate> out;
  for (const auto & a : env.actions(state.table())) {
    Candidate c;
    c.plan = {a};
    label_candidate(c, state, env);
    out.push_back(std::move(c));
  }
  for (const auto & p : proposals) {
    Candidate c;
    c.plan = {p.action};
    c.provenance = Provenance::measurement;
    label_candidate(c, state, env, p.enables);
    out.push_back(std::move(c));
  }
  if (limits.depth > 1) {
    std::map<std::string, std::vector<Action>> plans;
    if (hint && !hint->empty() && plan_reaches_task(state, env, *hint, limits.depth)) {
      plans[hint->front().str()] = *hint;
    } else {
      plans = search_goal_plans(state, env, goals, limits);
    }
    for (const auto & [first, plan] : plans) {
      if (plan.size() < 2) continue;
      Candidate c;
      c.plan = plan;
      c.achieves_task = std::any_of(goals.begin(), goals.end(), [](const Goal & g) {
        return g.kind == Goal::Kind::task;
      }) && [&] {
        for (const auto & a : plan) state.apply(env.project(state.table(), a));
        const bool hit = env.task_achieved(state.table());
        for (std::size_t i = 0; i < plan.size(); ++i) state.undo();
        return hit;
      }();
      label_candidate(c, state, env);
      out.push_back(std::move(c));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate & a, const Candidate & b) {
    const std::string fa = a.first().str();
    const std::string fb = b.first().str();
    if (fa != fb) return fa < fb;
    return a.plan.size() < b.plan.size();
  });
  return out;
}

/// Replanning candidates: plans of up to `depth` steps with no new violation that end
/// violation-free. Constraints they repair are labeled requiredBy instead of prohibitedBy.
inline std::vector<Candidate> replan_candidates(
  SearchState & state, const Environment & env, SearchLimits limits)
{
  std::vector<Candidate> out;
  const auto plans = search_clean_plans(state, env, limits);
  for (const auto & [first, plan] : plans) {
    Candidate c;
    c.plan = plan;
    c.provenance = Provenance::mitigation;
    label_candidate(c, state, env);
    for (const auto & id : c.with(Label::prohibited_by)) {
      c.labels.erase({id, Label::prohibited_by});
      c.labels.insert({id, Label::required_by});
    }
    c.rescore();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace comply
