// comply/engine.hpp - Scenario validation and the per-tick compliance pipeline
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "comply/context.hpp"
#include "comply/env/driving.hpp"
#include "comply/env/sudoku.hpp"
#include "comply/grounder.hpp"
#include "comply/internalizer.hpp"
#include "comply/mitigator.hpp"
#include "comply/planner.hpp"
#include "comply/spec_lang.hpp"
#include "comply/trace.hpp"

namespace comply
{

/// Node budget for one tick's plan search.
inline constexpr std::int64_t kSearchNodeBudget = 200000;

/// Candidates listed one per trace line up to this count; above it only the count.
inline constexpr std::size_t kCandidateListLimit = 16;

struct RunResult
{
  std::vector<TraceEvent> trace;
  RunSummary summary;
  /// Ground truth at the start of every executed tick, then the final state.
  std::vector<WorldState> history;
  Outcome outcome = Outcome::running;
};

namespace detail
{

inline Diagnostic error_at(const std::string & file, SourcePos pos, std::string msg)
{
  return Diagnostic{Severity::error, file, pos, std::move(msg)};
}

inline Diagnostic warning_at(const std::string & file, SourcePos pos, std::string msg)
{
  return Diagnostic{Severity::warning, file, pos, std::move(msg)};
}

inline std::optional<std::int64_t> int_param(
  const EnvironmentDecl & env, const std::string & key, const std::string & file, std::vector<Diagnostic> & diags)
{
  auto it = env.params.find(key);
  if (it == env.params.end()) return std::nullopt;
  const Number * n = std::get_if<Number>(&it->second);
  if (!n || n->denominator() != 1) {
    diags.push_back(error_at(file, env.pos, "environment parameter " + key + " must be an integer"));
    return std::nullopt;
  }
  return n->numerator();
}

inline std::string join(const std::set<std::string> & xs, const char * empty = "-")
{
  std::string out;
  for (const auto & x : xs) {
    if (!out.empty()) out += ",";
    out += x;
  }
  return out.empty() ? std::string(empty) : out;
}

inline const char * yes_no(bool b) { return b ? "yes" : "no"; }

}  // namespace detail

/// Builds the scenario's environment or explains why it cannot.
inline std::unique_ptr<Environment> make_environment(const ScenarioSpec & spec, std::vector<Diagnostic> & diags)
{
  const std::string & file = spec.file;
  const EnvironmentDecl & decl = spec.environment;
  if (decl.kind == EnvironmentKind::sudoku) {
    if (!spec.facts.empty()) diags.push_back(detail::error_at(file, spec.facts.front().pos, "sudoku scenarios take no facts"));
    if (!spec.events.empty()) diags.push_back(detail::error_at(file, spec.events.front().pos, "sudoku scenarios take no events"));
    for (const auto & [k, v] : decl.params) {
      if (k != "size") diags.push_back(detail::error_at(file, decl.pos, "unknown sudoku parameter " + k));
    }
    std::string err;
    auto w = SudokuWorld::from_puzzle(decl.puzzle, &err);
    if (!w) {
      diags.push_back(detail::error_at(file, decl.pos, err));
      return nullptr;
    }
    if (auto size = detail::int_param(decl, "size", file, diags); size && *size != w->size()) {
      diags.push_back(detail::error_at(
        file, decl.pos, "puzzle has " + std::to_string(w->size()) + " rows but size is " + std::to_string(*size)));
    }
    if (has_errors(diags)) return nullptr;
    return w;
  }

  DrivingParams params;
  for (const auto & [k, v] : decl.params) {
    if (k != "length" && k != "goal" && k != "deadline") {
      diags.push_back(detail::error_at(file, decl.pos, "unknown driving parameter " + k));
    }
  }
  if (auto len = detail::int_param(decl, "length", file, diags)) {
    if (*len < 1) diags.push_back(detail::error_at(file, decl.pos, "length must be ≥ 1"));
    params.length = *len;
  }
  if (auto goal = detail::int_param(decl, "goal", file, diags)) params.goal = Number(*goal);
  if (auto dl = detail::int_param(decl, "deadline", file, diags)) {
    if (*dl < 1) diags.push_back(detail::error_at(file, decl.pos, "deadline must be ≥ 1"));
    params.deadline = *dl;
  }
  FactTable table;
  for (const auto & f : spec.facts) {
    if (table.has_entity(f.entity)) {
      diags.push_back(detail::error_at(file, f.pos, "duplicate entity " + f.entity));
      continue;
    }
    table.add_entity(f.entity, f.type);
    for (const auto & [a, v] : f.attrs) table.set(f.entity, a, v);
  }
  for (const auto & msg : DrivingWorld::validate(table)) diags.push_back(detail::error_at(file, {}, msg));
  std::set<std::string> known;
  for (const auto & f : spec.facts) known.insert(f.entity);
  for (const auto & ev : spec.events) {
    if (ev.kind == EventDecl::Kind::spawn) {
      known.insert(ev.entity);
      std::set<std::string> given;
      for (const auto & as : ev.assigns) given.insert(as.attr);
      for (const char * a : {"pos", "lane", "speed"}) {
        if (!given.count(a)) diags.push_back(detail::error_at(file, ev.pos, "spawn of " + ev.entity + " needs " + a));
      }
    } else if (!known.count(ev.entity)) {
      diags.push_back(detail::error_at(file, ev.pos, "event targets unknown entity " + ev.entity));
    }
  }
  for (const auto & h : spec.hidden) {
    if (h.entity != "*" && !known.count(h.entity)) {
      diags.push_back(detail::warning_at(file, h.pos, "hidden entry " + h.entity + "." + h.attr + " names no entity"));
    }
  }
  if (has_errors(diags)) return nullptr;
  return std::make_unique<DrivingWorld>(std::move(table), params, spec.events);
}

/// Runs one scenario. Construction validates; `run` executes until the episode ends or
/// maxTicks decisions have been made.
class Engine
{
public:
  /// Nullptr plus error diagnostics when the scenario cannot run.
  static std::unique_ptr<Engine> create(const ScenarioSpec & spec, std::vector<Diagnostic> & diags)
  {
    auto env = make_environment(spec, diags);
    if (!env) return nullptr;
    std::set<std::string> ids;
    for (const auto & c : spec.constraints) ids.insert(c.id);
    for (const auto & [id, p] : spec.values) {
      if (!ids.count(id)) diags.push_back(detail::warning_at(spec.file, {}, "values entry for unknown constraint " + id));
    }
    return std::unique_ptr<Engine>(new Engine(spec, std::move(env)));
  }

  const Environment & environment() const { return *env_; }

  RunResult run()
  {
    RunResult res;
    const std::int64_t max_ticks = spec_.run.max_ticks;
    while (env_->outcome() == Outcome::running && env_->world().tick < max_ticks) {
      res.history.push_back(env_->world());
      tick();
    }
    res.history.push_back(env_->world());
    res.outcome = env_->outcome();
    const char * outcome = res.outcome == Outcome::running ? "timeout" : to_string(res.outcome);
    trace_.emit(env_->world().tick, Stage::env_event,
                {{"event", "end"}, {"outcome", outcome}, {"ticks", std::to_string(env_->world().tick)},
                 {"scenario", spec_.name}, {"seed", std::to_string(spec_.run.seed)}});
    res.trace = trace_.ordered();
    res.summary = summarize(res.trace);
    return res;
  }

private:
  struct Pending
  {
    ConstraintSpec spec;
    InternalizationError error;
  };

  Engine(const ScenarioSpec & spec, std::unique_ptr<Environment> env)
  : spec_(spec), env_(std::move(env)), script_(spec.instructor), vocab_(spec.vocab)
  {
    for (const auto & h : spec.hidden) mask_.hidden.insert(Ref{h.entity, h.attr});
    onto_ = env_->ontology();
    for (const auto & r : spec.contexts) onto_.contexts.insert(r.tag);
    for (const auto & c : spec.constraints) {
      auto r = internalize(c, vocab_, onto_);
      if (auto * ok = std::get_if<InternalConstraint>(&r)) {
        active_.push_back(std::move(*ok));
      } else {
        pending_.push_back(Pending{c, std::get<InternalizationError>(r)});
      }
    }
    kb_.priorities.clear();
    for (const auto & c : spec.constraints) {
      if (c.priority) kb_.priorities[c.id] = *c.priority;
    }
    for (const auto & [id, p] : spec.values) kb_.priorities[id] = p;
    // Relevance answers tune the association store before the first tick.
    while (auto a = script_.take(InstructorAnswer::Kind::relevance, [](const InstructorAnswer &) { return true; })) {
      store_ = update_association(store_, a->constraint_id, a->tag, a->relevant ? +1 : -1);
    }
  }

  using Fields = std::vector<std::pair<std::string, std::string>>;

  void emit(Stage s, Fields f) { trace_.emit(env_->world().tick, s, std::move(f)); }

  const PreparedConstraint & prepared(const InternalConstraint & c, FactTable & table)
  {
    auto it = prepared_.find(c.id);
    if (it == prepared_.end()) it = prepared_.emplace(c.id, prepare(c, table.attrs())).first;
    return it->second;
  }

  void internalize_pending()
  {
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (auto delta = resolve_unmapped(it->error, script_)) {
        for (auto & [k, v] : *delta) vocab_[k] = v;
        auto r = internalize(it->spec, vocab_, onto_);
        if (auto * ok = std::get_if<InternalConstraint>(&r)) {
          emit(Stage::parked, {{"constraint", it->spec.id}, {"status", "taught"}, {"terms", describe(it->error)}});
          active_.push_back(std::move(*ok));
          it = pending_.erase(it);
          continue;
        }
        it->error = std::get<InternalizationError>(r);
      }
      emit(Stage::parked, {{"constraint", it->spec.id}, {"status", "parked"}, {"unmapped", describe(it->error)}});
      ++it;
    }
  }

  void tick()
  {
    const std::int64_t t = env_->world().tick;
    const std::int64_t staleness = spec_.run.staleness;

    // Perceive.
    std::vector<std::string> warnings;
    Situation situation = project(env_->world(), mask_, &warnings);
    {
      std::set<std::string> unknown;
      for (const auto & r : situation.unknown_refs()) unknown.insert(to_string(r));
      emit(Stage::perceive, {{"entities", std::to_string(situation.table.entity_count())},
                             {"facts", std::to_string(situation.observed_facts().size())},
                             {"unknown", detail::join(unknown)}});
    }

    // Context, internalization, relevance.
    situation.active_contexts = recognize_contexts(situation, spec_.contexts);
    emit(Stage::context, {{"active", detail::join(situation.active_contexts)}});
    internalize_pending();
    const auto relevant = filter_relevant(active_, situation.active_contexts, store_);

    // Ground, in priority order.
    std::vector<const InternalConstraint *> order;
    for (const auto & c : relevant) order.push_back(&c);
    std::stable_sort(order.begin(), order.end(), [&](const auto * a, const auto * b) {
      return grounding_order(*a, kb_.get(a->id), *b, kb_.get(b->id));
    });
    std::vector<const PreparedConstraint *> pcs;
    for (const auto * c : order) pcs.push_back(&prepared(*c, situation.table));
    const AttributeTable & attrs = situation.table.attrs();
    std::vector<char> mutable_attr(attrs.size() + 1, 0);
    for (std::size_t a = 0; a < attrs.size(); ++a) mutable_attr[a] = env_->is_mutable(attrs.name(static_cast<int>(a)));
    const GroundingSet gs = ground_all(pcs, situation.table, spec_.run.grounding_limit, [&](int a) {
      return a >= 0 && a < static_cast<int>(mutable_attr.size()) && mutable_attr[static_cast<std::size_t>(a)];
    });
    for (std::size_t i = 0; i < pcs.size(); ++i) {
      const ConstraintTally & tl = gs.tallies[i];
      Fields f{{"constraint", pcs[i]->def.id},
               {"groundings", std::to_string(tl.groundings)},
               {"filtered", std::to_string(tl.filtered)},
               {"partial", std::to_string(tl.partial)},
               {"violated", std::to_string(tl.violated)},
               {"status", to_string(tl.status())}};
      if (tl.truncated) f.emplace_back("truncated", "yes");
      if (!tl.error.empty()) f.emplace_back("error", tl.error);
      emit(Stage::ground, std::move(f));
    }

    // Violation records follow this tick's evaluations.
    for (std::size_t i = 0; i < pcs.size(); ++i) {
      const InternalConstraint & c = pcs[i]->def;
      if (!is_hard(c.modality)) continue;
      const Compliance st = gs.tallies[i].status();
      if (st == Compliance::violated && ledger_.open(c.id, t, ViolationCause::environment)) {
        emit(Stage::violation_open, {{"constraint", c.id}, {"cause", "environment"}});
      } else if (st == Compliance::compliant && ledger_.close(c.id, t)) {
        emit(Stage::violation_close, {{"constraint", c.id}});
      }
    }

    // Measurements and goals.
    const auto evaluations = evaluations_of(gs, situation.table);
    std::vector<ConstraintEvaluation> unknown_evs;
    for (const auto & ev : evaluations) {
      if (ev.status == Compliance::unknown) unknown_evs.push_back(ev);
    }
    const auto proposals = propose_measurements(unknown_evs, env_->catalog());
    std::map<std::string, const InternalConstraint *> by_id;
    for (const auto * c : order) by_id[c->id] = c;
    auto goals = constraints_to_goals(evaluations, by_id);
    if (auto task = env_->task()) goals.push_back(Goal{Goal::Kind::task, "", std::nullopt, *task});
    {
      int maintain = 0;
      int restore = 0;
      std::set<std::string> restore_ids;
      for (const auto & g : goals) {
        if (g.kind == Goal::Kind::maintain) ++maintain;
        if (g.kind == Goal::Kind::restore) {
          ++restore;
          restore_ids.insert(g.constraint_id);
        }
      }
      Fields f{{"maintain", std::to_string(maintain)}, {"restore", std::to_string(restore)},
               {"restoreIds", detail::join(restore_ids)}};
      if (auto task = env_->task()) f.emplace_back("task", *task);
      emit(Stage::goals, std::move(f));
    }

    // Candidates, labels, repair bias, selection.
    SearchState state(gs, situation.table);
    const SearchLimits limits{spec_.run.search_depth, kSearchNodeBudget};
    auto candidates = generate_candidates(state, *env_, goals, proposals, limits, hint_.empty() ? nullptr : &hint_);
    repair_bias(ledger_.open_ids(), candidates);
    {
      int prohibited = 0;
      for (const auto & c : candidates) prohibited += c.has(Label::prohibited_by);
      emit(Stage::candidates, {{"count", std::to_string(candidates.size())},
                               {"prohibited", std::to_string(prohibited)},
                               {"proposals", std::to_string(proposals.size())}});
      if (candidates.size() <= kCandidateListLimit) {
        for (const auto & c : candidates) {
          emit(Stage::candidates, {{"plan", c.plan_str()}, {"score", std::to_string(c.score)},
                                   {"provenance", to_string(c.provenance)}, {"labels", c.labels_str()}});
        }
      }
    }
    const Decision decision = select(candidates, kb_);
    if (decision.chosen) {
      emit(Stage::select, {{"chosen", decision.chosen->plan_str()},
                           {"score", std::to_string(decision.chosen->score)},
                           {"provenance", to_string(decision.chosen->provenance)},
                           {"labels", decision.chosen->labels_str()},
                           {"mixed", detail::yes_no(decision.chosen->mixed())}});
    } else {
      emit(Stage::select, {{"impasse", to_string(decision.impasse->kind)},
                           {"involved", detail::join(decision.impasse->involved)}});
    }

    std::optional<Candidate> chosen = decision.chosen;
    const auto conflicts = detect_conflicts(decision);
    for (const auto & c : conflicts) {
      emit(Stage::conflict, {{"kind", to_string(c.kind)}, {"involved", detail::join(c.involved)}});
    }
    if (!conflicts.empty()) {
      auto replan = [&]() {
        SearchLimits deeper = limits;
        deeper.depth = limits.depth + 2;
        auto out = replan_candidates(state, *env_, deeper);
        repair_bias(ledger_.open_ids(), out);
        return out;
      };
      MitigationContext ctx{kb_, script_, spec_.has_instructor, asked_, replan};
      const MitigationOutcome m = mitigate(conflicts.front(), candidates, ctx);
      for (const auto & q : m.queries) {
        emit(Stage::query, {{"pair", q.first + "," + q.second}, {"answer", q.winner.value_or("none")}});
      }
      Fields f{{"strategy", to_string(m.strategy)},
               {"chosen", m.chosen ? m.chosen->plan_str() : std::string("-")},
               {"overridden", detail::join(m.overridden)},
               {"queries", std::to_string(m.queries_issued())},
               {"fallback", detail::yes_no(m.fallback)}};
      if (m.dropped) f.emplace_back("dropped", *m.dropped);
      if (m.fatal) f.emplace_back("fatal", "yes");
      emit(Stage::mitigate, std::move(f));
      chosen = m.chosen;
      for (const auto & id : m.overridden) {
        auto it = by_id.find(id);
        if (it == by_id.end() || !is_hard(it->second->modality)) continue;
        if (ledger_.open(id, t, ViolationCause::mitigation)) {
          emit(Stage::violation_open, {{"constraint", id}, {"cause", "mitigation"}});
        }
      }
    }

    // Act.
    StepResult step;
    if (chosen) {
      const Action & a = chosen->first();
      const CatalogEntry * entry = find_entry(env_->catalog(), a.name);
      const bool measurement = entry && entry->reveals;
      emit(Stage::act, {{"action", a.str()}, {"provenance", to_string(chosen->provenance)},
                        {"measurement", detail::yes_no(measurement)}});
      if (measurement) {
        const std::string target = entry->reveals->entity.empty() && !a.args.empty() ? a.args.front()
                                                                                     : entry->reveals->entity;
        std::string warning;
        mask_ = reveal(mask_, target, entry->reveals->attr, t, staleness, &warning);
        if (!warning.empty()) emit(Stage::env_event, {{"event", "warning"}, {"reason", warning}});
      }
      hint_.assign(chosen->plan.begin() + 1, chosen->plan.end());
      step = env_->step(a);
    } else {
      emit(Stage::act, {{"action", "coast"}, {"provenance", "-"}, {"measurement", "no"}, {"coast", "yes"}});
      hint_.clear();
      step = env_->idle();
    }
    for (const auto & ev : step.events) {
      Fields f{{"event", ev.kind}};
      f.insert(f.end(), ev.fields.begin(), ev.fields.end());
      trace_.emit(t, Stage::env_event, std::move(f));
    }
  }

  ScenarioSpec spec_;
  std::unique_ptr<Environment> env_;
  InstructorScript script_;
  VocabularyMap vocab_;
  Ontology onto_;
  ObservabilityMask mask_;
  std::vector<InternalConstraint> active_;
  std::vector<Pending> pending_;
  std::map<std::string, PreparedConstraint> prepared_;
  ValueKB kb_;
  AssociationStore store_;
  ViolationLedger ledger_;
  std::set<std::pair<std::string, std::string>> asked_;
  std::vector<Action> hint_;
  Trace trace_;
};

/// Loads, validates and runs a scenario file. Diagnostics collect parse and validation
/// problems; an empty result means the scenario did not run.
inline std::optional<RunResult> run_scenario(const ScenarioSpec & spec, std::vector<Diagnostic> & diags)
{
  auto engine = Engine::create(spec, diags);
  if (!engine) return std::nullopt;
  return engine->run();
}

}  // namespace comply
