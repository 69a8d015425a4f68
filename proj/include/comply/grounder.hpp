// comply/grounder.hpp - Binding enumeration, three-valued constraint evaluation, measurement proposals
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "comply/action.hpp"
#include "comply/eval.hpp"
#include "comply/internalizer.hpp"
#include "comply/world.hpp"

namespace comply
{

enum class GroundingStatus { evaluable, partial, filtered_out };
enum class Compliance { compliant, violated, unknown };

inline const char * to_string(GroundingStatus s)
{
  switch (s) {
    case GroundingStatus::evaluable: return "evaluable";
    case GroundingStatus::partial: return "partial";
    case GroundingStatus::filtered_out: return "filteredOut";
  }
  return "?";
}

inline const char * to_string(Compliance c)
{
  switch (c) {
    case Compliance::compliant: return "compliant";
    case Compliance::violated: return "violated";
    case Compliance::unknown: return "unknown";
  }
  return "?";
}

/// Bindings cover every scope variable, in scope order. Partial implies missing_refs nonempty.
struct GroundingRecord
{
  std::string constraint_id;
  std::vector<std::pair<std::string, std::string>> bindings;
  GroundingStatus status = GroundingStatus::evaluable;
  std::set<Ref> missing_refs;

  friend bool operator==(const GroundingRecord &, const GroundingRecord &) = default;
};

/// Evaluable groundings are compliant or violated; partial ones are unknown.
/// Soft modalities are never violated; `holds` carries their desirability.
struct ConstraintEvaluation
{
  GroundingRecord grounding;
  Compliance status = Compliance::unknown;
  Truth holds = Truth::unknown;
};

/// A constraint compiled against one run's attribute table.
struct PreparedConstraint
{
  InternalConstraint def;
  std::vector<std::string> vars;
  bool has_when = false;
  CompiledCondition when;
  CompiledCondition holds;
};

inline PreparedConstraint prepare(const InternalConstraint & c, AttributeTable & attrs)
{
  PreparedConstraint p;
  p.def = c;
  p.vars = c.variables();
  if (c.when) {
    p.has_when = true;
    p.when = CompiledCondition(*c.when, p.vars, attrs);
  }
  p.holds = CompiledCondition(c.holds, p.vars, attrs);
  return p;
}

struct BindingResult
{
  GroundingStatus status = GroundingStatus::filtered_out;
  Truth holds = Truth::unknown;
  Compliance compliance = Compliance::compliant;
  Number measure = Number(0);  // distance from compliance, nonzero only when violated
  std::vector<CellRef> missing;
};

/// Throws EvaluationError on a type mismatch. Absent attributes filter the binding.
inline BindingResult evaluate_binding(
  const PreparedConstraint & pc, const FactView & view, std::span<const int> slots)
{
  BindingResult r;
  try {
    const Truth w = pc.has_when ? pc.when.evaluate(view, slots, &r.missing) : Truth::true_;
    if (w == Truth::false_) {
      r.missing.clear();
      return r;
    }
    r.holds = pc.holds.evaluate(view, slots, &r.missing);
    if (w == Truth::unknown || r.holds == Truth::unknown) {
      r.status = GroundingStatus::partial;
      r.compliance = Compliance::unknown;
      std::sort(r.missing.begin(), r.missing.end());
      r.missing.erase(std::unique(r.missing.begin(), r.missing.end()), r.missing.end());
      return r;
    }
    r.status = GroundingStatus::evaluable;
    const bool holds = r.holds == Truth::true_;
    bool violated = false;
    if (pc.def.modality == Modality::require) violated = !holds;
    if (pc.def.modality == Modality::forbid) violated = holds;
    r.compliance = violated ? Compliance::violated : Compliance::compliant;
    if (violated) r.measure = pc.holds.distance(view, slots, pc.def.modality == Modality::require);
  } catch (const AbsentAttribute &) {
    r = BindingResult{};
  }
  return r;
}

/// Visits the cartesian product of type-matching entities in entity-id order, last
/// variable varying fastest. Stops early when `f` returns false.
template <class F>
void for_each_binding(const PreparedConstraint & pc, const FactTable & table, F && f)
{
  const std::size_t k = pc.def.scope.size();
  std::vector<std::vector<int>> pools(k);
  for (std::size_t i = 0; i < k; ++i) {
    for (int e = 0; e < table.entity_count(); ++e) {
      if (table.entity_type(e) == pc.def.scope[i].type) pools[i].push_back(e);
    }
    if (pools[i].empty()) return;
  }
  std::vector<std::size_t> pos(k, 0);
  std::vector<int> slots(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) slots[i] = pools[i][pos[i]];
    if (!f(std::span<const int>(slots))) return;
    std::size_t i = k;
    while (i > 0) {
      --i;
      if (++pos[i] < pools[i].size()) break;
      pos[i] = 0;
      if (i == 0) return;
    }
    if (k == 0) return;
  }
}

/// Higher priority first; constraints without one come last; ties by id.
inline bool grounding_order(
  const InternalConstraint & a, std::optional<std::int64_t> pa, const InternalConstraint & b,
  std::optional<std::int64_t> pb)
{
  if (pa.has_value() != pb.has_value()) return pa.has_value();
  if (pa && *pa != *pb) return *pa > *pb;
  return a.id < b.id;
}

/// All groundings of one constraint, including filtered ones. `limit` caps the number
/// of non-filtered groundings.
inline std::vector<GroundingRecord> enumerate_groundings(
  const InternalConstraint & c, const Situation & situation, std::int64_t limit,
  bool * truncated = nullptr)
{
  AttributeTable attrs = situation.table.attrs();
  const PreparedConstraint pc = prepare(c, attrs);
  const FactView view(situation.table);
  std::vector<GroundingRecord> out;
  std::int64_t kept = 0;
  if (truncated) *truncated = false;
  for_each_binding(pc, situation.table, [&](std::span<const int> slots) {
    BindingResult r;
    try {
      r = evaluate_binding(pc, view, slots);
    } catch (const EvaluationError &) {
      r.status = GroundingStatus::evaluable;
    }
    if (r.status != GroundingStatus::filtered_out) {
      if (kept >= limit) {
        if (truncated) *truncated = true;
        return false;
      }
      ++kept;
    }
    GroundingRecord g;
    g.constraint_id = c.id;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      g.bindings.emplace_back(pc.vars[i], situation.table.entity_id(slots[i]));
    }
    g.status = r.status;
    for (const auto & m : r.missing) {
      g.missing_refs.insert(Ref{situation.table.entity_id(m.entity), attrs.name(m.attr)});
    }
    out.push_back(std::move(g));
    return true;
  });
  return out;
}

/// Groundings across constraints with a shared budget, higher priorities enumerated first.
inline std::vector<GroundingRecord> enumerate_groundings(
  const std::vector<InternalConstraint> & constraints, const Situation & situation,
  std::int64_t limit, const std::map<std::string, std::int64_t> & priorities,
  bool * truncated = nullptr)
{
  auto prio = [&](const InternalConstraint & c) -> std::optional<std::int64_t> {
    auto it = priorities.find(c.id);
    if (it != priorities.end()) return it->second;
    return c.priority;
  };
  std::vector<const InternalConstraint *> order;
  for (const auto & c : constraints) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [&](const auto * a, const auto * b) {
    return grounding_order(*a, prio(*a), *b, prio(*b));
  });
  std::vector<GroundingRecord> out;
  std::int64_t budget = limit;
  if (truncated) *truncated = false;
  for (const auto * c : order) {
    bool cut = false;
    auto part = enumerate_groundings(*c, situation, std::max<std::int64_t>(budget, 0), &cut);
    for (auto & g : part) {
      if (g.status != GroundingStatus::filtered_out) --budget;
      out.push_back(std::move(g));
    }
    if (cut) {
      if (truncated) *truncated = true;
      break;
    }
  }
  return out;
}

/// Evaluates one grounding. Throws EvaluationError on a type mismatch.
inline ConstraintEvaluation evaluate(
  const GroundingRecord & grounding, const InternalConstraint & c, const Situation & situation)
{
  AttributeTable attrs = situation.table.attrs();
  const PreparedConstraint pc = prepare(c, attrs);
  std::vector<int> slots;
  for (const auto & [var, entity] : grounding.bindings) {
    auto e = situation.table.entity_index(entity);
    if (!e) throw EvaluationError("unknown entity " + entity);
    slots.push_back(*e);
  }
  const BindingResult r = evaluate_binding(pc, FactView(situation.table), slots);
  ConstraintEvaluation ev;
  ev.grounding = grounding;
  ev.grounding.status = r.status;
  ev.grounding.missing_refs.clear();
  for (const auto & m : r.missing) {
    ev.grounding.missing_refs.insert(Ref{situation.table.entity_id(m.entity), attrs.name(m.attr)});
  }
  ev.status = r.compliance;
  ev.holds = r.holds;
  return ev;
}

struct MeasurementProposal
{
  Action action;
  Ref reveals;
  std::set<std::string> enables;

  friend bool operator==(const MeasurementProposal &, const MeasurementProposal &) = default;
};

/// One proposal per (catalog action, missing ref) whose `reveals` matches, enabling every
/// constraint that misses that ref. Ordered by action text, then ref.
inline std::vector<MeasurementProposal> propose_measurements(
  const std::vector<ConstraintEvaluation> & evaluations, const ActionCatalog & catalog)
{
  std::map<std::pair<std::string, Ref>, MeasurementProposal> found;
  for (const auto & ev : evaluations) {
    if (ev.status != Compliance::unknown) continue;
    for (const auto & ref : ev.grounding.missing_refs) {
      for (const auto & entry : catalog) {
        if (!entry.reveals || entry.reveals->attr != ref.attr) continue;
        Action a{entry.name, {}};
        if (entry.reveals->entity.empty()) {
          a.args.push_back(ref.entity);
        } else if (entry.reveals->entity != ref.entity) {
          continue;
        }
        auto & p = found[{a.str(), ref}];
        p.action = a;
        p.reveals = ref;
        p.enables.insert(ev.grounding.constraint_id);
      }
    }
  }
  std::vector<MeasurementProposal> out;
  for (auto & [key, p] : found) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// Per-tick grounding set with incremental re-evaluation under projected changes
// ---------------------------------------------------------------------------

struct ConstraintTally
{
  int groundings = 0;  // non-filtered
  int filtered = 0;
  int partial = 0;
  int violated = 0;
  int unknown = 0;
  int holds_true = 0;
  Number measure = Number(0);
  bool truncated = false;
  std::string error;  // nonempty: parked for this tick

  /// Violated if any grounding is; otherwise unknown if any is; otherwise compliant.
  Compliance status() const
  {
    if (!error.empty()) return Compliance::unknown;
    if (violated > 0) return Compliance::violated;
    if (unknown > 0) return Compliance::unknown;
    if (truncated && groundings == 0) return Compliance::unknown;
    return Compliance::compliant;
  }
};

struct GroundedItem
{
  int constraint = 0;
  int slot_offset = 0;
  BindingResult result;
};

inline std::uint64_t cell_key(int e, int a)
{
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e)) << 32) |
         static_cast<std::uint32_t>(a);
}

/// Groundings of the relevant constraints for one tick. Items hold every non-filtered
/// grounding plus filtered ones whose when-clause reads a mutable attribute.
class GroundingSet
{
public:
  std::vector<const PreparedConstraint *> constraints;
  std::vector<ConstraintTally> tallies;
  std::vector<GroundedItem> items;
  std::vector<int> slots;
  bool truncated = false;

  std::span<const int> binding(const GroundedItem & it) const
  {
    const auto arity = constraints[static_cast<std::size_t>(it.constraint)]->vars.size();
    return std::span<const int>(slots).subspan(static_cast<std::size_t>(it.slot_offset), arity);
  }

  const std::vector<int> * watchers(int e, int a) const
  {
    auto it = watch_.find(cell_key(e, a));
    return it == watch_.end() ? nullptr : &it->second;
  }

  int index_of(const std::string & id) const
  {
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      if (constraints[i]->def.id == id) return static_cast<int>(i);
    }
    return -1;
  }

  void watch(int e, int a, int item)
  {
    auto & v = watch_[cell_key(e, a)];
    if (v.empty() || v.back() != item) v.push_back(item);
  }

  static void add_to(ConstraintTally & t, const BindingResult & r, int sign)
  {
    if (r.status == GroundingStatus::filtered_out) {
      t.filtered += sign;
      return;
    }
    t.groundings += sign;
    if (r.status == GroundingStatus::partial) t.partial += sign;
    if (r.compliance == Compliance::violated) t.violated += sign;
    if (r.compliance == Compliance::unknown) t.unknown += sign;
    if (r.status == GroundingStatus::evaluable && r.holds == Truth::true_) t.holds_true += sign;
    if (sign > 0) t.measure += r.measure;
    else t.measure -= r.measure;
  }

private:
  std::unordered_map<std::uint64_t, std::vector<int>> watch_;
};

/// Grounds `ordered` (already in priority order) against `table`. The limit caps
/// non-filtered groundings across all constraints. `is_mutable(attr)` selects which
/// cells projections may change.
template <class IsMutable>
GroundingSet ground_all(
  const std::vector<const PreparedConstraint *> & ordered, const FactTable & table,
  std::int64_t limit, IsMutable && is_mutable)
{
  GroundingSet gs;
  gs.constraints = ordered;
  gs.tallies.resize(ordered.size());
  const FactView view(table);
  std::int64_t kept = 0;
  for (std::size_t ci = 0; ci < ordered.size(); ++ci) {
    const PreparedConstraint & pc = *ordered[ci];
    ConstraintTally & tally = gs.tallies[ci];
    if (gs.truncated) {
      tally.truncated = true;
      continue;
    }
    const std::size_t item_mark = gs.items.size();
    const std::size_t slot_mark = gs.slots.size();
    std::vector<std::pair<std::uint64_t, int>> watches;
    try {
      for_each_binding(pc, table, [&](std::span<const int> slots) {
        BindingResult r = evaluate_binding(pc, view, slots);
        const bool filtered = r.status == GroundingStatus::filtered_out;
        bool keep = !filtered;
        if (filtered && pc.has_when) {
          pc.when.for_each_read(slots, [&](CellRef c) { keep = keep || is_mutable(c.attr); });
        }
        if (!filtered) {
          if (kept >= limit) {
            gs.truncated = true;
            tally.truncated = true;
            return false;
          }
          ++kept;
        }
        GroundingSet::add_to(tally, r, +1);
        if (!keep) return true;
        const int id = static_cast<int>(gs.items.size());
        GroundedItem item{static_cast<int>(ci), static_cast<int>(gs.slots.size()), std::move(r)};
        gs.slots.insert(gs.slots.end(), slots.begin(), slots.end());
        auto reg = [&](CellRef c) {
          if (is_mutable(c.attr)) watches.emplace_back(cell_key(c.entity, c.attr), id);
        };
        if (pc.has_when) pc.when.for_each_read(slots, reg);
        if (!filtered) pc.holds.for_each_read(slots, reg);
        gs.items.push_back(std::move(item));
        return true;
      });
    } catch (const EvaluationError & e) {
      gs.items.resize(item_mark);
      gs.slots.resize(slot_mark);
      watches.clear();
      tally = ConstraintTally{};
      tally.error = e.what();
    }
    for (const auto & [key, id] : watches) {
      gs.watch(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu), id);
    }
  }
  return gs;
}

/// Evaluations of the stored groundings, in grounding order.
inline std::vector<ConstraintEvaluation> evaluations_of(
  const GroundingSet & gs, const FactTable & table, bool unknown_only = false)
{
  std::vector<ConstraintEvaluation> out;
  for (const auto & it : gs.items) {
    if (it.result.status == GroundingStatus::filtered_out) continue;
    if (unknown_only && it.result.compliance != Compliance::unknown) continue;
    const PreparedConstraint & pc = *gs.constraints[static_cast<std::size_t>(it.constraint)];
    ConstraintEvaluation ev;
    ev.grounding.constraint_id = pc.def.id;
    auto slots = gs.binding(it);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      ev.grounding.bindings.emplace_back(pc.vars[i], table.entity_id(slots[i]));
    }
    ev.grounding.status = it.result.status;
    for (const auto & m : it.result.missing) {
      ev.grounding.missing_refs.insert(Ref{table.entity_id(m.entity), table.attrs().name(m.attr)});
    }
    ev.status = it.result.compliance;
    ev.holds = it.result.holds;
    out.push_back(std::move(ev));
  }
  return out;
}

/// A mutable copy of the grounded situation. Applying projected cell changes re-evaluates
/// only the groundings that read those cells; every apply can be undone.
class SearchState
{
public:
  SearchState(const GroundingSet & gs, const FactTable & table)
  : gs_(&gs), table_(table), results_(), tallies_(gs.tallies), stamp_(gs.items.size(), 0)
  {
    results_.reserve(gs.items.size());
    for (const auto & it : gs.items) results_.push_back(it.result);
  }

  const FactTable & table() const { return table_; }
  const std::vector<ConstraintTally> & tallies() const { return tallies_; }
  const GroundingSet & grounding() const { return *gs_; }
  std::size_t depth() const { return frames_.size(); }

  /// Applies changes; returns true if some grounding became violated that was not
  /// violated in the grounded situation.
  bool apply(const std::vector<CellPatch> & changes)
  {
    Frame f;
    f.tallies = tallies_;
    ++epoch_;
    std::vector<int> affected;
    for (const auto & c : changes) {
      f.cells.push_back({c.entity, c.attr, table_.cell(c.entity, c.attr)});
      table_.set_cell(c.entity, c.attr, c.cell);
      if (const auto * w = gs_->watchers(c.entity, c.attr)) {
        for (int id : *w) {
          if (stamp_[static_cast<std::size_t>(id)] == epoch_) continue;
          stamp_[static_cast<std::size_t>(id)] = epoch_;
          affected.push_back(id);
        }
      }
    }
    bool fresh_violation = false;
    const FactView view(table_);
    for (int id : affected) {
      const GroundedItem & it = gs_->items[static_cast<std::size_t>(id)];
      const PreparedConstraint & pc = *gs_->constraints[static_cast<std::size_t>(it.constraint)];
      ConstraintTally & t = tallies_[static_cast<std::size_t>(it.constraint)];
      if (!t.error.empty()) continue;
      BindingResult r;
      try {
        r = evaluate_binding(pc, view, gs_->binding(it));
      } catch (const EvaluationError &) {
        r.status = GroundingStatus::partial;
        r.compliance = Compliance::unknown;
      }
      auto & cur = results_[static_cast<std::size_t>(id)];
      if (r.compliance == Compliance::violated && it.result.compliance != Compliance::violated) {
        fresh_violation = true;
      }
      GroundingSet::add_to(t, cur, -1);
      GroundingSet::add_to(t, r, +1);
      f.results.emplace_back(id, std::move(cur));
      cur = std::move(r);
    }
    frames_.push_back(std::move(f));
    return fresh_violation;
  }

  void undo()
  {
    Frame & f = frames_.back();
    for (auto it = f.results.rbegin(); it != f.results.rend(); ++it) {
      results_[static_cast<std::size_t>(it->first)] = std::move(it->second);
    }
    for (auto it = f.cells.rbegin(); it != f.cells.rend(); ++it) {
      table_.set_cell(it->entity, it->attr, it->cell);
    }
    tallies_ = std::move(f.tallies);
    frames_.pop_back();
  }

  /// Total violated groundings across hard constraints.
  int violations() const
  {
    int n = 0;
    for (const auto & t : tallies_) n += t.violated;
    return n;
  }

private:
  struct Frame
  {
    std::vector<CellPatch> cells;
    std::vector<std::pair<int, BindingResult>> results;
    std::vector<ConstraintTally> tallies;
  };

  const GroundingSet * gs_;
  FactTable table_;
  std::vector<BindingResult> results_;
  std::vector<ConstraintTally> tallies_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
  std::vector<Frame> frames_;
};

}  // namespace comply
