// comply/mitigator.hpp - Conflict detection, the mitigation ladder and violation records
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comply/internalizer.hpp"
#include "comply/planner.hpp"

namespace comply
{

struct Conflict
{
  enum class Kind { no_acceptable_candidate, label_conflict, mixed_choice };

  Kind kind = Kind::no_acceptable_candidate;
  std::set<std::string> involved;
};

inline const char * to_string(Conflict::Kind k)
{
  switch (k) {
    case Conflict::Kind::no_acceptable_candidate: return "noAcceptableCandidate";
    case Conflict::Kind::label_conflict: return "labelConflict";
    case Conflict::Kind::mixed_choice: return "mixedChoice";
  }
  return "?";
}

/// One descriptor per impasse, plus one when the chosen candidate is both desired and
/// undesired.
inline std::vector<Conflict> detect_conflicts(const Decision & d)
{
  std::vector<Conflict> out;
  if (d.impasse) {
    out.push_back(Conflict{
      d.impasse->kind == Impasse::Kind::no_acceptable_candidate ? Conflict::Kind::no_acceptable_candidate
                                                                : Conflict::Kind::label_conflict,
      d.impasse->involved});
  }
  if (d.chosen && d.chosen->mixed()) {
    auto sides = d.chosen->with(Label::desirable_for);
    auto minus = d.chosen->with(Label::undesirable_for);
    sides.insert(minus.begin(), minus.end());
    out.push_back(Conflict{Conflict::Kind::mixed_choice, sides});
  }
  return out;
}

enum class Strategy { prioritization, instructor_query, replanning, inattention, coast };

inline const char * to_string(Strategy s)
{
  switch (s) {
    case Strategy::prioritization: return "prioritization";
    case Strategy::instructor_query: return "instructorQuery";
    case Strategy::replanning: return "replanning";
    case Strategy::inattention: return "inattention";
    case Strategy::coast: return "coast";
  }
  return "?";
}

struct Query
{
  std::string first;
  std::string second;
  std::optional<std::string> winner;
};

struct MitigationOutcome
{
  Strategy strategy = Strategy::coast;
  std::optional<Candidate> chosen;
  std::set<std::string> overridden;  // knowingly violated or penalized
  std::vector<Query> queries;
  std::optional<std::string> dropped;  // inattention only
  bool fallback = false;  // resolved without value knowledge
  bool fatal = false;  // nothing selectable; the agent coasts

  int queries_issued() const { return static_cast<int>(queries.size()); }
};

/// Mutable per-run state the ladder consults and updates.
struct MitigationContext
{
  ValueKB & kb;
  InstructorScript & script;
  bool has_instructor = false;
  std::set<std::pair<std::string, std::string>> & asked;  // sorted pairs already queried
  /// Deeper candidate generation; may be empty.
  std::function<std::vector<Candidate>()> replan;
};

namespace detail
{

inline std::vector<Candidate> strip(
  const std::vector<Candidate> & cands, const std::set<std::string> & ids, bool all_labels)
{
  std::vector<Candidate> out = cands;
  for (auto & c : out) {
    for (auto it = c.labels.begin(); it != c.labels.end();) {
      const bool hit = ids.count(it->first) > 0 &&
                       (all_labels || it->second == Label::prohibited_by || it->second == Label::undesirable_for);
      it = hit ? c.labels.erase(it) : std::next(it);
    }
    c.rescore();
  }
  return out;
}

/// Constraints among `ids` whose prohibition or penalty the original of `chosen` carried.
inline std::set<std::string> overridden_by(
  const Candidate & chosen, const std::vector<Candidate> & originals, const std::set<std::string> & ids)
{
  std::set<std::string> out;
  for (const auto & o : originals) {
    if (o.plan_str() != chosen.plan_str() || o.provenance != chosen.provenance) continue;
    for (const auto & id : ids) {
      if (o.has(id, Label::prohibited_by) || o.has(id, Label::undesirable_for)) out.insert(id);
    }
    break;
  }
  return out;
}

inline std::optional<MitigationOutcome> prioritize(
  const Conflict & conflict, const std::vector<Candidate> & candidates, const ValueKB & kb)
{
  if (conflict.involved.empty()) return std::nullopt;
  std::int64_t top = std::numeric_limits<std::int64_t>::min();
  for (const auto & id : conflict.involved) {
    auto p = kb.get(id);
    if (!p) return std::nullopt;
    top = std::max(top, *p);
  }
  std::set<std::string> dominated;
  for (const auto & id : conflict.involved) {
    if (*kb.get(id) < top) dominated.insert(id);
  }
  if (dominated.empty()) return std::nullopt;
  const auto stripped = strip(candidates, dominated, false);
  const Decision d = select(stripped, kb);
  if (!d.chosen) return std::nullopt;
  MitigationOutcome out;
  out.strategy = Strategy::prioritization;
  out.chosen = d.chosen;
  out.overridden = overridden_by(*d.chosen, candidates, dominated);
  return out;
}

}  // namespace detail

/// Tries, in order: prioritization, instructor query (then prioritization again),
/// replanning, inattention. If nothing is selectable the outcome is a fatal coast.
inline MitigationOutcome mitigate(
  const Conflict & conflict, const std::vector<Candidate> & candidates, MitigationContext & ctx)
{
  if (auto out = detail::prioritize(conflict, candidates, ctx.kb)) return *out;

  std::vector<Query> queries;
  if (ctx.has_instructor) {
    bool installed = false;
    std::vector<std::string> ids(conflict.involved.begin(), conflict.involved.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const auto & a = ids[i];
        const auto & b = ids[j];
        if (ctx.kb.ordered(a, b) || ctx.asked.count({a, b})) continue;
        ctx.asked.insert({a, b});
        Query q{a, b, std::nullopt};
        auto ans = ctx.script.take(InstructorAnswer::Kind::priority, [&](const InstructorAnswer & x) {
          return (x.first == a && x.second == b) || (x.first == b && x.second == a);
        });
        if (ans && (ans->winner == a || ans->winner == b)) {
          q.winner = ans->winner;
          ctx.kb.install(ans->winner, ans->winner == a ? b : a);
          installed = true;
        }
        queries.push_back(std::move(q));
      }
    }
    if (installed) {
      if (auto out = detail::prioritize(conflict, candidates, ctx.kb)) {
        out->strategy = Strategy::instructor_query;
        out->queries = std::move(queries);
        return *out;
      }
    }
  }

  if (ctx.replan) {
    const auto deeper = ctx.replan();
    const Decision d = select(deeper, ctx.kb);
    if (d.chosen) {
      MitigationOutcome out;
      out.strategy = Strategy::replanning;
      out.chosen = d.chosen;
      out.overridden = detail::overridden_by(*d.chosen, deeper, conflict.involved);
      out.queries = std::move(queries);
      out.fallback = true;
      return out;
    }
  }

  MitigationOutcome out;
  out.queries = std::move(queries);
  out.fallback = true;
  if (!conflict.involved.empty()) {
    // Lowest priority first; an absent priority ranks below every present one.
    const std::string * drop = nullptr;
    for (const auto & id : conflict.involved) {
      if (!drop) {
        drop = &id;
        continue;
      }
      auto p = ctx.kb.get(id);
      auto q = ctx.kb.get(*drop);
      const bool lower = !p ? q.has_value() : (q && *p < *q);
      if (lower) drop = &id;
    }
    const auto stripped = detail::strip(candidates, {*drop}, true);
    const Decision d = select(stripped, ctx.kb);
    out.dropped = *drop;
    if (d.chosen) {
      out.strategy = Strategy::inattention;
      out.chosen = d.chosen;
      out.overridden = detail::overridden_by(*d.chosen, candidates, {*drop});
      return out;
    }
  }
  out.strategy = Strategy::coast;
  out.fatal = true;
  return out;
}

// ---------------------------------------------------------------------------
// Violation records
// ---------------------------------------------------------------------------

enum class ViolationCause { environment, mitigation };

inline const char * to_string(ViolationCause c)
{
  return c == ViolationCause::environment ? "environment" : "mitigation";
}

struct ViolationRecord
{
  std::string constraint_id;
  std::int64_t opened = 0;
  std::optional<std::int64_t> closed;
  ViolationCause cause = ViolationCause::environment;
};

/// At most one open record per constraint.
class ViolationLedger
{
public:
  const std::vector<ViolationRecord> & records() const { return records_; }

  bool is_open(const std::string & id) const { return find_open(id) != nullptr; }

  std::set<std::string> open_ids() const
  {
    std::set<std::string> out;
    for (const auto & r : records_) {
      if (!r.closed) out.insert(r.constraint_id);
    }
    return out;
  }

  /// Returns false if a record for `id` is already open.
  bool open(const std::string & id, std::int64_t tick, ViolationCause cause)
  {
    if (is_open(id)) return false;
    records_.push_back(ViolationRecord{id, tick, std::nullopt, cause});
    return true;
  }

  /// Returns the closed record, if one was open.
  std::optional<ViolationRecord> close(const std::string & id, std::int64_t tick)
  {
    ViolationRecord * r = find_open(id);
    if (!r) return std::nullopt;
    r->closed = std::max(tick, r->opened);
    return *r;
  }

private:
  ViolationRecord * find_open(const std::string & id)
  {
    for (auto & r : records_) {
      if (!r.closed && r.constraint_id == id) return &r;
    }
    return nullptr;
  }

  const ViolationRecord * find_open(const std::string & id) const
  {
    for (const auto & r : records_) {
      if (!r.closed && r.constraint_id == id) return &r;
    }
    return nullptr;
  }

  std::vector<ViolationRecord> records_;
};

}  // namespace comply
