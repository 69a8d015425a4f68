// comply/context.hpp - Rule-based context recognition and constraint relevance filtering
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comply/ast.hpp"
#include "comply/eval.hpp"
#include "comply/internalizer.hpp"
#include "comply/world.hpp"

namespace comply
{

inline constexpr int kAssociationMin = -5;
inline constexpr int kAssociationMax = 5;

/// (constraintId, contextTag) -> weight in [-5, 5]; missing pairs weigh 0.
struct AssociationStore
{
  std::map<std::pair<std::string, std::string>, int> weights;

  int weight(const std::string & constraint_id, const std::string & tag) const
  {
    auto it = weights.find({constraint_id, tag});
    return it == weights.end() ? 0 : it->second;
  }
};

/// The distinguished entity context rules are evaluated against.
inline const std::string kSelfEntity = "self";

/// A tag is active iff its rule is definitely true. Rules whose evaluation fails are inactive.
inline std::set<std::string> recognize_contexts(
  const Situation & situation, const std::vector<ContextRule> & rules)
{
  std::set<std::string> out;
  if (!situation.table.has_entity(kSelfEntity)) return out;
  for (const auto & r : rules) {
    try {
      if (evaluate_condition(r.condition, situation.table, {{kSelfEntity, kSelfEntity}}) ==
          Truth::true_) {
        out.insert(r.tag);
      }
    } catch (const std::exception &) {
    }
  }
  return out;
}

/// Tagged constraints need a shared active tag; untagged ones need no negative weight
/// for any active tag.
inline bool is_relevant(
  const InternalConstraint & c, const std::set<std::string> & active, const AssociationStore & store)
{
  if (!c.context_tags.empty()) {
    return std::any_of(c.context_tags.begin(), c.context_tags.end(), [&](const std::string & t) {
      return active.count(t) > 0;
    });
  }
  return std::all_of(active.begin(), active.end(), [&](const std::string & t) {
    return store.weight(c.id, t) >= 0;
  });
}

inline std::vector<InternalConstraint> filter_relevant(
  const std::vector<InternalConstraint> & constraints, const std::set<std::string> & active,
  const AssociationStore & store)
{
  std::vector<InternalConstraint> out;
  for (const auto & c : constraints) {
    if (is_relevant(c, active, store)) out.push_back(c);
  }
  return out;
}

inline AssociationStore update_association(
  AssociationStore store, const std::string & constraint_id, const std::string & tag, int delta)
{
  int & w = store.weights[{constraint_id, tag}];
  w = std::clamp(w + delta, kAssociationMin, kAssociationMax);
  return store;
}

}  // namespace comply
