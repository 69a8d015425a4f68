// comply/env/environment.hpp - Interface shared by the simulated worlds
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "comply/action.hpp"
#include "comply/ast.hpp"
#include "comply/eval.hpp"
#include "comply/internalizer.hpp"
#include "comply/world.hpp"

namespace comply
{

enum class Outcome { running, success, failure };

inline const char * to_string(Outcome o)
{
  switch (o) {
    case Outcome::running: return "running";
    case Outcome::success: return "success";
    case Outcome::failure: return "failure";
  }
  return "?";
}

struct EnvEvent
{
  std::string kind;
  std::vector<std::pair<std::string, std::string>> fields;
};

struct StepResult
{
  std::vector<EnvEvent> events;
  Outcome outcome = Outcome::running;
};

/// A world the engine acts in. `project` and `step` share one transition rule, so the
/// projected change equals the stepped change on every visible cell.
class Environment
{
public:
  virtual ~Environment() = default;

  virtual EnvironmentKind kind() const = 0;
  virtual const ActionCatalog & catalog() const = 0;
  virtual const WorldState & world() const = 0;
  virtual Outcome outcome() const = 0;

  /// Names the environment's world can ever contain.
  virtual Ontology ontology() const = 0;

  /// Attributes that actions may change; only these are tracked during projection.
  virtual bool is_mutable(const std::string & attr) const = 0;

  /// Non-measurement actions applicable in the visible state, sorted by text.
  virtual std::vector<Action> actions(const FactTable & visible) const = 0;

  /// Cell changes one action causes on the visible state. Unknown cells stay unknown.
  virtual std::vector<CellPatch> project(const FactTable & visible, const Action & a) const = 0;

  /// Advances ground truth by one tick.
  virtual StepResult step(const Action & a) = 0;

  /// Advances ground truth by one tick without an agent action.
  virtual StepResult idle() = 0;

  /// Whether the environment's task goal holds in the visible state.
  virtual bool task_achieved(const FactTable & visible) const = 0;

  /// Readable task goal, if the environment has one.
  virtual std::optional<std::string> task() const = 0;

  /// Mutually exclusive alternatives share a group; plan search branches on the
  /// group with the fewest acceptable actions. Empty means no grouping.
  virtual std::optional<std::string> choice_group(const Action &) const { return std::nullopt; }
};

/// Evaluates an event term whose variables are entity ids, on ground truth.
inline Value evaluate_event_term(const Term & t, const FactTable & table)
{
  switch (t.kind) {
    case Term::Kind::literal: return t.literal;
    case Term::Kind::attribute: {
      if (t.attr == "id") {
        if (!table.has_entity(t.var)) throw EvaluationError("unknown entity " + t.var);
        return Symbol{t.var};
      }
      auto v = table.get(t.var, t.attr);
      if (!v) throw EvaluationError("no value for " + t.var + "." + t.attr);
      return *v;
    }
    case Term::Kind::arithmetic:
      return arithmetic(
        evaluate_event_term(t.operands[0], table), t.op, evaluate_event_term(t.operands[1], table));
  }
  return t.literal;
}

}  // namespace comply
