// comply/eval.hpp - Kleene evaluation of conditions over fact views, plus violation distance
#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "comply/ast.hpp"
#include "comply/value.hpp"
#include "comply/world.hpp"

namespace comply
{

/// Attribute index used for the `id` pseudo-attribute, which reads the entity id as a symbol.
inline constexpr int kIdAttr = -1;

/// Thrown when a bound entity lacks an attribute the condition reads. The grounder
/// treats such a binding as not type-consistent.
class AbsentAttribute : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct CellRef
{
  int entity = 0;
  int attr = 0;

  friend bool operator==(const CellRef &, const CellRef &) = default;
  friend auto operator<=>(const CellRef &, const CellRef &) = default;
};

struct CellPatch
{
  int entity = 0;
  int attr = 0;
  Cell cell;
};

/// Read-only table with an optional small overlay of changed cells.
class FactView
{
public:
  explicit FactView(const FactTable & base, const std::vector<CellPatch> * patch = nullptr)
  : base_(&base), patch_(patch)
  {
  }

  const Cell & cell(int e, int a) const
  {
    if (patch_) {
      for (const auto & p : *patch_) {
        if (p.entity == e && p.attr == a) return p.cell;
      }
    }
    return base_->cell(e, a);
  }

  const FactTable & base() const { return *base_; }

private:
  const FactTable * base_;
  const std::vector<CellPatch> * patch_;
};

/// A condition with variables resolved to binding slots and attributes to table indices.
class CompiledCondition
{
public:
  CompiledCondition() { root_ = add_node(Node{}); }

  CompiledCondition(
    const Condition & cond, const std::vector<std::string> & vars, AttributeTable & attrs)
  {
    root_ = compile(cond, vars, attrs);
  }

  /// Unknown results append the unknown cells that made them unknown to `missing`.
  Truth evaluate(
    const FactView & view, std::span<const int> binding,
    std::vector<CellRef> * missing = nullptr) const
  {
    return eval_node(root_, view, binding, missing);
  }

  /// Distance from having truth value `want`; zero when already there or undecidable.
  Number distance(const FactView & view, std::span<const int> binding, bool want) const
  {
    return dist_node(root_, view, binding, want);
  }

  /// Every attribute cell the condition reads under `binding`, `id` excluded.
  template <class F>
  void for_each_read(std::span<const int> binding, F && f) const
  {
    for (const auto & t : terms_) {
      if (t.kind == Term::Kind::attribute && t.attr != kIdAttr) {
        f(CellRef{binding[static_cast<std::size_t>(t.var)], t.attr});
      }
    }
  }

private:
  struct CTerm
  {
    Term::Kind kind = Term::Kind::literal;
    int var = 0;
    int attr = 0;
    Value literal = Number(0);
    ArithOp op = ArithOp::add;
    int lhs = -1;
    int rhs = -1;
    std::string name;
  };

  struct Node
  {
    Condition::Kind kind = Condition::Kind::constant;
    CmpOp op = CmpOp::eq;
    int lhs = -1;
    int rhs = -1;
    std::vector<int> kids;
    bool value = true;
  };

  int add_node(Node n)
  {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  int compile_term(const Term & t, const std::vector<std::string> & vars, AttributeTable & attrs)
  {
    CTerm c;
    c.kind = t.kind;
    switch (t.kind) {
      case Term::Kind::attribute: {
        auto it = std::find(vars.begin(), vars.end(), t.var);
        if (it == vars.end()) throw std::invalid_argument("unbound variable " + t.var);
        c.var = static_cast<int>(it - vars.begin());
        c.attr = t.attr == "id" ? kIdAttr : attrs.intern(t.attr);
        c.name = t.attr;
        break;
      }
      case Term::Kind::literal: c.literal = t.literal; break;
      case Term::Kind::arithmetic:
        c.op = t.op;
        c.lhs = compile_term(t.operands[0], vars, attrs);
        c.rhs = compile_term(t.operands[1], vars, attrs);
        break;
    }
    terms_.push_back(std::move(c));
    return static_cast<int>(terms_.size()) - 1;
  }

  int compile(const Condition & cond, const std::vector<std::string> & vars, AttributeTable & attrs)
  {
    Node n;
    n.kind = cond.kind;
    n.op = cond.op;
    n.value = cond.value;
    if (cond.kind == Condition::Kind::compare) {
      n.lhs = compile_term(cond.terms[0], vars, attrs);
      n.rhs = compile_term(cond.terms[1], vars, attrs);
    }
    for (const auto & k : cond.children) n.kids.push_back(compile(k, vars, attrs));
    return add_node(std::move(n));
  }

  std::optional<Value> eval_term(
    int idx, const FactView & view, std::span<const int> binding,
    std::vector<CellRef> * missing) const
  {
    const CTerm & t = terms_[static_cast<std::size_t>(idx)];
    switch (t.kind) {
      case Term::Kind::literal: return t.literal;
      case Term::Kind::attribute: {
        const int e = binding[static_cast<std::size_t>(t.var)];
        if (t.attr == kIdAttr) return Value(Symbol{view.base().entity_id(e)});
        const Cell & c = view.cell(e, t.attr);
        if (c.state == CellState::known) return c.value;
        if (c.state == CellState::absent) {
          throw AbsentAttribute(
            view.base().entity_id(e) + " has no attribute " + t.name);
        }
        if (missing) missing->push_back(CellRef{e, t.attr});
        return std::nullopt;
      }
      case Term::Kind::arithmetic: {
        auto a = eval_term(t.lhs, view, binding, missing);
        auto b = eval_term(t.rhs, view, binding, missing);
        if (!a || !b) return std::nullopt;
        return Value(arithmetic(*a, t.op, *b));
      }
    }
    return std::nullopt;
  }

  Truth eval_node(
    int idx, const FactView & view, std::span<const int> binding,
    std::vector<CellRef> * missing) const
  {
    const Node & n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.kind) {
      case Condition::Kind::constant: return to_truth(n.value);
      case Condition::Kind::compare: {
        auto a = eval_term(n.lhs, view, binding, missing);
        auto b = eval_term(n.rhs, view, binding, missing);
        if (!a || !b) return Truth::unknown;
        return to_truth(compare(*a, n.op, *b));
      }
      case Condition::Kind::negate: return kleene_not(eval_node(n.kids[0], view, binding, missing));
      case Condition::Kind::all:
      case Condition::Kind::any: {
        // Dominant value: false for and, true for or. Missing refs survive only if the result is unknown.
        const Truth dominant = n.kind == Condition::Kind::all ? Truth::false_ : Truth::true_;
        const std::size_t mark = missing ? missing->size() : 0;
        bool any_unknown = false;
        for (int k : n.kids) {
          const Truth t = eval_node(k, view, binding, missing);
          if (t == dominant) {
            if (missing) missing->resize(mark);
            return dominant;
          }
          if (t == Truth::unknown) any_unknown = true;
        }
        if (any_unknown) return Truth::unknown;
        return kleene_not(dominant);
      }
    }
    return Truth::unknown;
  }

  static Number cmp_distance(const Value & a, CmpOp op, const Value & b)
  {
    if (compare(a, op, b)) return Number(0);
    if (kind_of(a) != ValueKind::number) return Number(1);
    const Number d = std::get<Number>(a) - std::get<Number>(b);
    const Number mag = d < 0 ? -d : d;
    switch (op) {
      case CmpOp::le:
      case CmpOp::ge:
      case CmpOp::eq: return mag;
      case CmpOp::lt:
      case CmpOp::gt: return mag + 1;
      case CmpOp::ne: return Number(1);
    }
    return Number(1);
  }

  Number dist_node(int idx, const FactView & view, std::span<const int> binding, bool want) const
  {
    const Node & n = nodes_[static_cast<std::size_t>(idx)];
    switch (n.kind) {
      case Condition::Kind::constant: return n.value == want ? Number(0) : Number(1);
      case Condition::Kind::compare: {
        auto a = eval_term(n.lhs, view, binding, nullptr);
        auto b = eval_term(n.rhs, view, binding, nullptr);
        if (!a || !b) return Number(0);
        return cmp_distance(*a, want ? n.op : negate(n.op), *b);
      }
      case Condition::Kind::negate: return dist_node(n.kids[0], view, binding, !want);
      case Condition::Kind::all:
      case Condition::Kind::any: {
        // and->true and or->false need every child; the other two need just one.
        const bool every = (n.kind == Condition::Kind::all) == want;
        Number total(0);
        std::optional<Number> best;
        for (int k : n.kids) {
          const Number d = dist_node(k, view, binding, want);
          total += d;
          if (!best || d < *best) best = d;
        }
        return every ? total : best.value_or(Number(0));
      }
    }
    return Number(0);
  }

  std::vector<CTerm> terms_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

/// Evaluates a condition against a situation under named bindings (variable -> entity id).
/// Unknown results fill `missing` with the refs responsible. Unknown entities make the
/// result unknown; absent attributes throw AbsentAttribute.
inline Truth evaluate_condition(
  const Condition & cond, const FactTable & table,
  const std::vector<std::pair<std::string, std::string>> & bindings,
  std::set<Ref> * missing = nullptr)
{
  std::vector<std::string> vars;
  std::vector<int> slots;
  for (const auto & [var, entity] : bindings) {
    auto e = table.entity_index(entity);
    if (!e) return Truth::unknown;
    vars.push_back(var);
    slots.push_back(*e);
  }
  // Interning into a private copy keeps the caller's table untouched.
  AttributeTable attrs = table.attrs();
  CompiledCondition compiled(cond, vars, attrs);
  std::vector<CellRef> cells;
  const Truth t = compiled.evaluate(FactView(table), slots, missing ? &cells : nullptr);
  if (missing) {
    for (const auto & c : cells) missing->insert(Ref{table.entity_id(c.entity), attrs.name(c.attr)});
  }
  return t;
}

}  // namespace comply
