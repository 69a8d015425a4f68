// comply/ast.hpp - Syntax trees for constraints and scenarios, plus the pretty printer
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comply/diagnostic.hpp"
#include "comply/value.hpp"

namespace comply
{

/// Arithmetic term: `var.attr`, a literal, or `lhs op rhs`.
/// Equality compares structure only; source positions are ignored.
struct Term
{
  enum class Kind { attribute, literal, arithmetic };

  Kind kind = Kind::literal;
  std::string var;
  std::string attr;
  Value literal = Number(0);
  ArithOp op = ArithOp::add;
  std::vector<Term> operands;
  SourcePos pos;

  static Term attribute(std::string var, std::string attr, SourcePos pos = {})
  {
    Term t;
    t.kind = Kind::attribute;
    t.var = std::move(var);
    t.attr = std::move(attr);
    t.pos = pos;
    return t;
  }

  static Term constant(Value v, SourcePos pos = {})
  {
    Term t;
    t.kind = Kind::literal;
    t.literal = std::move(v);
    t.pos = pos;
    return t;
  }

  static Term arith(ArithOp op, Term lhs, Term rhs, SourcePos pos = {})
  {
    Term t;
    t.kind = Kind::arithmetic;
    t.op = op;
    t.operands.push_back(std::move(lhs));
    t.operands.push_back(std::move(rhs));
    t.pos = pos;
    return t;
  }

  friend bool operator==(const Term & a, const Term & b)
  {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::attribute: return a.var == b.var && a.attr == b.attr;
      case Kind::literal: return a.literal == b.literal;
      case Kind::arithmetic: return a.op == b.op && a.operands == b.operands;
    }
    return false;
  }
};

/// Boolean condition tree over terms.
struct Condition
{
  enum class Kind { compare, all, any, negate, constant };

  Kind kind = Kind::constant;
  CmpOp op = CmpOp::eq;
  std::vector<Term> terms;           // compare: exactly two
  std::vector<Condition> children;   // all/any: one or more; negate: exactly one
  bool value = true;                 // constant
  SourcePos pos;

  static Condition compare(Term lhs, CmpOp op, Term rhs, SourcePos pos = {})
  {
    Condition c;
    c.kind = Kind::compare;
    c.op = op;
    c.terms.push_back(std::move(lhs));
    c.terms.push_back(std::move(rhs));
    c.pos = pos;
    return c;
  }

  static Condition all(std::vector<Condition> kids, SourcePos pos = {})
  {
    Condition c;
    c.kind = Kind::all;
    c.children = std::move(kids);
    c.pos = pos;
    return c;
  }

  static Condition any(std::vector<Condition> kids, SourcePos pos = {})
  {
    Condition c;
    c.kind = Kind::any;
    c.children = std::move(kids);
    c.pos = pos;
    return c;
  }

  static Condition negate(Condition kid, SourcePos pos = {})
  {
    Condition c;
    c.kind = Kind::negate;
    c.children.push_back(std::move(kid));
    c.pos = pos;
    return c;
  }

  static Condition constant(bool v, SourcePos pos = {})
  {
    Condition c;
    c.kind = Kind::constant;
    c.value = v;
    c.pos = pos;
    return c;
  }

  friend bool operator==(const Condition & a, const Condition & b)
  {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::compare: return a.op == b.op && a.terms == b.terms;
      case Kind::all:
      case Kind::any:
      case Kind::negate: return a.children == b.children;
      case Kind::constant: return a.value == b.value;
    }
    return false;
  }
};

enum class Modality { require, forbid, prefer, avoid };

inline const char * to_string(Modality m)
{
  switch (m) {
    case Modality::require: return "require";
    case Modality::forbid: return "forbid";
    case Modality::prefer: return "prefer";
    case Modality::avoid: return "avoid";
  }
  return "?";
}

inline bool is_hard(Modality m)
{
  return m == Modality::require || m == Modality::forbid;
}

struct ScopeEntry
{
  std::string var;
  std::string type;
  SourcePos pos;

  friend bool operator==(const ScopeEntry & a, const ScopeEntry & b)
  {
    return a.var == b.var && a.type == b.type;
  }
};

/// External (pre-internalization) form of one `constraint` block.
struct ConstraintSpec
{
  std::string id;
  Modality modality = Modality::require;
  std::set<std::string> context_tags;
  std::optional<std::int64_t> priority;
  std::vector<ScopeEntry> scope;
  std::optional<Condition> when;
  Condition holds;
  SourcePos pos;
  std::string file;

  friend bool operator==(const ConstraintSpec & a, const ConstraintSpec & b)
  {
    return a.id == b.id && a.modality == b.modality && a.context_tags == b.context_tags &&
           a.priority == b.priority && a.scope == b.scope && a.when == b.when &&
           a.holds == b.holds;
  }
};

enum class TermKind { attribute, type, context };

inline const char * to_string(TermKind k)
{
  switch (k) {
    case TermKind::attribute: return "attribute";
    case TermKind::type: return "type";
    case TermKind::context: return "context";
  }
  return "?";
}

struct TermMapping
{
  TermKind kind = TermKind::attribute;
  std::string internal;

  friend bool operator==(const TermMapping &, const TermMapping &) = default;
};

/// externalName -> (kind, internalName)
using VocabularyMap = std::map<std::string, TermMapping>;

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

enum class EnvironmentKind { sudoku, driving };

inline const char * to_string(EnvironmentKind k)
{
  return k == EnvironmentKind::sudoku ? "sudoku" : "driving";
}

struct EnvironmentDecl
{
  EnvironmentKind kind = EnvironmentKind::sudoku;
  std::map<std::string, Value> params;
  std::string puzzle;  // sudoku only: row-major digits, 0 or '.' for empty
  SourcePos pos;
};

struct FactDecl
{
  std::string entity;
  std::string type;
  std::vector<std::pair<std::string, Value>> attrs;
  SourcePos pos;
};

/// `entity.attr`; entity `*` hides the attribute on every entity, including later spawns.
struct HiddenDecl
{
  std::string entity;
  std::string attr;
  SourcePos pos;
};

struct Assignment
{
  std::string attr;
  Term value;
};

struct EventDecl
{
  enum class Kind { set, spawn };

  Kind kind = Kind::set;
  std::int64_t tick = 0;
  std::string entity;
  std::string type;                 // spawn
  std::vector<Assignment> assigns;  // set: exactly one
  SourcePos pos;
};

struct ContextRule
{
  std::string tag;
  Condition condition;
  SourcePos pos;
};

struct InstructorAnswer
{
  enum class Kind { teach, priority, relevance };

  Kind kind = Kind::teach;
  // teach
  std::string term;
  TermMapping mapping;
  // priority
  std::string first;
  std::string second;
  std::string winner;
  // relevance
  std::string constraint_id;
  std::string tag;
  bool relevant = true;
  SourcePos pos;
};

struct RunParams
{
  std::int64_t max_ticks = 0;
  std::int64_t seed = 0;
  std::int64_t staleness = 5;
  std::int64_t search_depth = 3;
  std::int64_t grounding_limit = 500;
};

struct FileRef
{
  std::string path;
  SourcePos pos;
};

struct ScenarioSpec
{
  std::string name;
  std::string file;
  EnvironmentDecl environment;
  std::vector<FactDecl> facts;
  std::vector<HiddenDecl> hidden;
  std::vector<EventDecl> events;
  std::vector<ContextRule> contexts;
  std::vector<FileRef> constraint_files;
  std::vector<ConstraintSpec> constraints;
  VocabularyMap vocab;
  std::map<std::string, std::int64_t> values;
  bool has_instructor = false;
  std::vector<InstructorAnswer> instructor;
  RunParams run;
};

// ---------------------------------------------------------------------------
// Pretty printing (output re-parses to a structurally identical tree)
// ---------------------------------------------------------------------------

inline std::string print_term(const Term & t, bool nested = false)
{
  switch (t.kind) {
    case Term::Kind::attribute: return t.var + "." + t.attr;
    case Term::Kind::literal: return to_string(t.literal);
    case Term::Kind::arithmetic: {
      std::string s = print_term(t.operands[0], true) + " " + to_string(t.op) + " " +
                      print_term(t.operands[1], true);
      return nested ? "(" + s + ")" : s;
    }
  }
  return "?";
}

inline std::string print_condition(const Condition & c)
{
  switch (c.kind) {
    case Condition::Kind::compare:
      return print_term(c.terms[0]) + " " + to_string(c.op) + " " + print_term(c.terms[1]);
    case Condition::Kind::all:
    case Condition::Kind::any: {
      std::string s = c.kind == Condition::Kind::all ? "and(" : "or(";
      for (std::size_t i = 0; i < c.children.size(); ++i) {
        if (i) s += ", ";
        s += print_condition(c.children[i]);
      }
      return s + ")";
    }
    case Condition::Kind::negate: return "not(" + print_condition(c.children[0]) + ")";
    case Condition::Kind::constant: return c.value ? "true" : "false";
  }
  return "?";
}

inline std::string print_constraint(const ConstraintSpec & c)
{
  std::string s = "constraint " + c.id + " {\n";
  s += "  modality: " + std::string(to_string(c.modality)) + "\n";
  if (!c.context_tags.empty()) {
    s += "  context: ";
    bool first = true;
    for (const auto & tag : c.context_tags) {
      if (!first) s += ", ";
      s += tag;
      first = false;
    }
    s += "\n";
  }
  if (c.priority) s += "  priority: " + std::to_string(*c.priority) + "\n";
  if (!c.scope.empty()) {
    s += "  scope: ";
    for (std::size_t i = 0; i < c.scope.size(); ++i) {
      if (i) s += ", ";
      s += c.scope[i].var + ":" + c.scope[i].type;
    }
    s += "\n";
  }
  if (c.when) s += "  when: " + print_condition(*c.when) + "\n";
  s += "  holds: " + print_condition(c.holds) + "\n}\n";
  return s;
}

/// Visits every attribute reference in a condition (including those nested in arithmetic).
template <class F>
void for_each_attribute(const Term & t, F && f)
{
  if (t.kind == Term::Kind::attribute) {
    f(t);
  } else if (t.kind == Term::Kind::arithmetic) {
    for (const auto & o : t.operands) for_each_attribute(o, f);
  }
}

template <class F>
void for_each_attribute(const Condition & c, F && f)
{
  for (const auto & t : c.terms) for_each_attribute(t, f);
  for (const auto & k : c.children) for_each_attribute(k, f);
}

}  // namespace comply
