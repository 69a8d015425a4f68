// comply/internalizer.hpp - Rewriting external constraint vocabulary into the agent's ontology
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "comply/ast.hpp"

namespace comply
{

/// Internal names the agent already understands.
struct Ontology
{
  std::set<std::string> attributes;
  std::set<std::string> types;
  std::set<std::string> contexts;

  const std::set<std::string> & names(TermKind k) const
  {
    switch (k) {
      case TermKind::attribute: return attributes;
      case TermKind::type: return types;
      case TermKind::context: return contexts;
    }
    return attributes;
  }

  bool contains(TermKind k, const std::string & name) const
  {
    if (k == TermKind::attribute && name == "id") return true;
    return names(k).count(name) > 0;
  }
};

/// A constraint whose every attribute, type and context name is internal.
struct InternalConstraint
{
  std::string id;
  Modality modality = Modality::require;
  std::set<std::string> context_tags;
  std::optional<std::int64_t> priority;
  std::vector<ScopeEntry> scope;
  std::optional<Condition> when;
  Condition holds;
  std::string file;

  std::vector<std::string> variables() const
  {
    std::vector<std::string> out;
    for (const auto & s : scope) out.push_back(s.var);
    return out;
  }

  friend bool operator==(const InternalConstraint & a, const InternalConstraint & b)
  {
    return a.id == b.id && a.modality == b.modality && a.context_tags == b.context_tags &&
           a.priority == b.priority && a.scope == b.scope && a.when == b.when &&
           a.holds == b.holds;
  }
};

struct UnmappedTerm
{
  std::string name;
  TermKind kind = TermKind::attribute;
  /// Set when the vocabulary maps the name, but to a different kind.
  std::optional<TermKind> mapped_kind;

  friend bool operator==(const UnmappedTerm &, const UnmappedTerm &) = default;
  friend auto operator<=>(const UnmappedTerm & a, const UnmappedTerm & b)
  {
    return std::tie(a.name, a.kind) <=> std::tie(b.name, b.kind);
  }
};

/// Never empty.
struct InternalizationError
{
  std::string constraint_id;
  std::set<UnmappedTerm> unmapped_terms;
};

inline std::string describe(const InternalizationError & err)
{
  std::string out;
  for (const auto & t : err.unmapped_terms) {
    if (!out.empty()) out += ",";
    out += t.name + ":" + to_string(t.kind);
  }
  return out;
}

namespace detail
{
class Rewriter
{
public:
  Rewriter(const VocabularyMap & vocab, const Ontology & onto, std::set<UnmappedTerm> & errors)
  : vocab_(vocab), onto_(onto), errors_(errors)
  {
  }

  // The ontology wins over the vocabulary so that new entries cannot break a working rewrite.
  std::string name(const std::string & ext, TermKind kind)
  {
    if (onto_.contains(kind, ext)) return ext;
    auto it = vocab_.find(ext);
    if (it == vocab_.end()) {
      errors_.insert(UnmappedTerm{ext, kind, std::nullopt});
      return ext;
    }
    if (it->second.kind != kind) {
      errors_.insert(UnmappedTerm{ext, kind, it->second.kind});
      return ext;
    }
    if (!onto_.contains(kind, it->second.internal)) {
      errors_.insert(UnmappedTerm{ext, kind, std::nullopt});
      return ext;
    }
    return it->second.internal;
  }

  void term(Term & t)
  {
    if (t.kind == Term::Kind::attribute) t.attr = name(t.attr, TermKind::attribute);
    for (auto & o : t.operands) term(o);
  }

  void condition(Condition & c)
  {
    for (auto & t : c.terms) term(t);
    for (auto & k : c.children) condition(k);
  }

private:
  const VocabularyMap & vocab_;
  const Ontology & onto_;
  std::set<UnmappedTerm> & errors_;
};
}  // namespace detail

/// Rewrites every name through the ontology or vocabulary. Fails listing all unmapped terms.
inline std::variant<InternalConstraint, InternalizationError> internalize(
  const ConstraintSpec & spec, const VocabularyMap & vocab, const Ontology & onto)
{
  std::set<UnmappedTerm> errors;
  detail::Rewriter rw(vocab, onto, errors);
  InternalConstraint out;
  out.id = spec.id;
  out.modality = spec.modality;
  out.priority = spec.priority;
  out.file = spec.file;
  for (const auto & tag : spec.context_tags) out.context_tags.insert(rw.name(tag, TermKind::context));
  for (auto s : spec.scope) {
    s.type = rw.name(s.type, TermKind::type);
    out.scope.push_back(std::move(s));
  }
  if (spec.when) {
    out.when = *spec.when;
    rw.condition(*out.when);
  }
  out.holds = spec.holds;
  rw.condition(out.holds);
  if (!errors.empty()) return InternalizationError{spec.id, std::move(errors)};
  return out;
}

/// Ordered instructor answers; each is consumed at most once per run.
class InstructorScript
{
public:
  InstructorScript() = default;
  explicit InstructorScript(std::vector<InstructorAnswer> answers)
  : answers_(std::move(answers)), used_(answers_.size(), false)
  {
  }

  bool empty() const { return answers_.empty(); }
  const std::vector<InstructorAnswer> & answers() const { return answers_; }

  /// First unconsumed answer of `kind` accepted by `match`; consumes it.
  template <class F>
  std::optional<InstructorAnswer> take(InstructorAnswer::Kind kind, F && match)
  {
    for (std::size_t i = 0; i < answers_.size(); ++i) {
      if (used_[i] || answers_[i].kind != kind || !match(answers_[i])) continue;
      used_[i] = true;
      return answers_[i];
    }
    return std::nullopt;
  }

  template <class F>
  bool has(InstructorAnswer::Kind kind, F && match) const
  {
    for (std::size_t i = 0; i < answers_.size(); ++i) {
      if (!used_[i] && answers_[i].kind == kind && match(answers_[i])) return true;
    }
    return false;
  }

private:
  std::vector<InstructorAnswer> answers_;
  std::vector<bool> used_;
};

/// Returns mappings for every unmapped term when the script teaches all of them, and
/// consumes those answers. Otherwise nothing is consumed and the result is empty.
inline std::optional<VocabularyMap> resolve_unmapped(
  const InternalizationError & err, InstructorScript & script)
{
  std::set<std::string> names;
  for (const auto & t : err.unmapped_terms) names.insert(t.name);
  for (const auto & n : names) {
    if (!script.has(InstructorAnswer::Kind::teach, [&](const InstructorAnswer & a) { return a.term == n; })) {
      return std::nullopt;
    }
  }
  VocabularyMap delta;
  for (const auto & n : names) {
    auto a = script.take(InstructorAnswer::Kind::teach, [&](const InstructorAnswer & x) { return x.term == n; });
    delta[n] = a->mapping;
  }
  return delta;
}

/// Every attribute, type and context name an internal constraint uses.
inline void collect_names(
  const InternalConstraint & c, std::set<std::string> & attrs, std::set<std::string> & types,
  std::set<std::string> & contexts)
{
  for (const auto & t : c.context_tags) contexts.insert(t);
  for (const auto & s : c.scope) types.insert(s.type);
  auto visit = [&](const Term & t) { attrs.insert(t.attr); };
  if (c.when) for_each_attribute(*c.when, visit);
  for_each_attribute(c.holds, visit);
}

}  // namespace comply
