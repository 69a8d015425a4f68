// comply/action.hpp - Primitive actions and environment action catalogs
#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

namespace comply
{

/// A primitive action such as `accelerate` or `place(1,2,3)`.
struct Action
{
  std::string name;
  std::vector<std::string> args;

  std::string str() const
  {
    if (args.empty()) return name;
    std::string s = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) s += ",";
      s += args[i];
    }
    return s + ")";
  }

  friend bool operator==(const Action &, const Action &) = default;
  friend auto operator<=>(const Action & a, const Action & b) { return a.str() <=> b.str(); }
};

/// What a measurement action makes visible. An empty `entity` means the action's
/// single argument names the entity.
struct RevealSpec
{
  std::string entity;
  std::string attr;
};

struct CatalogEntry
{
  std::string name;
  std::vector<std::string> params;
  std::optional<RevealSpec> reveals;
  std::string effect;  // human-readable projection rule
};

using ActionCatalog = std::vector<CatalogEntry>;

inline const CatalogEntry * find_entry(const ActionCatalog & catalog, const std::string & name)
{
  for (const auto & e : catalog) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

}  // namespace comply
