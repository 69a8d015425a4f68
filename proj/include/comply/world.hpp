// comply/world.hpp - Ground-truth facts, observability masks and the agent-visible situation
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "comply/value.hpp"

namespace comply
{

/// (entityId, attribute)
struct Ref
{
  std::string entity;
  std::string attr;

  friend bool operator==(const Ref &, const Ref &) = default;
  friend auto operator<=>(const Ref &, const Ref &) = default;
};

inline std::string to_string(const Ref & r) { return r.entity + "." + r.attr; }

struct Fact
{
  std::string entity;
  std::string attr;
  Value value;

  friend bool operator==(const Fact &, const Fact &) = default;
};

/// Grow-only attribute name interner shared by a world and every view derived from it.
class AttributeTable
{
public:
  int intern(const std::string & name)
  {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.push_back(name);
    index_.emplace(name, id);
    return id;
  }

  std::optional<int> find(const std::string & name) const
  {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string & name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return names_.size(); }

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

enum class CellState : std::uint8_t { absent, known, unknown };

struct Cell
{
  CellState state = CellState::absent;
  Value value = Number(0);
};

/// Typed entities with attribute cells. Entities are kept sorted by id, so entity
/// indices are stable only until the next add/remove.
class FactTable
{
public:
  FactTable() : attrs_(std::make_shared<AttributeTable>()) {}
  explicit FactTable(std::shared_ptr<AttributeTable> attrs) : attrs_(std::move(attrs)) {}

  void add_entity(const std::string & id, const std::string & type)
  {
    if (index_.count(id)) throw std::invalid_argument("duplicate entity " + id);
    auto pos = std::lower_bound(ids_.begin(), ids_.end(), id);
    const auto at = pos - ids_.begin();
    ids_.insert(pos, id);
    types_.insert(types_.begin() + at, type);
    cells_.insert(cells_.begin() + at, std::vector<Cell>{});
    reindex();
  }

  void remove_entity(const std::string & id)
  {
    auto e = entity_index(id);
    if (!e) return;
    ids_.erase(ids_.begin() + *e);
    types_.erase(types_.begin() + *e);
    cells_.erase(cells_.begin() + *e);
    reindex();
  }

  std::optional<int> entity_index(const std::string & id) const
  {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool has_entity(const std::string & id) const { return index_.count(id) > 0; }
  int entity_count() const { return static_cast<int>(ids_.size()); }
  const std::string & entity_id(int e) const { return ids_[static_cast<std::size_t>(e)]; }
  const std::string & entity_type(int e) const { return types_[static_cast<std::size_t>(e)]; }

  std::optional<std::string> type_of(const std::string & id) const
  {
    auto e = entity_index(id);
    if (!e) return std::nullopt;
    return entity_type(*e);
  }

  const Cell & cell(int e, int a) const
  {
    static const Cell absent{};
    const auto & row = cells_[static_cast<std::size_t>(e)];
    if (a < 0 || static_cast<std::size_t>(a) >= row.size()) return absent;
    return row[static_cast<std::size_t>(a)];
  }

  void set_cell(int e, int a, Cell c)
  {
    auto & row = cells_[static_cast<std::size_t>(e)];
    if (row.size() <= static_cast<std::size_t>(a)) row.resize(static_cast<std::size_t>(a) + 1);
    row[static_cast<std::size_t>(a)] = std::move(c);
  }

  void set(int e, int a, Value v) { set_cell(e, a, Cell{CellState::known, std::move(v)}); }

  void set(const std::string & id, const std::string & attr, Value v)
  {
    auto e = entity_index(id);
    if (!e) throw std::invalid_argument("unknown entity " + id);
    set(*e, attrs_->intern(attr), std::move(v));
  }

  void mark_unknown(int e, int a)
  {
    Cell c = cell(e, a);
    c.state = CellState::unknown;
    set_cell(e, a, std::move(c));
  }

  /// Known value, or nullopt when absent or unknown.
  std::optional<Value> get(const std::string & id, const std::string & attr) const
  {
    auto e = entity_index(id);
    auto a = attrs_->find(attr);
    if (!e || !a) return std::nullopt;
    const Cell & c = cell(*e, *a);
    if (c.state != CellState::known) return std::nullopt;
    return c.value;
  }

  CellState state(const std::string & id, const std::string & attr) const
  {
    auto e = entity_index(id);
    auto a = attrs_->find(attr);
    if (!e || !a) return CellState::absent;
    return cell(*e, *a).state;
  }

  AttributeTable & attrs() { return *attrs_; }
  const AttributeTable & attrs() const { return *attrs_; }
  const std::shared_ptr<AttributeTable> & attrs_ptr() const { return attrs_; }

  /// Known facts, ordered by (entity, attribute name).
  std::vector<Fact> facts() const
  {
    std::vector<Fact> out;
    for_each_cell([&](int e, int a, const Cell & c) {
      if (c.state == CellState::known) out.push_back({entity_id(e), attrs_->name(a), c.value});
    });
    std::sort(out.begin(), out.end(), [](const Fact & x, const Fact & y) {
      return std::tie(x.entity, x.attr) < std::tie(y.entity, y.attr);
    });
    return out;
  }

  std::set<Ref> unknown_refs() const
  {
    std::set<Ref> out;
    for_each_cell([&](int e, int a, const Cell & c) {
      if (c.state == CellState::unknown) out.insert({entity_id(e), attrs_->name(a)});
    });
    return out;
  }

  template <class F>
  void for_each_cell(F && f) const
  {
    for (int e = 0; e < entity_count(); ++e) {
      const auto & row = cells_[static_cast<std::size_t>(e)];
      for (std::size_t a = 0; a < row.size(); ++a) f(e, static_cast<int>(a), row[a]);
    }
  }

private:
  void reindex()
  {
    index_.clear();
    for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], static_cast<int>(i));
  }

  std::shared_ptr<AttributeTable> attrs_;
  std::vector<std::string> ids_;
  std::vector<std::string> types_;
  std::vector<std::vector<Cell>> cells_;
  std::unordered_map<std::string, int> index_;
};

/// Ground truth. Every stored cell is known.
struct WorldState
{
  FactTable table;
  std::int64_t tick = 0;
};

/// What the agent can see: hidden, unrevealed cells are marked unknown.
struct Situation
{
  FactTable table;
  std::int64_t tick = 0;
  std::set<std::string> active_contexts;

  std::vector<Fact> observed_facts() const { return table.facts(); }
  std::set<Ref> unknown_refs() const { return table.unknown_refs(); }
};

/// Entity `*` in a hidden entry hides that attribute on every entity.
struct ObservabilityMask
{
  std::set<Ref> hidden;
  std::map<Ref, std::int64_t> revealed_until;

  bool is_hidden(const std::string & entity, const std::string & attr) const
  {
    return hidden.count(Ref{entity, attr}) > 0 || hidden.count(Ref{"*", attr}) > 0;
  }

  bool is_revealed(const std::string & entity, const std::string & attr, std::int64_t tick) const
  {
    auto it = revealed_until.find(Ref{entity, attr});
    return it != revealed_until.end() && tick <= it->second;
  }
};

/// Projects the world through the mask. A revealed cell stays visible through its
/// expiry tick inclusive. Entries naming missing entities are ignored with a warning.
inline Situation project(
  const WorldState & world, const ObservabilityMask & mask,
  std::vector<std::string> * warnings = nullptr)
{
  Situation s;
  s.table = world.table;
  s.tick = world.tick;
  for (const auto & h : mask.hidden) {
    if (h.entity != "*" && !world.table.has_entity(h.entity) && warnings) {
      warnings->push_back("hidden entry " + to_string(h) + " names no entity");
    }
  }
  if (mask.hidden.empty()) return s;
  const auto & attrs = world.table.attrs();
  world.table.for_each_cell([&](int e, int a, const Cell & c) {
    if (c.state != CellState::known) return;
    const std::string & id = world.table.entity_id(e);
    const std::string & name = attrs.name(a);
    if (mask.is_hidden(id, name) && !mask.is_revealed(id, name, world.tick)) {
      s.table.mark_unknown(e, a);
    }
  });
  return s;
}

/// Reveals a hidden attribute until `current_tick + staleness`. Revealing an attribute
/// that is not hidden leaves the mask unchanged and sets `warning`.
inline ObservabilityMask reveal(
  ObservabilityMask mask, const std::string & entity, const std::string & attr,
  std::int64_t current_tick, std::int64_t staleness, std::string * warning = nullptr)
{
  if (!mask.is_hidden(entity, attr)) {
    if (warning) *warning = "reveal of " + entity + "." + attr + " which is not hidden";
    return mask;
  }
  mask.revealed_until[Ref{entity, attr}] = current_tick + staleness;
  return mask;
}

}  // namespace comply
