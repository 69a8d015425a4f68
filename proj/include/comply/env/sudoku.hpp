// comply/env/sudoku.hpp - Static, fully observable Sudoku board with a brute-force checker
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comply/env/environment.hpp"

namespace comply
{

/// n x n board (n = 4 or 9). Cells are entities `r<row>c<col>` of type `cell` with
/// attributes row, col, box, value; value 0 is empty. Givens are never overwritten.
class SudokuWorld : public Environment
{
public:
  /// `digits` is row-major with '0' or '.' for empty; length 16 or 81.
  static std::unique_ptr<SudokuWorld> from_puzzle(const std::string & digits, std::string * error)
  {
    int n = 0;
    if (digits.size() == 16) n = 4;
    else if (digits.size() == 81) n = 9;
    else {
      if (error) *error = "puzzle must have 16 or 81 cells, found " + std::to_string(digits.size());
      return nullptr;
    }
    std::vector<int> cells;
    for (char ch : digits) {
      const int d = ch == '.' ? 0 : ch - '0';
      if (d < 0 || d > n) {
        if (error) *error = std::string("puzzle digit '") + ch + "' out of range for size " + std::to_string(n);
        return nullptr;
      }
      cells.push_back(d);
    }
    return std::make_unique<SudokuWorld>(n, cells);
  }

  SudokuWorld(int n, const std::vector<int> & cells) : n_(n), box_(n == 4 ? 2 : 3)
  {
    auto & t = world_.table;
    row_ = t.attrs().intern("row");
    col_ = t.attrs().intern("col");
    boxa_ = t.attrs().intern("box");
    value_ = t.attrs().intern("value");
    for (int r = 1; r <= n; ++r) {
      for (int c = 1; c <= n; ++c) t.add_entity(cell_id(r, c), "cell");
    }
    given_.assign(static_cast<std::size_t>(n * n), false);
    for (int r = 1; r <= n; ++r) {
      for (int c = 1; c <= n; ++c) {
        const int e = *t.entity_index(cell_id(r, c));
        const int v = cells[static_cast<std::size_t>((r - 1) * n + (c - 1))];
        t.set(e, row_, Number(r));
        t.set(e, col_, Number(c));
        t.set(e, boxa_, Number(box_of(r, c)));
        t.set(e, value_, Number(v));
        given_[static_cast<std::size_t>((r - 1) * n + (c - 1))] = v != 0;
      }
    }
    catalog_.push_back(CatalogEntry{"place", {"row", "col", "digit"}, std::nullopt,
                                    "sets an empty cell's value to digit"});
  }

  static std::string cell_id(int r, int c) { return "r" + std::to_string(r) + "c" + std::to_string(c); }

  int size() const { return n_; }
  int box_of(int r, int c) const { return (r - 1) / box_ * box_ + (c - 1) / box_ + 1; }

  int value(int r, int c) const
  {
    const int e = *world_.table.entity_index(cell_id(r, c));
    return static_cast<int>(std::get<Number>(world_.table.cell(e, value_).value).numerator());
  }

  bool is_given(int r, int c) const { return given_[static_cast<std::size_t>((r - 1) * n_ + (c - 1))]; }

  EnvironmentKind kind() const override { return EnvironmentKind::sudoku; }
  const ActionCatalog & catalog() const override { return catalog_; }
  const WorldState & world() const override { return world_; }
  Outcome outcome() const override { return outcome_; }

  Ontology ontology() const override
  {
    Ontology o;
    o.attributes = {"row", "col", "box", "value"};
    o.types = {"cell"};
    return o;
  }

  bool is_mutable(const std::string & attr) const override { return attr == "value"; }

  std::vector<Action> actions(const FactTable & visible) const override
  {
    std::vector<Action> out;
    for (int r = 1; r <= n_; ++r) {
      for (int c = 1; c <= n_; ++c) {
        if (!empty_in(visible, r, c)) continue;
        for (int d = 1; d <= n_; ++d) {
          out.push_back(Action{"place", {std::to_string(r), std::to_string(c), std::to_string(d)}});
        }
      }
    }
    return out;
  }

  std::vector<CellPatch> project(const FactTable & visible, const Action & a) const override
  {
    auto p = parse_place(a);
    if (!p || !empty_in(visible, p->r, p->c)) return {};
    const int e = *visible.entity_index(cell_id(p->r, p->c));
    return {CellPatch{e, value_, Cell{CellState::known, Number(p->d)}}};
  }

  StepResult step(const Action & a) override
  {
    StepResult res;
    ++world_.tick;
    auto p = parse_place(a);
    if (!p) {
      res.events.push_back({"rejected", {{"action", a.str()}, {"reason", "not a placement"}}});
    } else if (is_given(p->r, p->c) || value(p->r, p->c) != 0) {
      res.events.push_back({"rejected", {{"action", a.str()}, {"reason", "cell filled"}}});
    } else {
      const int e = *world_.table.entity_index(cell_id(p->r, p->c));
      world_.table.set(e, value_, Number(p->d));
    }
    if (task_achieved(world_.table)) {
      const auto bad = oracle(world_);
      if (bad.empty()) {
        outcome_ = Outcome::success;
        res.events.push_back({"solved", {}});
      } else {
        outcome_ = Outcome::failure;
        res.events.push_back({"invalid_board", {{"violations", std::to_string(bad.size())}}});
      }
    }
    res.outcome = outcome_;
    return res;
  }

  StepResult idle() override
  {
    ++world_.tick;
    return StepResult{{}, outcome_};
  }

  bool task_achieved(const FactTable & visible) const override
  {
    for (int e = 0; e < visible.entity_count(); ++e) {
      const Cell & c = visible.cell(e, value_);
      if (c.state != CellState::known || std::get<Number>(c.value) == Number(0)) return false;
    }
    return true;
  }

  std::optional<std::string> task() const override { return std::string("every cell filled"); }

  std::optional<std::string> choice_group(const Action & a) const override
  {
    if (a.name != "place" || a.args.size() != 3) return std::nullopt;
    return "r" + a.args[0] + "c" + a.args[1];
  }

  /// Unordered pairs of distinct cells sharing a row, column or box with equal nonzero
  /// values, each pair listed once with the smaller id first.
  static std::set<std::pair<std::string, std::string>> oracle(const WorldState & w)
  {
    struct C
    {
      std::string id;
      std::int64_t row, col, box, value;
    };
    std::vector<C> cells;
    const auto & t = w.table;
    auto num = [&](int e, const char * a) {
      auto v = t.get(t.entity_id(e), a);
      return v ? std::get<Number>(*v).numerator() : 0;
    };
    for (int e = 0; e < t.entity_count(); ++e) {
      cells.push_back({t.entity_id(e), num(e, "row"), num(e, "col"), num(e, "box"), num(e, "value")});
    }
    std::set<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      for (std::size_t j = i + 1; j < cells.size(); ++j) {
        const C & a = cells[i];
        const C & b = cells[j];
        if (a.value == 0 || a.value != b.value) continue;
        if (a.row == b.row || a.col == b.col || a.box == b.box) {
          out.insert(a.id < b.id ? std::make_pair(a.id, b.id) : std::make_pair(b.id, a.id));
        }
      }
    }
    return out;
  }

private:
  struct Place
  {
    int r, c, d;
  };

  std::optional<Place> parse_place(const Action & a) const
  {
    if (a.name != "place" || a.args.size() != 3) return std::nullopt;
    try {
      Place p{std::stoi(a.args[0]), std::stoi(a.args[1]), std::stoi(a.args[2])};
      if (p.r < 1 || p.r > n_ || p.c < 1 || p.c > n_ || p.d < 1 || p.d > n_) return std::nullopt;
      return p;
    } catch (const std::exception &) {
      return std::nullopt;
    }
  }

  bool empty_in(const FactTable & t, int r, int c) const
  {
    auto e = t.entity_index(cell_id(r, c));
    if (!e) return false;
    const Cell & cell = t.cell(*e, value_);
    return cell.state == CellState::known && std::get<Number>(cell.value) == Number(0);
  }

  int n_;
  int box_;
  int row_ = 0, col_ = 0, boxa_ = 0, value_ = 0;
  WorldState world_;
  std::vector<bool> given_;
  ActionCatalog catalog_;
  Outcome outcome_ = Outcome::running;
};

}  // namespace comply
