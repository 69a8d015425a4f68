// comply/env/driving.hpp - Two-lane road with scripted traffic, hidden gaps and fail-hard collisions
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comply/env/environment.hpp"

namespace comply
{

inline constexpr std::int64_t kMaxSpeed = 10;
inline constexpr std::int64_t kGapSentinel = 99;

struct DrivingParams
{
  std::int64_t length = 200;
  std::optional<Number> goal;
  std::optional<std::int64_t> deadline;
};

/// The ego car is entity `self` of type `ego`; every other entity with pos and speed
/// moves each tick. Lane 0 is the right lane, lane 1 the left.
///
/// Per tick: the ego action changes speed or lane, every car advances by its speed,
/// scripted events for the new tick apply, then derived attributes are recomputed:
/// gap_ticks (per car), last_action, time_left and dist_left (ego, when configured).
class DrivingWorld : public Environment
{
public:
  DrivingWorld(FactTable initial, DrivingParams params, std::vector<EventDecl> events)
  : params_(std::move(params)), events_(std::move(events))
  {
    world_.table = std::move(initial);
    world_.tick = 0;
    auto & at = world_.table.attrs();
    pos_ = at.intern("pos");
    lane_ = at.intern("lane");
    speed_ = at.intern("speed");
    gap_ = at.intern("gap_ticks");
    last_ = at.intern("last_action");
    time_left_ = at.intern("time_left");
    dist_left_ = at.intern("dist_left");
    std::vector<EnvEvent> ignored;
    apply_events(0, ignored);
    if (auto self = world_.table.entity_index("self")) {
      world_.table.set(*self, last_, Symbol{"none"});
    }
    recompute_derived(world_.table, 0, false);

    catalog_ = {
      {"accelerate", {}, std::nullopt, "speed +1, capped at 10"},
      {"change_lane_left", {}, std::nullopt, "lane +1; no-op in the left lane"},
      {"change_lane_right", {}, std::nullopt, "lane -1; no-op in the right lane"},
      {"decelerate", {}, std::nullopt, "speed -1, floored at 0"},
      {"hard_brake", {}, std::nullopt, "speed -3, floored at 0"},
      {"maintain", {}, std::nullopt, "no change"},
      {"measure_gap", {"target"}, RevealSpec{"", "gap_ticks"}, "as maintain; reveals target.gap_ticks"},
    };
  }

  /// Validates scenario facts: `self:ego` with pos, lane, speed, speed_limit; other
  /// movers need pos, lane, speed.
  static std::vector<std::string> validate(const FactTable & t)
  {
    std::vector<std::string> errs;
    auto self = t.entity_index("self");
    if (!self) {
      errs.push_back("driving scenario needs an entity self:ego");
      return errs;
    }
    if (t.entity_type(*self) != "ego") errs.push_back("entity self must have type ego");
    for (const char * a : {"pos", "lane", "speed", "speed_limit"}) {
      if (t.state("self", a) != CellState::known) errs.push_back(std::string("self is missing ") + a);
    }
    for (int e = 0; e < t.entity_count(); ++e) {
      const std::string & id = t.entity_id(e);
      if (t.entity_type(e) != "car") continue;
      for (const char * a : {"pos", "lane", "speed"}) {
        if (t.state(id, a) != CellState::known) errs.push_back(id + " is missing " + a);
      }
    }
    for (int e = 0; e < t.entity_count(); ++e) {
      const std::string & id = t.entity_id(e);
      for (const char * a : {"pos", "lane", "speed"}) {
        auto v = t.get(id, a);
        if (v && kind_of(*v) != ValueKind::number) errs.push_back(id + "." + a + " must be a number");
      }
    }
    return errs;
  }

  EnvironmentKind kind() const override { return EnvironmentKind::driving; }
  const ActionCatalog & catalog() const override { return catalog_; }
  const WorldState & world() const override { return world_; }
  Outcome outcome() const override { return outcome_; }
  const DrivingParams & params() const { return params_; }

  Ontology ontology() const override
  {
    Ontology o;
    o.attributes = {"pos", "lane", "speed", "speed_limit", "gap_ticks", "last_action"};
    if (params_.deadline) o.attributes.insert("time_left");
    if (params_.goal) o.attributes.insert("dist_left");
    o.types = {"ego", "car"};
    auto add = [&](const FactTable & t) {
      t.for_each_cell([&](int e, int a, const Cell & c) {
        if (c.state != CellState::absent) o.attributes.insert(t.attrs().name(a));
        o.types.insert(t.entity_type(e));
      });
    };
    add(world_.table);
    for (const auto & ev : events_) {
      for (const auto & as : ev.assigns) o.attributes.insert(as.attr);
      if (ev.kind == EventDecl::Kind::spawn) o.types.insert(ev.type);
    }
    return o;
  }

  bool is_mutable(const std::string & a) const override
  {
    static const std::set<std::string> m = {"pos", "lane", "speed", "gap_ticks",
                                            "last_action", "time_left", "dist_left"};
    return m.count(a) > 0;
  }

  /// Lane changes toward a visible road edge are not applicable.
  std::vector<Action> actions(const FactTable & visible) const override
  {
    std::optional<Number> lane;
    if (auto s = visible.entity_index("self")) lane = num(visible, *s, lane_);
    std::vector<Action> out;
    for (const auto & e : catalog_) {
      if (e.reveals) continue;
      if (lane && e.name == "change_lane_left" && *lane >= Number(1)) continue;
      if (lane && e.name == "change_lane_right" && *lane <= Number(0)) continue;
      out.push_back(Action{e.name, {}});
    }
    return out;
  }

  std::vector<CellPatch> project(const FactTable & visible, const Action & a) const override
  {
    FactTable next = visible;
    std::vector<std::string> warnings;
    if (!transition(next, a, warnings)) return {};
    std::vector<CellPatch> out;
    next.for_each_cell([&](int e, int at, const Cell & c) {
      const Cell & before = visible.cell(e, at);
      if (before.state != c.state || !(before.value == c.value)) out.push_back({e, at, c});
    });
    return out;
  }

  StepResult step(const Action & a) override
  {
    StepResult res;
    if (outcome_ != Outcome::running) {
      res.outcome = outcome_;
      return res;
    }
    FactTable before = world_.table;
    std::vector<std::string> warnings;
    if (!transition(world_.table, a, warnings)) {
      res.events.push_back({"rejected", {{"action", a.str()}}});
    }
    for (const auto & w : warnings) res.events.push_back({"warning", {{"reason", w}, {"action", a.str()}}});
    ++world_.tick;
    apply_events(world_.tick, res.events);
    recompute_derived(world_.table, world_.tick, false);
    check_collisions(before, res.events);
    remove_exited(res.events);
    if (outcome_ == Outcome::running) check_goal(res.events);
    res.outcome = outcome_;
    return res;
  }

  std::optional<std::string> task() const override
  {
    if (!params_.goal) return std::nullopt;
    return "self.pos >= " + format_number(*params_.goal);
  }

  /// Nobody steers: the ego keeps its speed and lane.
  StepResult idle() override { return step(Action{"maintain", {}}); }

  bool task_achieved(const FactTable & visible) const override
  {
    if (!params_.goal) return false;
    auto s = visible.entity_index("self");
    if (!s) return false;
    auto p = num(visible, *s, pos_);
    return p && *p >= *params_.goal;
  }

private:
  static std::optional<Number> num(const FactTable & t, int e, int a)
  {
    const Cell & c = t.cell(e, a);
    if (c.state != CellState::known || kind_of(c.value) != ValueKind::number) return std::nullopt;
    return std::get<Number>(c.value);
  }

  /// Ego action then movement. Cells whose inputs are unknown become unknown.
  bool transition(FactTable & t, const Action & a, std::vector<std::string> & warnings) const
  {
    auto self = t.entity_index("self");
    if (!self) return false;
    const int s = *self;
    const CatalogEntry * entry = find_entry(catalog_, a.name);
    if (!entry) return false;
    auto set_num = [&](int e, int at, std::optional<Number> v) {
      if (v) t.set(e, at, *v);
      else t.mark_unknown(e, at);
    };
    auto speed = num(t, s, speed_);
    auto clamp = [](Number v) {
      if (v < 0) return Number(0);
      if (v > kMaxSpeed) return Number(kMaxSpeed);
      return v;
    };
    if (a.name == "accelerate" && speed) set_num(s, speed_, clamp(*speed + 1));
    if (a.name == "decelerate" && speed) set_num(s, speed_, clamp(*speed - 1));
    if (a.name == "hard_brake" && speed) set_num(s, speed_, clamp(*speed - 3));
    if (a.name == "change_lane_left" || a.name == "change_lane_right") {
      auto lane = num(t, s, lane_);
      const bool left = a.name == "change_lane_left";
      if (lane) {
        const Number target = *lane + (left ? 1 : -1);
        if (target < 0 || target > 1) warnings.push_back("road edge");
        else t.set(s, lane_, target);
      }
    }
    t.set(s, last_, Symbol{a.name});
    for (int e = 0; e < t.entity_count(); ++e) {
      if (t.cell(e, pos_).state == CellState::absent || t.cell(e, speed_).state == CellState::absent) {
        continue;
      }
      auto p = num(t, e, pos_);
      auto v = num(t, e, speed_);
      set_num(e, pos_, p && v ? std::optional<Number>(*p + *v) : std::nullopt);
    }
    recompute_derived(t, 0, true);
    return true;
  }

  /// In projection mode time_left counts down from its visible value and unknown
  /// derived cells stay unknown.
  void recompute_derived(FactTable & t, std::int64_t tick, bool projecting) const
  {
    auto self = t.entity_index("self");
    if (!self) return;
    const int s = *self;
    auto spos = num(t, s, pos_);
    auto sspeed = num(t, s, speed_);
    for (int e = 0; e < t.entity_count(); ++e) {
      if (e == s || t.cell(e, pos_).state == CellState::absent) continue;
      if (t.cell(e, speed_).state == CellState::absent) continue;
      if (projecting && t.cell(e, gap_).state == CellState::unknown) continue;
      auto cpos = num(t, e, pos_);
      if (!cpos || !spos || !sspeed) {
        t.mark_unknown(e, gap_);
        continue;
      }
      t.set(e, gap_, *sspeed > 0 ? (*cpos - *spos) / *sspeed : Number(kGapSentinel));
    }
    if (params_.deadline) {
      if (!projecting) {
        t.set(s, time_left_, Number(*params_.deadline - tick));
      } else if (auto tl = num(t, s, time_left_)) {
        t.set(s, time_left_, *tl - 1);
      }
    }
    if (params_.goal) {
      if (spos) t.set(s, dist_left_, *params_.goal - *spos);
      else t.mark_unknown(s, dist_left_);
    }
  }

  void apply_events(std::int64_t tick, std::vector<EnvEvent> & out)
  {
    const FactTable snapshot = world_.table;
    for (const auto & ev : events_) {
      if (ev.tick != tick) continue;
      try {
        if (ev.kind == EventDecl::Kind::spawn) {
          if (world_.table.has_entity(ev.entity)) {
            out.push_back({"error", {{"reason", "spawn of existing entity " + ev.entity}}});
            continue;
          }
          std::vector<std::pair<std::string, Value>> values;
          for (const auto & as : ev.assigns) values.emplace_back(as.attr, evaluate_event_term(as.value, snapshot));
          world_.table.add_entity(ev.entity, ev.type);
          for (auto & [attr, v] : values) world_.table.set(ev.entity, attr, std::move(v));
          out.push_back({"spawn", {{"entity", ev.entity}, {"type", ev.type}}});
        } else {
          if (!world_.table.has_entity(ev.entity)) {
            out.push_back({"error", {{"reason", "set on missing entity " + ev.entity}}});
            continue;
          }
          const auto & as = ev.assigns.front();
          Value v = evaluate_event_term(as.value, snapshot);
          const std::string shown = to_string(v);
          world_.table.set(ev.entity, as.attr, std::move(v));
          out.push_back({"set", {{"ref", ev.entity + "." + as.attr}, {"value", shown}}});
        }
      } catch (const EvaluationError & e) {
        out.push_back({"error", {{"reason", e.what()}}});
      }
    }
  }

  void check_collisions(const FactTable & before, std::vector<EnvEvent> & out)
  {
    const FactTable & t = world_.table;
    auto s = t.entity_index("self");
    auto s0 = before.entity_index("self");
    if (!s || !s0) return;
    const auto sp = num(t, *s, pos_);
    const auto sl = num(t, *s, lane_);
    const auto sp0 = num(before, *s0, pos_);
    const auto sl0 = num(before, *s0, lane_);
    for (int e = 0; e < t.entity_count(); ++e) {
      if (e == *s) continue;
      const std::string & id = t.entity_id(e);
      auto cp = num(t, e, pos_);
      auto cl = num(t, e, lane_);
      if (!cp || !cl || !sp || !sl) continue;
      bool hit = *cp == *sp && *cl == *sl;
      if (!hit && sp0 && sl0) {
        auto e0 = before.entity_index(id);
        if (e0) {
          auto cp0 = num(before, *e0, pos_);
          auto cl0 = num(before, *e0, lane_);
          // Passing through a car in the same lane.
          if (cp0 && cl0 && *cl0 == *sl0 && *cl == *sl && *cl == *cl0) {
            hit = (*cp0 > *sp0 && *cp < *sp) || (*cp0 < *sp0 && *cp > *sp);
          }
        }
      }
      if (hit) {
        outcome_ = Outcome::failure;
        out.push_back({"collision", {{"with", id}, {"pos", format_number(*sp)}}});
      }
    }
  }

  void remove_exited(std::vector<EnvEvent> & out)
  {
    std::vector<std::string> gone;
    for (int e = 0; e < world_.table.entity_count(); ++e) {
      const std::string & id = world_.table.entity_id(e);
      if (id == "self") continue;
      auto p = num(world_.table, e, pos_);
      if (p && *p > params_.length) gone.push_back(id);
    }
    for (const auto & id : gone) {
      world_.table.remove_entity(id);
      out.push_back({"exit", {{"entity", id}}});
    }
  }

  void check_goal(std::vector<EnvEvent> & out)
  {
    if (task_achieved(world_.table)) {
      outcome_ = Outcome::success;
      out.push_back({"arrival", {{"tick", std::to_string(world_.tick)}}});
      return;
    }
    if (params_.deadline && world_.tick > *params_.deadline) {
      outcome_ = Outcome::failure;
      out.push_back({"deadline_missed", {{"deadline", std::to_string(*params_.deadline)}}});
    }
  }

  DrivingParams params_;
  std::vector<EventDecl> events_;
  WorldState world_;
  ActionCatalog catalog_;
  Outcome outcome_ = Outcome::running;
  int pos_ = 0, lane_ = 0, speed_ = 0, gap_ = 0, last_ = 0, time_left_ = 0, dist_left_ = 0;
};

}  // namespace comply
