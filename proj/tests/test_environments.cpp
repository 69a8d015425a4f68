// Sudoku and driving worlds: step rules, the brute-force Sudoku checker, projection fidelity.
#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "comply/env/driving.hpp"
#include "comply/env/sudoku.hpp"
#include "comply/grounder.hpp"
#include "test_support.hpp"

using namespace comply;

namespace
{

std::vector<InternalConstraint> sudoku_rules()
{
  auto text = read_text_file(std::filesystem::path(COMPLY_SCENARIO_DIR) / "constraints" / "sudoku.cst");
  return comply::testing::internal(*text);
}

/// Unordered violated cell pairs according to the engine's own grounding.
std::set<std::pair<std::string, std::string>> engine_violations(
  const std::vector<InternalConstraint> & rules, const WorldState & w)
{
  FactTable t = w.table;
  std::vector<PreparedConstraint> pcs;
  for (const auto & c : rules) pcs.push_back(prepare(c, t.attrs()));
  std::vector<const PreparedConstraint *> ptrs;
  for (const auto & p : pcs) ptrs.push_back(&p);
  const GroundingSet gs = ground_all(ptrs, t, 100000, [](int) { return false; });
  std::set<std::pair<std::string, std::string>> out;
  for (const auto & ev : evaluations_of(gs, t)) {
    if (ev.status != Compliance::violated) continue;
    std::string a = ev.grounding.bindings[0].second;
    std::string b = ev.grounding.bindings[1].second;
    if (b < a) std::swap(a, b);
    out.insert({a, b});
  }
  return out;
}

std::string random_board(std::mt19937 & rng, int n, double fill)
{
  std::bernoulli_distribution put(fill);
  std::uniform_int_distribution<int> digit(1, n);
  std::string s;
  for (int i = 0; i < n * n; ++i) s += put(rng) ? static_cast<char>('0' + digit(rng)) : '0';
  return s;
}

FactTable road(std::vector<std::tuple<std::string, std::string, int, int, int>> movers, int limit = 5)
{
  FactTable t;
  for (const auto & [id, type, pos, lane, speed] : movers) {
    t.add_entity(id, type);
    t.set(id, "pos", Number(pos));
    t.set(id, "lane", Number(lane));
    t.set(id, "speed", Number(speed));
    if (type == "ego") t.set(id, "speed_limit", Number(limit));
  }
  return t;
}

std::int64_t num(const FactTable & t, const std::string & id, const std::string & a)
{
  return std::get<Number>(*t.get(id, a)).numerator();
}

bool has_event(const StepResult & r, const std::string & kind)
{
  for (const auto & e : r.events) {
    if (e.kind == kind) return true;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sudoku
// ---------------------------------------------------------------------------

TEST(Sudoku, PlaceSetsValue)
{
  std::string err;
  auto w = SudokuWorld::from_puzzle("0000000000000000", &err);
  ASSERT_TRUE(w);
  w->step(Action{"place", {"1", "1", "3"}});
  EXPECT_EQ(w->value(1, 1), 3);
  EXPECT_EQ(w->value(1, 2), 0);
}

TEST(Sudoku, FullValidBoardSucceeds)
{
  auto w = SudokuWorld::from_puzzle("1234341221434321", nullptr);
  ASSERT_TRUE(w);
  auto w2 = SudokuWorld::from_puzzle("0234341221434321", nullptr);
  const auto r = w2->step(Action{"place", {"1", "1", "1"}});
  EXPECT_TRUE(has_event(r, "solved"));
  EXPECT_EQ(w2->outcome(), Outcome::success);
  EXPECT_TRUE(SudokuWorld::oracle(w->world()).empty());
}

TEST(Sudoku, PlaceIntoGivenRejected)
{
  auto w = SudokuWorld::from_puzzle("1000000000000000", nullptr);
  const auto r = w->step(Action{"place", {"1", "1", "2"}});
  EXPECT_TRUE(has_event(r, "rejected"));
  EXPECT_EQ(w->value(1, 1), 1);
}

TEST(Sudoku, BadPuzzleLength)
{
  std::string err;
  EXPECT_FALSE(SudokuWorld::from_puzzle("123", &err));
  EXPECT_NE(err.find("16 or 81"), std::string::npos);
}

TEST(Sudoku, OracleFindsDuplicateInRow)
{
  std::string p(81, '0');
  p[0] = '5';
  p[7] = '5';
  auto w = SudokuWorld::from_puzzle(p, nullptr);
  const auto bad = SudokuWorld::oracle(w->world());
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_EQ(*bad.begin(), std::make_pair(std::string("r1c1"), std::string("r1c8")));
}

TEST(Sudoku, ActionsCoverEmptyCellsOnly)
{
  auto w = SudokuWorld::from_puzzle("1234341221430000", nullptr);
  const auto acts = w->actions(w->world().table);
  EXPECT_EQ(acts.size(), 16u);
  for (const auto & a : acts) EXPECT_EQ(a.args[0], "4");
}

TEST(Sudoku, EngineMatchesOracleOnRandomBoards)
{
  const auto rules = sudoku_rules();
  std::mt19937 rng(2024);
  for (int i = 0; i < 200; ++i) {
    auto w = SudokuWorld::from_puzzle(random_board(rng, 4, 0.5), nullptr);
    ASSERT_EQ(engine_violations(rules, w->world()), SudokuWorld::oracle(w->world())) << i;
  }
  for (int i = 0; i < 20; ++i) {
    auto w = SudokuWorld::from_puzzle(random_board(rng, 9, 0.3), nullptr);
    ASSERT_EQ(engine_violations(rules, w->world()), SudokuWorld::oracle(w->world())) << i;
  }
}

// ---------------------------------------------------------------------------
// Driving
// ---------------------------------------------------------------------------

TEST(Driving, Kinematics)
{
  DrivingWorld w(road({{"self", "ego", 0, 0, 2}, {"lead", "car", 10, 0, 2}}), {}, {});
  w.step(Action{"maintain", {}});
  const auto & t = w.world().table;
  EXPECT_EQ(num(t, "self", "pos"), 2);
  EXPECT_EQ(num(t, "lead", "pos"), 12);
  EXPECT_EQ(num(t, "lead", "pos") - num(t, "self", "pos"), 10);
  EXPECT_EQ(w.world().tick, 1);
}

TEST(Driving, SpeedClampedAndHardBrake)
{
  DrivingWorld w(road({{"self", "ego", 0, 0, 10}}, 10), {}, {});
  w.step(Action{"accelerate", {}});
  EXPECT_EQ(num(w.world().table, "self", "speed"), 10);
  w.step(Action{"hard_brake", {}});
  EXPECT_EQ(num(w.world().table, "self", "speed"), 7);
  DrivingWorld slow(road({{"self", "ego", 0, 0, 1}}), {}, {});
  slow.step(Action{"hard_brake", {}});
  EXPECT_EQ(num(slow.world().table, "self", "speed"), 0);
}

TEST(Driving, SameCellCollisionFails)
{
  DrivingWorld w(road({{"self", "ego", 0, 0, 3}, {"lead", "car", 2, 0, 1}}), {}, {});
  const auto r = w.step(Action{"maintain", {}});
  EXPECT_TRUE(has_event(r, "collision"));
  EXPECT_EQ(w.outcome(), Outcome::failure);
}

TEST(Driving, PassingThroughCollides)
{
  DrivingWorld w(road({{"self", "ego", 0, 0, 5}, {"lead", "car", 2, 0, 1}}), {}, {});
  w.step(Action{"maintain", {}});
  EXPECT_EQ(w.outcome(), Outcome::failure);
  DrivingWorld other_lane(road({{"self", "ego", 0, 0, 5}, {"lead", "car", 2, 1, 1}}), {}, {});
  other_lane.step(Action{"maintain", {}});
  EXPECT_EQ(other_lane.outcome(), Outcome::running);
}

TEST(Driving, LaneChangeAtEdgeWarns)
{
  DrivingWorld w(road({{"self", "ego", 0, 0, 1}}), {}, {});
  const auto r = w.step(Action{"change_lane_right", {}});
  EXPECT_TRUE(has_event(r, "warning"));
  EXPECT_EQ(num(w.world().table, "self", "lane"), 0);
  w.step(Action{"change_lane_left", {}});
  EXPECT_EQ(num(w.world().table, "self", "lane"), 1);
}

TEST(Driving, GapTicksFormulaAndSentinel)
{
  DrivingWorld w(road({{"self", "ego", 0, 0, 2}, {"lead", "car", 10, 0, 2}}), {}, {});
  EXPECT_EQ(*w.world().table.get("lead", "gap_ticks"), Value(Number(5)));
  DrivingWorld parked(road({{"self", "ego", 0, 0, 0}, {"lead", "car", 10, 0, 0}}), {}, {});
  EXPECT_EQ(*parked.world().table.get("lead", "gap_ticks"), Value(Number(kGapSentinel)));
}

TEST(Driving, CutInSpawnHasHiddenGap)
{
  auto parsed = parse_scenario_file(
    "environment driving { length = 100 }\n"
    "facts { self:ego { pos = 0, lane = 0, speed = 3, speed_limit = 5 } }\n"
    "hidden { *.gap_ticks }\n"
    "events { at 7: spawn cutter:car { pos = self.pos + 2, lane = 0, speed = 4 } }\n"
    "run { maxTicks = 20 seed = 1 }\n",
    [](const std::string &) { return std::nullopt; });
  ASSERT_TRUE(parsed.ok());
  FactTable t;
  for (const auto & f : parsed.value->facts) {
    t.add_entity(f.entity, f.type);
    for (const auto & [a, v] : f.attrs) t.set(f.entity, a, v);
  }
  DrivingWorld w(t, {}, parsed.value->events);
  ObservabilityMask mask;
  mask.hidden.insert(Ref{"*", "gap_ticks"});
  for (int i = 0; i < 7; ++i) {
    const auto r = w.step(Action{"maintain", {}});
    EXPECT_EQ(has_event(r, "spawn"), i == 6);
  }
  EXPECT_EQ(w.world().tick, 7);
  EXPECT_EQ(num(w.world().table, "cutter", "pos"), 23);
  const Situation seen = project(w.world(), mask);
  EXPECT_EQ(seen.table.state("cutter", "gap_ticks"), CellState::unknown);
  EXPECT_EQ(w.world().table.state("cutter", "gap_ticks"), CellState::known);
}

TEST(Driving, DeadlineAndArrival)
{
  DrivingParams p;
  p.goal = Number(10);
  p.deadline = 3;
  DrivingWorld late(road({{"self", "ego", 0, 0, 2}}), p, {});
  for (int i = 0; i < 4; ++i) late.step(Action{"maintain", {}});
  EXPECT_EQ(late.outcome(), Outcome::failure);
  DrivingWorld fast(road({{"self", "ego", 0, 0, 5}}), p, {});
  fast.step(Action{"maintain", {}});
  const auto r = fast.step(Action{"maintain", {}});
  EXPECT_TRUE(has_event(r, "arrival"));
  EXPECT_EQ(fast.outcome(), Outcome::success);
  EXPECT_EQ(num(fast.world().table, "self", "time_left"), 1);
}

TEST(Driving, ExitedCarsRemoved)
{
  DrivingParams p;
  p.length = 20;
  DrivingWorld w(road({{"self", "ego", 0, 0, 1}, {"lead", "car", 18, 1, 5}}), p, {});
  const auto r = w.step(Action{"maintain", {}});
  EXPECT_TRUE(has_event(r, "exit"));
  EXPECT_FALSE(w.world().table.has_entity("lead"));
}

// One-step projection equals the stepped result on every cell, from random reachable
// states of a fully observable road, on ticks without scripted events.
TEST(Driving, ProjectionFidelity)
{
  std::mt19937 rng(5);
  const ActionCatalog cat = DrivingWorld(road({{"self", "ego", 0, 0, 1}}), {}, {}).catalog();
  int compared = 0;
  for (int run = 0; run < 40; ++run) {
    DrivingParams p;
    p.goal = Number(300);
    p.deadline = 90;
    p.length = 400;
    DrivingWorld w(road({{"self", "ego", 0, run % 2, 2}, {"lead", "car", 30, 0, 2}, {"slow", "car", 50, 1, 1}}, 10), p, {});
    for (int step = 0; step < 12 && w.outcome() == Outcome::running; ++step) {
      for (const auto & entry : cat) {
        Action a{entry.name, {}};
        if (entry.reveals) a.args.push_back("lead");
        DrivingWorld copy = w;
        const FactTable before = w.world().table;
        const auto patch = w.project(before, a);
        FactTable projected = before;
        for (const auto & c : patch) projected.set_cell(c.entity, c.attr, c.cell);
        copy.step(a);
        const FactTable & after = copy.world().table;
        ASSERT_EQ(after.entity_count(), projected.entity_count());
        after.for_each_cell([&](int e, int at, const Cell & c) {
          const Cell & q = projected.cell(e, at);
          EXPECT_EQ(q.state, c.state);
          EXPECT_EQ(q.value, c.value) << after.entity_id(e) << "." << after.attrs().name(at) << " after " << a.str();
        });
        ++compared;
      }
      const auto acts = w.actions(w.world().table);
      std::uniform_int_distribution<std::size_t> pick(0, acts.size() - 1);
      w.step(acts[pick(rng)]);
    }
  }
  EXPECT_GT(compared, 1000);
}

// Unknown inputs stay unknown through projection.
TEST(Driving, ProjectionKeepsUnknownGap)
{
  DrivingWorld w(road({{"self", "ego", 0, 0, 2}, {"lead", "car", 10, 0, 2}}), {}, {});
  ObservabilityMask mask;
  mask.hidden.insert(Ref{"lead", "gap_ticks"});
  const Situation seen = project(w.world(), mask);
  const auto patch = w.project(seen.table, Action{"accelerate", {}});
  const int gap = *seen.table.attrs().find("gap_ticks");
  for (const auto & c : patch) EXPECT_NE(c.attr, gap);
}

TEST(Driving, ValidateReportsMissingAttributes)
{
  FactTable t;
  t.add_entity("self", "ego");
  t.set("self", "pos", Number(0));
  const auto errs = DrivingWorld::validate(t);
  EXPECT_FALSE(errs.empty());
  FactTable none;
  EXPECT_EQ(DrivingWorld::validate(none).front(), "driving scenario needs an entity self:ego");
}
