// Grounding, three-valued evaluation, measurement proposals and incremental re-evaluation.
#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "comply/grounder.hpp"
#include "test_support.hpp"

using namespace comply;
using comply::testing::internal;
using comply::testing::one;

namespace
{

Situation cars(int n)
{
  Situation s;
  for (int i = 0; i < n; ++i) {
    const std::string id = "car" + std::to_string(i);
    s.table.add_entity(id, "car");
    s.table.set(id, "speed", Number(10 * (i + 1)));
    s.table.set(id, "speed_limit", Number(25));
  }
  return s;
}

Situation board4()
{
  Situation s;
  for (int r = 1; r <= 4; ++r) {
    for (int c = 1; c <= 4; ++c) {
      const std::string id = "r" + std::to_string(r) + "c" + std::to_string(c);
      s.table.add_entity(id, "cell");
      s.table.set(id, "row", Number(r));
      s.table.set(id, "col", Number(c));
      s.table.set(id, "value", Number(0));
    }
  }
  return s;
}

int non_filtered(const std::vector<GroundingRecord> & gs)
{
  int n = 0;
  for (const auto & g : gs) n += g.status != GroundingStatus::filtered_out;
  return n;
}

GroundingSet ground(const std::vector<PreparedConstraint> & pcs, const FactTable & t, std::int64_t limit = 500)
{
  std::vector<const PreparedConstraint *> ptrs;
  for (const auto & p : pcs) ptrs.push_back(&p);
  return ground_all(ptrs, t, limit, [](int) { return true; });
}

std::vector<PreparedConstraint> prepared(const std::vector<InternalConstraint> & cs, FactTable & t)
{
  std::vector<PreparedConstraint> out;
  for (const auto & c : cs) out.push_back(prepare(c, t.attrs()));
  return out;
}

// ---------------------------------------------------------------------------
// Independent reference evaluator over plain maps
// ---------------------------------------------------------------------------

struct RefEntity
{
  std::string type;
  std::map<std::string, Value> attrs;  // missing key = unknown
};
using RefWorld = std::map<std::string, RefEntity>;
using RefBinding = std::map<std::string, std::string>;

enum class T3 { f, t, u };

std::optional<Value> ref_term(const Term & term, const RefWorld & w, const RefBinding & b)
{
  if (term.kind == Term::Kind::literal) return term.literal;
  if (term.kind == Term::Kind::attribute) {
    const std::string & ent = b.at(term.var);
    if (term.attr == "id") return Value(Symbol{ent});
    const auto & a = w.at(ent).attrs;
    auto it = a.find(term.attr);
    if (it == a.end()) return std::nullopt;
    return it->second;
  }
  auto l = ref_term(term.operands[0], w, b);
  auto r = ref_term(term.operands[1], w, b);
  if (!l || !r) return std::nullopt;
  const Number x = std::get<Number>(*l);
  const Number y = std::get<Number>(*r);
  switch (term.op) {
    case ArithOp::add: return Value(x + y);
    case ArithOp::sub: return Value(x - y);
    case ArithOp::mul: return Value(x * y);
  }
  return std::nullopt;
}

T3 ref_eval(const Condition & c, const RefWorld & w, const RefBinding & b)
{
  switch (c.kind) {
    case Condition::Kind::constant: return c.value ? T3::t : T3::f;
    case Condition::Kind::negate: {
      const T3 k = ref_eval(c.children[0], w, b);
      return k == T3::u ? T3::u : (k == T3::t ? T3::f : T3::t);
    }
    case Condition::Kind::all: {
      T3 out = T3::t;
      for (const auto & k : c.children) {
        const T3 v = ref_eval(k, w, b);
        if (v == T3::f) return T3::f;
        if (v == T3::u) out = T3::u;
      }
      return out;
    }
    case Condition::Kind::any: {
      T3 out = T3::f;
      for (const auto & k : c.children) {
        const T3 v = ref_eval(k, w, b);
        if (v == T3::t) return T3::t;
        if (v == T3::u) out = T3::u;
      }
      return out;
    }
    case Condition::Kind::compare: {
      auto l = ref_term(c.terms[0], w, b);
      auto r = ref_term(c.terms[1], w, b);
      if (!l || !r) return T3::u;
      int cmp = 0;
      if (l->index() != r->index()) throw std::runtime_error("mismatch");
      if (auto * x = std::get_if<Number>(&*l)) {
        const Number y = std::get<Number>(*r);
        cmp = *x < y ? -1 : (y < *x ? 1 : 0);
      } else if (auto * s = std::get_if<Symbol>(&*l)) {
        if (c.op != CmpOp::eq && c.op != CmpOp::ne) throw std::runtime_error("order on symbol");
        cmp = s->name == std::get<Symbol>(*r).name ? 0 : 1;
      } else {
        if (c.op != CmpOp::eq && c.op != CmpOp::ne) throw std::runtime_error("order on bool");
        cmp = std::get<bool>(*l) == std::get<bool>(*r) ? 0 : 1;
      }
      bool res = false;
      switch (c.op) {
        case CmpOp::lt: res = cmp < 0; break;
        case CmpOp::le: res = cmp <= 0; break;
        case CmpOp::eq: res = cmp == 0; break;
        case CmpOp::ne: res = cmp != 0; break;
        case CmpOp::ge: res = cmp >= 0; break;
        case CmpOp::gt: res = cmp > 0; break;
      }
      return res ? T3::t : T3::f;
    }
  }
  return T3::u;
}

}  // namespace

TEST(Enumerate, OneGroundingPerCar)
{
  const auto c = one("constraint speed_cap { modality: require scope: v:car holds: v.speed <= v.speed_limit }");
  const auto gs = enumerate_groundings(c, cars(2), 500);
  ASSERT_EQ(gs.size(), 2u);
  EXPECT_EQ(gs[0].bindings[0].second, "car0");
  EXPECT_EQ(gs[1].bindings[0].second, "car1");
}

TEST(Enumerate, PairwiseOnFourByFour)
{
  const auto c = one(
    "constraint distinct { modality: forbid scope: a:cell, b:cell when: not(a.id = b.id) "
    "holds: and(a.value = b.value, a.value != 0) }");
  const Situation s = board4();
  // Oracle: ordered pairs of distinct cells, counted directly.
  int expected = 0;
  for (int i = 0; i < s.table.entity_count(); ++i) {
    for (int j = 0; j < s.table.entity_count(); ++j) expected += i != j;
  }
  const auto gs = enumerate_groundings(c, s, 500);
  EXPECT_EQ(expected, 240);
  EXPECT_EQ(non_filtered(gs), expected);
  EXPECT_EQ(gs.size(), 256u);
}

TEST(Enumerate, HiddenWhenAttributeIsPartial)
{
  const auto c = one(
    "constraint follow_gap { modality: require scope: a:car when: a.lane = 0 holds: a.speed >= 1 }");
  Situation s = cars(1);
  s.table.mark_unknown(0, s.table.attrs().intern("lane"));
  const auto gs = enumerate_groundings(c, s, 500);
  ASSERT_EQ(gs.size(), 1u);
  EXPECT_EQ(gs[0].status, GroundingStatus::partial);
  EXPECT_EQ(gs[0].missing_refs, (std::set<Ref>{{"car0", "lane"}}));
}

TEST(Enumerate, CompleteBelowLimitAndTruncatedAbove)
{
  const auto c = one("constraint c { modality: require scope: a:car, b:car holds: a.speed <= b.speed }");
  const Situation s = cars(3);
  bool cut = true;
  const auto all = enumerate_groundings(c, s, 9, &cut);
  EXPECT_FALSE(cut);
  std::set<std::vector<std::pair<std::string, std::string>>> seen;
  for (const auto & g : all) EXPECT_TRUE(seen.insert(g.bindings).second);
  EXPECT_EQ(seen.size(), 9u);
  const auto some = enumerate_groundings(c, s, 4, &cut);
  EXPECT_TRUE(cut);
  EXPECT_EQ(some.size(), 4u);
}

TEST(Enumerate, PriorityFirstUnderSharedBudget)
{
  const auto cs = internal(
    "constraint low { modality: require scope: a:car holds: a.speed >= 0 }\n"
    "constraint high { modality: require priority: 5 scope: a:car holds: a.speed >= 0 }");
  bool cut = false;
  const auto gs = enumerate_groundings(cs, cars(3), 4, {}, &cut);
  EXPECT_TRUE(cut);
  ASSERT_EQ(gs.size(), 4u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(gs[static_cast<std::size_t>(i)].constraint_id, "high");
  EXPECT_EQ(gs[3].constraint_id, "low");
}

TEST(Evaluate, SpeedOverLimitIsViolated)
{
  const auto c = one("constraint speed_cap { modality: require scope: v:car holds: v.speed <= v.speed_limit }");
  Situation s;
  s.table.add_entity("v1", "car");
  s.table.set("v1", "speed", Number(30));
  s.table.set("v1", "speed_limit", Number(25));
  const auto gs = enumerate_groundings(c, s, 500);
  const auto ev = evaluate(gs.at(0), c, s);
  EXPECT_EQ(ev.status, Compliance::violated);
  EXPECT_EQ(ev.holds, Truth::false_);
}

TEST(Evaluate, UnknownGapIsUnknown)
{
  const auto c = one("constraint follow_gap { modality: require scope: a:car holds: a.gap_ticks >= 3 }");
  Situation s;
  s.table.add_entity("lead", "car");
  s.table.mark_unknown(0, s.table.attrs().intern("gap_ticks"));
  const auto ev = evaluate(enumerate_groundings(c, s, 500).at(0), c, s);
  EXPECT_EQ(ev.status, Compliance::unknown);
  EXPECT_EQ(ev.grounding.missing_refs, (std::set<Ref>{{"lead", "gap_ticks"}}));
}

TEST(Evaluate, KleeneConjunctionWithUnknown)
{
  const auto c = one("constraint k { modality: require scope: a:car holds: and(a.speed = 10, a.gap_ticks >= 3) }");
  Situation s = cars(1);
  s.table.mark_unknown(0, s.table.attrs().intern("gap_ticks"));
  const auto ev = evaluate(enumerate_groundings(c, s, 500).at(0), c, s);
  EXPECT_EQ(ev.holds, Truth::unknown);
  EXPECT_EQ(ev.status, Compliance::unknown);
}

TEST(Evaluate, SoftModalitiesNeverViolate)
{
  const auto cs = internal(
    "constraint p { modality: prefer scope: a:car holds: a.speed = 99 }\n"
    "constraint q { modality: avoid scope: a:car holds: a.speed = 10 }");
  const Situation s = cars(1);
  for (const auto & c : cs) {
    const auto ev = evaluate(enumerate_groundings(c, s, 500).at(0), c, s);
    EXPECT_EQ(ev.status, Compliance::compliant) << c.id;
  }
}

TEST(Evaluate, TypeMismatchParksConstraint)
{
  const auto cs = internal(
    "constraint bad { modality: require scope: a:car holds: a.zone = 3 }\n"
    "constraint good { modality: require scope: a:car holds: a.speed >= 0 }");
  Situation s = cars(2);
  s.table.set("car0", "zone", Symbol{"urban"});
  s.table.set("car1", "zone", Symbol{"urban"});
  auto pcs = prepared(cs, s.table);
  const GroundingSet gs = ground(pcs, s.table);
  EXPECT_FALSE(gs.tallies[0].error.empty());
  EXPECT_EQ(gs.tallies[0].status(), Compliance::unknown);
  EXPECT_TRUE(gs.tallies[1].error.empty());
  EXPECT_EQ(gs.tallies[1].groundings, 2);
  for (const auto & it : gs.items) EXPECT_EQ(it.constraint, 1);
}

TEST(Evaluate, AbsentAttributeFiltersBinding)
{
  const auto c = one("constraint c { modality: require scope: a:car holds: a.zone = urban }");
  const auto gs = enumerate_groundings(c, cars(2), 500);
  EXPECT_EQ(non_filtered(gs), 0);
}

TEST(Measurements, ProposalForMissingGap)
{
  ConstraintEvaluation ev;
  ev.grounding.constraint_id = "follow_gap";
  ev.grounding.status = GroundingStatus::partial;
  ev.grounding.missing_refs = {{"lead", "gap_ticks"}};
  ev.status = Compliance::unknown;
  const ActionCatalog cat = {{"maintain", {}, std::nullopt, ""}, {"measure_gap", {"target"}, RevealSpec{"", "gap_ticks"}, ""}};
  const auto ps = propose_measurements({ev}, cat);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].action.str(), "measure_gap(lead)");
  EXPECT_EQ(ps[0].reveals, (Ref{"lead", "gap_ticks"}));
  EXPECT_EQ(ps[0].enables, (std::set<std::string>{"follow_gap"}));
}

TEST(Measurements, NoRevealingActionNoProposal)
{
  ConstraintEvaluation ev;
  ev.grounding.constraint_id = "c";
  ev.grounding.missing_refs = {{"lead", "zone"}};
  ev.status = Compliance::unknown;
  const ActionCatalog cat = {{"measure_gap", {"target"}, RevealSpec{"", "gap_ticks"}, ""}};
  EXPECT_TRUE(propose_measurements({ev}, cat).empty());
}

TEST(Measurements, SharedRefAggregates)
{
  ConstraintEvaluation a;
  a.grounding.constraint_id = "follow_gap";
  a.grounding.missing_refs = {{"lead", "gap_ticks"}};
  a.status = Compliance::unknown;
  ConstraintEvaluation b = a;
  b.grounding.constraint_id = "safe_gap";
  const ActionCatalog cat = {{"measure_gap", {"target"}, RevealSpec{"", "gap_ticks"}, ""}};
  const auto ps = propose_measurements({a, b, a}, cat);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps[0].enables, (std::set<std::string>{"follow_gap", "safe_gap"}));
}

// Fully observable worlds of at most four entities: the engine agrees with the map-based
// reference evaluator on every binding of every fixture constraint.
TEST(OracleEquivalence, SmallWorlds)
{
  const auto corpus = internal(
    "constraint speed_cap { modality: require scope: v:car holds: v.speed <= v.speed_limit }\n"
    "constraint gap { modality: require scope: a:car, b:car when: and(not(a.id = b.id), a.lane = b.lane, a.pos < b.pos) "
    "holds: b.pos - a.pos >= 2 * a.speed }\n"
    "constraint zone_slow { modality: forbid scope: v:car when: v.zone = school holds: v.speed > 3 }\n"
    "constraint any_of { modality: require scope: v:car holds: or(v.lane = 0, v.speed * 2 < v.speed_limit + 1, not(v.zone != rural)) }\n"
    "constraint fast { modality: prefer scope: v:car holds: v.speed = v.speed_limit }\n"
    "constraint crowd { modality: avoid scope: a:car, b:car when: not(a.id = b.id) holds: a.pos = b.pos }\n"
    "constraint tru { modality: require scope: v:car holds: true }\n");
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> small(0, 6);
  const char * zones[] = {"school", "rural", "urban"};
  int checked = 0;
  for (int round = 0; round < 300; ++round) {
    Situation s;
    RefWorld ref;
    const int n = 1 + round % 4;
    for (int i = 0; i < n; ++i) {
      const std::string id = "v" + std::to_string(i);
      s.table.add_entity(id, "car");
      RefEntity re{"car", {}};
      auto put = [&](const std::string & a, Value v) {
        s.table.set(id, a, v);
        re.attrs[a] = v;
      };
      put("speed", Number(small(rng)));
      put("speed_limit", Number(small(rng)));
      put("pos", Number(small(rng)));
      put("lane", Number(small(rng) % 2));
      put("zone", Symbol{zones[small(rng) % 3]});
      ref[id] = re;
    }
    auto pcs = prepared(corpus, s.table);
    const GroundingSet gs = ground(pcs, s.table);
    const auto evs = evaluations_of(gs, s.table);
    for (std::size_t ci = 0; ci < corpus.size(); ++ci) {
      const auto & c = corpus[ci];
      int violated = 0;
      int live = 0;
      for (const auto & [ida, ea] : ref) {
        for (const auto & [idb, eb] : ref) {
          RefBinding b{{c.scope[0].var, ida}};
          if (c.scope.size() > 1) b[c.scope[1].var] = idb;
          else if (idb != ref.begin()->first) continue;
          if (c.when && ref_eval(*c.when, ref, b) == T3::f) continue;
          ++live;
          const T3 h = ref_eval(c.holds, ref, b);
          const bool v = (c.modality == Modality::require && h == T3::f) ||
                         (c.modality == Modality::forbid && h == T3::t);
          violated += v;
          // Locate the engine's evaluation for this binding.
          bool found = false;
          for (const auto & ev : evs) {
            if (ev.grounding.constraint_id != c.id) continue;
            RefBinding eb2(ev.grounding.bindings.begin(), ev.grounding.bindings.end());
            if (eb2 != b) continue;
            found = true;
            EXPECT_EQ(ev.holds == Truth::true_, h == T3::t);
            EXPECT_EQ(ev.status == Compliance::violated, v);
          }
          EXPECT_TRUE(found) << c.id;
          ++checked;
        }
      }
      EXPECT_EQ(gs.tallies[ci].groundings, live) << c.id;
      EXPECT_EQ(gs.tallies[ci].violated, violated) << c.id;
    }
  }
  EXPECT_GT(checked, 1000);
}

// Revealing every missing ref of an unknown evaluation always decides it.
TEST(ThreeValued, RevealingMissingRefsDecides)
{
  const auto corpus = internal(
    "constraint a { modality: require scope: v:car holds: and(v.speed <= v.speed_limit, or(v.lane = 0, v.gap >= 3)) }\n"
    "constraint b { modality: forbid scope: v:car when: v.zone = school holds: not(v.speed < 4) }\n"
    "constraint c { modality: require scope: v:car, w:car when: not(v.id = w.id) holds: v.pos + v.speed != w.pos }\n");
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> small(0, 5);
  std::bernoulli_distribution hide(0.35);
  int unknowns = 0;
  for (int round = 0; round < 200; ++round) {
    WorldState truth;
    for (int i = 0; i < 3; ++i) {
      const std::string id = "v" + std::to_string(i);
      truth.table.add_entity(id, "car");
      for (const char * a : {"speed", "speed_limit", "lane", "gap", "pos"}) truth.table.set(id, a, Number(small(rng)));
      truth.table.set(id, "zone", Symbol{small(rng) < 3 ? "school" : "rural"});
    }
    ObservabilityMask mask;
    truth.table.for_each_cell([&](int e, int a, const Cell &) {
      if (hide(rng)) mask.hidden.insert(Ref{truth.table.entity_id(e), truth.table.attrs().name(a)});
    });
    Situation seen = project(truth, mask);
    for (const auto & c : corpus) {
      for (const auto & g : enumerate_groundings(c, seen, 500)) {
        if (g.status == GroundingStatus::filtered_out) continue;
        const auto ev = evaluate(g, c, seen);
        if (ev.status != Compliance::unknown) continue;
        ++unknowns;
        ASSERT_FALSE(ev.grounding.missing_refs.empty());
        ObservabilityMask m = mask;
        for (const auto & r : ev.grounding.missing_refs) m = reveal(m, r.entity, r.attr, truth.tick, 1);
        const Situation full = project(truth, m);
        EXPECT_NE(evaluate(g, c, full).status, Compliance::unknown) << c.id;
      }
    }
  }
  EXPECT_GT(unknowns, 50);
}

// Incremental re-evaluation matches grounding the patched table from scratch, and undo
// restores the grounded tallies exactly.
TEST(SearchStateTest, IncrementalMatchesFullRegrounding)
{
  const auto corpus = internal(
    "constraint row { modality: forbid scope: a:cell, b:cell when: and(not(a.id = b.id), a.row = b.row) "
    "holds: and(a.value = b.value, a.value != 0) }\n"
    "constraint col { modality: forbid scope: a:cell, b:cell when: and(not(a.id = b.id), a.col = b.col) "
    "holds: and(a.value = b.value, a.value != 0) }\n");
  Situation s = board4();
  auto pcs = prepared(corpus, s.table);
  const int value = *s.table.attrs().find("value");
  auto is_mut = [&](int a) { return a == value; };
  std::vector<const PreparedConstraint *> ptrs;
  for (const auto & p : pcs) ptrs.push_back(&p);
  const GroundingSet gs = ground_all(ptrs, s.table, 500, is_mut);
  SearchState st(gs, s.table);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> cell(0, 15), digit(0, 4);
  for (int step = 0; step < 12; ++step) {
    st.apply({CellPatch{cell(rng), value, Cell{CellState::known, Number(digit(rng))}}});
    const GroundingSet fresh = ground_all(ptrs, st.table(), 500, is_mut);
    for (std::size_t i = 0; i < pcs.size(); ++i) {
      EXPECT_EQ(st.tallies()[i].violated, fresh.tallies[i].violated);
      EXPECT_EQ(st.tallies()[i].holds_true, fresh.tallies[i].holds_true);
      EXPECT_EQ(st.tallies()[i].measure, fresh.tallies[i].measure);
    }
  }
  while (st.depth() > 0) st.undo();
  for (std::size_t i = 0; i < pcs.size(); ++i) {
    EXPECT_EQ(st.tallies()[i].violated, gs.tallies[i].violated);
    EXPECT_EQ(st.tallies()[i].groundings, gs.tallies[i].groundings);
  }
}

TEST(SearchStateTest, FreshViolationFlag)
{
  const auto c = one("constraint cap { modality: require scope: v:car holds: v.speed <= v.speed_limit }");
  Situation s = cars(1);  // speed 10, limit 25
  auto pcs = prepared({c}, s.table);
  const int speed = *s.table.attrs().find("speed");
  const GroundingSet gs = ground(pcs, s.table);
  SearchState st(gs, s.table);
  EXPECT_FALSE(st.apply({CellPatch{0, speed, Cell{CellState::known, Number(20)}}}));
  EXPECT_TRUE(st.apply({CellPatch{0, speed, Cell{CellState::known, Number(26)}}}));
  EXPECT_EQ(st.tallies()[0].measure, Number(1));
  st.undo();
  st.undo();
  EXPECT_EQ(st.tallies()[0].violated, 0);
}
