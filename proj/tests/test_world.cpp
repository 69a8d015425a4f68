// Fact tables, the observability mask and measurement expiry.
#include <gtest/gtest.h>

#include <random>
#include <set>
#include <string>
#include <vector>

#include "comply/world.hpp"

using namespace comply;

namespace
{

WorldState road(std::int64_t tick = 0)
{
  WorldState w;
  w.tick = tick;
  w.table.add_entity("self", "ego");
  w.table.set("self", "speed", Number(3));
  w.table.add_entity("lead", "car");
  w.table.set("lead", "gap_ticks", Number(4));
  w.table.set("lead", "speed", Number(2));
  return w;
}

ObservabilityMask hide(const std::string & e, const std::string & a)
{
  ObservabilityMask m;
  m.hidden.insert(Ref{e, a});
  return m;
}

}  // namespace

TEST(FactTable, EntitiesIterateInIdOrder)
{
  FactTable t;
  t.add_entity("zeta", "car");
  t.add_entity("alpha", "car");
  t.add_entity("mid", "ego");
  ASSERT_EQ(t.entity_count(), 3);
  EXPECT_EQ(t.entity_id(0), "alpha");
  EXPECT_EQ(t.entity_id(1), "mid");
  EXPECT_EQ(t.entity_id(2), "zeta");
  EXPECT_EQ(t.type_of("mid"), "ego");
}

TEST(FactTable, DuplicateEntityRejected)
{
  FactTable t;
  t.add_entity("a", "car");
  EXPECT_THROW(t.add_entity("a", "car"), std::invalid_argument);
}

TEST(FactTable, RemovingKeepsOtherCells)
{
  WorldState w = road();
  w.table.remove_entity("lead");
  EXPECT_FALSE(w.table.has_entity("lead"));
  EXPECT_EQ(w.table.get("self", "speed"), Value(Number(3)));
}

TEST(FactTable, CopiesDoNotShareCells)
{
  WorldState w = road();
  FactTable copy = w.table;
  copy.set("self", "speed", Number(9));
  EXPECT_EQ(w.table.get("self", "speed"), Value(Number(3)));
}

TEST(Project, HiddenUnrevealedIsUnknown)
{
  const Situation s = project(road(), hide("lead", "gap_ticks"));
  EXPECT_EQ(s.unknown_refs(), (std::set<Ref>{{"lead", "gap_ticks"}}));
  EXPECT_FALSE(s.table.get("lead", "gap_ticks"));
  EXPECT_EQ(s.table.state("lead", "gap_ticks"), CellState::unknown);
}

TEST(Project, RevealedShowsTrueValue)
{
  WorldState w = road(3);
  const ObservabilityMask m = reveal(hide("lead", "gap_ticks"), "lead", "gap_ticks", 3, 5);
  const Situation s = project(w, m);
  EXPECT_TRUE(s.unknown_refs().empty());
  EXPECT_EQ(s.table.get("lead", "gap_ticks"), Value(Number(4)));
}

TEST(Project, EmptyMaskIsIdentity)
{
  const WorldState w = road();
  const Situation s = project(w, {});
  EXPECT_EQ(s.observed_facts(), w.table.facts());
  EXPECT_TRUE(s.unknown_refs().empty());
}

TEST(Project, WildcardHidesEveryEntity)
{
  WorldState w = road();
  w.table.add_entity("other", "car");
  w.table.set("other", "gap_ticks", Number(7));
  const Situation s = project(w, hide("*", "gap_ticks"));
  EXPECT_EQ(s.unknown_refs(), (std::set<Ref>{{"lead", "gap_ticks"}, {"other", "gap_ticks"}}));
}

TEST(Project, DanglingEntryWarns)
{
  std::vector<std::string> warnings;
  const Situation s = project(road(), hide("ghost", "gap_ticks"), &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("ghost"), std::string::npos);
  EXPECT_TRUE(s.unknown_refs().empty());
}

TEST(Reveal, ExpirySetsCurrentPlusStaleness)
{
  const ObservabilityMask m = reveal(hide("lead", "gap_ticks"), "lead", "gap_ticks", 3, 5);
  EXPECT_EQ(m.revealed_until.at(Ref{"lead", "gap_ticks"}), 8);
}

TEST(Reveal, VisibleThroughExpiryThenUnknown)
{
  const ObservabilityMask m = reveal(hide("lead", "gap_ticks"), "lead", "gap_ticks", 3, 5);
  EXPECT_TRUE(project(road(8), m).unknown_refs().empty());
  EXPECT_EQ(project(road(9), m).unknown_refs().size(), 1u);
}

TEST(Reveal, NotHiddenIsNoOpWithWarning)
{
  const ObservabilityMask before = hide("lead", "gap_ticks");
  std::string warning;
  const ObservabilityMask after = reveal(before, "self", "speed", 0, 5, &warning);
  EXPECT_EQ(after.hidden, before.hidden);
  EXPECT_EQ(after.revealed_until, before.revealed_until);
  EXPECT_FALSE(warning.empty());
}

TEST(Reveal, StalenessIsMonotone)
{
  const ObservabilityMask m = reveal(hide("lead", "gap_ticks"), "lead", "gap_ticks", 0, 2);
  for (std::int64_t t = 3; t < 30; ++t) EXPECT_EQ(project(road(t), m).unknown_refs().size(), 1u) << t;
}

// Randomized worlds and masks: projecting is deterministic and every stored cell ends
// up either observed or unknown, never both.
TEST(Project, ConservationAndIdempotence)
{
  std::mt19937 rng(17);
  const std::vector<std::string> attrs = {"a", "b", "c", "d"};
  for (int round = 0; round < 300; ++round) {
    WorldState w;
    w.tick = static_cast<std::int64_t>(rng() % 20);
    const int n = 1 + static_cast<int>(rng() % 5);
    std::size_t stored = 0;
    for (int e = 0; e < n; ++e) {
      const std::string id = "e" + std::to_string(e);
      w.table.add_entity(id, "thing");
      for (const auto & a : attrs) {
        if (rng() % 3 == 0) continue;
        w.table.set(id, a, Number(static_cast<std::int64_t>(rng() % 9)));
        ++stored;
      }
    }
    ObservabilityMask m;
    for (int k = 0; k < 4; ++k) {
      const std::string e = rng() % 4 == 0 ? "*" : "e" + std::to_string(rng() % 6);
      const std::string a = attrs[rng() % attrs.size()];
      m.hidden.insert(Ref{e, a});
      if (e != "*" && rng() % 2) m = reveal(m, e, a, static_cast<std::int64_t>(rng() % 20), 3);
    }
    const Situation s1 = project(w, m);
    const Situation s2 = project(w, m);
    EXPECT_EQ(s1.observed_facts(), s2.observed_facts());
    EXPECT_EQ(s1.unknown_refs(), s2.unknown_refs());
    EXPECT_EQ(s1.observed_facts().size() + s1.unknown_refs().size(), stored);
    for (const auto & f : s1.observed_facts()) EXPECT_FALSE(s1.unknown_refs().count(Ref{f.entity, f.attr}));
    for (const auto & r : s1.unknown_refs()) {
      EXPECT_TRUE(m.is_hidden(r.entity, r.attr));
      EXPECT_FALSE(m.is_revealed(r.entity, r.attr, w.tick));
    }
  }
}
