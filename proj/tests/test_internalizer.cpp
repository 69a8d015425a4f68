// Vocabulary rewriting, unmapped-term reporting and instructor teaching.
#include <gtest/gtest.h>

#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "comply/internalizer.hpp"
#include "comply/spec_lang.hpp"

using namespace comply;

namespace
{

ConstraintSpec spec(const std::string & text)
{
  auto r = parse_constraint_file(text);
  if (!r.ok()) throw std::runtime_error(r.diagnostics.front().message);
  return r.value->at(0);
}

Ontology driving_ontology()
{
  Ontology o;
  o.attributes = {"speed", "speed_limit", "gap_ticks", "lane", "pos", "hazard_score"};
  o.types = {"car", "ego"};
  o.contexts = {"rightDriving", "urban"};
  return o;
}

InstructorAnswer teach(const std::string & term, TermKind kind, const std::string & internal)
{
  InstructorAnswer a;
  a.kind = InstructorAnswer::Kind::teach;
  a.term = term;
  a.mapping = TermMapping{kind, internal};
  return a;
}

std::set<std::string> attribute_names(const InternalConstraint & c)
{
  std::set<std::string> attrs, types, contexts;
  collect_names(c, attrs, types, contexts);
  return attrs;
}

}  // namespace

TEST(Internalize, KnownNamesPassThrough)
{
  const auto s = spec("constraint speed_cap { modality: require scope: v:car holds: v.speed <= v.speed_limit }");
  const auto r = internalize(s, {}, driving_ontology());
  ASSERT_TRUE(std::holds_alternative<InternalConstraint>(r));
  const auto & c = std::get<InternalConstraint>(r);
  EXPECT_EQ(c.id, "speed_cap");
  EXPECT_EQ(c.holds, s.holds);
  EXPECT_EQ(c.scope, s.scope);
}

TEST(Internalize, VocabularySubstitutesAttribute)
{
  const auto s = spec("constraint g { modality: require scope: v:car holds: v.following_gap >= 3 }");
  const VocabularyMap vocab = {{"following_gap", {TermKind::attribute, "gap_ticks"}}};
  const auto r = internalize(s, vocab, driving_ontology());
  ASSERT_TRUE(std::holds_alternative<InternalConstraint>(r));
  EXPECT_EQ(attribute_names(std::get<InternalConstraint>(r)), (std::set<std::string>{"gap_ticks"}));
}

TEST(Internalize, VocabularySubstitutesTypeAndContext)
{
  const auto s = spec(
    "constraint k { modality: require context: city scope: v:vehicle holds: v.lane = 0 }");
  const VocabularyMap vocab = {
    {"city", {TermKind::context, "urban"}}, {"vehicle", {TermKind::type, "car"}}};
  const auto r = internalize(s, vocab, driving_ontology());
  ASSERT_TRUE(std::holds_alternative<InternalConstraint>(r));
  const auto & c = std::get<InternalConstraint>(r);
  EXPECT_EQ(c.context_tags, (std::set<std::string>{"urban"}));
  EXPECT_EQ(c.scope.at(0).type, "car");
}

TEST(Internalize, UnmappedAttributeReported)
{
  const auto s = spec("constraint c { modality: require scope: v:car holds: v.caution_level <= 2 }");
  const auto r = internalize(s, {}, driving_ontology());
  ASSERT_TRUE(std::holds_alternative<InternalizationError>(r));
  const auto & e = std::get<InternalizationError>(r);
  EXPECT_EQ(e.constraint_id, "c");
  EXPECT_EQ(e.unmapped_terms, (std::set<UnmappedTerm>{{"caution_level", TermKind::attribute, std::nullopt}}));
}

TEST(Internalize, EveryUnmappedTermInOneError)
{
  const auto s = spec(
    "constraint c { modality: forbid context: dusk scope: v:truck, w:car "
    "when: v.mood = calm holds: and(v.caution_level > w.speed, w.glare = true) }");
  const auto r = internalize(s, {}, driving_ontology());
  ASSERT_TRUE(std::holds_alternative<InternalizationError>(r));
  std::set<std::string> names;
  for (const auto & t : std::get<InternalizationError>(r).unmapped_terms) names.insert(t.name);
  EXPECT_EQ(names, (std::set<std::string>{"caution_level", "dusk", "glare", "mood", "truck"}));
}

TEST(Internalize, KindMismatchIsAnError)
{
  const auto s = spec("constraint c { modality: require scope: v:car holds: v.vehicle = 1 }");
  const VocabularyMap vocab = {{"vehicle", {TermKind::type, "car"}}};
  const auto r = internalize(s, vocab, driving_ontology());
  ASSERT_TRUE(std::holds_alternative<InternalizationError>(r));
  const auto & t = *std::get<InternalizationError>(r).unmapped_terms.begin();
  EXPECT_EQ(t.name, "vehicle");
  EXPECT_EQ(t.kind, TermKind::attribute);
  EXPECT_EQ(t.mapped_kind, TermKind::type);
}

TEST(Internalize, MappingToUnknownInternalNameFails)
{
  const auto s = spec("constraint c { modality: require scope: v:car holds: v.x >= 1 }");
  const VocabularyMap vocab = {{"x", {TermKind::attribute, "not_in_ontology"}}};
  EXPECT_TRUE(std::holds_alternative<InternalizationError>(internalize(s, vocab, driving_ontology())));
}

TEST(ResolveUnmapped, TeachingLetsReinternalizationSucceed)
{
  const auto s = spec("constraint c { modality: require scope: v:car holds: v.caution_level <= 2 }");
  const auto onto = driving_ontology();
  const auto err = std::get<InternalizationError>(internalize(s, {}, onto));
  InstructorScript script({teach("caution_level", TermKind::attribute, "hazard_score")});
  const auto delta = resolve_unmapped(err, script);
  ASSERT_TRUE(delta);
  EXPECT_EQ(delta->at("caution_level").internal, "hazard_score");
  const auto r = internalize(s, *delta, onto);
  ASSERT_TRUE(std::holds_alternative<InternalConstraint>(r));
  EXPECT_EQ(attribute_names(std::get<InternalConstraint>(r)), (std::set<std::string>{"hazard_score"}));
  // Consumed: a second attempt finds nothing.
  EXPECT_FALSE(resolve_unmapped(err, script));
}

TEST(ResolveUnmapped, EmptyScriptLeavesItParked)
{
  const auto s = spec("constraint c { modality: require scope: v:car holds: v.caution_level <= 2 }");
  const auto err = std::get<InternalizationError>(internalize(s, {}, driving_ontology()));
  InstructorScript script;
  EXPECT_FALSE(resolve_unmapped(err, script));
}

TEST(ResolveUnmapped, AnswersMatchByTerm)
{
  const auto s = spec("constraint c { modality: require scope: v:car holds: v.caution_level <= 2 }");
  const auto err = std::get<InternalizationError>(internalize(s, {}, driving_ontology()));
  InstructorScript script({teach("glare", TermKind::attribute, "speed")});
  EXPECT_FALSE(resolve_unmapped(err, script));
  // The unrelated answer was not consumed.
  EXPECT_TRUE(script.has(InstructorAnswer::Kind::teach, [](const InstructorAnswer & a) { return a.term == "glare"; }));
}

TEST(ResolveUnmapped, PartialTeachingConsumesNothing)
{
  const auto s = spec("constraint c { modality: require scope: v:car holds: and(v.caution_level <= 2, v.glare = 0) }");
  const auto err = std::get<InternalizationError>(internalize(s, {}, driving_ontology()));
  InstructorScript script({teach("glare", TermKind::attribute, "speed")});
  EXPECT_FALSE(resolve_unmapped(err, script));
  EXPECT_TRUE(script.has(InstructorAnswer::Kind::teach, [](const InstructorAnswer & a) { return a.term == "glare"; }));
}

// A successful rewrite mentions only ontology names, and extra vocabulary entries
// never break it.
TEST(Internalize, CompletenessAndMonotonicity)
{
  const std::vector<std::string> external = {"a1", "a2", "a3", "speed", "lane"};
  const std::vector<std::string> internal_attrs = {"speed", "lane", "pos", "gap_ticks"};
  std::mt19937 rng(5);
  const Ontology onto = driving_ontology();
  int succeeded = 0;
  for (int round = 0; round < 300; ++round) {
    const std::string x = external[rng() % external.size()];
    const std::string y = external[rng() % external.size()];
    const auto s = spec("constraint c { modality: require scope: v:car holds: or(v." + x + " = 1, v." + y + " < 2) }");
    VocabularyMap vocab;
    for (const auto & e : external) {
      if (rng() % 2) vocab[e] = TermMapping{TermKind::attribute, internal_attrs[rng() % internal_attrs.size()]};
    }
    const auto r = internalize(s, vocab, onto);
    if (!std::holds_alternative<InternalConstraint>(r)) continue;
    ++succeeded;
    for (const auto & n : attribute_names(std::get<InternalConstraint>(r))) EXPECT_TRUE(onto.attributes.count(n)) << n;
    VocabularyMap bigger = vocab;
    for (const auto & e : external) bigger.emplace(e, TermMapping{TermKind::attribute, "pos"});
    bigger.emplace("extra", TermMapping{TermKind::type, "car"});
    const auto r2 = internalize(s, bigger, onto);
    ASSERT_TRUE(std::holds_alternative<InternalConstraint>(r2));
    EXPECT_EQ(std::get<InternalConstraint>(r2), std::get<InternalConstraint>(r));
  }
  EXPECT_GT(succeeded, 50);
}
