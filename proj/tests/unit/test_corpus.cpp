#include <gtest/gtest.h>

#include <set>

#include "peerval/corpus.hpp"
#include "peerval/error.hpp"
#include "support.hpp"

using namespace peerval;

namespace {

std::vector<QuestionRecord> questions(std::size_t n) {
  std::vector<QuestionRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"q" + std::to_string(i), Task::qa, "question " + std::to_string(i)});
  return out;
}

std::vector<AnswerRecord> answers(const std::vector<QuestionRecord>& qs, std::size_t models) {
  std::vector<AnswerRecord> out;
  for (const auto& q : qs)
    for (std::size_t m = 0; m < models; ++m) out.push_back({q.question_id, "m" + std::to_string(m), "answer"});
  return out;
}

}  // namespace

TEST(Pairs, HundredQuestionsSevenModelsWithSwaps) {
  const auto qs = questions(100);
  const auto pairs = build_pairs(qs, answers(qs, 7), true);
  EXPECT_EQ(pairs.size(), 4200u);
  EXPECT_EQ(std::set<PairItem>(pairs.begin(), pairs.end()).size(), 4200u);
  std::size_t swapped = 0;
  for (const auto& p : pairs) swapped += p.order == OrderTag::swapped;
  EXPECT_EQ(swapped, 2100u);
}

TEST(Pairs, SmallShapes) {
  const auto qs3 = questions(3);
  EXPECT_EQ(build_pairs(qs3, answers(qs3, 4), true).size(), 36u);
  EXPECT_EQ(build_pairs(qs3, answers(qs3, 4), false).size(), 18u);
  const auto qs1 = questions(1);
  const auto two = build_pairs(qs1, answers(qs1, 2), true);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].twin(), two[1]);
  EXPECT_EQ(two[0].item_id(), two[1].item_id());
  EXPECT_EQ(two[0].item_id(), "q0:m0|m1");
}

TEST(Pairs, OriginalPutsLowerIdFirst) {
  const auto qs = questions(2);
  for (const auto& p : build_pairs(qs, answers(qs, 3), true)) {
    if (p.order == OrderTag::original) EXPECT_LT(p.model_one, p.model_two);
    else EXPECT_GT(p.model_one, p.model_two);
  }
}

TEST(Pairs, MissingAnswerIsIntegrityError) {
  const auto qs = questions(2);
  auto as = answers(qs, 3);
  as.pop_back();
  EXPECT_THROW(build_pairs(qs, as, true), IntegrityError);
  EXPECT_THROW(build_pairs(qs, answers(qs, 3), true, {"m0", "m0"}), ContractViolation);
}

TEST(Loading, ReportsLineNumbers) {
  testkit::TempDir dir;
  write_text_file(dir / "q.jsonl", "{\"question_id\":\"a\",\"text\":\"x\"}\n\n{not json}\n");
  try {
    load_questions(dir / "q.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  write_text_file(dir / "q2.jsonl", "{\"question_id\":\"a\",\"text\":\"x\"}\n{\"question_id\":\"b\"}\n");
  try {
    load_questions(dir / "q2.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Loading, RejectsUnknownSchemaVersion) {
  testkit::TempDir dir;
  write_text_file(dir / "q.jsonl", "{\"schema_version\":2,\"question_id\":\"a\",\"text\":\"x\"}\n");
  EXPECT_THROW(load_questions(dir / "q.jsonl"), ParseError);
}

TEST(Loading, DanglingReferences) {
  testkit::TempDir dir;
  const auto qs = questions(1);
  write_text_file(dir / "a.jsonl", "{\"question_id\":\"zz\",\"model_id\":\"m\",\"text\":\"t\"}\n");
  EXPECT_THROW(load_answers(dir / "a.jsonl", &qs), IntegrityError);

  const auto as = answers(qs, 2);
  write_text_file(dir / "h.jsonl",
                  "{\"question_id\":\"q0\",\"preference\":{\"model_a\":\"m0\",\"model_b\":\"m9\",\"label\":\"a\"}}\n");
  EXPECT_THROW(load_annotations(dir / "h.jsonl", &qs, &as), IntegrityError);
}

TEST(Loading, DuplicateAnswer) {
  testkit::TempDir dir;
  write_text_file(dir / "a.jsonl",
                  "{\"question_id\":\"q\",\"model_id\":\"m\",\"text\":\"t\"}\n"
                  "{\"question_id\":\"q\",\"model_id\":\"m\",\"text\":\"u\"}\n");
  EXPECT_THROW(load_answers(dir / "a.jsonl"), IntegrityError);
}

TEST(Loading, RoundTripThroughJson) {
  testkit::TempDir dir;
  const auto qs = questions(3);
  std::vector<json> rows;
  for (const auto& q : qs) rows.push_back(to_json(q));
  write_jsonl(dir / "q.jsonl", rows);
  EXPECT_EQ(load_questions(dir / "q.jsonl"), qs);
}

TEST(Annotations, PreferencesAreCanonical) {
  std::vector<HumanAnnotation> anns(3);
  anns[0].question_id = "q";
  anns[0].preference = HumanAnnotation::Preference{"zeta", "alpha", PreferenceLabel::a};
  anns[1].question_id = "q";
  anns[1].preference = HumanAnnotation::Preference{"alpha", "beta", PreferenceLabel::a};
  anns[2].question_id = "q";
  anns[2].preference = HumanAnnotation::Preference{"beta", "zeta", PreferenceLabel::tie};
  const auto m = annotation_preferences(anns);
  EXPECT_EQ(m.at(make_pair_key("q", "alpha", "zeta")), PairPreference::second);
  EXPECT_EQ(m.at(make_pair_key("q", "alpha", "beta")), PairPreference::first);
  EXPECT_EQ(m.at(make_pair_key("q", "zeta", "beta")), PairPreference::tie);
}

TEST(Annotations, ScoresBecomePairs) {
  std::vector<HumanAnnotation> anns(3);
  const char* ids[] = {"a", "b", "c"};
  const int scores[] = {4, 2, 4};
  for (int i = 0; i < 3; ++i) {
    anns[i].question_id = "q";
    anns[i].score = HumanAnnotation::Score{ids[i], scores[i]};
  }
  const auto m = annotation_preferences(anns);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.at(make_pair_key("q", "a", "b")), PairPreference::first);
  EXPECT_EQ(m.at(make_pair_key("q", "a", "c")), PairPreference::tie);
  EXPECT_EQ(m.at(make_pair_key("q", "b", "c")), PairPreference::second);
}

TEST(Annotations, ConflictsAreRejected) {
  std::vector<HumanAnnotation> anns(2);
  anns[0].question_id = anns[1].question_id = "q";
  anns[0].preference = HumanAnnotation::Preference{"a", "b", PreferenceLabel::a};
  anns[1].preference = HumanAnnotation::Preference{"b", "a", PreferenceLabel::a};
  EXPECT_THROW(annotation_preferences(anns), IntegrityError);
}

TEST(CorpusIndex, Lookups) {
  const auto qs = questions(2);
  Corpus c(qs, answers(qs, 3));
  EXPECT_EQ(c.models(), (std::vector<std::string>{"m0", "m1", "m2"}));
  EXPECT_NE(c.find_answer("q1", "m2"), nullptr);
  EXPECT_EQ(c.find_answer("q1", "m9"), nullptr);
  EXPECT_THROW(c.answer("q1", "m9"), IntegrityError);
  EXPECT_THROW(c.question("nope"), IntegrityError);
}
