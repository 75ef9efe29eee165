#include <gtest/gtest.h>

#include <random>

#include "peerval/error.hpp"
#include "peerval/prompting.hpp"
#include "support.hpp"

using namespace peerval;

namespace {

const std::string kRubric = "You only need to output 'one' or 'two' directly to indicate which answer is better.";

QuestionRecord question() { return {"q1", Task::qa, "Why is the sky blue?"}; }

}  // namespace

TEST(Render, RestrictionFirstStartsWithRubric) {
  const auto p = render_pairwise(question(), "Rayleigh scattering.", "It reflects the sea.", PromptPlacement::restriction_first);
  EXPECT_EQ(p.rfind(kRubric, 0), 0u);
  EXPECT_NE(p.find("###Answer one###\nRayleigh scattering."), std::string::npos);
  EXPECT_NE(p.find("###Answer two###\nIt reflects the sea."), std::string::npos);
}

TEST(Render, RestrictionLastEndsWithRubric) {
  const auto p = render_pairwise(question(), "a", "b", PromptPlacement::restriction_last);
  ASSERT_GE(p.size(), kRubric.size());
  std::string trimmed = p;
  while (!trimmed.empty() && trimmed.back() == '\n') trimmed.pop_back();
  EXPECT_EQ(trimmed.substr(trimmed.size() - kRubric.size()), kRubric);
}

TEST(Render, TagIsLastLineAndRoundTrips) {
  PromptTag tag;
  tag.kind = "pairwise";
  tag.item = "q1:a|b";
  tag.order = OrderTag::swapped;
  tag.question_id = "q1";
  tag.one = AnswerRef{"q1", "b"};
  tag.two = AnswerRef{"q1", "a"};
  tag.set = "hard";
  const auto p = render_pairwise(question(), "x", "y", PromptPlacement::restriction_last, &tag);
  const auto last = p.substr(p.rfind('\n') + 1);
  EXPECT_EQ(last.rfind(std::string(kTagPrefix), 0), 0u);
  const auto back = extract_prompt_tag(p);
  ASSERT_TRUE(back);
  EXPECT_EQ(back->item, "q1:a|b");
  EXPECT_EQ(back->order, OrderTag::swapped);
  EXPECT_EQ(back->one, tag.one);
  EXPECT_EQ(back->set, "hard");
  EXPECT_FALSE(extract_prompt_tag("plain prompt"));
}

TEST(Render, EmptyFieldsViolateContract) {
  EXPECT_THROW(render_pairwise(question(), "", "b", PromptPlacement::restriction_first), ContractViolation);
  EXPECT_THROW(render_pointwise(question(), "a", EvalFormat::pairwise), ContractViolation);
}

TEST(Render, SubstitutionIsSinglePass) {
  EXPECT_EQ(fill_template("{a}-{b}-{c}", {{"a", "{b}"}, {"b", "2"}}), "{b}-2-{c}");
  const auto p = render_pairwise(question(), "{answer_two}", "real", PromptPlacement::restriction_first);
  EXPECT_NE(p.find("###Answer one###\n{answer_two}"), std::string::npos);
}

TEST(Render, ConfidenceListsLabelsInOrder) {
  const auto s = ConfidenceStrategy::make(ConfidenceKind::doubtful);
  const auto p = render_confidence(question(), "a", "b", s);
  std::size_t prev = 0;
  for (const auto& label : {"doubtful", "uncertain", "moderate", "confident", "absolute"}) {
    const auto pos = p.find(std::string("- ") + label + ":");
    ASSERT_NE(pos, std::string::npos) << label;
    EXPECT_GT(pos, prev);
    prev = pos;
  }
  const auto coarse = render_confidence(question(), "a", "b", ConfidenceStrategy::make(ConfidenceKind::num));
  EXPECT_NE(coarse.find("1, 2, 3, 4, 5"), std::string::npos);
}

TEST(Render, PointwiseUsesFormatTemplate) {
  const auto five = render_pointwise(question(), "ans", EvalFormat::five_level);
  const auto hundred = render_pointwise(question(), "ans", EvalFormat::hundred_level);
  EXPECT_NE(five, hundred);
  EXPECT_NE(five.find("ans"), std::string::npos);
}

TEST(Templates, DirectoryOverridesBuiltin) {
  testkit::TempDir dir;
  write_text_file(dir / "pairwise_p1.txt", "custom {question}\n");
  const auto t = TemplateSet::load(dir.path());
  EXPECT_EQ(render_pairwise(question(), "a", "b", PromptPlacement::restriction_first, nullptr, t), "custom Why is the sky blue?");
  EXPECT_EQ(t.get("pairwise_p2"), TemplateSet::builtin().get("pairwise_p2"));
  EXPECT_THROW(t.get("no_such_template"), ConfigError);
}

TEST(Verdict, FirstStandaloneWordDecides) {
  EXPECT_EQ(parse_verdict("one").choice, Choice::one);
  EXPECT_EQ(parse_verdict("TWO.").choice, Choice::two);
  EXPECT_EQ(parse_verdict("Answer two is better than one").choice, Choice::two);
  EXPECT_EQ(parse_verdict("'one'").choice, Choice::one);
  EXPECT_EQ(parse_verdict("someone says two").choice, Choice::two);
  EXPECT_THROW(parse_verdict("someone"), UnparseableError);
  EXPECT_THROW(parse_verdict("twofold, oneness"), UnparseableError);
  EXPECT_THROW(parse_verdict(""), UnparseableError);
}

TEST(Score, FirstIntegerInRange) {
  EXPECT_EQ(parse_score("Score: 4", EvalFormat::five_level).value, 4);
  EXPECT_EQ(parse_score("87/100", EvalFormat::hundred_level).value, 87);
  EXPECT_EQ(parse_score("0", EvalFormat::hundred_level).value, 0);
  EXPECT_THROW(parse_score("6", EvalFormat::five_level), RangeError);
  EXPECT_THROW(parse_score("-3", EvalFormat::hundred_level), RangeError);
  EXPECT_THROW(parse_score("101", EvalFormat::hundred_level), RangeError);
  EXPECT_THROW(parse_score("no digits", EvalFormat::five_level), UnparseableError);
  EXPECT_THROW(parse_score("99999999999999999999999", EvalFormat::hundred_level), RangeError);
}

TEST(Confidence, LabelsMapToLevels) {
  const auto s = ConfidenceStrategy::make(ConfidenceKind::doubtful);
  EXPECT_EQ(parse_confidence("Doubtful", s), 1);
  EXPECT_EQ(parse_confidence("I am confident.", s), 4);
  EXPECT_EQ(parse_confidence("absolute", s), 5);
  EXPECT_THROW(parse_confidence("no idea", s), UnparseableError);
  const auto n = ConfidenceStrategy::make(ConfidenceKind::null);
  EXPECT_EQ(parse_confidence("expert", n), 5);
  EXPECT_EQ(parse_confidence("null", n), 1);
  EXPECT_EQ(parse_confidence("3", ConfidenceStrategy::make(ConfidenceKind::num)), 3);
}

TEST(Parsers, TotalOnArbitraryInput) {
  std::mt19937 rng(1234);
  const std::string alphabet = "onetwONETW 0123456789-/.,'\"\n\t{}<>xyz";
  const auto strategy = ConfidenceStrategy::make(ConfidenceKind::doubtful);
  for (int i = 0; i < 5000; ++i) {
    std::string s(rng() % 40, ' ');
    for (auto& c : s) c = alphabet[rng() % alphabet.size()];
    try {
      parse_verdict(s);
    } catch (const UnparseableError&) {
    }
    for (auto f : {EvalFormat::five_level, EvalFormat::hundred_level}) {
      try {
        const auto v = parse_score(s, f).value;
        EXPECT_GE(v, 0);
        EXPECT_LE(v, 100);
      } catch (const UnparseableError&) {
      } catch (const RangeError&) {
      }
    }
    try {
      const int level = parse_confidence(s, strategy);
      EXPECT_GE(level, 1);
      EXPECT_LE(level, 5);
    } catch (const UnparseableError&) {
    }
  }
}

TEST(Names, StringForms) {
  EXPECT_EQ(to_string(EvalFormat::five_level), "5level");
  EXPECT_EQ(eval_format_from_string("100level"), EvalFormat::hundred_level);
  EXPECT_EQ(to_string(PromptPlacement::restriction_last), "p2");
  EXPECT_EQ(placement_from_string("p1"), PromptPlacement::restriction_first);
  EXPECT_THROW(placement_from_string("p3"), ConfigError);
}
