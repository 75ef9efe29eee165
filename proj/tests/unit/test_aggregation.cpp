#include <gtest/gtest.h>

#include <random>

#include "peerval/aggregation.hpp"
#include "support.hpp"

using namespace peerval;

namespace {

EvaluationMatrix pairwise_matrix(const std::vector<std::pair<std::string, Resolved>>& votes) {
  EvaluationMatrix m;
  m.format = EvalFormat::pairwise;
  for (const auto& [e, r] : votes) m.pairwise[{e, "q", "a", "b"}] = r;
  return m;
}

}  // namespace

TEST(FusePairwise, WeightedMajority) {
  const auto m = pairwise_matrix({{"e1", Resolved::first}, {"e2", Resolved::first}, {"e3", Resolved::second}});
  const auto out = fuse_pairwise(m, {{"e1", 1.0}, {"e2", 0.8}, {"e3", 0.8}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].first_mass, 1.8);
  EXPECT_DOUBLE_EQ(out[0].second_mass, 0.8);
  EXPECT_EQ(out[0].verdict, PairPreference::first);
  EXPECT_EQ(out[0].contributors.size(), 3u);
}

TEST(FusePairwise, HeavyMinorityWins) {
  const auto m = pairwise_matrix({{"e1", Resolved::first}, {"e2", Resolved::first}, {"e3", Resolved::second}});
  EXPECT_EQ(fuse_pairwise(m, {{"e1", 0.25}, {"e2", 0.25}, {"e3", 1.0}})[0].verdict, PairPreference::second);
}

TEST(FusePairwise, SplitAloneIsTie) {
  const auto out = fuse_pairwise(pairwise_matrix({{"e1", Resolved::split}}), {{"e1", 1.0}});
  EXPECT_EQ(out[0].verdict, PairPreference::tie);
  EXPECT_DOUBLE_EQ(out[0].first_mass, 0.5);
}

TEST(FusePairwise, ZeroWeightContributesNothing) {
  const auto m = pairwise_matrix({{"e1", Resolved::first}, {"e2", Resolved::second}});
  EXPECT_EQ(fuse_pairwise(m, {{"e1", 0.0}, {"e2", 0.3}})[0].verdict, PairPreference::second);
  EXPECT_EQ(fuse_pairwise(m, {{"e1", 0.0}, {"e2", 0.0}})[0].verdict, PairPreference::tie);
}

TEST(FusePairwise, MissingWeightIsContractViolation) {
  const auto m = pairwise_matrix({{"e1", Resolved::first}});
  EXPECT_THROW(fuse_pairwise(m, {}), ContractViolation);
  EXPECT_THROW(fuse_pairwise(m, {{"e1", -1.0}}), ContractViolation);
}

TEST(FusePairwise, ExhaustiveAgainstIntegerTally) {
  // Integer weights keep the oracle exact: compare 2*mass in integers.
  const int weights[] = {1, 2, 3, 4, 5};
  const Resolved outcomes[] = {Resolved::first, Resolved::second, Resolved::split};
  for (int code = 0; code < 243; ++code) {
    std::vector<std::pair<std::string, Resolved>> votes;
    WeightMap w;
    int first2 = 0, second2 = 0;
    for (int i = 0, c = code; i < 5; ++i, c /= 3) {
      const auto r = outcomes[c % 3];
      votes.emplace_back("e" + std::to_string(i), r);
      w["e" + std::to_string(i)] = weights[i];
      first2 += r == Resolved::first ? 2 * weights[i] : r == Resolved::split ? weights[i] : 0;
      second2 += r == Resolved::second ? 2 * weights[i] : r == Resolved::split ? weights[i] : 0;
    }
    const auto expected = first2 > second2 ? PairPreference::first
                          : second2 > first2 ? PairPreference::second
                                             : PairPreference::tie;
    EXPECT_EQ(fuse_pairwise(pairwise_matrix(votes), w)[0].verdict, expected) << code;
  }
}

TEST(FusePairwise, ScalingWeightsKeepsVerdicts) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<std::string, Resolved>> votes;
    WeightMap w, scaled;
    for (int i = 0; i < 4; ++i) {
      const auto id = "e" + std::to_string(i);
      votes.emplace_back(id, static_cast<Resolved>(rng() % 3));
      w[id] = (rng() % 100) / 100.0;
      scaled[id] = w[id] * 8.0;
    }
    const auto m = pairwise_matrix(votes);
    EXPECT_EQ(fuse_pairwise(m, w)[0].verdict, fuse_pairwise(m, scaled)[0].verdict);
  }
}

TEST(FusePointwise, WeightedMeanScores) {
  EvaluationMatrix m;
  m.format = EvalFormat::five_level;
  m.scores[{"e1", "q", "x"}] = 1;
  m.scores[{"e2", "q", "x"}] = 5;
  m.scores[{"e1", "q", "y"}] = 5;
  m.scores[{"e2", "q", "y"}] = 1;
  const auto out = scores_to_preferences(m, {{"e1", 0.9}, {"e2", 0.1}});
  ASSERT_EQ(out.preferences.size(), 1u);
  EXPECT_NEAR(out.preferences[0].first_mass, 1.4, 1e-12);
  EXPECT_NEAR(out.preferences[0].second_mass, 4.6, 1e-12);
  EXPECT_EQ(out.preferences[0].verdict, PairPreference::second);
}

TEST(FusePointwise, FullyAbstainedAnswerIsExcluded) {
  EvaluationMatrix m;
  m.format = EvalFormat::hundred_level;
  m.scores[{"e1", "q", "x"}] = 80;
  m.scores[{"e1", "q", "y"}] = 80;
  m.score_abstentions.push_back({"e1", "q", "z"});
  const auto out = scores_to_preferences(m, {{"e1", 1.0}});
  ASSERT_EQ(out.excluded.size(), 1u);
  EXPECT_EQ(out.excluded[0].second, "z");
  ASSERT_EQ(out.preferences.size(), 1u);
  EXPECT_EQ(out.preferences[0].verdict, PairPreference::tie);
  EXPECT_TRUE(out.preferences[0].flagged);
}

TEST(Preferences, FileRoundTripAndMap) {
  testkit::TempDir dir;
  const auto m = pairwise_matrix({{"e1", Resolved::second}});
  const auto prefs = aggregate(m, {{"e1", 1.0}});
  write_preferences(dir / "p.jsonl", prefs);
  const auto back = load_preferences(dir / "p.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].verdict, PairPreference::second);
  EXPECT_EQ(to_preference_map(back).at(make_pair_key("q", "a", "b")), PairPreference::second);
  EXPECT_EQ(evaluator_preferences(pairwise_matrix({{"e1", Resolved::split}}), "e1").at(make_pair_key("q", "a", "b")),
            PairPreference::tie);
}
