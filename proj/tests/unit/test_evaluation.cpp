#include <gtest/gtest.h>

#include <fstream>

#include "peerval/evaluation.hpp"
#include "peerval/simharness.hpp"
#include "support.hpp"

using namespace peerval;

namespace {

JudgeRecord rec(const PairItem& item, std::optional<Choice> c, const std::string& evaluator = "e") {
  JudgeRecord r;
  r.evaluator_id = evaluator;
  r.item = item;
  if (c) r.verdict = Verdict{*c, ""};
  return r;
}

const PairItem kOriginal{"q", "a", "b", OrderTag::original};
const PairItem kSwapped{"q", "b", "a", OrderTag::swapped};

WorldSpec seven_model_world(std::size_t n) {
  WorldSpec w;
  w.n_questions = n;
  w.seed = 3;
  for (int i = 0; i < 7; ++i) w.roster.push_back({"model-" + std::to_string(i), 0.2 + 0.1 * i});
  return w;
}

struct Fixture {
  World world;
  std::shared_ptr<SyntheticTruth> truth;
  Corpus corpus;
  Gateway gateway{RetryPolicy{1, std::chrono::milliseconds(0), 1.0}};
  std::vector<Evaluator> evaluators;

  explicit Fixture(const WorldSpec& spec) : world(generate_world(spec)) {
    truth = std::make_shared<SyntheticTruth>(world.truth);
    corpus = Corpus(world.questions, world.answers);
    for (int i = 0; i < 3; ++i) {
      auto p = testkit::profile("judge-" + std::to_string(i), 0.7 + 0.05 * i, 0.1, 10 + i);
      if (i == 2) p.garbage_rate = 0.05;
      testkit::add_scripted(gateway, p, truth);
      evaluators.push_back({p.evaluator_id, p.evaluator_id,
                            i == 1 ? PromptPlacement::restriction_last : PromptPlacement::restriction_first});
    }
  }
};

}  // namespace

TEST(FoldSwaps, AgreementPicksWinner) {
  // "a" wins in both orders.
  EXPECT_EQ(fold_swaps(rec(kOriginal, Choice::one), rec(kSwapped, Choice::two)), Resolved::first);
  EXPECT_EQ(fold_swaps(rec(kOriginal, Choice::two), rec(kSwapped, Choice::one)), Resolved::second);
}

TEST(FoldSwaps, PositionalAnswersSplit) {
  EXPECT_EQ(fold_swaps(rec(kOriginal, Choice::one), rec(kSwapped, Choice::one)), Resolved::split);
  EXPECT_EQ(fold_swaps(rec(kOriginal, Choice::two), rec(kSwapped, Choice::two)), Resolved::split);
}

TEST(FoldSwaps, AbstentionDefersToOtherSide) {
  EXPECT_EQ(fold_swaps(rec(kOriginal, std::nullopt), rec(kSwapped, Choice::one)), Resolved::second);
  EXPECT_EQ(fold_swaps(rec(kOriginal, Choice::one), rec(kSwapped, std::nullopt)), Resolved::first);
  EXPECT_EQ(fold_swaps(rec(kOriginal, std::nullopt), rec(kSwapped, std::nullopt)), Resolved::abstention);
}

TEST(FoldSwaps, RejectsUnrelatedRecords) {
  const PairItem other{"q", "a", "c", OrderTag::swapped};
  EXPECT_THROW(fold_swaps(rec(kOriginal, Choice::one), rec(other, Choice::one)), ContractViolation);
  EXPECT_THROW(fold_swaps(rec(kOriginal, Choice::one), rec(kSwapped, Choice::one, "x")), ContractViolation);
}

TEST(Evaluation, JudgesEveryOrderedPair) {
  Fixture f(seven_model_world(100));
  std::vector<JudgeRecord> records;
  JudgeContext ctx{f.gateway, TemplateSet::builtin(), 8};
  const std::vector<Evaluator> two(f.evaluators.begin(), f.evaluators.begin() + 2);
  const auto m = run_evaluation(ctx, two, f.corpus, EvalFormat::pairwise, {}, &records);
  EXPECT_EQ(records.size(), 8400u);
  EXPECT_EQ(m.pairwise.size() + m.pairwise_abstentions.size(), 4200u);
  EXPECT_EQ(f.gateway.ledger().request_count(), 8400);
  EXPECT_EQ(m.evaluators(), (std::vector<std::string>{"judge-0", "judge-1"}));
}

TEST(Evaluation, PointwiseScoresEveryAnswer) {
  Fixture f(testkit::small_world(6));
  JudgeContext ctx{f.gateway, TemplateSet::builtin(), 4};
  const auto m = run_evaluation(ctx, f.evaluators, f.corpus, EvalFormat::five_level);
  EXPECT_EQ(m.scores.size() + m.score_abstentions.size(), 3u * 24u);
  for (const auto& [k, v] : m.scores) {
    EXPECT_GE(v, 1);
    EXPECT_LE(v, 5);
  }
}

TEST(Evaluation, GarbageBecomesAbstention) {
  Fixture f(testkit::small_world(6));
  JudgeContext ctx{f.gateway, TemplateSet::builtin(), 4};
  std::vector<JudgeRecord> records;
  run_evaluation(ctx, {f.evaluators[2]}, f.corpus, EvalFormat::pairwise, {}, &records);
  std::size_t abstained = 0;
  for (const auto& r : records)
    if (r.abstained()) {
      ++abstained;
      EXPECT_FALSE(r.note.empty());
    }
  EXPECT_GT(abstained, 0u);
}

TEST(Evaluation, RejectsUnknownBackendAndDuplicates) {
  Fixture f(testkit::small_world(2));
  JudgeContext ctx{f.gateway};
  EXPECT_THROW(run_evaluation(ctx, {{"x", "missing"}}, f.corpus, EvalFormat::pairwise), IntegrityError);
  EXPECT_THROW(run_evaluation(ctx, {f.evaluators[0], f.evaluators[0]}, f.corpus, EvalFormat::pairwise), IntegrityError);
}

TEST(Evaluation, MatrixIndependentOfWorkerCount) {
  Fixture f1(testkit::small_world(8)), f2(testkit::small_world(8));
  JudgeContext one{f1.gateway, TemplateSet::builtin(), 1};
  JudgeContext many{f2.gateway, TemplateSet::builtin(), 16};
  EXPECT_EQ(matrix_to_jsonl(run_evaluation(one, f1.evaluators, f1.corpus, EvalFormat::pairwise)),
            matrix_to_jsonl(run_evaluation(many, f2.evaluators, f2.corpus, EvalFormat::pairwise)));
}

TEST(Evaluation, ResumeAfterInterruptionMatchesCleanRun) {
  testkit::TempDir dir;
  Fixture clean(testkit::small_world(8));
  JudgeContext clean_ctx{clean.gateway, TemplateSet::builtin(), 4};
  const auto expected = matrix_to_jsonl(run_evaluation(clean_ctx, clean.evaluators, clean.corpus, EvalFormat::pairwise));

  const auto journal = dir / "journal.jsonl";
  {
    Fixture f(testkit::small_world(8));
    JudgeContext ctx{f.gateway, TemplateSet::builtin(), 4};
    RunOptions opts{journal, 137};
    EXPECT_THROW(run_evaluation(ctx, f.evaluators, f.corpus, EvalFormat::pairwise, opts), Interrupted);
  }
  // Tear the last line as a crash mid-write would.
  const auto text = read_text_file(journal);
  write_text_file(journal, text.substr(0, text.size() - 17));

  Fixture f(testkit::small_world(8));
  JudgeContext ctx{f.gateway, TemplateSet::builtin(), 4};
  const auto resumed = run_evaluation(ctx, f.evaluators, f.corpus, EvalFormat::pairwise, RunOptions{journal, {}});
  EXPECT_EQ(matrix_to_jsonl(resumed), expected);
  // Only the missing cells were sent again.
  EXPECT_EQ(f.gateway.ledger().request_count(), clean.gateway.ledger().request_count() - 136);
}

TEST(Evaluation, MatrixFileRoundTrip) {
  testkit::TempDir dir;
  Fixture f(testkit::small_world(4));
  JudgeContext ctx{f.gateway};
  const auto m = run_evaluation(ctx, f.evaluators, f.corpus, EvalFormat::pairwise);
  write_text_file(dir / "matrix.jsonl", matrix_to_jsonl(m));
  EXPECT_EQ(load_matrix(dir / "matrix.jsonl"), m);
}

TEST(Journal, EntryRoundTrip) {
  JudgeRecord r = rec(kSwapped, Choice::two, "judge");
  r.raw_text = "two";
  const auto back = record_from_journal(journal_entry(r));
  EXPECT_EQ(back.evaluator_id, "judge");
  EXPECT_EQ(std::get<PairItem>(back.item), kSwapped);
  ASSERT_TRUE(back.verdict);
  EXPECT_EQ(back.verdict->choice, Choice::two);

  JudgeRecord s;
  s.evaluator_id = "judge";
  s.item = PointTarget{"q", "m"};
  s.format = EvalFormat::hundred_level;
  s.score = PointScore{EvalFormat::hundred_level, 73};
  const auto sb = record_from_journal(journal_entry(s));
  ASSERT_TRUE(sb.score);
  EXPECT_EQ(sb.score->value, 73);
  EXPECT_EQ(sb.format, EvalFormat::hundred_level);
}
