#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include "peerval/gateway.hpp"
#include "peerval/parallel.hpp"
#include "peerval/prompting.hpp"
#include "peerval/simharness.hpp"
#include "support.hpp"

using namespace peerval;

namespace {

// Fails `failures` times with a transient error, then answers.
class FlakyBackend : public Backend {
 public:
  FlakyBackend(BackendSpec spec, int failures, std::int64_t tokens = 10)
      : spec_(std::move(spec)), failures_(failures), tokens_(tokens) {}
  const BackendSpec& spec() const override { return spec_; }
  Completion generate(const std::string&, bool) override {
    ++calls;
    if (calls <= failures_) throw TransientFailure("503");
    Completion c;
    c.text = "one";
    c.prompt_tokens = tokens_;
    c.first_token_alternatives = std::vector<TokenAlternative>{{"one", -0.1}};
    return c;
  }
  std::atomic<int> calls{0};

 private:
  BackendSpec spec_;
  int failures_;
  std::int64_t tokens_;
};

// Records the peak number of concurrent calls.
class SlowBackend : public Backend {
 public:
  explicit SlowBackend(BackendSpec spec) : spec_(std::move(spec)) {}
  const BackendSpec& spec() const override { return spec_; }
  Completion generate(const std::string&, bool) override {
    const int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    return Completion{"two", std::nullopt, 1, 1};
  }
  std::atomic<int> active{0}, peak{0};

 private:
  BackendSpec spec_;
};

BackendSpec priced(const std::string& id, const std::string& price) {
  auto s = testkit::scripted_spec(id, true, price);
  return s;
}

Completion with_alts(std::vector<TokenAlternative> alts) {
  Completion c;
  c.text = alts.empty() ? "" : alts.front().token;
  c.first_token_alternatives = std::move(alts);
  return c;
}

}  // namespace

TEST(Ledger, PricesPerMillionTokens) {
  RunLedger ledger;
  ledger.record(priced("gpt4", "40"), 1'000'000);
  ledger.record(priced("glm", "1"), 1'000'000);
  ledger.record(priced("free", "0"), 5'000'000);
  const auto table = ledger.snapshot();
  EXPECT_EQ(table.total_cost, Decimal::parse("41.0"));
  EXPECT_EQ(table.total_tokens, 7'000'000);
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.rows[0].backend_id, "free");
  EXPECT_EQ(table.request_count, 3);
}

TEST(Ledger, ManySmallRequestsSumExactly) {
  RunLedger ledger;
  const auto spec = priced("glm", "1");
  parallel_for(4200, 8, [&](std::size_t) { ledger.record(spec, 1000); });
  const auto table = ledger.snapshot();
  EXPECT_EQ(table.total_cost, Decimal::parse("4.2"));
  EXPECT_EQ(ledger_csv(table), "backend_id,tokens,cost\nglm,4200000,4.2\ntotal,4200000,4.2\n");
}

TEST(Tokens, EstimateIsCeilingOfQuarterLength) {
  EXPECT_EQ(estimate_tokens(""), 0);
  EXPECT_EQ(estimate_tokens("abc"), 1);
  EXPECT_EQ(estimate_tokens("abcd"), 1);
  EXPECT_EQ(estimate_tokens("abcde"), 2);
}

TEST(Credential, VariableName) {
  EXPECT_EQ(credential_variable("gpt-4"), "PEERVAL_KEY_GPT_4");
  EXPECT_EQ(credential_variable("glm.pro"), "PEERVAL_KEY_GLM_PRO");
}

TEST(FirstToken, ProbabilityOfEmittedToken) {
  const auto c = with_alts({{"One", std::log(0.7)}, {"two", std::log(0.3)}});
  EXPECT_NEAR(first_token_probability(c, {"one", "two"}), 0.7, 1e-15);
}

TEST(FirstToken, FoldsWhitespaceAndCase) {
  const auto c = with_alts({{" TWO", std::log(0.6)}, {"one", std::log(0.4)}});
  EXPECT_NEAR(first_token_probability(c, {"one", "two"}), 0.6, 1e-15);
}

TEST(FirstToken, EmittedNonTargetIsUnparseable) {
  const auto c = with_alts({{"The", -0.1}, {"one", -2.0}});
  EXPECT_THROW(first_token_probability(c, {"one", "two"}), UnparseableError);
}

TEST(FirstToken, TieBetweenTargetsIsAmbiguous) {
  const auto c = with_alts({{"one", -0.69}, {"two", -0.69}});
  EXPECT_THROW(first_token_probability(c, {"one", "two"}), AmbiguityError);
}

TEST(FirstToken, NoAlternativesIsCapabilityError) {
  Completion c;
  c.text = "one";
  EXPECT_THROW(first_token_probability(c, {"one"}), CapabilityError);
}

TEST(Gateway, RetriesTransientFailures) {
  std::vector<std::chrono::milliseconds> sleeps;
  Gateway g(RetryPolicy{5, std::chrono::milliseconds(100), 2.0}, [&](auto d) { sleeps.push_back(d); });
  auto flaky = std::make_shared<FlakyBackend>(priced("f", "1"), 2);
  g.add_backend(flaky);
  const auto c = g.complete("f", "hello", false);
  EXPECT_EQ(c.text, "one");
  EXPECT_FALSE(c.first_token_alternatives.has_value());
  EXPECT_EQ(flaky->calls.load(), 3);
  ASSERT_EQ(sleeps.size(), 2u);
  EXPECT_EQ(sleeps[0].count(), 100);
  EXPECT_EQ(sleeps[1].count(), 200);
  EXPECT_EQ(g.ledger().request_count(), 1);
}

TEST(Gateway, RetryBoundIsHonoured) {
  int sleeps = 0;
  Gateway g(RetryPolicy{3, std::chrono::milliseconds(1), 2.0}, [&](auto) { ++sleeps; });
  auto flaky = std::make_shared<FlakyBackend>(priced("f", "1"), 100);
  g.add_backend(flaky);
  try {
    g.complete("f", "hello", false);
    FAIL() << "expected RetryableError";
  } catch (const RetryableError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(flaky->calls.load(), 3);
  EXPECT_EQ(sleeps, 2);
  EXPECT_EQ(g.ledger().request_count(), 0);
}

TEST(Gateway, LogprobsOnUnsupportedBackend) {
  Gateway g;
  auto spec = priced("plain", "0");
  spec.supports_logprobs = false;
  g.add_backend(std::make_shared<FlakyBackend>(spec, 0));
  EXPECT_THROW(g.complete("plain", "hi", true), CapabilityError);
  EXPECT_NO_THROW(g.complete("plain", "hi", false));
}

TEST(Gateway, EmptyPromptAndUnknownBackend) {
  Gateway g;
  g.add_backend(std::make_shared<FlakyBackend>(priced("f", "0"), 0));
  EXPECT_THROW(g.complete("f", "", false), ContractViolation);
  EXPECT_THROW(g.complete("nope", "x", false), IntegrityError);
}

TEST(Gateway, InFlightCapPerBackend) {
  Gateway g;
  auto spec = priced("slow", "0");
  spec.max_in_flight = 2;
  auto slow = std::make_shared<SlowBackend>(spec);
  g.add_backend(slow);
  parallel_for(24, 8, [&](std::size_t) { g.complete("slow", "x", false); });
  EXPECT_LE(slow->peak.load(), 2);
  EXPECT_GE(slow->peak.load(), 1);
  EXPECT_EQ(g.ledger().snapshot().total_tokens, 48);
}

TEST(Roster, JsonRoundTrip) {
  auto spec = priced("gpt4", "40");
  spec.max_in_flight = 3;
  spec.model_name = "gpt-4";
  const auto back = backend_from_json(to_json(spec));
  EXPECT_EQ(back.id, "gpt4");
  EXPECT_EQ(back.price_per_million_tokens, Decimal::parse("40"));
  EXPECT_EQ(back.max_in_flight, 3);
  EXPECT_TRUE(back.supports_logprobs);
}

TEST(Roster, DuplicateIdsRejected) {
  testkit::TempDir dir;
  write_text_file(dir / "roster.jsonl", to_json(priced("a", "0")).dump() + "\n" + to_json(priced("a", "1")).dump() + "\n");
  EXPECT_THROW(load_roster(dir / "roster.jsonl"), IntegrityError);
}

TEST(Scripted, SameInputSameOutput) {
  const auto world = generate_world(testkit::small_world());
  auto truth = std::make_shared<SyntheticTruth>(world.truth);
  Gateway g1, g2;
  testkit::add_scripted(g1, testkit::profile("judge", 0.8, 0.1, 3), truth);
  testkit::add_scripted(g2, testkit::profile("judge", 0.8, 0.1, 3), truth);
  const auto& q = world.questions.front();
  PromptTag tag;
  tag.kind = "pairwise";
  tag.question_id = q.question_id;
  tag.one = AnswerRef{q.question_id, "strong"};
  tag.two = AnswerRef{q.question_id, "weak"};
  tag.item = q.question_id + ":strong|weak";
  const auto prompt = render_pairwise(q, "a", "b", PromptPlacement::restriction_first, &tag);
  EXPECT_EQ(g1.complete("judge", prompt, true), g2.complete("judge", prompt, true));
  EXPECT_EQ(g1.complete("judge", prompt, false), g1.complete("judge", prompt, false));
}
