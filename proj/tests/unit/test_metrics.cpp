#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "peerval/error.hpp"
#include "peerval/metrics.hpp"

using namespace peerval;

namespace {

int sgn(double v) { return (v > 0) - (v < 0); }

// O(n^2) tau-b straight from the pair definition.
double brute_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double s = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      s += sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
      tx += x[i] == x[j];
      ty += y[i] == y[j];
    }
  const double n0 = n * (n - 1) / 2.0;
  return s / std::sqrt((n0 - tx) * (n0 - ty));
}

std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Two-sided exact p by listing every way to draw group a from the pool.
double brute_rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = brute_ranks(pooled);
  const std::size_t n = pooled.size(), n1 = a.size();
  double observed = 0;
  for (std::size_t i = 0; i < n1; ++i) observed += ranks[i];
  double total = 0, le = 0, ge = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1u << i)) s += ranks[i];
    total += 1;
    if (s <= observed + 1e-9) le += 1;
    if (s >= observed - 1e-9) ge += 1;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

PairKey key(const std::string& q, const std::string& a, const std::string& b) { return make_pair_key(q, a, b); }

}  // namespace

TEST(KendallTau, MatchesPairDefinition) {
  std::mt19937 rng(20240607);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 7;
    const int levels = 2 + static_cast<int>(rng() % 6);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng() % levels);
      y[i] = (rng() % 4 == 0) ? std::ldexp(static_cast<double>(rng() % 1000), -7) : static_cast<double>(rng() % levels);
    }
    const bool constant_x = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    const bool constant_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (constant_x || constant_y) {
      EXPECT_THROW(kendall_tau(x, y), UndefinedMetric);
      EXPECT_THROW(spearman_rho(x, y), UndefinedMetric);
      continue;
    }
    EXPECT_NEAR(kendall_tau(x, y), brute_tau(x, y), 1e-12);
    EXPECT_NEAR(spearman_rho(x, y), pearson(brute_ranks(x), brute_ranks(y)), 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 900);
}

TEST(KendallTau, LongerVectorsAgreeToo) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(200), y(200);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng() % 30;
      y[i] = x[i] + rng() % 20;
    }
    EXPECT_NEAR(kendall_tau(x, y), brute_tau(x, y), 1e-12);
  }
}

TEST(Ranks, MidranksForTies) {
  const std::vector<double> v{3, 1, 3, 2, 3};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{4, 1, 4, 2, 4}));
}

TEST(Correlation, PerfectAndReversed) {
  const std::vector<double> x{1, 2, 3, 4}, y{10, 20, 30, 40}, z{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau(x, y), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(x, z), -1.0);
  EXPECT_DOUBLE_EQ(spearman_rho(x, z), -1.0);
  EXPECT_THROW(kendall_tau(x, std::vector<double>{1, 2}), ContractViolation);
}

TEST(RankSum, ExactMatchesEnumerationForAllSmallShapes) {
  std::mt19937 rng(5);
  for (std::size_t n1 = 1; n1 <= 6; ++n1)
    for (std::size_t n2 = 1; n2 <= 6; ++n2)
      for (int rep = 0; rep < 6; ++rep) {
        std::vector<double> a(n1), b(n2);
        const int levels = rep < 2 ? 1000 : 3 + rep;
        for (auto& v : a) v = rng() % levels;
        for (auto& v : b) v = rng() % levels;
        const auto r = rank_sum_test(a, b);
        EXPECT_EQ(r.method, TestMethod::rank_sum_exact);
        EXPECT_NEAR(r.p_value, brute_rank_sum_p(a, b), 1e-12) << n1 << "x" << n2 << " rep " << rep;
      }
}

TEST(RankSum, ExactSmallCase) {
  const auto r = rank_sum_test(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6});
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.p_value, 0.1, 1e-15);
}

TEST(RankSum, NormalApproximationReferenceValues) {
  std::vector<double> a, b;
  for (int x = 1; x < 14; ++x) a.push_back(x);
  for (int x = 0; x < 12; ++x) b.push_back(x + 4.5);
  auto r = rank_sum_test(a, b);
  EXPECT_EQ(r.method, TestMethod::rank_sum_normal);
  EXPECT_DOUBLE_EQ(r.statistic, 45.0);
  EXPECT_NEAR(r.p_value, 0.0770998717435417, 1e-9);

  r = rank_sum_test(std::vector<double>{1, 2, 2, 3, 3, 3, 4, 5, 6, 7, 8, 9},
                    std::vector<double>{3, 4, 4, 5, 5, 6, 7, 8, 9, 9, 10, 11, 12});
  EXPECT_DOUBLE_EQ(r.statistic, 36.0);
  EXPECT_NEAR(r.p_value, 0.02328814022766235, 1e-9);
}

struct TCase {
  std::vector<double> a, b;
  double t, p;
};

TEST(PairedT, ReferenceValues) {
  const std::vector<TCase> cases = {
      {{5.1, 4.9, 6.2, 5.8, 6.0, 5.5, 5.3}, {4.8, 4.7, 5.9, 5.9, 5.6, 5.0, 5.4}, 2.4227185592617406, 0.05167164264479299},
      {{0.2, 0.5, 0.3, 0.9, 0.4, 0.6}, {0.5, 0.4, 0.6, 1.1, 0.8, 0.7}, -2.7386127875258306, 0.04085940385929584},
      {{12, 15, 11, 19, 14, 13, 16, 18, 17, 10}, {11, 13, 12, 15, 13, 14, 13, 16, 15, 9}, 2.8062430400804557,
       0.02050247653192994},
      {{1, 2, 3}, {1.5, 2.1, 2.0}, 0.29731765849886643, 0.7942622000505442},
      {{0.693, 0.105, 0.223, 0.511, 0.357, 0.916, 0.051, 0.288},
       {0.5, 0.2, 0.45, 0.6, 0.4, 0.7, 0.3, 0.35},
       -0.7368721272677259,
       0.4851585289163842},
  };
  for (const auto& c : cases) {
    const auto r = paired_t_test(c.a, c.b);
    EXPECT_NEAR(r.statistic, c.t, 1e-9);
    EXPECT_NEAR(r.p_value, c.p, 1e-6);
  }
}

TEST(PairedT, Degenerate) {
  const std::vector<double> a{1, 2, 3}, b{0, 1, 2};
  EXPECT_THROW(paired_t_test(a, b), UndefinedMetric);
  EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), UndefinedMetric);
}

TEST(IncompleteBeta, KnownValues) {
  EXPECT_NEAR(regularized_incomplete_beta(1, 1, 0.3), 0.3, 1e-12);
  EXPECT_NEAR(regularized_incomplete_beta(2, 3, 0.4), 0.5248, 1e-12);
  EXPECT_DOUBLE_EQ(regularized_incomplete_beta(2, 3, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(regularized_incomplete_beta(2, 3, 1.0), 1.0);
  EXPECT_NEAR(student_t_two_sided_p(0.0, 5), 1.0, 1e-12);
}

TEST(Accuracy, TiesAndMissingPredictions) {
  PreferenceMap human, predicted;
  human[key("q1", "a", "b")] = PairPreference::first;
  human[key("q2", "a", "b")] = PairPreference::second;
  human[key("q3", "a", "b")] = PairPreference::first;
  human[key("q4", "a", "b")] = PairPreference::second;
  human[key("q5", "a", "b")] = PairPreference::tie;
  human[key("q6", "a", "b")] = PairPreference::first;
  predicted[key("q1", "a", "b")] = PairPreference::first;
  predicted[key("q2", "a", "b")] = PairPreference::second;
  predicted[key("q3", "a", "b")] = PairPreference::tie;
  predicted[key("q4", "a", "b")] = PairPreference::first;
  predicted[key("q5", "a", "b")] = PairPreference::first;
  predicted[key("q9", "a", "b")] = PairPreference::first;

  const auto r = accuracy(predicted, human);
  EXPECT_EQ(r.exact, Rational(5, 8));
  EXPECT_DOUBLE_EQ(r.accuracy, 0.625);
  EXPECT_EQ(r.details.n_compared, 4u);
  EXPECT_EQ(r.details.matches, 2u);
  EXPECT_EQ(r.details.predicted_ties, 1u);
  EXPECT_EQ(r.details.mismatches, 1u);
  EXPECT_EQ(r.details.excluded_ties, 1u);
  EXPECT_EQ(r.details.missing, 1u);
}

TEST(Accuracy, NothingComparable) {
  PreferenceMap human{{key("q", "a", "b"), PairPreference::tie}};
  EXPECT_THROW(accuracy(human, human), UndefinedMetric);
}

TEST(PreferenceRate, ExactPercentages) {
  auto r = preference_rate(Rational(6, 10), Rational(5, 10));
  EXPECT_EQ(r.rate_percent, Rational(20));
  EXPECT_EQ(r.rate_percent.to_fixed(1), "20.0");
  EXPECT_EQ(preference_rate(Rational(1, 2), Rational(1, 2)).rate_percent, Rational(0));
  EXPECT_EQ(preference_rate(Rational(1, 4), Rational(1, 2)).rate_percent, Rational(-50));
  r = preference_rate(Rational(2, 3), Rational(1, 2));
  EXPECT_EQ(r.rate_percent, Rational(100, 3));
  EXPECT_EQ(r.rate_percent.to_fixed(10), "33.3333333333");
  EXPECT_EQ(preference_rate(Rational(7, 9), Rational(7, 10)).rate_percent, Rational(100, 9));
  EXPECT_THROW(preference_rate(Rational(1, 2), Rational(0)), UndefinedMetric);
}

TEST(PreferenceRate, FromPreferenceMaps) {
  // Records that `winner` won the pair (other, "t"); an empty winner is a tie.
  auto put = [](PreferenceMap& m, const std::string& other, const std::string& winner) {
    const auto k = key("q", other, "t");
    if (winner.empty()) m[k] = PairPreference::tie;
    else m[k] = winner == std::get<1>(k) ? PairPreference::first : PairPreference::second;
  };
  PreferenceMap human, method;
  put(human, "a", "t");
  put(human, "b", "t");
  put(human, "u", "u");
  put(human, "v", "v");
  put(human, "w", "");
  put(method, "a", "t");
  put(method, "b", "t");
  put(method, "u", "u");
  put(method, "v", "t");
  put(method, "w", "t");
  put(method, "z", "t");  // not annotated, ignored

  const auto r = preference_rate(method, "t", human);
  EXPECT_EQ(r.p_human, Rational(1, 2));
  EXPECT_EQ(r.p_method, Rational(4, 5));
  EXPECT_EQ(r.rate_percent, Rational(60));
  EXPECT_THROW(preference_rate(method, "nobody", human), UndefinedMetric);
}
