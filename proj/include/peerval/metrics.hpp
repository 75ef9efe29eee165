#pragma once

#include <span>
#include <string>
#include <vector>

#include "peerval/corpus.hpp"
#include "peerval/rational.hpp"

namespace peerval {

struct AccuracyDetails {
  std::size_t n_compared = 0;     // annotated pairs with a non-tie human label and a prediction
  std::size_t excluded_ties = 0;  // human-tie pairs
  std::size_t matches = 0;
  std::size_t predicted_ties = 0;  // scored 0.5 each
  std::size_t mismatches = 0;
  std::size_t missing = 0;  // annotated, non-tie, but absent from predictions; excluded
};

struct AccuracyResult {
  double accuracy = 0.0;
  Rational exact;
  AccuracyDetails details;
};

/// Agreement of predicted preferences with human annotations. Human ties are
/// excluded; a predicted tie against a human non-tie earns half credit.
AccuracyResult accuracy(const PreferenceMap& predicted, const PreferenceMap& annotations);

/// Kendall's tau-b (tie-corrected).
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks.
double spearman_rho(std::span<const double> x, std::span<const double> y);

/// Average (mid) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> v);

enum class TestMethod { paired_t, rank_sum_exact, rank_sum_normal };
std::string to_string(TestMethod m);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::paired_t;
};

/// Two-sided paired t-test; statistic is t with n-1 degrees of freedom.
TestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) test; statistic is U for `a`.
/// Exact permutation distribution (ties included) when min(n1, n2) <= 10,
/// otherwise the tie-corrected normal approximation with continuity correction.
TestResult rank_sum_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), continued fraction to 1e-10 relative.
double regularized_incomplete_beta(double a, double b, double x);
/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct PreferenceRate {
  Rational p_method;
  Rational p_human;
  Rational rate_percent;  // (p_method - p_human) / p_human * 100
};

/// Relative deviation of a proportion from the human proportion, in percent.
PreferenceRate preference_rate(const Rational& p_method, const Rational& p_human);

/// Proportion of non-tie verdicts on pairs involving `target_model` that
/// favour it, for the method and for the annotations, then the rate above.
/// Only pairs present in both maps count.
PreferenceRate preference_rate(const PreferenceMap& predicted, const std::string& target_model,
                               const PreferenceMap& annotations);

}  // namespace peerval
