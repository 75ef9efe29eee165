#include "peerval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "peerval/error.hpp"

namespace peerval {
namespace {

void check_pair_lengths(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractViolation("correlation inputs differ in length");
  if (x.size() < 2) throw UndefinedMetric("correlation needs at least two observations");
}

// Number of tied pairs, sum over tie groups of t(t-1)/2, for a sorted range.
template <typename It, typename Eq>
std::int64_t tied_pairs(It begin, It end, Eq eq) {
  std::int64_t total = 0;
  for (It i = begin; i != end;) {
    It j = i;
    std::int64_t t = 0;
    while (j != end && eq(*i, *j)) {
      ++j;
      ++t;
    }
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

// Merge sort on `v` counting inversions (pairs i<j with v[i] > v[j]).
std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-10;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

AccuracyResult accuracy(const PreferenceMap& predicted, const PreferenceMap& annotations) {
  AccuracyDetails d;
  for (const auto& [key, human] : annotations) {
    if (human == PairPreference::tie) {
      ++d.excluded_ties;
      continue;
    }
    auto it = predicted.find(key);
    if (it == predicted.end()) {
      ++d.missing;
      continue;
    }
    ++d.n_compared;
    if (it->second == PairPreference::tie) ++d.predicted_ties;
    else if (it->second == human) ++d.matches;
    else ++d.mismatches;
  }
  if (d.n_compared == 0) throw UndefinedMetric("no comparable annotated pairs");
  const Rational exact(static_cast<std::int64_t>(2 * d.matches + d.predicted_ties),
                       static_cast<std::int64_t>(2 * d.n_compared));
  return {exact.to_double(), exact, d};
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_pair_lengths(x, y);
  const std::size_t n = x.size();
  std::vector<std::pair<double, double>> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = {x[i], y[i]};
  std::sort(pts.begin(), pts.end());

  const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t ties_x = tied_pairs(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first == b.first; });
  const std::int64_t ties_xy = tied_pairs(pts.begin(), pts.end(), [](auto& a, auto& b) { return a == b; });

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = pts[i].second;
  const std::int64_t swaps = count_inversions(ys, buf, 0, n);
  const std::int64_t ties_y = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  if (ties_x == n0 || ties_y == n0) throw UndefinedMetric("kendall tau undefined for constant input");
  const double num = static_cast<double>(n0 - ties_x - ties_y + ties_xy - 2 * swaps);
  const double den = std::sqrt(static_cast<double>(n0 - ties_x)) * std::sqrt(static_cast<double>(n0 - ties_y));
  return std::clamp(num / den, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = mid;
    i = j;
  }
  return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
  check_pair_lengths(x, y);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mean = (n + 1.0) / 2.0;  // mean of any average-rank vector
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0 || syy == 0) throw UndefinedMetric("spearman rho undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string to_string(TestMethod m) {
  switch (m) {
    case TestMethod::paired_t: return "paired-t";
    case TestMethod::rank_sum_exact: return "rank-sum-exact";
    case TestMethod::rank_sum_normal: return "rank-sum-normal";
  }
  return "paired-t";
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw ContractViolation("incomplete beta needs a, b > 0");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0) throw ContractViolation("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

TestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("paired t-test needs equal-length samples");
  if (a.size() < 2) throw UndefinedMetric("paired t-test needs at least two pairs");
  const double n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double var = ss / (n - 1.0);
  if (var == 0.0) throw UndefinedMetric("paired differences have zero variance");
  const double t = mean / std::sqrt(var / n);
  return {t, student_t_two_sided_p(t, n - 1.0), TestMethod::paired_t};
}

TestResult rank_sum_test(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw UndefinedMetric("rank-sum test needs two non-empty samples");
  const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = average_ranks(pooled);

  double rank_sum_a = 0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum_a += ranks[i];
  const double u = rank_sum_a - static_cast<double>(n1 * (n1 + 1)) / 2.0;

  if (std::min(n1, n2) <= 10) {
    // Permutation distribution of the smaller sample's rank sum, ties kept.
    // Doubled mid-ranks are integers, so the DP runs over integer sums.
    const bool a_small = n1 <= n2;
    const std::size_t k = a_small ? n1 : n2;
    std::vector<long> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = std::lround(2.0 * ranks[i]);
    long observed = 0;
    for (std::size_t i = a_small ? 0 : n1; i < (a_small ? n1 : n); ++i) observed += doubled[i];

    const long max_sum = std::accumulate(doubled.begin(), doubled.end(), 0L);
    // ways[j][s]: number of j-subsets of the items seen so far with doubled rank sum s.
    std::vector<std::vector<double>> ways(k + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const long r = doubled[i];
      for (std::size_t j = std::min(k, i + 1); j >= 1; --j) {
        auto& dst = ways[j];
        const auto& src = ways[j - 1];
        for (long s = max_sum; s >= r; --s) dst[static_cast<std::size_t>(s)] += src[static_cast<std::size_t>(s - r)];
      }
    }
    double total = 0, le = 0, ge = 0;
    for (long s = 0; s <= max_sum; ++s) {
      const double w = ways[k][static_cast<std::size_t>(s)];
      total += w;
      if (s <= observed) le += w;
      if (s >= observed) ge += w;
    }
    const double p = std::min(1.0, 2.0 * std::min(le, ge) / total);
    return {u, p, TestMethod::rank_sum_exact};
  }

  // Tie-corrected normal approximation with continuity correction.
  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dn = static_cast<double>(n);
  const double mu = dn1 * dn2 / 2.0;
  const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
  if (var <= 0) return {u, 1.0, TestMethod::rank_sum_normal};
  const double z = std::max(0.0, std::fabs(u - mu) - 0.5) / std::sqrt(var);
  return {u, std::min(1.0, 2.0 * normal_sf(z)), TestMethod::rank_sum_normal};
}

PreferenceRate preference_rate(const Rational& p_method, const Rational& p_human) {
  if (p_human.num() == 0) throw UndefinedMetric("human preference proportion is zero");
  return {p_method, p_human, (p_method - p_human) / p_human * Rational(100)};
}

PreferenceRate preference_rate(const PreferenceMap& predicted, const std::string& target_model,
                               const PreferenceMap& annotations) {
  std::int64_t method_total = 0, method_favour = 0, human_total = 0, human_favour = 0;
  auto favours = [&](const PairKey& key, PairPreference p) {
    return (p == PairPreference::first && std::get<1>(key) == target_model) ||
           (p == PairPreference::second && std::get<2>(key) == target_model);
  };
  for (const auto& [key, human] : annotations) {
    if (std::get<1>(key) != target_model && std::get<2>(key) != target_model) continue;
    auto it = predicted.find(key);
    if (it == predicted.end()) continue;
    if (it->second != PairPreference::tie) {
      ++method_total;
      method_favour += favours(key, it->second);
    }
    if (human != PairPreference::tie) {
      ++human_total;
      human_favour += favours(key, human);
    }
  }
  if (human_total == 0 || human_favour == 0) throw UndefinedMetric("human preference proportion for '" + target_model + "' is zero");
  if (method_total == 0) throw UndefinedMetric("method produced no non-tie verdicts for '" + target_model + "'");
  return preference_rate(Rational(method_favour, method_total), Rational(human_favour, human_total));
}

}  // namespace peerval
