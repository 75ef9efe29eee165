#pragma once

#include <optional>
#include <string>
#include <vector>

#include "peerval/aggregation.hpp"
#include "peerval/config.hpp"
#include "peerval/exams.hpp"
#include "peerval/metrics.hpp"

namespace peerval {

struct MetricRow {
  std::string variant;
  std::string dataset;
  EvalFormat format = EvalFormat::pairwise;
  std::optional<double> accuracy;
  std::optional<double> kendall_tau;
  std::optional<double> spearman_rho;
  AccuracyDetails details;
  std::size_t evaluators = 0;
};

struct BiasRow {
  std::string variant;
  std::string dataset;
  std::string target_model;
  std::optional<PreferenceRate> rate;
  std::string note;
};

/// Single evaluators, the unweighted panel, and (given exam reports) the
/// four exam-gated panels.
std::vector<VariantSpec> default_variants(const std::vector<Evaluator>& candidates, bool have_exam_reports);

/// Weight per participating evaluator. Exam weighting re-qualifies each
/// stored report against the variant's exam subset.
WeightMap variant_weights(const VariantSpec& variant, const std::vector<Evaluator>& candidates,
                          const std::vector<ExamReport>* reports);

/// Matrix cells restricted to the evaluators present in `weights`.
EvaluationMatrix restrict_matrix(const EvaluationMatrix& m, const WeightMap& weights);

MetricRow metric_row(const std::string& variant, const std::string& dataset, const PreferenceMap& predicted,
                     const PreferenceMap& annotations, EvalFormat format, std::size_t evaluators);

std::vector<BiasRow> bias_rows(const std::string& variant, const std::string& dataset, const PreferenceMap& predicted,
                               const PreferenceMap& annotations, const std::vector<std::string>& models);

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::string bias_csv(const std::vector<BiasRow>& rows);

/// "# key=value" lines appended to every report file.
std::string provenance_footer(const RunConfig& config);

}  // namespace peerval
