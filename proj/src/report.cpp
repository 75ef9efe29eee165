#include "peerval/report.hpp"

#include <iomanip>
#include <sstream>

namespace peerval {
namespace {

double code(PairPreference p) {
  return p == PairPreference::first ? 1.0 : (p == PairPreference::second ? -1.0 : 0.0);
}

std::string fixed(std::optional<double> v, int digits = 6) {
  if (!v) return "";
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << *v;
  return out.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<VariantSpec> default_variants(const std::vector<Evaluator>& candidates, bool have_exam_reports) {
  std::vector<VariantSpec> out;
  for (const auto& c : candidates) out.push_back({"single:" + c.id, {c.id}, "unit", {}});
  out.push_back({"PRE w/o filter", {}, "unit", {}});
  if (have_exam_reports) {
    out.push_back({"Auto-PRE(C)", {}, "exam", {ExamKind::consistency}});
    out.push_back({"Auto-PRE(S)", {}, "exam", {ExamKind::self_confidence}});
    out.push_back({"Auto-PRE(P)", {}, "exam", {ExamKind::pertinence}});
    out.push_back({"Auto-PRE(A)", {}, "exam", {ExamKind::consistency, ExamKind::self_confidence, ExamKind::pertinence}});
  }
  return out;
}

WeightMap variant_weights(const VariantSpec& variant, const std::vector<Evaluator>& candidates,
                          const std::vector<ExamReport>* reports) {
  std::vector<std::string> ids = variant.evaluators;
  if (ids.empty())
    for (const auto& c : candidates) ids.push_back(c.id);
  WeightMap w;
  for (const auto& id : ids) {
    if (variant.weighting == "unit") {
      w[id] = 1.0;
      continue;
    }
    const ExamReport* found = nullptr;
    if (reports)
      for (const auto& r : *reports)
        if (r.candidate_id == id) found = &r;
    if (!found) throw ConfigError("variant '" + variant.name + "' needs an exam report for evaluator '" + id + "'");
    w[id] = qualify(id, found->consistency, found->confidence, found->pertinence, variant.exams).fusion_weight;
  }
  return w;
}

EvaluationMatrix restrict_matrix(const EvaluationMatrix& m, const WeightMap& weights) {
  EvaluationMatrix out;
  out.format = m.format;
  for (const auto& [k, v] : m.pairwise)
    if (weights.count(std::get<0>(k))) out.pairwise.emplace(k, v);
  for (const auto& k : m.pairwise_abstentions)
    if (weights.count(std::get<0>(k))) out.pairwise_abstentions.push_back(k);
  for (const auto& [k, v] : m.scores)
    if (weights.count(std::get<0>(k))) out.scores.emplace(k, v);
  for (const auto& k : m.score_abstentions)
    if (weights.count(std::get<0>(k))) out.score_abstentions.push_back(k);
  return out;
}

MetricRow metric_row(const std::string& variant, const std::string& dataset, const PreferenceMap& predicted,
                     const PreferenceMap& annotations, EvalFormat format, std::size_t evaluators) {
  MetricRow row;
  row.variant = variant;
  row.dataset = dataset;
  row.format = format;
  row.evaluators = evaluators;
  try {
    const auto acc = accuracy(predicted, annotations);
    row.accuracy = acc.accuracy;
    row.details = acc.details;
  } catch (const UndefinedMetric&) {
  }
  std::vector<double> x, y;
  for (const auto& [key, human] : annotations) {
    if (human == PairPreference::tie) continue;
    auto it = predicted.find(key);
    if (it == predicted.end()) continue;
    x.push_back(code(it->second));
    y.push_back(code(human));
  }
  try {
    row.kendall_tau = kendall_tau(x, y);
  } catch (const UndefinedMetric&) {
  }
  try {
    row.spearman_rho = spearman_rho(x, y);
  } catch (const UndefinedMetric&) {
  }
  return row;
}

std::vector<BiasRow> bias_rows(const std::string& variant, const std::string& dataset, const PreferenceMap& predicted,
                               const PreferenceMap& annotations, const std::vector<std::string>& models) {
  std::vector<BiasRow> out;
  for (const auto& m : models) {
    BiasRow row{variant, dataset, m, std::nullopt, {}};
    try {
      row.rate = preference_rate(predicted, m, annotations);
    } catch (const UndefinedMetric& e) {
      row.note = e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "variant,dataset,format,evaluators,accuracy,kendall_tau,spearman_rho,n_compared,excluded_ties,predicted_ties,"
         "missing\n";
  for (const auto& r : rows) {
    out << csv_field(r.variant) << ',' << csv_field(r.dataset) << ',' << to_string(r.format) << ',' << r.evaluators << ','
        << fixed(r.accuracy) << ',' << fixed(r.kendall_tau) << ',' << fixed(r.spearman_rho) << ','
        << r.details.n_compared << ',' << r.details.excluded_ties << ',' << r.details.predicted_ties << ','
        << r.details.missing << '\n';
  }
  return out.str();
}

std::string bias_csv(const std::vector<BiasRow>& rows) {
  std::ostringstream out;
  out << "variant,dataset,target_model,p_method,p_human,rate_percent,rate_exact,note\n";
  for (const auto& r : rows) {
    out << csv_field(r.variant) << ',' << csv_field(r.dataset) << ',' << csv_field(r.target_model) << ',';
    if (r.rate) {
      out << r.rate->p_method.to_fixed(6) << ',' << r.rate->p_human.to_fixed(6) << ',' << r.rate->rate_percent.to_fixed(4)
          << ',' << r.rate->rate_percent.num() << '/' << r.rate->rate_percent.den() << ',';
    } else {
      out << ",,,,";
    }
    out << csv_field(r.note) << '\n';
  }
  return out.str();
}

std::string provenance_footer(const RunConfig& config) {
  std::ostringstream out;
  out << "# config_sha256=" << config_hash(config) << '\n'
      << "# seed=" << config.seed << '\n'
      << "# version=peerval " << kVersion << '\n'
      << "# accuracy: human ties excluded; a predicted tie or split earns half credit\n"
      << "# abstentions: a one-sided abstention defers to the other order; double abstentions are dropped\n";
  return out.str();
}

}  // namespace peerval
