#include "peerval/aggregation.hpp"

#include <set>

#include "peerval/error.hpp"

namespace peerval {
namespace {

double weight_of(const WeightMap& weights, const std::string& evaluator) {
  auto it = weights.find(evaluator);
  if (it == weights.end()) throw ContractViolation("no fusion weight for evaluator '" + evaluator + "'");
  if (!(it->second >= 0.0)) throw ContractViolation("fusion weight of '" + evaluator + "' is negative");
  return it->second;
}

PairPreference by_mass(double first, double second) {
  if (first > second) return PairPreference::first;
  if (second > first) return PairPreference::second;
  return PairPreference::tie;
}

}  // namespace

json AggregatedPreference::to_json() const {
  json j = {{"question_id", question_id},
            {"model_a", model_first},
            {"model_b", model_second},
            {"verdict", to_string(verdict)},
            {"first_mass", first_mass},
            {"second_mass", second_mass},
            {"contributors", contributors}};
  if (flagged) j["flagged"] = true;
  return j;
}

AggregatedPreference AggregatedPreference::from_json(const json& j) {
  AggregatedPreference p;
  p.question_id = j.at("question_id").get<std::string>();
  p.model_first = j.at("model_a").get<std::string>();
  p.model_second = j.at("model_b").get<std::string>();
  p.verdict = pair_preference_from_string(j.at("verdict").get<std::string>());
  p.first_mass = j.value("first_mass", 0.0);
  p.second_mass = j.value("second_mass", 0.0);
  p.contributors = j.value("contributors", std::vector<std::string>{});
  p.flagged = j.value("flagged", false);
  return p;
}

std::vector<AggregatedPreference> fuse_pairwise(const EvaluationMatrix& matrix, const WeightMap& weights) {
  if (matrix.format != EvalFormat::pairwise) throw ContractViolation("fuse_pairwise needs a pairwise matrix");
  for (const auto& e : matrix.evaluators()) weight_of(weights, e);

  std::map<PairKey, AggregatedPreference> cells;
  for (const auto& [key, outcome] : matrix.pairwise) {
    const auto& [evaluator, question, lo, hi] = key;
    auto& agg = cells[PairKey{question, lo, hi}];
    agg.question_id = question;
    agg.model_first = lo;
    agg.model_second = hi;
    const double w = weight_of(weights, evaluator);
    if (outcome == Resolved::first) agg.first_mass += w;
    else if (outcome == Resolved::second) agg.second_mass += w;
    else {
      agg.first_mass += w / 2.0;
      agg.second_mass += w / 2.0;
    }
    agg.contributors.push_back(evaluator);
  }
  std::vector<AggregatedPreference> out;
  out.reserve(cells.size());
  for (auto& [_, agg] : cells) {
    agg.verdict = by_mass(agg.first_mass, agg.second_mass);
    out.push_back(std::move(agg));
  }
  return out;
}

PointwiseFusion scores_to_preferences(const EvaluationMatrix& matrix, const WeightMap& weights) {
  if (matrix.format == EvalFormat::pairwise) throw ContractViolation("scores_to_preferences needs a pointwise matrix");
  for (const auto& e : matrix.evaluators()) weight_of(weights, e);

  struct Acc {
    double weighted = 0.0;
    double total_weight = 0.0;
    std::vector<std::string> contributors;
  };
  std::map<std::string, std::map<std::string, Acc>> by_question;
  for (const auto& [key, score] : matrix.scores) {
    const auto& [evaluator, question, model] = key;
    auto& acc = by_question[question][model];
    const double w = weight_of(weights, evaluator);
    acc.weighted += w * score;
    acc.total_weight += w;
    acc.contributors.push_back(evaluator);
  }

  PointwiseFusion out;
  std::set<std::pair<std::string, std::string>> scored;
  for (const auto& [q, models] : by_question)
    for (const auto& [m, _] : models) scored.insert({q, m});
  std::set<std::pair<std::string, std::string>> excluded;
  for (const auto& [evaluator, question, model] : matrix.score_abstentions)
    if (!scored.count({question, model})) excluded.insert({question, model});
  out.excluded.assign(excluded.begin(), excluded.end());

  for (const auto& [question, models] : by_question) {
    std::vector<std::pair<std::string, double>> fused;
    std::map<std::string, const Acc*> accs;
    for (const auto& [model, acc] : models) {
      // Answers whose every score came from zero-weight evaluators carry no information.
      if (acc.total_weight <= 0.0) continue;
      fused.emplace_back(model, acc.weighted / acc.total_weight);
      accs[model] = &acc;
    }
    for (std::size_t i = 0; i < fused.size(); ++i) {
      for (std::size_t j = i + 1; j < fused.size(); ++j) {
        AggregatedPreference p;
        p.question_id = question;
        p.model_first = fused[i].first;
        p.model_second = fused[j].first;
        p.first_mass = fused[i].second;
        p.second_mass = fused[j].second;
        p.verdict = by_mass(p.first_mass, p.second_mass);
        std::set<std::string> who(accs[p.model_first]->contributors.begin(), accs[p.model_first]->contributors.end());
        who.insert(accs[p.model_second]->contributors.begin(), accs[p.model_second]->contributors.end());
        p.contributors.assign(who.begin(), who.end());
        out.preferences.push_back(std::move(p));
      }
    }
  }
  for (const auto& [question, model] : out.excluded) {
    for (auto& p : out.preferences)
      if (p.question_id == question) p.flagged = true;
  }
  return out;
}

std::vector<AggregatedPreference> aggregate(const EvaluationMatrix& matrix, const WeightMap& weights) {
  if (matrix.format == EvalFormat::pairwise) return fuse_pairwise(matrix, weights);
  return scores_to_preferences(matrix, weights).preferences;
}

PreferenceMap to_preference_map(const std::vector<AggregatedPreference>& prefs) {
  PreferenceMap m;
  for (const auto& p : prefs) m[PairKey{p.question_id, p.model_first, p.model_second}] = p.verdict;
  return m;
}

PreferenceMap evaluator_preferences(const EvaluationMatrix& matrix, const std::string& evaluator_id) {
  EvaluationMatrix only;
  only.format = matrix.format;
  for (const auto& [key, r] : matrix.pairwise)
    if (std::get<0>(key) == evaluator_id) only.pairwise.emplace(key, r);
  for (const auto& [key, s] : matrix.scores)
    if (std::get<0>(key) == evaluator_id) only.scores.emplace(key, s);
  return to_preference_map(aggregate(only, WeightMap{{evaluator_id, 1.0}}));
}

void write_preferences(const std::filesystem::path& path, const std::vector<AggregatedPreference>& prefs) {
  std::vector<json> rows;
  rows.reserve(prefs.size());
  for (const auto& p : prefs) rows.push_back(p.to_json());
  write_jsonl(path, rows);
}

std::vector<AggregatedPreference> load_preferences(const std::filesystem::path& path) {
  std::vector<AggregatedPreference> out;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    try {
      out.push_back(AggregatedPreference::from_json(obj));
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed preference row: ") + e.what(), line);
    }
  });
  return out;
}

}  // namespace peerval
