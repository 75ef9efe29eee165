#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "peerval/corpus.hpp"
#include "peerval/evaluation.hpp"

namespace peerval {

using WeightMap = std::map<std::string, double>;

struct AggregatedPreference {
  std::string question_id;
  std::string model_first;   // lower model id
  std::string model_second;  // higher model id
  PairPreference verdict = PairPreference::tie;
  double first_mass = 0.0;  // weighted vote mass, or fused score on the pointwise path
  double second_mass = 0.0;
  std::vector<std::string> contributors;
  bool flagged = false;  // an answer had no scores at all

  json to_json() const;
  static AggregatedPreference from_json(const json& j);
};

/// Weighted vote over folded pairwise cells. A split credits half the weight
/// to each side; exact equality of mass is a tie.
std::vector<AggregatedPreference> fuse_pairwise(const EvaluationMatrix& matrix, const WeightMap& weights);

struct PointwiseFusion {
  std::vector<AggregatedPreference> preferences;
  /// (question, model) answers every evaluator abstained on; they take no
  /// part in any comparison.
  std::vector<std::pair<std::string, std::string>> excluded;
};

/// Weighted mean score per answer, then pairwise comparison per question.
PointwiseFusion scores_to_preferences(const EvaluationMatrix& matrix, const WeightMap& weights);

/// Dispatches on the matrix format.
std::vector<AggregatedPreference> aggregate(const EvaluationMatrix& matrix, const WeightMap& weights);

PreferenceMap to_preference_map(const std::vector<AggregatedPreference>& prefs);
/// Single-evaluator view of a matrix (split counts as tie).
PreferenceMap evaluator_preferences(const EvaluationMatrix& matrix, const std::string& evaluator_id);

void write_preferences(const std::filesystem::path& path, const std::vector<AggregatedPreference>& prefs);
std::vector<AggregatedPreference> load_preferences(const std::filesystem::path& path);

}  // namespace peerval
