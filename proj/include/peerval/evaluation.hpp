#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "peerval/corpus.hpp"
#include "peerval/gateway.hpp"
#include "peerval/prompting.hpp"

namespace peerval {

/// A judge: a backend plus the prompt placement it is driven with. Two
/// evaluators may share a backend with different placements.
struct Evaluator {
  std::string id;
  std::string backend_id;
  PromptPlacement placement = PromptPlacement::restriction_first;
};

struct JudgeContext {
  Gateway& gateway;
  const TemplateSet& templates = TemplateSet::builtin();
  int workers = 4;
};

struct PointTarget {
  std::string question_id;
  std::string model_id;
  auto operator<=>(const PointTarget&) const = default;
};

struct JudgeRecord {
  std::string evaluator_id;
  std::variant<PairItem, PointTarget> item;
  EvalFormat format = EvalFormat::pairwise;
  std::optional<Verdict> verdict;  // pairwise
  std::optional<PointScore> score;  // pointwise
  std::string raw_text;
  std::string note;  // reason for an abstention

  bool abstained() const { return !verdict && !score; }
};

/// Verdict or abstention; never throws for backend or parse failures.
JudgeRecord judge_pairwise(JudgeContext& ctx, const Evaluator& evaluator, const Corpus& corpus, const PairItem& item);
JudgeRecord judge_pointwise(JudgeContext& ctx, const Evaluator& evaluator, const Corpus& corpus,
                            const std::string& question_id, const std::string& model_id, EvalFormat format);

/// Pairwise outcome after combining both orders, relative to the canonical
/// (lower model id first) orientation.
enum class Resolved { first, second, split, abstention };
std::string to_string(Resolved r);
Resolved resolved_from_string(const std::string& s);

/// Combines the two order twins of one evaluator. Agreement yields that
/// winner, disagreement yields split, one-sided abstention defers to the
/// other side.
Resolved fold_swaps(const JudgeRecord& original, const JudgeRecord& swapped);

using PairCellKey = std::tuple<std::string, std::string, std::string, std::string>;  // evaluator, question, lo, hi
using PointCellKey = std::tuple<std::string, std::string, std::string>;              // evaluator, question, model

struct EvaluationMatrix {
  EvalFormat format = EvalFormat::pairwise;
  std::map<PairCellKey, Resolved> pairwise;  // never holds Resolved::abstention
  std::map<PointCellKey, int> scores;
  std::vector<PairCellKey> pairwise_abstentions;
  std::vector<PointCellKey> score_abstentions;

  std::size_t abstention_count() const { return pairwise_abstentions.size() + score_abstentions.size(); }
  std::vector<std::string> evaluators() const;
  bool operator==(const EvaluationMatrix&) const = default;
};

/// Deterministic text form (one JSON object per line, sorted).
std::string matrix_to_jsonl(const EvaluationMatrix& m);
EvaluationMatrix load_matrix(const std::filesystem::path& path);

struct RunOptions {
  /// Append-only journal; existing entries are replayed and skipped.
  std::optional<std::filesystem::path> journal;
  /// Test hook simulating a crash: throw Interrupted after this many newly
  /// journaled records.
  std::optional<std::size_t> stop_after;
};

class Interrupted : public Error {
 public:
  using Error::Error;
};

/// Judges every item of `corpus` in `format` with every evaluator.
/// Pairwise runs judge both orders of each pair and fold them.
EvaluationMatrix run_evaluation(JudgeContext& ctx, const std::vector<Evaluator>& evaluators, const Corpus& corpus,
                                EvalFormat format, const RunOptions& options = {},
                                std::vector<JudgeRecord>* records = nullptr);

json journal_entry(const JudgeRecord& r);
JudgeRecord record_from_journal(const json& j);

}  // namespace peerval
