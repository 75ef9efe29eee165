#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "peerval/corpus.hpp"
#include "peerval/evaluation.hpp"
#include "peerval/rational.hpp"

namespace peerval {

enum class ExamKind { consistency, self_confidence, pertinence };
std::string to_string(ExamKind k);  // "consistency", "self-confidence", "pertinence"
ExamKind exam_kind_from_string(const std::string& s);

enum class ConfidenceMethod { automatic, probability, label };
std::string to_string(ConfidenceMethod m);
ConfidenceMethod confidence_method_from_string(const std::string& s);

enum class VariantMethod { llm_rewrite, dataset_search };
std::string to_string(VariantMethod m);  // "llm-rewrite", "dataset-search"
VariantMethod variant_method_from_string(const std::string& s);

/// Where a relevant or irrelevant answer comes from. "corpus:<model>" reads
/// the corpus answer, "backend:<id>" asks a backend to write one, "self"
/// asks the candidate itself.
struct AnswerSource {
  enum class Kind { corpus_model, backend, self } kind = Kind::corpus_model;
  std::string id;

  static AnswerSource parse(const std::string& s);
  std::string to_string() const;
};

struct DifficultyRoster {
  std::string strong;
  std::string weak;
  std::string close;
};

struct DifficultySets {
  std::vector<PairItem> easy;  // strong vs weak
  std::vector<PairItem> hard;  // strong vs close
  DifficultyRoster provenance;
};

/// One strong-first item per question per set, plus swapped twins when asked.
DifficultySets build_difficulty_sets(const Corpus& corpus, const DifficultyRoster& roster,
                                     const std::vector<QuestionRecord>& questions, bool with_swaps);

struct ConsistencyReport {
  std::string candidate_id;
  std::size_t n_pairs = 0;
  std::size_t n_consistent = 0;
  Rational rate;
  Rational threshold{55, 100};
  bool passed = false;
  std::vector<JudgeRecord> records;  // audit
};

/// Every original item must come with its swapped twin. Abstaining twins
/// count as inconsistent.
ConsistencyReport consistency_exam(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus,
                                   const std::vector<PairItem>& pairs, const Rational& threshold);

struct ConfidenceReport {
  std::string candidate_id;
  ConfidenceMethod method = ConfidenceMethod::probability;  // never automatic once run
  std::string strategy;                                     // label method only
  PromptPlacement placement = PromptPlacement::restriction_first;
  double mean_easy = 0.0, mean_hard = 0.0;  // uncertainty (probability) or level (label)
  double sd_easy = 0.0, sd_hard = 0.0;
  std::size_t n_easy = 0, n_hard = 0, abstentions = 0;
  std::optional<double> t_p_value;        // absent when the test is undefined
  std::optional<double> ranksum_p_value;
  bool reversed = false;
  bool gated_on_significance = false;
  bool passed = false;
  std::vector<json> audit;  // one row per item
};

/// -ln p of the emitted verdict token; 0 when p = 1.
double uncertainty_from_probability(double p);

/// Throws CapabilityError when the backend lacks logprobs; parse failures
/// propagate as UnparseableError or AmbiguityError.
double self_confidence_probability(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus,
                                   const PairItem& item, const std::string& set = {});
int self_confidence_label(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus, const PairItem& item,
                          const ConfidenceStrategy& strategy, const std::string& set = {});

ConfidenceReport self_confidence_exam(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus,
                                      const DifficultySets& sets, ConfidenceMethod method,
                                      ConfidenceKind strategy = ConfidenceKind::doubtful,
                                      bool gate_on_significance = false);

struct VariantQuestion {
  QuestionRecord record;
  VariantMethod method = VariantMethod::dataset_search;
  std::string source_question_id;
};

/// llm-rewrite asks `helper_backend` to rewrite the question; dataset-search
/// draws another corpus question with a keyed stream.
VariantQuestion make_variant(const QuestionRecord& question, VariantMethod method, Gateway* gateway,
                             const std::string& helper_backend, const Corpus* corpus, std::uint64_t seed,
                             const TemplateSet& templates = TemplateSet::builtin());

struct PertinenceReport {
  std::string candidate_id;
  std::size_t n_items = 0;  // items with a decisive outcome (split items excluded)
  std::size_t n_ra_preferred = 0;
  std::size_t n_split = 0;
  std::size_t n_abstained = 0;  // counted in n_items, against the relevant answer
  Rational accuracy;
  Rational threshold{7, 10};
  bool passed = false;
  AnswerSource ra_source;
  AnswerSource ia_source;
  VariantMethod variant_method = VariantMethod::dataset_search;
  std::vector<JudgeRecord> records;  // audit
};

/// A prepared probe: the relevant answer to Q and the irrelevant answer to Q'.
struct PertinenceProbe {
  QuestionRecord question;
  VariantQuestion variant;
  AnswerRef ra;
  std::string ra_text;
  AnswerRef ia;
  std::string ia_text;
};

struct PertinenceSetup {
  AnswerSource ra_source;
  AnswerSource ia_source;
  VariantMethod variant_method = VariantMethod::dataset_search;
  std::string helper_backend;
  std::uint64_t seed = 7;
};

/// Builds probes for `questions`. `candidate` resolves the "self" source.
std::vector<PertinenceProbe> prepare_pertinence(JudgeContext& ctx, const Corpus& corpus,
                                                const std::vector<QuestionRecord>& questions,
                                                const PertinenceSetup& setup, const Evaluator* candidate);

PertinenceReport pertinence_exam(JudgeContext& ctx, const Evaluator& candidate, const std::vector<PertinenceProbe>& probes,
                                 const PertinenceSetup& setup, const Rational& threshold);

struct ExamReport {
  std::string candidate_id;
  std::set<ExamKind> enabled;
  std::optional<ConsistencyReport> consistency;
  std::optional<ConfidenceReport> confidence;
  std::optional<PertinenceReport> pertinence;
  std::vector<std::string> notes;
  bool overall_pass = false;
  double weight = 1.0;         // exam-derived weight
  double fusion_weight = 0.0;  // weight when passed, else 0

  json to_json() const;
  static ExamReport from_json(const json& j);
};

/// Pass flag and weight. An enabled exam without a report counts as failed.
ExamReport qualify(const std::string& candidate_id, std::optional<ConsistencyReport> consistency,
                   std::optional<ConfidenceReport> confidence, std::optional<PertinenceReport> pertinence,
                   const std::set<ExamKind>& enabled, std::vector<std::string> notes = {});

struct ExamConfig {
  std::set<ExamKind> enabled{ExamKind::consistency, ExamKind::self_confidence, ExamKind::pertinence};
  Rational consistency_threshold{55, 100};
  Rational pertinence_threshold{7, 10};
  ConfidenceMethod confidence_method = ConfidenceMethod::automatic;
  ConfidenceKind confidence_strategy = ConfidenceKind::doubtful;
  bool gate_on_significance = false;
  DifficultyRoster roster;
  PertinenceSetup pertinence;
  std::size_t question_count = 100;
  bool with_swaps = true;
};

/// Runs every enabled exam for every candidate over the first
/// `question_count` questions of `corpus`.
std::vector<ExamReport> run_exams(JudgeContext& ctx, const std::vector<Evaluator>& candidates, const Corpus& corpus,
                                  const ExamConfig& config);

std::map<std::string, double> fusion_weights(const std::vector<ExamReport>& reports);
std::vector<ExamReport> load_exam_reports(const std::filesystem::path& path);

}  // namespace peerval
