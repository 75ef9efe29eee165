#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "peerval/corpus.hpp"
#include "peerval/jsonl.hpp"

namespace peerval {

enum class EvalFormat { five_level, hundred_level, pairwise };
std::string to_string(EvalFormat f);  // "5level", "100level", "pairwise"
EvalFormat eval_format_from_string(const std::string& s);
bool is_pointwise(EvalFormat f);

/// Where the output-restriction statement sits: restriction_first renders
/// template pairwise_p1, restriction_last renders pairwise_p2.
enum class PromptPlacement { restriction_first, restriction_last };
std::string to_string(PromptPlacement p);  // "p1", "p2"
PromptPlacement placement_from_string(const std::string& s);

enum class ConfidenceKind { num, num_explanation, doubtful, null };
enum class Granularity { coarse, fine };

struct ConfidenceStrategy {
  ConfidenceKind kind = ConfidenceKind::doubtful;
  std::array<std::string, 5> labels;        // ordered, lowest confidence first
  std::array<std::string, 5> explanations;  // used by fine-grained strategies
  Granularity granularity = Granularity::fine;

  static ConfidenceStrategy make(ConfidenceKind kind);
  std::string name() const;  // "num", "num_explanation", "doubtful", "null"
};
ConfidenceKind confidence_kind_from_string(const std::string& s);

enum class Choice { one, two };

struct Verdict {
  Choice choice = Choice::one;
  std::string raw_text;
};

struct PointScore {
  EvalFormat format = EvalFormat::five_level;
  int value = 0;
};

/// Identity of an answer: the question it was written for and its author.
struct AnswerRef {
  std::string question_id;
  std::string model_id;
  bool operator==(const AnswerRef&) const = default;
};

/// Machine-readable item identity carried on the last line of every prompt
/// the pipeline renders. Scripted backends key their behaviour off it.
struct PromptTag {
  std::string kind;  // pairwise | pointwise | confidence | variant | answer
  std::string item;
  OrderTag order = OrderTag::original;
  std::string question_id;
  std::optional<AnswerRef> one;
  std::optional<AnswerRef> two;
  std::string set;       // "easy" / "hard" for difficulty-set items
  std::string strategy;  // confidence strategy name for confidence prompts
  json to_json() const;
  static PromptTag from_json(const json& obj);
};

inline constexpr std::string_view kTagPrefix = "<!-- peerval-item ";
std::optional<PromptTag> extract_prompt_tag(std::string_view prompt);

/// Named prompt templates with {placeholder} slots.
class TemplateSet {
 public:
  /// Templates compiled in from the repository's templates/ directory.
  static const TemplateSet& builtin();
  /// Reads <dir>/<name>.txt for every known template; names missing from the
  /// directory keep their built-in text.
  static TemplateSet load(const std::filesystem::path& dir);

  const std::string& get(const std::string& name) const;
  void set(const std::string& name, std::string text) { templates_[name] = std::move(text); }

 private:
  std::map<std::string, std::string> templates_;
};

/// Single-pass placeholder substitution: values are never re-scanned, and
/// unknown placeholders are left as written.
std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values);

std::string render_pairwise(const QuestionRecord& question, const std::string& answer_one, const std::string& answer_two,
                            PromptPlacement placement, const PromptTag* tag = nullptr,
                            const TemplateSet& templates = TemplateSet::builtin());

std::string render_pointwise(const QuestionRecord& question, const std::string& answer, EvalFormat format,
                             const PromptTag* tag = nullptr, const TemplateSet& templates = TemplateSet::builtin());

std::string render_confidence(const QuestionRecord& question, const std::string& answer_one,
                              const std::string& answer_two, const ConfidenceStrategy& strategy,
                              const PromptTag* tag = nullptr, const TemplateSet& templates = TemplateSet::builtin());

std::string render_variant_request(const QuestionRecord& question, const PromptTag* tag = nullptr,
                                   const TemplateSet& templates = TemplateSet::builtin());

std::string render_answer_request(const QuestionRecord& question, const PromptTag* tag = nullptr,
                                  const TemplateSet& templates = TemplateSet::builtin());

/// First standalone "one"/"two" (case-insensitive) decides.
/// Throws UnparseableError when neither occurs.
Verdict parse_verdict(std::string_view raw);

/// First integer literal, validated against the format's range.
/// Throws UnparseableError (no integer) or RangeError.
PointScore parse_score(std::string_view raw, EvalFormat format);

/// Earliest standalone strategy label; returns its level 1..5.
int parse_confidence(std::string_view raw, const ConfidenceStrategy& strategy);

}  // namespace peerval
