#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peerval/jsonl.hpp"

namespace peerval {

inline constexpr int kSchemaVersion = 1;

enum class Task { summary, qa, dialogue };
std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct QuestionRecord {
  std::string question_id;
  Task task = Task::qa;
  std::string text;
  bool operator==(const QuestionRecord&) const = default;
};

struct AnswerRecord {
  std::string question_id;
  std::string model_id;
  std::string text;
  bool operator==(const AnswerRecord&) const = default;
};

enum class PreferenceLabel { a, b, tie };

struct HumanAnnotation {
  std::string question_id;
  struct Preference {
    std::string model_a;
    std::string model_b;
    PreferenceLabel label = PreferenceLabel::tie;
  };
  struct Score {
    std::string model_id;
    int score = 0;
  };
  std::optional<Preference> preference;
  std::optional<Score> score;
};

enum class OrderTag { original, swapped };
std::string to_string(OrderTag t);

/// One ordered judging instance (question, answer-one, answer-two).
struct PairItem {
  std::string question_id;
  std::string model_one;
  std::string model_two;
  OrderTag order = OrderTag::original;

  /// Order-independent identity shared by both swap twins:
  /// "<question>:<lower model>|<higher model>".
  std::string item_id() const;
  PairItem twin() const;
  bool operator==(const PairItem&) const = default;
  auto operator<=>(const PairItem&) const = default;
};

json to_json(const QuestionRecord& q);
json to_json(const AnswerRecord& a);
json to_json(const HumanAnnotation& a);

std::vector<QuestionRecord> load_questions(const std::filesystem::path& path);
/// Validates (question, model) uniqueness and, when `questions` is given,
/// that every referenced question exists.
std::vector<AnswerRecord> load_answers(const std::filesystem::path& path,
                                       const std::vector<QuestionRecord>* questions = nullptr);
std::vector<HumanAnnotation> load_annotations(const std::filesystem::path& path,
                                              const std::vector<QuestionRecord>* questions = nullptr,
                                              const std::vector<AnswerRecord>* answers = nullptr);

/// In-memory validated corpus with lookup helpers.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<QuestionRecord> questions, std::vector<AnswerRecord> answers);

  const std::vector<QuestionRecord>& questions() const { return questions_; }
  const std::vector<AnswerRecord>& answers() const { return answers_; }
  const QuestionRecord& question(const std::string& id) const;
  bool has_question(const std::string& id) const { return question_index_.count(id) > 0; }
  const AnswerRecord* find_answer(const std::string& question_id, const std::string& model_id) const;
  const AnswerRecord& answer(const std::string& question_id, const std::string& model_id) const;
  /// Sorted, de-duplicated model ids.
  std::vector<std::string> models() const;

 private:
  std::vector<QuestionRecord> questions_;
  std::vector<AnswerRecord> answers_;
  std::map<std::string, std::size_t> question_index_;
  std::map<std::pair<std::string, std::string>, std::size_t> answer_index_;
};

/// Every unordered model pair per question (model ids sorted, lower first in
/// the original item), optionally followed by its swapped twin. Output is
/// sorted. Count = |questions| x C(|models|, 2) x (2 if with_swaps else 1).
std::vector<PairItem> build_pairs(const std::vector<QuestionRecord>& questions,
                                  const std::vector<AnswerRecord>& answers,
                                  bool with_swaps,
                                  std::vector<std::string> models = {});

enum class PairPreference { first, second, tie };
std::string to_string(PairPreference p);
PairPreference pair_preference_from_string(const std::string& s);

/// Key: (question id, lower model id, higher model id). The preference is
/// relative to that canonical order.
using PairKey = std::tuple<std::string, std::string, std::string>;
PairKey make_pair_key(const std::string& question_id, const std::string& m1, const std::string& m2);
using PreferenceMap = std::map<PairKey, PairPreference>;

PreferenceMap annotation_preferences(const std::vector<HumanAnnotation>& annotations);

}  // namespace peerval
