#include "peerval/corpus.hpp"

#include <algorithm>
#include <set>

#include "peerval/error.hpp"

namespace peerval {
namespace {

void check_schema(const json& obj, std::size_t line) {
  auto it = obj.find("schema_version");
  if (it == obj.end()) return;
  if (!it->is_number_integer() || it->get<int>() != kSchemaVersion)
    throw ParseError("unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")", line);
}

std::string label_string(PreferenceLabel l) {
  switch (l) {
    case PreferenceLabel::a: return "a";
    case PreferenceLabel::b: return "b";
    case PreferenceLabel::tie: return "tie";
  }
  return "tie";
}

}  // namespace

std::string to_string(Task t) {
  switch (t) {
    case Task::summary: return "summary";
    case Task::qa: return "qa";
    case Task::dialogue: return "dialogue";
  }
  return "qa";
}

Task task_from_string(const std::string& s) {
  if (s == "summary") return Task::summary;
  if (s == "qa") return Task::qa;
  if (s == "dialogue") return Task::dialogue;
  throw ParseError("unknown task '" + s + "'");
}

std::string to_string(OrderTag t) { return t == OrderTag::original ? "original" : "swapped"; }

std::string PairItem::item_id() const {
  const auto& lo = std::min(model_one, model_two);
  const auto& hi = std::max(model_one, model_two);
  return question_id + ":" + lo + "|" + hi;
}

PairItem PairItem::twin() const {
  return {question_id, model_two, model_one, order == OrderTag::original ? OrderTag::swapped : OrderTag::original};
}

json to_json(const QuestionRecord& q) {
  return {{"schema_version", kSchemaVersion}, {"question_id", q.question_id}, {"task", to_string(q.task)}, {"text", q.text}};
}

json to_json(const AnswerRecord& a) {
  return {{"schema_version", kSchemaVersion}, {"question_id", a.question_id}, {"model_id", a.model_id}, {"text", a.text}};
}

json to_json(const HumanAnnotation& a) {
  json obj = {{"schema_version", kSchemaVersion}, {"question_id", a.question_id}};
  if (a.preference)
    obj["preference"] = {{"model_a", a.preference->model_a}, {"model_b", a.preference->model_b},
                         {"label", label_string(a.preference->label)}};
  if (a.score) obj["score"] = {{"model_id", a.score->model_id}, {"score", a.score->score}};
  return obj;
}

std::vector<QuestionRecord> load_questions(const std::filesystem::path& path) {
  std::vector<QuestionRecord> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    check_schema(obj, line);
    QuestionRecord q;
    q.question_id = require_string(obj, "question_id", line);
    try {
      q.task = task_from_string(optional_string(obj, "task", "qa"));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line);
    }
    q.text = require_string(obj, "text", line);
    if (q.question_id.empty()) throw ParseError("question_id must be non-empty", line);
    if (q.text.empty()) throw ParseError("question '" + q.question_id + "' has empty text", line);
    if (!seen.insert(q.question_id).second)
      throw IntegrityError("duplicate question_id '" + q.question_id + "' at line " + std::to_string(line));
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<AnswerRecord> load_answers(const std::filesystem::path& path, const std::vector<QuestionRecord>* questions) {
  std::set<std::string> known;
  if (questions)
    for (const auto& q : *questions) known.insert(q.question_id);
  std::vector<AnswerRecord> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    check_schema(obj, line);
    AnswerRecord a{require_string(obj, "question_id", line), require_string(obj, "model_id", line),
                   require_string(obj, "text", line)};
    if (questions && !known.count(a.question_id))
      throw IntegrityError("answer at line " + std::to_string(line) + " references unknown question '" + a.question_id + "'");
    if (!seen.insert({a.question_id, a.model_id}).second)
      throw IntegrityError("duplicate answer (" + a.question_id + ", " + a.model_id + ") at line " + std::to_string(line));
    out.push_back(std::move(a));
  });
  return out;
}

std::vector<HumanAnnotation> load_annotations(const std::filesystem::path& path,
                                              const std::vector<QuestionRecord>* questions,
                                              const std::vector<AnswerRecord>* answers) {
  std::set<std::string> known_q;
  if (questions)
    for (const auto& q : *questions) known_q.insert(q.question_id);
  std::set<std::pair<std::string, std::string>> known_a;
  if (answers)
    for (const auto& a : *answers) known_a.insert({a.question_id, a.model_id});

  auto check_model = [&](const std::string& q, const std::string& m, std::size_t line) {
    if (answers && !known_a.count({q, m}))
      throw IntegrityError("annotation at line " + std::to_string(line) + " references unknown answer (" + q + ", " + m + ")");
  };

  std::vector<HumanAnnotation> out;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    check_schema(obj, line);
    HumanAnnotation a;
    a.question_id = require_string(obj, "question_id", line);
    if (questions && !known_q.count(a.question_id))
      throw IntegrityError("annotation at line " + std::to_string(line) + " references unknown question '" + a.question_id + "'");
    if (auto p = obj.find("preference"); p != obj.end()) {
      HumanAnnotation::Preference pref{require_string(*p, "model_a", line), require_string(*p, "model_b", line)};
      const auto label = require_string(*p, "label", line);
      if (label == "a") pref.label = PreferenceLabel::a;
      else if (label == "b") pref.label = PreferenceLabel::b;
      else if (label == "tie") pref.label = PreferenceLabel::tie;
      else throw ParseError("preference label must be a, b or tie", line);
      if (pref.model_a == pref.model_b) throw IntegrityError("preference compares a model with itself at line " + std::to_string(line));
      check_model(a.question_id, pref.model_a, line);
      check_model(a.question_id, pref.model_b, line);
      a.preference = std::move(pref);
    } else if (auto s = obj.find("score"); s != obj.end()) {
      HumanAnnotation::Score score{require_string(*s, "model_id", line)};
      if (!s->contains("score") || !s->at("score").is_number_integer()) throw ParseError("score must be an integer", line);
      score.score = s->at("score").get<int>();
      if (score.score < 1 || score.score > 5) throw ParseError("score must be within [1, 5]", line);
      check_model(a.question_id, score.model_id, line);
      a.score = std::move(score);
    } else {
      throw ParseError("annotation needs either 'preference' or 'score'", line);
    }
    out.push_back(std::move(a));
  });
  return out;
}

Corpus::Corpus(std::vector<QuestionRecord> questions, std::vector<AnswerRecord> answers)
    : questions_(std::move(questions)), answers_(std::move(answers)) {
  for (std::size_t i = 0; i < questions_.size(); ++i) {
    if (!question_index_.emplace(questions_[i].question_id, i).second)
      throw IntegrityError("duplicate question_id '" + questions_[i].question_id + "'");
  }
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    const auto& a = answers_[i];
    if (!question_index_.count(a.question_id))
      throw IntegrityError("answer references unknown question '" + a.question_id + "'");
    if (!answer_index_.emplace(std::make_pair(a.question_id, a.model_id), i).second)
      throw IntegrityError("duplicate answer (" + a.question_id + ", " + a.model_id + ")");
  }
}

const QuestionRecord& Corpus::question(const std::string& id) const {
  auto it = question_index_.find(id);
  if (it == question_index_.end()) throw IntegrityError("unknown question '" + id + "'");
  return questions_[it->second];
}

const AnswerRecord* Corpus::find_answer(const std::string& question_id, const std::string& model_id) const {
  auto it = answer_index_.find({question_id, model_id});
  return it == answer_index_.end() ? nullptr : &answers_[it->second];
}

const AnswerRecord& Corpus::answer(const std::string& question_id, const std::string& model_id) const {
  if (const auto* a = find_answer(question_id, model_id)) return *a;
  throw IntegrityError("missing answer for (" + question_id + ", " + model_id + ")");
}

std::vector<std::string> Corpus::models() const {
  std::set<std::string> ids;
  for (const auto& a : answers_) ids.insert(a.model_id);
  return {ids.begin(), ids.end()};
}

std::vector<PairItem> build_pairs(const std::vector<QuestionRecord>& questions,
                                  const std::vector<AnswerRecord>& answers,
                                  bool with_swaps,
                                  std::vector<std::string> models) {
  std::set<std::pair<std::string, std::string>> present;
  std::set<std::string> all_models;
  for (const auto& a : answers) {
    present.insert({a.question_id, a.model_id});
    all_models.insert(a.model_id);
  }
  if (models.empty()) models.assign(all_models.begin(), all_models.end());
  std::sort(models.begin(), models.end());
  if (std::adjacent_find(models.begin(), models.end()) != models.end())
    throw ContractViolation("model roster contains duplicates");

  std::vector<PairItem> items;
  items.reserve(questions.size() * models.size() * (models.size() > 0 ? models.size() - 1 : 0));
  for (const auto& q : questions) {
    for (const auto& m : models) {
      if (!present.count({q.question_id, m}))
        throw IntegrityError("missing answer for (" + q.question_id + ", " + m + ")");
    }
    for (std::size_t i = 0; i < models.size(); ++i) {
      for (std::size_t j = i + 1; j < models.size(); ++j) {
        PairItem item{q.question_id, models[i], models[j], OrderTag::original};
        if (with_swaps) items.push_back(item.twin());
        items.push_back(std::move(item));
      }
    }
  }
  std::sort(items.begin(), items.end());
  return items;
}

std::string to_string(PairPreference p) {
  switch (p) {
    case PairPreference::first: return "first";
    case PairPreference::second: return "second";
    case PairPreference::tie: return "tie";
  }
  return "tie";
}

PairPreference pair_preference_from_string(const std::string& s) {
  if (s == "first") return PairPreference::first;
  if (s == "second") return PairPreference::second;
  if (s == "tie") return PairPreference::tie;
  throw ParseError("unknown preference '" + s + "'");
}

PairKey make_pair_key(const std::string& question_id, const std::string& m1, const std::string& m2) {
  return m1 < m2 ? PairKey{question_id, m1, m2} : PairKey{question_id, m2, m1};
}

PreferenceMap annotation_preferences(const std::vector<HumanAnnotation>& annotations) {
  PreferenceMap out;
  auto put = [&](const PairKey& key, PairPreference pref) {
    auto [it, inserted] = out.emplace(key, pref);
    if (!inserted && it->second != pref)
      throw IntegrityError("conflicting annotations for (" + std::get<0>(key) + ", " + std::get<1>(key) + ", " +
                           std::get<2>(key) + ")");
  };

  // question -> model -> score
  std::map<std::string, std::map<std::string, int>> scores;
  for (const auto& a : annotations) {
    if (a.preference) {
      const auto& p = *a.preference;
      PairPreference pref = PairPreference::tie;
      if (p.label != PreferenceLabel::tie) {
        const bool a_wins = p.label == PreferenceLabel::a;
        const bool a_is_lower = p.model_a < p.model_b;
        pref = (a_wins == a_is_lower) ? PairPreference::first : PairPreference::second;
      }
      put(make_pair_key(a.question_id, p.model_a, p.model_b), pref);
    } else if (a.score) {
      auto [it, inserted] = scores[a.question_id].emplace(a.score->model_id, a.score->score);
      if (!inserted && it->second != a.score->score)
        throw IntegrityError("conflicting scores for (" + a.question_id + ", " + a.score->model_id + ")");
    }
  }
  for (const auto& [qid, by_model] : scores) {
    for (auto i = by_model.begin(); i != by_model.end(); ++i) {
      for (auto j = std::next(i); j != by_model.end(); ++j) {
        // map order guarantees i->first < j->first
        const PairPreference pref = i->second > j->second   ? PairPreference::first
                                    : i->second < j->second ? PairPreference::second
                                                            : PairPreference::tie;
        put(PairKey{qid, i->first, j->first}, pref);
      }
    }
  }
  return out;
}

}  // namespace peerval
