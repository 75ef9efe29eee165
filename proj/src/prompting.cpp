#include "peerval/prompting.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "peerval/error.hpp"

namespace peerval {
namespace {

const std::map<std::string, std::string>& builtin_map() {
  static const std::map<std::string, std::string> m = {
#include "peerval_builtin_templates.inc"
  };
  return m;
}

std::string trim_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string with_tag(std::string prompt, const PromptTag* tag) {
  if (!tag) return prompt;
  prompt += "\n\n";
  prompt += kTagPrefix;
  prompt += tag->to_json().dump();
  prompt += " -->";
  return prompt;
}

std::string task_description(const QuestionRecord& q, const TemplateSet& t) { return t.get("task_" + to_string(q.task)); }

void require_text(const std::string& s, const char* what) {
  if (s.empty()) throw ContractViolation(std::string(what) + " must be non-empty");
}

struct Word {
  std::size_t pos;
  std::string lower;
};

// Maximal runs of ASCII letters/digits, lower-cased.
std::vector<Word> words(std::string_view s) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isalnum(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string w;
    while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) {
      w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[j]))));
      ++j;
    }
    out.push_back({i, std::move(w)});
    i = j;
  }
  return out;
}

json ref_json(const AnswerRef& r) { return {{"q", r.question_id}, {"m", r.model_id}}; }
AnswerRef ref_from(const json& j) { return {j.at("q").get<std::string>(), j.at("m").get<std::string>()}; }

}  // namespace

std::string to_string(EvalFormat f) {
  switch (f) {
    case EvalFormat::five_level: return "5level";
    case EvalFormat::hundred_level: return "100level";
    case EvalFormat::pairwise: return "pairwise";
  }
  return "pairwise";
}

EvalFormat eval_format_from_string(const std::string& s) {
  if (s == "5level" || s == "five_level") return EvalFormat::five_level;
  if (s == "100level" || s == "hundred_level") return EvalFormat::hundred_level;
  if (s == "pairwise") return EvalFormat::pairwise;
  throw ConfigError("unknown evaluation format '" + s + "' (expected 5level, 100level or pairwise)");
}

bool is_pointwise(EvalFormat f) { return f != EvalFormat::pairwise; }

std::string to_string(PromptPlacement p) { return p == PromptPlacement::restriction_first ? "p1" : "p2"; }

PromptPlacement placement_from_string(const std::string& s) {
  if (s == "p1" || s == "restriction_first") return PromptPlacement::restriction_first;
  if (s == "p2" || s == "restriction_last") return PromptPlacement::restriction_last;
  throw ConfigError("unknown placement '" + s + "' (expected p1 or p2)");
}

ConfidenceStrategy ConfidenceStrategy::make(ConfidenceKind kind) {
  ConfidenceStrategy s;
  s.kind = kind;
  switch (kind) {
    case ConfidenceKind::num:
    case ConfidenceKind::num_explanation:
      s.labels = {"1", "2", "3", "4", "5"};
      s.explanations = {"you are essentially guessing", "you lean one way but could easily be wrong",
                        "you are fairly sure but see real room for error", "you are sure with only minor reservations",
                        "you are completely certain"};
      s.granularity = kind == ConfidenceKind::num ? Granularity::coarse : Granularity::fine;
      break;
    case ConfidenceKind::doubtful:
      s.labels = {"doubtful", "uncertain", "moderate", "confident", "absolute"};
      s.explanations = {"you have serious doubts about your decision", "you are unsure and could go either way",
                        "you have a moderate level of certainty", "you are confident with only minor reservations",
                        "you are absolutely certain of your decision"};
      s.granularity = Granularity::fine;
      break;
    case ConfidenceKind::null:
      s.labels = {"null", "low", "medium", "high", "expert"};
      s.explanations = {"you have no confidence in your decision at all", "your confidence is low",
                        "your confidence is medium", "your confidence is high",
                        "you are as certain as a domain expert would be"};
      s.granularity = Granularity::fine;
      break;
  }
  return s;
}

std::string ConfidenceStrategy::name() const {
  switch (kind) {
    case ConfidenceKind::num: return "num";
    case ConfidenceKind::num_explanation: return "num_explanation";
    case ConfidenceKind::doubtful: return "doubtful";
    case ConfidenceKind::null: return "null";
  }
  return "doubtful";
}

ConfidenceKind confidence_kind_from_string(const std::string& s) {
  if (s == "num") return ConfidenceKind::num;
  if (s == "num_explanation") return ConfidenceKind::num_explanation;
  if (s == "doubtful") return ConfidenceKind::doubtful;
  if (s == "null") return ConfidenceKind::null;
  throw ConfigError("unknown confidence strategy '" + s + "'");
}

json PromptTag::to_json() const {
  json j = {{"kind", kind}, {"item", item}, {"order", to_string(order)}, {"question", question_id}};
  if (one) j["one"] = ref_json(*one);
  if (two) j["two"] = ref_json(*two);
  if (!set.empty()) j["set"] = set;
  if (!strategy.empty()) j["strategy"] = strategy;
  return j;
}

PromptTag PromptTag::from_json(const json& j) {
  PromptTag t;
  t.kind = j.at("kind").get<std::string>();
  t.item = j.at("item").get<std::string>();
  t.order = j.value("order", "original") == "swapped" ? OrderTag::swapped : OrderTag::original;
  t.question_id = j.at("question").get<std::string>();
  if (j.contains("one")) t.one = ref_from(j.at("one"));
  if (j.contains("two")) t.two = ref_from(j.at("two"));
  t.set = j.value("set", "");
  t.strategy = j.value("strategy", "");
  return t;
}

std::optional<PromptTag> extract_prompt_tag(std::string_view prompt) {
  const auto pos = prompt.rfind(kTagPrefix);
  if (pos == std::string_view::npos) return std::nullopt;
  auto body = prompt.substr(pos + kTagPrefix.size());
  const auto end = body.rfind(" -->");
  if (end == std::string_view::npos) return std::nullopt;
  try {
    return PromptTag::from_json(json::parse(body.substr(0, end)));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet set = [] {
    TemplateSet s;
    for (const auto& [name, text] : builtin_map()) s.templates_[name] = trim_trailing_newlines(text);
    return s;
  }();
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("template directory not found: " + dir.string());
  TemplateSet s = builtin();
  for (auto& [name, text] : s.templates_) {
    const auto file = dir / (name + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = trim_trailing_newlines(buf.str());
  }
  return s;
}

const std::string& TemplateSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("unknown template '" + name + "'");
  return it->second;
}

std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tpl.size());
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const auto close = tpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tpl[i++]);
  }
  return out;
}

std::string render_pairwise(const QuestionRecord& question, const std::string& answer_one, const std::string& answer_two,
                            PromptPlacement placement, const PromptTag* tag, const TemplateSet& templates) {
  require_text(question.text, "question");
  require_text(answer_one, "answer one");
  require_text(answer_two, "answer two");
  const auto& tpl = templates.get(placement == PromptPlacement::restriction_first ? "pairwise_p1" : "pairwise_p2");
  return with_tag(fill_template(tpl, {{"task_description", task_description(question, templates)},
                                      {"question", question.text},
                                      {"answer_one", answer_one},
                                      {"answer_two", answer_two}}),
                  tag);
}

std::string render_pointwise(const QuestionRecord& question, const std::string& answer, EvalFormat format,
                             const PromptTag* tag, const TemplateSet& templates) {
  if (!is_pointwise(format)) throw ContractViolation("render_pointwise needs a pointwise format");
  require_text(question.text, "question");
  require_text(answer, "answer");
  const auto& tpl = templates.get(format == EvalFormat::five_level ? "five_level" : "hundred_level");
  return with_tag(fill_template(tpl, {{"task_description", task_description(question, templates)},
                                      {"question", question.text},
                                      {"answer", answer},
                                      {"answer_one", answer}}),
                  tag);
}

std::string render_confidence(const QuestionRecord& question, const std::string& answer_one,
                              const std::string& answer_two, const ConfidenceStrategy& strategy, const PromptTag* tag,
                              const TemplateSet& templates) {
  require_text(question.text, "question");
  require_text(answer_one, "answer one");
  require_text(answer_two, "answer two");
  std::string labels;
  if (strategy.granularity == Granularity::coarse) {
    for (std::size_t i = 0; i < strategy.labels.size(); ++i) labels += (i ? ", " : "") + strategy.labels[i];
  } else {
    for (std::size_t i = 0; i < strategy.labels.size(); ++i)
      labels += (i ? "\n" : "") + ("- " + strategy.labels[i] + ": " + strategy.explanations[i]);
  }
  return with_tag(fill_template(templates.get("confidence_" + strategy.name()),
                                {{"task_description", task_description(question, templates)},
                                 {"question", question.text},
                                 {"answer_one", answer_one},
                                 {"answer_two", answer_two},
                                 {"labels", labels}}),
                  tag);
}

std::string render_variant_request(const QuestionRecord& question, const PromptTag* tag, const TemplateSet& templates) {
  require_text(question.text, "question");
  return with_tag(fill_template(templates.get("variant_request"), {{"question", question.text}}), tag);
}

std::string render_answer_request(const QuestionRecord& question, const PromptTag* tag, const TemplateSet& templates) {
  require_text(question.text, "question");
  return with_tag(fill_template(templates.get("answer_request"),
                                {{"task_description", task_description(question, templates)}, {"question", question.text}}),
                  tag);
}

Verdict parse_verdict(std::string_view raw) {
  for (const auto& w : words(raw)) {
    if (w.lower == "one") return {Choice::one, std::string(raw)};
    if (w.lower == "two") return {Choice::two, std::string(raw)};
  }
  throw UnparseableError("no standalone 'one' or 'two' in judge output");
}

PointScore parse_score(std::string_view raw, EvalFormat format) {
  if (!is_pointwise(format)) throw ContractViolation("parse_score needs a pointwise format");
  std::size_t i = 0;
  while (i < raw.size() && !std::isdigit(static_cast<unsigned char>(raw[i]))) ++i;
  if (i == raw.size()) throw UnparseableError("no integer in judge output");
  const bool negative = i > 0 && raw[i - 1] == '-';
  std::size_t j = i;
  while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
  long long value = 0;
  auto [ptr, ec] = std::from_chars(raw.data() + i, raw.data() + j, value);
  if (ec == std::errc::result_out_of_range) throw RangeError("score literal out of range");
  if (negative) value = -value;
  const int lo = format == EvalFormat::five_level ? 1 : 0;
  const int hi = format == EvalFormat::five_level ? 5 : 100;
  if (value < lo || value > hi)
    throw RangeError("score " + std::to_string(value) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return {format, static_cast<int>(value)};
}

int parse_confidence(std::string_view raw, const ConfidenceStrategy& strategy) {
  for (const auto& w : words(raw)) {
    for (std::size_t k = 0; k < strategy.labels.size(); ++k) {
      if (w.lower == strategy.labels[k]) return static_cast<int>(k) + 1;
    }
  }
  throw UnparseableError("no '" + strategy.name() + "' confidence label in output");
}

}  // namespace peerval
