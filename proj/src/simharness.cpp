#include "peerval/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "peerval/error.hpp"
#include "peerval/keyed_random.hpp"
#include "peerval/prompting.hpp"

namespace peerval {
namespace {

constexpr const char* kSubjects[] = {
    "photosynthesis", "inflation",   "glaciers",    "vaccination", "blockchain",   "volcanoes",
    "meditation",     "copyright",   "tides",       "compilers",   "mortgages",    "migration",
    "fermentation",   "earthquakes", "democracy",   "antibiotics", "rainbows",     "encryption",
    "sourdough",      "hurricanes",  "jazz",        "recycling",   "telescopes",   "insomnia",
    "orchids",        "cactus",      "Buddhism",    "Christianity", "gravity",     "tariffs",
};
constexpr std::size_t kSubjectCount = std::size(kSubjects);

constexpr const char* kForms[] = {
    "Could someone explain {s} for me?",
    "What is the simplest way to understand {s}?",
    "Why do people disagree about {s}?",
    "How would you describe {s} to a beginner?",
    "What are the main facts everyone should know about {s}?",
};

constexpr const char* kSentences[] = {
    "It starts from the core idea and defines the key term plainly.",
    "It then gives a concrete example that makes the idea tangible.",
    "A common misconception is named and corrected.",
    "The answer connects the topic to everyday experience.",
    "It closes with a short summary of the practical consequences.",
    "Sources of further reading are suggested for the curious.",
};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

std::string question_text(const KeyedStream& rng, std::size_t index) {
  std::string form = kForms[rng.bits(2 * index) % std::size(kForms)];
  const std::string subject = kSubjects[rng.bits(2 * index + 1) % kSubjectCount];
  form.replace(form.find("{s}"), 3, subject);
  return form;
}

std::string answer_text(const std::string& model, const std::string& question, double quality) {
  const std::size_t sentences = 1 + static_cast<std::size_t>(std::lround(quality * 5.0));
  std::ostringstream out;
  out << "[" << model << "] Regarding \"" << question << "\":";
  for (std::size_t i = 0; i < sentences && i < std::size(kSentences); ++i) out << ' ' << kSentences[i];
  return out.str();
}

std::string variant_of(const std::string& question) {
  // Swap the longest word for a different subject word.
  std::size_t best_pos = std::string::npos, best_len = 0;
  for (std::size_t i = 0; i < question.size();) {
    if (!std::isalpha(static_cast<unsigned char>(question[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < question.size() && std::isalpha(static_cast<unsigned char>(question[j]))) ++j;
    if (j - i > best_len) {
      best_len = j - i;
      best_pos = i;
    }
    i = j;
  }
  if (best_pos == std::string::npos) return question;
  const std::string word = question.substr(best_pos, best_len);
  const std::size_t start = fnv1a(word) % kSubjectCount;
  for (std::size_t k = 0; k < kSubjectCount; ++k) {
    const std::string candidate = kSubjects[(start + k) % kSubjectCount];
    if (candidate != word) return question.substr(0, best_pos) + candidate + question.substr(best_pos + best_len);
  }
  return question;
}

std::string line_after(const std::string& prompt, const std::string& header) {
  const auto pos = prompt.find(header + "\n");
  if (pos == std::string::npos) return {};
  const auto begin = pos + header.size() + 1;
  const auto end = prompt.find('\n', begin);
  return prompt.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
}

// Which slot holds the better answer; unknown or equal quality falls back to
// the slot holding the lexicographically smaller model so the choice is
// order-invariant.
Choice better_slot(const SyntheticTruth* truth, const AnswerRef& one, const AnswerRef& two) {
  std::optional<double> q1, q2;
  if (truth) {
    q1 = truth->quality_of(one.question_id, one.model_id);
    q2 = truth->quality_of(two.question_id, two.model_id);
  }
  if (q1 && q2 && *q1 != *q2) return *q1 > *q2 ? Choice::one : Choice::two;
  return std::tie(one.model_id, one.question_id) <= std::tie(two.model_id, two.question_id) ? Choice::one : Choice::two;
}

Choice other(Choice c) { return c == Choice::one ? Choice::two : Choice::one; }
std::string word(Choice c) { return c == Choice::one ? "one" : "two"; }

double uncertainty(const ScriptedProfile& p, const KeyedStream& rng, const std::string& set) {
  double mean = (p.easy_uncertainty + p.hard_uncertainty) / 2.0;
  if (set == "easy") mean = p.easy_uncertainty;
  if (set == "hard") mean = p.hard_uncertainty;
  return std::max(0.0, mean + p.spread * (2.0 * rng.uniform(10) - 1.0));
}

Choice pairwise_choice(const ScriptedProfile& p, const SyntheticTruth* truth, const PromptTag& tag,
                       const KeyedStream& rng) {
  if (!tag.one || !tag.two) throw ContractViolation("pairwise item marker lacks answer identities");
  if (rng.uniform(1) < p.positional_flip) return Choice::one;
  const bool probe = tag.one->question_id != tag.two->question_id &&
                     (tag.one->question_id == tag.question_id || tag.two->question_id == tag.question_id);
  if (probe) {
    const Choice pertinent = tag.one->question_id == tag.question_id ? Choice::one : Choice::two;
    return rng.uniform(2) < p.pertinence_susceptibility ? other(pertinent) : pertinent;
  }
  const Choice better = better_slot(truth, *tag.one, *tag.two);
  return rng.uniform(3) < p.judge_accuracy ? better : other(better);
}

int point_score(const ScriptedProfile& p, const SyntheticTruth* truth, const PromptTag& tag, EvalFormat format,
                const KeyedStream& rng) {
  double q = 0.5;
  if (truth && tag.one) q = truth->quality_of(tag.one->question_id, tag.one->model_id).value_or(0.5);
  if (format == EvalFormat::five_level) {
    int score = 1 + static_cast<int>(std::lround(4.0 * q));
    if (rng.uniform(3) >= p.judge_accuracy) score += rng.uniform(4) < 0.5 ? -1 : 1;
    if (score < 1) score = 2;
    if (score > 5) score = 4;
    return score;
  }
  const double noisy = 100.0 * q + (1.0 - p.judge_accuracy) * 30.0 * rng.normal(5);
  return static_cast<int>(std::clamp(std::lround(noisy), 0L, 100L));
}

}  // namespace

ScriptedProfile ScriptedProfile::from_json(const json& j) {
  ScriptedProfile p;
  p.evaluator_id = j.value("evaluator_id", "");
  p.judge_accuracy = j.value("judge_accuracy", p.judge_accuracy);
  p.positional_flip = j.value("positional_flip", p.positional_flip);
  if (j.contains("confidence_profile")) {
    const auto& c = j.at("confidence_profile");
    p.easy_uncertainty = c.value("easy_uncertainty_mean", p.easy_uncertainty);
    p.hard_uncertainty = c.value("hard_uncertainty_mean", p.hard_uncertainty);
    p.spread = c.value("spread", p.spread);
  }
  p.pertinence_susceptibility = j.value("pertinence_susceptibility", p.pertinence_susceptibility);
  p.seed = j.value("seed", p.seed);
  p.garbage_rate = j.value("garbage_rate", p.garbage_rate);
  if (j.contains("fixed_usage_tokens")) p.fixed_usage_tokens = j.at("fixed_usage_tokens").get<std::int64_t>();
  for (double v : {p.judge_accuracy, p.positional_flip, p.pertinence_susceptibility, p.garbage_rate})
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("scripted profile probabilities must lie in [0, 1]");
  if (p.easy_uncertainty < 0 || p.hard_uncertainty < 0 || p.spread < 0)
    throw ConfigError("scripted confidence profile must be nonnegative");
  return p;
}

json ScriptedProfile::to_json() const {
  json j = {{"evaluator_id", evaluator_id},
            {"judge_accuracy", judge_accuracy},
            {"positional_flip", positional_flip},
            {"confidence_profile",
             {{"easy_uncertainty_mean", easy_uncertainty}, {"hard_uncertainty_mean", hard_uncertainty}, {"spread", spread}}},
            {"pertinence_susceptibility", pertinence_susceptibility},
            {"seed", seed},
            {"garbage_rate", garbage_rate}};
  if (fixed_usage_tokens) j["fixed_usage_tokens"] = *fixed_usage_tokens;
  return j;
}

std::optional<double> SyntheticTruth::quality_of(const std::string& question_id, const std::string& model_id) const {
  auto it = quality.find({question_id, model_id});
  if (it == quality.end()) return std::nullopt;
  return it->second;
}

PreferenceMap SyntheticTruth::true_preferences() const {
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_question;
  for (const auto& [key, q] : quality) by_question[key.first].emplace_back(key.second, q);
  PreferenceMap out;
  for (const auto& [question, models] : by_question) {
    for (std::size_t i = 0; i < models.size(); ++i) {
      for (std::size_t j = i + 1; j < models.size(); ++j) {
        const auto& [m1, q1] = models[i];  // map order: m1 < m2
        const auto& [m2, q2] = models[j];
        out[make_pair_key(question, m1, m2)] =
            q1 > q2 ? PairPreference::first : (q1 < q2 ? PairPreference::second : PairPreference::tie);
      }
    }
  }
  return out;
}

World generate_world(const WorldSpec& spec) {
  if (spec.n_questions < 1) throw ConfigError("world needs at least one question");
  if (spec.roster.size() < 2) throw ConfigError("world needs at least two models");
  World w;
  const KeyedStream questions_rng(spec.seed, "questions");
  for (std::size_t i = 0; i < spec.n_questions; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%03zu", spec.id_prefix.c_str(), i + 1);
    w.questions.push_back({id, spec.task, question_text(questions_rng, i)});
  }
  auto roster = spec.roster;
  std::sort(roster.begin(), roster.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& q : w.questions) {
    for (const auto& m : roster) {
      const KeyedStream rng(spec.seed, "quality|" + q.question_id + "|" + m.id);
      const double quality = clamp01(m.quality_mean + spec.quality_noise * rng.normal(0));
      w.truth.quality[{q.question_id, m.id}] = quality;
      w.answers.push_back({q.question_id, m.id, answer_text(m.id, q.text, quality)});
    }
  }
  for (const auto& [key, pref] : w.truth.true_preferences()) {
    const auto& [question, lo, hi] = key;
    const KeyedStream rng(spec.seed, "annotation|" + question + "|" + lo + "|" + hi);
    PreferenceLabel label = pref == PairPreference::first    ? PreferenceLabel::a
                            : pref == PairPreference::second ? PreferenceLabel::b
                                                             : PreferenceLabel::tie;
    if (label != PreferenceLabel::tie && rng.uniform(0) < spec.annotation_flip_rate)
      label = label == PreferenceLabel::a ? PreferenceLabel::b : PreferenceLabel::a;
    HumanAnnotation a;
    a.question_id = question;
    a.preference = HumanAnnotation::Preference{lo, hi, label};
    w.annotations.push_back(std::move(a));
  }
  return w;
}

void write_world(const World& world, const std::filesystem::path& dir) {
  std::vector<json> rows;
  for (const auto& q : world.questions) rows.push_back(to_json(q));
  write_jsonl(dir / "questions.jsonl", rows);
  rows.clear();
  for (const auto& a : world.answers) rows.push_back(to_json(a));
  write_jsonl(dir / "answers.jsonl", rows);
  rows.clear();
  for (const auto& a : world.annotations) rows.push_back(to_json(a));
  write_jsonl(dir / "annotations.jsonl", rows);
  rows.clear();
  for (const auto& [key, q] : world.truth.quality)
    rows.push_back({{"question_id", key.first}, {"model_id", key.second}, {"quality", q}});
  write_jsonl(dir / "truth.jsonl", rows);
}

SyntheticTruth load_truth(const std::filesystem::path& path) {
  SyntheticTruth t;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    if (!obj.contains("quality") || !obj.at("quality").is_number())
      throw ParseError("truth row needs a numeric quality", line);
    t.quality[{require_string(obj, "question_id", line), require_string(obj, "model_id", line)}] =
        obj.at("quality").get<double>();
  });
  return t;
}

Completion scripted_respond(const ScriptedProfile& profile, const SyntheticTruth* truth, const std::string& prompt) {
  const auto tag = extract_prompt_tag(prompt);
  if (!tag) throw ContractViolation("prompt carries no item marker; scripted backends cannot answer it");
  const KeyedStream rng(profile.seed, tag->kind + "|" + tag->item + "|" + to_string(tag->order));

  Completion c;
  if (rng.uniform(0) < profile.garbage_rate) {
    c.text = "I am unable to decide.";
  } else if (tag->kind == "pairwise") {
    const Choice choice = pairwise_choice(profile, truth, *tag, rng);
    c.text = word(choice);
    const double u = uncertainty(profile, rng, tag->set);
    const double p = std::exp(-u);
    std::vector<TokenAlternative> alts{{c.text, -u}};
    // The runner-up stays strictly below the emitted token.
    const double rest = std::min(1.0 - p, p) * 0.5;
    if (rest > 0) alts.push_back({word(other(choice)), std::log(rest)});
    c.first_token_alternatives = std::move(alts);
  } else if (tag->kind == "pointwise") {
    const EvalFormat format = prompt.find("between 0 and 100") != std::string::npos ? EvalFormat::hundred_level
                                                                                     : EvalFormat::five_level;
    c.text = std::to_string(point_score(profile, truth, *tag, format, rng));
  } else if (tag->kind == "confidence") {
    const auto strategy = ConfidenceStrategy::make(
        confidence_kind_from_string(tag->strategy.empty() ? std::string("doubtful") : tag->strategy));
    const double p = std::exp(-uncertainty(profile, rng, tag->set));
    const int level = std::clamp(1 + static_cast<int>(std::floor(5.0 * p)), 1, 5);
    c.text = strategy.labels[static_cast<std::size_t>(level - 1)];
  } else if (tag->kind == "variant") {
    c.text = variant_of(line_after(prompt, "###Question###"));
  } else if (tag->kind == "answer") {
    const std::string question = line_after(prompt, "###Question###");
    c.text = "A careful, well-structured answer to \"" + question +
             "\". It defines every term, works through a vivid example, corrects a frequent misconception, "
             "and ends with a crisp summary of what matters in practice.";
  } else {
    throw ContractViolation("scripted backend cannot answer prompt kind '" + tag->kind + "'");
  }

  if (profile.fixed_usage_tokens) {
    c.prompt_tokens = *profile.fixed_usage_tokens;
    c.completion_tokens = 0;
  } else {
    c.prompt_tokens = estimate_tokens(prompt);
    c.completion_tokens = estimate_tokens(c.text);
  }
  return c;
}

ScriptedBackend::ScriptedBackend(BackendSpec spec, ScriptedProfile profile, std::shared_ptr<const SyntheticTruth> truth)
    : spec_(std::move(spec)), profile_(std::move(profile)), truth_(std::move(truth)) {}

Completion ScriptedBackend::generate(const std::string& prompt, bool want_logprobs) {
  Completion c = scripted_respond(profile_, truth_.get(), prompt);
  if (!want_logprobs || !spec_.supports_logprobs) c.first_token_alternatives.reset();
  return c;
}

std::shared_ptr<Backend> make_backend(const BackendSpec& spec, std::shared_ptr<const SyntheticTruth> truth) {
  if (spec.kind == BackendKind::remote) return std::make_shared<RemoteBackend>(spec);
  ScriptedProfile profile = spec.profile.is_object() ? ScriptedProfile::from_json(spec.profile) : ScriptedProfile{};
  if (profile.evaluator_id.empty()) profile.evaluator_id = spec.id;
  return std::make_shared<ScriptedBackend>(spec, std::move(profile), std::move(truth));
}

}  // namespace peerval
