#include "peerval/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <set>

#include "peerval/keyed_random.hpp"

namespace peerval {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string field_string(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError("config field '" + where + key + "' must be a string");
  return v.get<std::string>();
}

Rational threshold_field(const json& j, const std::string& name) {
  Rational r;
  if (j.is_string()) r = parse_decimal_fraction(j.get<std::string>());
  else if (j.is_number()) r = parse_decimal_fraction(j.dump());
  else throw ConfigError("config field 'thresholds." + name + "' must be a number");
  if (!(r > Rational(0) && r < Rational(1))) throw ConfigError("config field 'thresholds." + name + "' must lie in (0, 1)");
  return r;
}

CorpusPaths corpus_paths(const json& j, const std::filesystem::path& base, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config field '" + where + "' must be an object");
  CorpusPaths c;
  if (!j.contains("questions") || !j.contains("answers"))
    throw ConfigError("config field '" + where + "' needs 'questions' and 'answers'");
  c.questions = resolve(base, field_string(j, "questions", where + "."));
  c.answers = resolve(base, field_string(j, "answers", where + "."));
  if (j.contains("annotations")) c.annotations = resolve(base, field_string(j, "annotations", where + "."));
  return c;
}

std::set<ExamKind> exam_set(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError("config field '" + where + "' must be a list");
  std::set<ExamKind> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError("config field '" + where + "' must list exam names");
    out.insert(exam_kind_from_string(e.get<std::string>()));
  }
  return out;
}

}  // namespace

Rational parse_decimal_fraction(const std::string& text) {
  std::int64_t num = 0, den = 1;
  bool digits = false, point = false, neg = false;
  std::size_t i = 0;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) neg = text[i++] == '-';
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.' && !point) {
      point = true;
      continue;
    }
    if (c < '0' || c > '9') throw ConfigError("'" + text + "' is not a plain decimal number");
    if (num > 100000000000000LL) throw ConfigError("'" + text + "' has too many digits");
    num = num * 10 + (c - '0');
    if (point) den *= 10;
    digits = true;
  }
  if (!digits) throw ConfigError("'" + text + "' is not a plain decimal number");
  return Rational(neg ? -num : num, den);
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  try {
    c.name = j.value("name", "");
    if (j.contains("roster")) c.roster = resolve(base, field_string(j, "roster", ""));
    if (j.contains("candidates")) {
      if (!j.at("candidates").is_array()) throw ConfigError("config field 'candidates' must be a list");
      for (const auto& e : j.at("candidates")) {
        Evaluator ev;
        if (e.is_string()) {
          ev.id = ev.backend_id = e.get<std::string>();
        } else if (e.is_object() && e.contains("id")) {
          ev.id = field_string(e, "id", "candidates[].");
          ev.backend_id = e.contains("backend") ? field_string(e, "backend", "candidates[].") : ev.id;
          if (e.contains("placement")) ev.placement = placement_from_string(field_string(e, "placement", "candidates[]."));
        } else {
          throw ConfigError("config field 'candidates' entries must be ids or {id, backend, placement} objects");
        }
        c.candidates.push_back(std::move(ev));
      }
    }
    if (j.contains("corpus")) c.corpus = corpus_paths(j.at("corpus"), base, "corpus");
    if (j.contains("exam_corpus")) c.exam_corpus = corpus_paths(j.at("exam_corpus"), base, "exam_corpus");
    c.exam_split = j.value("exam_split", c.exam_split);
    if (c.exam_split != "disjoint" && c.exam_split != "shared")
      throw ConfigError("config field 'exam_split' must be 'disjoint' or 'shared'");
    c.dataset = j.value("dataset", "");
    if (j.contains("truth")) c.truth = resolve(base, field_string(j, "truth", ""));
    if (j.contains("templates")) c.templates = resolve(base, field_string(j, "templates", ""));

    if (j.contains("exams")) c.exam.enabled = exam_set(j.at("exams"), "exams");
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      if (t.contains("consistency")) c.exam.consistency_threshold = threshold_field(t.at("consistency"), "consistency");
      if (t.contains("pertinence")) c.exam.pertinence_threshold = threshold_field(t.at("pertinence"), "pertinence");
    }
    if (j.contains("confidence")) {
      const auto& s = j.at("confidence");
      if (s.contains("method")) c.exam.confidence_method = confidence_method_from_string(field_string(s, "method", "confidence."));
      if (s.contains("strategy"))
        c.exam.confidence_strategy = confidence_kind_from_string(field_string(s, "strategy", "confidence."));
      c.exam.gate_on_significance = s.value("gate_on_significance", false);
    }
    if (j.contains("difficulty")) {
      const auto& d = j.at("difficulty");
      for (const char* k : {"strong", "weak", "close"})
        if (!d.contains(k)) throw ConfigError(std::string("config field 'difficulty.") + k + "' is required");
      c.exam.roster = {field_string(d, "strong", "difficulty."), field_string(d, "weak", "difficulty."),
                       field_string(d, "close", "difficulty.")};
    }
    c.seed = j.value("seed", c.seed);
    c.exam.pertinence.seed = c.seed;
    if (!c.exam.roster.strong.empty()) {
      c.exam.pertinence.ra_source = {AnswerSource::Kind::corpus_model, c.exam.roster.strong};
      c.exam.pertinence.ia_source = {AnswerSource::Kind::corpus_model, c.exam.roster.strong};
    }
    if (j.contains("pertinence")) {
      const auto& p = j.at("pertinence");
      if (p.contains("variant_method"))
        c.exam.pertinence.variant_method = variant_method_from_string(field_string(p, "variant_method", "pertinence."));
      if (p.contains("ra_source")) c.exam.pertinence.ra_source = AnswerSource::parse(field_string(p, "ra_source", "pertinence."));
      if (p.contains("ia_source")) c.exam.pertinence.ia_source = AnswerSource::parse(field_string(p, "ia_source", "pertinence."));
      c.exam.pertinence.helper_backend = p.value("helper_backend", "");
    }
    if (j.contains("exam_questions")) {
      const auto n = j.at("exam_questions").get<long long>();
      if (n < 1) throw ConfigError("config field 'exam_questions' must be positive");
      c.exam.question_count = static_cast<std::size_t>(n);
    }
    if (j.contains("format")) c.format = eval_format_from_string(field_string(j, "format", ""));
    if (j.contains("placement")) c.placement = placement_from_string(field_string(j, "placement", ""));
    c.filtered = j.value("filtered", c.filtered);
    c.workers = j.value("workers", c.workers);
    if (c.workers < 1) throw ConfigError("config field 'workers' must be positive");
    if (j.contains("output_dir")) c.output_dir = resolve(base, field_string(j, "output_dir", ""));
    else c.output_dir = base / "out";

    if (j.contains("variants")) {
      for (const auto& v : j.at("variants")) {
        VariantSpec spec;
        spec.name = field_string(v, "name", "variants[].");
        spec.evaluators = v.value("evaluators", std::vector<std::string>{});
        spec.weighting = v.value("weighting", spec.weighting);
        if (spec.weighting != "exam" && spec.weighting != "unit")
          throw ConfigError("config field 'variants[].weighting' must be 'exam' or 'unit'");
        if (v.contains("exams")) spec.exams = exam_set(v.at("exams"), "variants[].exams");
        c.variants.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  std::set<std::string> ids;
  for (const auto& e : c.candidates)
    if (!ids.insert(e.id).second) throw ConfigError("config field 'candidates' repeats id '" + e.id + "'");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  const auto text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto c = parse_run_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  c.source_text = text;
  return c;
}

std::vector<Evaluator> effective_candidates(const RunConfig& config) {
  auto out = config.candidates;
  if (config.placement)
    for (auto& e : out) e.placement = *config.placement;
  return out;
}

CorpusSplit split_corpus(const Corpus& corpus, const RunConfig& config) {
  if (config.exam_split == "shared") return {corpus, corpus};
  const auto& qs = corpus.questions();
  std::vector<std::pair<std::uint64_t, std::size_t>> order;
  for (std::size_t i = 0; i < qs.size(); ++i)
    order.emplace_back(KeyedStream(config.seed, "split|" + qs[i].question_id).bits(0), i);
  std::sort(order.begin(), order.end());
  const std::size_t take = std::min(config.exam.question_count, qs.size() / 2);
  std::set<std::string> exam_ids;
  for (std::size_t k = 0; k < take; ++k) exam_ids.insert(qs[order[k].second].question_id);

  std::vector<QuestionRecord> eq, vq;
  std::vector<AnswerRecord> ea, va;
  for (const auto& q : qs) (exam_ids.count(q.question_id) ? eq : vq).push_back(q);
  for (const auto& a : corpus.answers()) (exam_ids.count(a.question_id) ? ea : va).push_back(a);
  return {Corpus(std::move(eq), std::move(ea)), Corpus(std::move(vq), std::move(va))};
}

std::string config_hash(const RunConfig& config) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(config.source_text.data(), config.source_text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace peerval
