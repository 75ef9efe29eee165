#include "peerval/exams.hpp"

#include <algorithm>
#include <cmath>

#include "peerval/keyed_random.hpp"
#include "peerval/metrics.hpp"
#include "peerval/parallel.hpp"

namespace peerval {
namespace {

PromptTag item_tag(const PairItem& item, const std::string& set) {
  PromptTag tag;
  tag.kind = "pairwise";
  tag.item = item.item_id();
  tag.order = item.order;
  tag.question_id = item.question_id;
  tag.one = AnswerRef{item.question_id, item.model_one};
  tag.two = AnswerRef{item.question_id, item.model_two};
  tag.set = set;
  return tag;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

json rational_json(const Rational& r) { return std::to_string(r.num()) + "/" + std::to_string(r.den()); }

Rational rational_from_json(const json& j) {
  const auto s = j.get<std::string>();
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
  } catch (const std::logic_error&) {
    throw ParseError("malformed rational '" + s + "'");
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
};

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return s;
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return s;
}

// Either an answer from the corpus or one written by a backend for `question`.
std::pair<AnswerRef, std::string> source_answer(JudgeContext& ctx, const Corpus& corpus, const AnswerSource& source,
                                                const QuestionRecord& question, bool in_corpus,
                                                const Evaluator* candidate) {
  if (source.kind == AnswerSource::Kind::corpus_model) {
    if (!in_corpus)
      throw ConfigError("answer source '" + source.to_string() + "' needs a corpus question; use dataset-search variants");
    return {AnswerRef{question.question_id, source.id}, corpus.answer(question.question_id, source.id).text};
  }
  std::string backend = source.id;
  if (source.kind == AnswerSource::Kind::self) {
    if (!candidate) throw ContractViolation("self answer source needs a candidate");
    backend = candidate->backend_id;
  }
  PromptTag tag;
  tag.kind = "answer";
  tag.item = question.question_id + "|" + backend;
  tag.question_id = question.question_id;
  const auto prompt = render_answer_request(question, &tag, ctx.templates);
  auto text = trim(ctx.gateway.complete(backend, prompt, false).text);
  if (text.empty()) throw ExamInconclusive("backend '" + backend + "' returned an empty answer");
  return {AnswerRef{question.question_id, backend}, std::move(text)};
}

}  // namespace

std::string to_string(ExamKind k) {
  switch (k) {
    case ExamKind::consistency: return "consistency";
    case ExamKind::self_confidence: return "self-confidence";
    case ExamKind::pertinence: return "pertinence";
  }
  return "consistency";
}

ExamKind exam_kind_from_string(const std::string& s) {
  if (s == "consistency") return ExamKind::consistency;
  if (s == "self-confidence" || s == "self_confidence" || s == "confidence") return ExamKind::self_confidence;
  if (s == "pertinence") return ExamKind::pertinence;
  throw ConfigError("unknown exam '" + s + "'");
}

std::string to_string(ConfidenceMethod m) {
  switch (m) {
    case ConfidenceMethod::automatic: return "auto";
    case ConfidenceMethod::probability: return "probability";
    case ConfidenceMethod::label: return "label";
  }
  return "auto";
}

ConfidenceMethod confidence_method_from_string(const std::string& s) {
  if (s == "auto") return ConfidenceMethod::automatic;
  if (s == "probability") return ConfidenceMethod::probability;
  if (s == "label") return ConfidenceMethod::label;
  throw ConfigError("unknown confidence method '" + s + "'");
}

std::string to_string(VariantMethod m) { return m == VariantMethod::llm_rewrite ? "llm-rewrite" : "dataset-search"; }

VariantMethod variant_method_from_string(const std::string& s) {
  if (s == "llm-rewrite") return VariantMethod::llm_rewrite;
  if (s == "dataset-search") return VariantMethod::dataset_search;
  throw ConfigError("unknown variant method '" + s + "'");
}

AnswerSource AnswerSource::parse(const std::string& s) {
  if (s == "self") return {Kind::self, {}};
  const auto colon = s.find(':');
  if (colon != std::string::npos && colon + 1 < s.size()) {
    const auto kind = s.substr(0, colon);
    if (kind == "corpus") return {Kind::corpus_model, s.substr(colon + 1)};
    if (kind == "backend") return {Kind::backend, s.substr(colon + 1)};
  }
  throw ConfigError("answer source must be corpus:<model>, backend:<id> or self, got '" + s + "'");
}

std::string AnswerSource::to_string() const {
  switch (kind) {
    case Kind::corpus_model: return "corpus:" + id;
    case Kind::backend: return "backend:" + id;
    case Kind::self: return "self";
  }
  return "self";
}

DifficultySets build_difficulty_sets(const Corpus& corpus, const DifficultyRoster& roster,
                                     const std::vector<QuestionRecord>& questions, bool with_swaps) {
  if (roster.strong.empty() || roster.weak.empty() || roster.close.empty())
    throw ConfigError("difficulty roster needs strong, weak and close models");
  if (roster.strong == roster.close || roster.strong == roster.weak)
    throw ContractViolation("difficulty roster models must differ from the strong model");
  DifficultySets sets;
  sets.provenance = roster;
  for (const auto& q : questions) {
    for (const auto* m : {&roster.strong, &roster.weak, &roster.close}) {
      if (!corpus.find_answer(q.question_id, *m))
        throw IntegrityError("missing answer for question '" + q.question_id + "' from model '" + *m + "'");
    }
    const PairItem easy{q.question_id, roster.strong, roster.weak, OrderTag::original};
    const PairItem hard{q.question_id, roster.strong, roster.close, OrderTag::original};
    sets.easy.push_back(easy);
    sets.hard.push_back(hard);
    if (with_swaps) {
      sets.easy.push_back(easy.twin());
      sets.hard.push_back(hard.twin());
    }
  }
  return sets;
}

ConsistencyReport consistency_exam(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus,
                                   const std::vector<PairItem>& pairs, const Rational& threshold) {
  std::map<std::string, std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> twins;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& slot = twins[pairs[i].item_id()];
    auto& side = pairs[i].order == OrderTag::original ? slot.first : slot.second;
    if (side) throw ContractViolation("duplicate exam item " + pairs[i].item_id());
    side = i;
  }
  for (const auto& [id, slot] : twins)
    if (!slot.first || !slot.second) throw ContractViolation("exam item " + id + " lacks its swapped twin");
  if (twins.empty()) throw ExamInconclusive("consistency exam has no items");

  std::vector<JudgeRecord> records(pairs.size());
  parallel_for(pairs.size(), ctx.workers,
               [&](std::size_t i) { records[i] = judge_pairwise(ctx, candidate, corpus, pairs[i]); });

  ConsistencyReport report;
  report.candidate_id = candidate.id;
  report.threshold = threshold;
  report.n_pairs = twins.size();
  for (const auto& [id, slot] : twins) {
    const auto& a = records[*slot.first];
    const auto& b = records[*slot.second];
    const auto r = fold_swaps(a, b);
    if (!a.abstained() && !b.abstained() && (r == Resolved::first || r == Resolved::second)) ++report.n_consistent;
    report.records.push_back(a);
    report.records.push_back(b);
  }
  report.rate = Rational(static_cast<std::int64_t>(report.n_consistent), static_cast<std::int64_t>(report.n_pairs));
  report.passed = report.rate > threshold;
  return report;
}

double uncertainty_from_probability(double p) {
  if (!(p > 0.0) || p > 1.0) throw RangeError("probability must lie in (0, 1]");
  if (p >= 1.0) return 0.0;
  return -std::log(p);
}

double self_confidence_probability(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus,
                                   const PairItem& item, const std::string& set) {
  const auto& spec = ctx.gateway.spec(candidate.backend_id);
  if (!spec.supports_logprobs)
    throw CapabilityError("backend '" + spec.id + "' does not expose token probabilities");
  const auto tag = item_tag(item, set);
  const auto prompt = render_pairwise(corpus.question(item.question_id),
                                      corpus.answer(item.question_id, item.model_one).text,
                                      corpus.answer(item.question_id, item.model_two).text, candidate.placement, &tag,
                                      ctx.templates);
  const auto c = ctx.gateway.complete(candidate.backend_id, prompt, true);
  return uncertainty_from_probability(first_token_probability(c, {"one", "two"}));
}

int self_confidence_label(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus, const PairItem& item,
                          const ConfidenceStrategy& strategy, const std::string& set) {
  PromptTag tag = item_tag(item, set);
  tag.kind = "confidence";
  tag.strategy = strategy.name();
  const auto prompt = render_confidence(corpus.question(item.question_id),
                                        corpus.answer(item.question_id, item.model_one).text,
                                        corpus.answer(item.question_id, item.model_two).text, strategy, &tag,
                                        ctx.templates);
  return parse_confidence(ctx.gateway.complete(candidate.backend_id, prompt, false).text, strategy);
}

ConfidenceReport self_confidence_exam(JudgeContext& ctx, const Evaluator& candidate, const Corpus& corpus,
                                      const DifficultySets& sets, ConfidenceMethod method, ConfidenceKind strategy_kind,
                                      bool gate_on_significance) {
  if (sets.easy.empty() || sets.hard.empty()) throw ExamInconclusive("difficulty sets are empty");
  if (method == ConfidenceMethod::automatic) {
    if (ctx.gateway.spec(candidate.backend_id).supports_logprobs) {
      method = ConfidenceMethod::probability;
    } else {
      method = ConfidenceMethod::label;
      strategy_kind = ConfidenceKind::doubtful;
    }
  }
  const auto strategy = ConfidenceStrategy::make(strategy_kind);

  struct Job {
    const PairItem* item;
    const char* set;
  };
  std::vector<Job> jobs;
  for (const auto& i : sets.easy) jobs.push_back({&i, "easy"});
  for (const auto& i : sets.hard) jobs.push_back({&i, "hard"});
  std::vector<std::optional<double>> values(jobs.size());
  std::vector<std::string> notes(jobs.size());
  parallel_for(jobs.size(), ctx.workers, [&](std::size_t i) {
    try {
      if (method == ConfidenceMethod::probability)
        values[i] = self_confidence_probability(ctx, candidate, corpus, *jobs[i].item, jobs[i].set);
      else
        values[i] = self_confidence_label(ctx, candidate, corpus, *jobs[i].item, strategy, jobs[i].set);
    } catch (const UnparseableError& e) {
      notes[i] = std::string("unparseable: ") + e.what();
    } catch (const AmbiguityError& e) {
      notes[i] = std::string("ambiguous: ") + e.what();
    } catch (const RetryableError& e) {
      notes[i] = std::string("transport: ") + e.what();
    } catch (const TransportError& e) {
      notes[i] = std::string("transport: ") + e.what();
    }
  });

  ConfidenceReport report;
  report.candidate_id = candidate.id;
  report.method = method;
  if (method == ConfidenceMethod::label) report.strategy = strategy.name();
  report.placement = candidate.placement;
  report.gated_on_significance = gate_on_significance;

  std::vector<double> easy, hard;
  std::map<std::pair<std::string, OrderTag>, double> easy_by_key, hard_by_key;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const bool is_easy = std::string(jobs[i].set) == "easy";
    json row = {{"candidate", candidate.id},
                {"exam", "self-confidence"},
                {"set", jobs[i].set},
                {"item", jobs[i].item->item_id()},
                {"order", to_string(jobs[i].item->order)},
                {"value", optional_number(values[i])}};
    if (!notes[i].empty()) row["note"] = notes[i];
    report.audit.push_back(std::move(row));
    if (!values[i]) {
      ++report.abstentions;
      continue;
    }
    (is_easy ? easy : hard).push_back(*values[i]);
    (is_easy ? easy_by_key : hard_by_key)[{jobs[i].item->question_id, jobs[i].item->order}] = *values[i];
  }
  if (easy.empty() || hard.empty()) throw ExamInconclusive("every item of a difficulty set abstained");

  const auto se = summarize(easy), sh = summarize(hard);
  report.mean_easy = se.mean;
  report.mean_hard = sh.mean;
  report.sd_easy = se.sd;
  report.sd_hard = sh.sd;
  report.n_easy = easy.size();
  report.n_hard = hard.size();

  std::vector<double> paired_easy, paired_hard;
  for (const auto& [key, v] : easy_by_key) {
    auto it = hard_by_key.find(key);
    if (it == hard_by_key.end()) continue;
    paired_easy.push_back(v);
    paired_hard.push_back(it->second);
  }
  try {
    report.t_p_value = paired_t_test(paired_easy, paired_hard).p_value;
  } catch (const UndefinedMetric&) {
  }
  try {
    report.ranksum_p_value = rank_sum_test(easy, hard).p_value;
  } catch (const UndefinedMetric&) {
  }

  report.reversed = method == ConfidenceMethod::probability ? report.mean_easy > report.mean_hard
                                                             : report.mean_easy < report.mean_hard;
  report.passed = !report.reversed;
  if (gate_on_significance) {
    const bool significant = report.t_p_value && *report.t_p_value < 0.05 && report.ranksum_p_value &&
                             *report.ranksum_p_value < 0.05;
    report.passed = report.passed && significant;
  }
  return report;
}

VariantQuestion make_variant(const QuestionRecord& question, VariantMethod method, Gateway* gateway,
                             const std::string& helper_backend, const Corpus* corpus, std::uint64_t seed,
                             const TemplateSet& templates) {
  VariantQuestion v;
  v.method = method;
  v.source_question_id = question.question_id;
  if (method == VariantMethod::llm_rewrite) {
    if (!gateway || helper_backend.empty()) throw ConfigError("llm-rewrite variants need a helper backend");
    PromptTag tag;
    tag.kind = "variant";
    tag.item = question.question_id;
    tag.question_id = question.question_id;
    const auto text = trim(gateway->complete(helper_backend, render_variant_request(question, &tag, templates), false).text);
    if (text.empty() || text == trim(question.text))
      throw VariantDegenerate("rewrite of question '" + question.question_id + "' returned the original text");
    v.record = QuestionRecord{question.question_id + "~rewrite", question.task, text};
    return v;
  }

  if (!corpus || corpus->questions().size() < 2) throw IntegrityError("dataset-search variants need at least two questions");
  std::vector<const QuestionRecord*> pool;
  for (const auto& q : corpus->questions())
    if (q.question_id != question.question_id && trim(q.text) != trim(question.text)) pool.push_back(&q);
  if (pool.empty()) throw IntegrityError("no distinct question left to serve as a variant of '" + question.question_id + "'");
  const KeyedStream rng(seed, "variant|" + question.question_id);
  v.record = *pool[rng.bits(0) % pool.size()];
  return v;
}

std::vector<PertinenceProbe> prepare_pertinence(JudgeContext& ctx, const Corpus& corpus,
                                                const std::vector<QuestionRecord>& questions,
                                                const PertinenceSetup& setup, const Evaluator* candidate) {
  std::vector<PertinenceProbe> probes(questions.size());
  parallel_for(questions.size(), ctx.workers, [&](std::size_t i) {
    auto& p = probes[i];
    p.question = questions[i];
    p.variant = make_variant(questions[i], setup.variant_method, &ctx.gateway, setup.helper_backend, &corpus, setup.seed,
                             ctx.templates);
    std::tie(p.ra, p.ra_text) = source_answer(ctx, corpus, setup.ra_source, p.question, true, candidate);
    std::tie(p.ia, p.ia_text) = source_answer(ctx, corpus, setup.ia_source, p.variant.record,
                                              p.variant.method == VariantMethod::dataset_search, candidate);
  });
  return probes;
}

PertinenceReport pertinence_exam(JudgeContext& ctx, const Evaluator& candidate, const std::vector<PertinenceProbe>& probes,
                                 const PertinenceSetup& setup, const Rational& threshold) {
  if (probes.empty()) throw ExamInconclusive("pertinence exam has no items");
  // Even index: relevant answer in slot one; odd index: swapped.
  std::vector<JudgeRecord> records(probes.size() * 2);
  parallel_for(records.size(), ctx.workers, [&](std::size_t i) {
    const auto& p = probes[i / 2];
    const bool swapped = i % 2 == 1;
    PromptTag tag;
    tag.kind = "pairwise";
    tag.item = p.question.question_id + ":pertinence";
    tag.order = swapped ? OrderTag::swapped : OrderTag::original;
    tag.question_id = p.question.question_id;
    tag.one = swapped ? p.ia : p.ra;
    tag.two = swapped ? p.ra : p.ia;
    const auto& one = swapped ? p.ia_text : p.ra_text;
    const auto& two = swapped ? p.ra_text : p.ia_text;

    JudgeRecord& r = records[i];
    r.evaluator_id = candidate.id;
    r.format = EvalFormat::pairwise;
    r.item = PairItem{p.question.question_id, tag.one->question_id + "/" + tag.one->model_id,
                      tag.two->question_id + "/" + tag.two->model_id, tag.order};
    try {
      const auto prompt = render_pairwise(p.question, one, two, candidate.placement, &tag, ctx.templates);
      const auto c = ctx.gateway.complete(candidate.backend_id, prompt, false);
      r.raw_text = c.text;
      r.verdict = parse_verdict(c.text);
    } catch (const UnparseableError& e) {
      r.note = std::string("unparseable: ") + e.what();
    } catch (const RetryableError& e) {
      r.note = std::string("transport: ") + e.what();
    } catch (const TransportError& e) {
      r.note = std::string("transport: ") + e.what();
    }
  });

  PertinenceReport report;
  report.candidate_id = candidate.id;
  report.threshold = threshold;
  report.ra_source = setup.ra_source;
  report.ia_source = setup.ia_source;
  report.variant_method = setup.variant_method;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const auto& a = records[2 * k];
    const auto& b = records[2 * k + 1];
    if (a.abstained() || b.abstained()) {
      ++report.n_items;
      ++report.n_abstained;
      continue;
    }
    const bool ra_first = a.verdict->choice == Choice::one;
    const bool ra_second = b.verdict->choice == Choice::two;
    if (ra_first != ra_second) {
      ++report.n_split;
      continue;
    }
    ++report.n_items;
    if (ra_first) ++report.n_ra_preferred;
  }
  report.records = std::move(records);
  if (report.n_items == 0) throw ExamInconclusive("every pertinence item split between orders");
  if (report.n_abstained == report.n_items) throw ExamInconclusive("every pertinence item abstained");
  report.accuracy = Rational(static_cast<std::int64_t>(report.n_ra_preferred), static_cast<std::int64_t>(report.n_items));
  report.passed = report.accuracy > threshold;
  return report;
}

ExamReport qualify(const std::string& candidate_id, std::optional<ConsistencyReport> consistency,
                   std::optional<ConfidenceReport> confidence, std::optional<PertinenceReport> pertinence,
                   const std::set<ExamKind>& enabled, std::vector<std::string> notes) {
  ExamReport r;
  r.candidate_id = candidate_id;
  r.enabled = enabled;
  r.consistency = std::move(consistency);
  r.confidence = std::move(confidence);
  r.pertinence = std::move(pertinence);
  r.notes = std::move(notes);

  r.overall_pass = true;
  for (auto kind : enabled) {
    bool present = false, passed = false;
    if (kind == ExamKind::consistency && r.consistency) present = true, passed = r.consistency->passed;
    if (kind == ExamKind::self_confidence && r.confidence) present = true, passed = r.confidence->passed;
    if (kind == ExamKind::pertinence && r.pertinence) present = true, passed = r.pertinence->passed;
    if (!present) r.notes.push_back(to_string(kind) + " exam produced no report; counted as failed");
    r.overall_pass = r.overall_pass && passed;
  }

  r.weight = 1.0;
  if (enabled.size() == 3) {
    const Rational rate = r.consistency ? r.consistency->rate : Rational(0);
    const Rational acc = r.pertinence ? r.pertinence->accuracy : Rational(0);
    r.weight = ((rate + Rational(1) + acc) / Rational(3)).to_double();
  }
  r.fusion_weight = r.overall_pass ? r.weight : 0.0;
  return r;
}

json ExamReport::to_json() const {
  json j;
  j["candidate_id"] = candidate_id;
  json kinds = json::array();
  for (auto k : enabled) kinds.push_back(peerval::to_string(k));
  j["enabled"] = kinds;
  if (consistency) {
    j["consistency"] = {{"n_pairs", consistency->n_pairs},
                        {"n_consistent", consistency->n_consistent},
                        {"rate", rational_json(consistency->rate)},
                        {"rate_value", consistency->rate.to_double()},
                        {"threshold", rational_json(consistency->threshold)},
                        {"passed", consistency->passed}};
  }
  if (confidence) {
    j["self_confidence"] = {{"method", peerval::to_string(confidence->method)},
                            {"strategy", confidence->strategy},
                            {"placement", peerval::to_string(confidence->placement)},
                            {"mean_easy", confidence->mean_easy},
                            {"mean_hard", confidence->mean_hard},
                            {"sd_easy", confidence->sd_easy},
                            {"sd_hard", confidence->sd_hard},
                            {"n_easy", confidence->n_easy},
                            {"n_hard", confidence->n_hard},
                            {"abstentions", confidence->abstentions},
                            {"t_p_value", optional_number(confidence->t_p_value)},
                            {"ranksum_p_value", optional_number(confidence->ranksum_p_value)},
                            {"reversed", confidence->reversed},
                            {"gated_on_significance", confidence->gated_on_significance},
                            {"passed", confidence->passed}};
  }
  if (pertinence) {
    j["pertinence"] = {{"n_items", pertinence->n_items},
                       {"n_ra_preferred", pertinence->n_ra_preferred},
                       {"n_split", pertinence->n_split},
                       {"n_abstained", pertinence->n_abstained},
                       {"accuracy", rational_json(pertinence->accuracy)},
                       {"accuracy_value", pertinence->accuracy.to_double()},
                       {"threshold", rational_json(pertinence->threshold)},
                       {"ra_source", pertinence->ra_source.to_string()},
                       {"ia_source", pertinence->ia_source.to_string()},
                       {"variant_method", peerval::to_string(pertinence->variant_method)},
                       {"passed", pertinence->passed}};
  }
  j["overall_pass"] = overall_pass;
  j["weight"] = weight;
  j["fusion_weight"] = fusion_weight;
  j["notes"] = notes;
  return j;
}

ExamReport ExamReport::from_json(const json& j) {
  ExamReport r;
  try {
    r.candidate_id = j.at("candidate_id").get<std::string>();
    for (const auto& k : j.value("enabled", json::array())) r.enabled.insert(exam_kind_from_string(k.get<std::string>()));
    if (j.contains("consistency")) {
      const auto& c = j.at("consistency");
      ConsistencyReport cr;
      cr.candidate_id = r.candidate_id;
      cr.n_pairs = c.at("n_pairs").get<std::size_t>();
      cr.n_consistent = c.at("n_consistent").get<std::size_t>();
      cr.rate = rational_from_json(c.at("rate"));
      cr.threshold = rational_from_json(c.at("threshold"));
      cr.passed = c.at("passed").get<bool>();
      r.consistency = std::move(cr);
    }
    if (j.contains("self_confidence")) {
      const auto& c = j.at("self_confidence");
      ConfidenceReport cr;
      cr.candidate_id = r.candidate_id;
      cr.method = confidence_method_from_string(c.at("method").get<std::string>());
      cr.strategy = c.value("strategy", "");
      cr.placement = placement_from_string(c.value("placement", "p1"));
      cr.mean_easy = c.at("mean_easy").get<double>();
      cr.mean_hard = c.at("mean_hard").get<double>();
      cr.sd_easy = c.value("sd_easy", 0.0);
      cr.sd_hard = c.value("sd_hard", 0.0);
      cr.n_easy = c.value("n_easy", std::size_t{0});
      cr.n_hard = c.value("n_hard", std::size_t{0});
      cr.abstentions = c.value("abstentions", std::size_t{0});
      cr.t_p_value = number_or_null(c, "t_p_value");
      cr.ranksum_p_value = number_or_null(c, "ranksum_p_value");
      cr.reversed = c.at("reversed").get<bool>();
      cr.gated_on_significance = c.value("gated_on_significance", false);
      cr.passed = c.at("passed").get<bool>();
      r.confidence = std::move(cr);
    }
    if (j.contains("pertinence")) {
      const auto& c = j.at("pertinence");
      PertinenceReport pr;
      pr.candidate_id = r.candidate_id;
      pr.n_items = c.at("n_items").get<std::size_t>();
      pr.n_ra_preferred = c.at("n_ra_preferred").get<std::size_t>();
      pr.n_split = c.value("n_split", std::size_t{0});
      pr.n_abstained = c.value("n_abstained", std::size_t{0});
      pr.accuracy = rational_from_json(c.at("accuracy"));
      pr.threshold = rational_from_json(c.at("threshold"));
      pr.ra_source = AnswerSource::parse(c.at("ra_source").get<std::string>());
      pr.ia_source = AnswerSource::parse(c.at("ia_source").get<std::string>());
      pr.variant_method = variant_method_from_string(c.at("variant_method").get<std::string>());
      pr.passed = c.at("passed").get<bool>();
      r.pertinence = std::move(pr);
    }
    r.overall_pass = j.at("overall_pass").get<bool>();
    r.weight = j.at("weight").get<double>();
    r.fusion_weight = j.at("fusion_weight").get<double>();
    r.notes = j.value("notes", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed exam report: ") + e.what());
  }
  return r;
}

std::vector<ExamReport> run_exams(JudgeContext& ctx, const std::vector<Evaluator>& candidates, const Corpus& corpus,
                                  const ExamConfig& config) {
  std::vector<QuestionRecord> questions = corpus.questions();
  if (questions.size() > config.question_count) questions.resize(config.question_count);
  for (const auto& c : candidates)
    if (!ctx.gateway.has_backend(c.backend_id))
      throw IntegrityError("candidate '" + c.id + "' references unknown backend '" + c.backend_id + "'");

  const bool want_c = config.enabled.count(ExamKind::consistency) > 0;
  const bool want_s = config.enabled.count(ExamKind::self_confidence) > 0;
  const bool want_p = config.enabled.count(ExamKind::pertinence) > 0;

  std::vector<PairItem> pairs;
  if (want_c) pairs = build_pairs(questions, corpus.answers(), true, corpus.models());
  DifficultySets sets;
  if (want_s) sets = build_difficulty_sets(corpus, config.roster, questions, config.with_swaps);
  const bool per_candidate_probes = config.pertinence.ra_source.kind == AnswerSource::Kind::self ||
                                    config.pertinence.ia_source.kind == AnswerSource::Kind::self;
  std::vector<PertinenceProbe> shared_probes;
  if (want_p && !per_candidate_probes) shared_probes = prepare_pertinence(ctx, corpus, questions, config.pertinence, nullptr);

  std::vector<ExamReport> reports;
  for (const auto& candidate : candidates) {
    std::vector<std::string> notes;
    std::optional<ConsistencyReport> c;
    std::optional<ConfidenceReport> s;
    std::optional<PertinenceReport> p;
    auto attempt = [&](ExamKind kind, auto&& body) {
      try {
        body();
      } catch (const ExamInconclusive& e) {
        notes.push_back(to_string(kind) + " inconclusive: " + e.what());
      } catch (const VariantDegenerate& e) {
        notes.push_back(to_string(kind) + " inconclusive: " + e.what());
      } catch (const CapabilityError& e) {
        notes.push_back(to_string(kind) + " not runnable: " + e.what());
      } catch (const RetryableError& e) {
        notes.push_back(to_string(kind) + " not runnable: " + e.what());
      }
    };
    if (want_c)
      attempt(ExamKind::consistency,
              [&] { c = consistency_exam(ctx, candidate, corpus, pairs, config.consistency_threshold); });
    if (want_s)
      attempt(ExamKind::self_confidence, [&] {
        s = self_confidence_exam(ctx, candidate, corpus, sets, config.confidence_method, config.confidence_strategy,
                                 config.gate_on_significance);
      });
    if (want_p)
      attempt(ExamKind::pertinence, [&] {
        const auto probes = per_candidate_probes ? prepare_pertinence(ctx, corpus, questions, config.pertinence, &candidate)
                                                 : shared_probes;
        p = pertinence_exam(ctx, candidate, probes, config.pertinence, config.pertinence_threshold);
      });
    reports.push_back(qualify(candidate.id, std::move(c), std::move(s), std::move(p), config.enabled, std::move(notes)));
  }
  return reports;
}

std::map<std::string, double> fusion_weights(const std::vector<ExamReport>& reports) {
  std::map<std::string, double> w;
  for (const auto& r : reports) w[r.candidate_id] = r.fusion_weight;
  return w;
}

std::vector<ExamReport> load_exam_reports(const std::filesystem::path& path) {
  std::vector<ExamReport> out;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    try {
      out.push_back(ExamReport::from_json(obj));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line);
    }
  });
  return out;
}

}  // namespace peerval
