#include "peerval/plant.hpp"

#include <algorithm>

#include "peerval/error.hpp"

namespace peerval {

ScriptedProfile apply_defect(ScriptedProfile p, const std::string& defect) {
  if (defect.empty()) return p;
  if (defect == "positional") {
    p.positional_flip = 0.6;
  } else if (defect == "confidence") {
    p.easy_uncertainty = 0.6;
    p.hard_uncertainty = 0.5;
  } else if (defect == "pertinence") {
    p.pertinence_susceptibility = 0.9;
  } else {
    throw ConfigError("unknown defect '" + defect + "' (expected positional, confidence or pertinence)");
  }
  return p;
}

ExamKind exam_for_defect(const std::string& defect) {
  if (defect == "positional") return ExamKind::consistency;
  if (defect == "confidence") return ExamKind::self_confidence;
  if (defect == "pertinence") return ExamKind::pertinence;
  throw ConfigError("unknown defect '" + defect + "'");
}

PoolSpec default_pool(std::uint64_t seed, bool planted) {
  PoolSpec pool;
  pool.world.n_questions = 100;
  pool.world.seed = seed;
  pool.world.id_prefix = "x";
  pool.world.roster = {{"strong", 0.85}, {"close", 0.8}, {"mid", 0.6}, {"weak", 0.25}};
  const double accuracies[] = {0.9, 0.88, 0.86, 0.84, 0.82, 0.8, 0.85};
  const char* defects[] = {"", "positional", "", "confidence", "", "pertinence", ""};
  for (std::size_t i = 0; i < 7; ++i) {
    ScriptedProfile p;
    p.evaluator_id = "judge-" + std::to_string(i + 1);
    p.judge_accuracy = accuracies[i];
    p.positional_flip = 0.03;
    p.pertinence_susceptibility = 0.05;
    p.seed = seed * 1000 + i + 1;
    const std::string defect = planted ? defects[i] : "";
    pool.members.push_back({apply_defect(p, defect), defect, true, PromptPlacement::restriction_first});
  }
  return pool;
}

ExamConfig default_exam_config(const PoolSpec& pool) {
  if (pool.world.roster.size() < 3) throw ConfigError("difficulty sets need at least three models");
  auto roster = pool.world.roster;
  std::sort(roster.begin(), roster.end(), [](const auto& a, const auto& b) {
    return a.quality_mean != b.quality_mean ? a.quality_mean > b.quality_mean : a.id < b.id;
  });
  ExamConfig c;
  c.roster = {roster.front().id, roster.back().id, roster[1].id};
  c.pertinence.ra_source = {AnswerSource::Kind::corpus_model, roster.front().id};
  c.pertinence.ia_source = {AnswerSource::Kind::corpus_model, roster.front().id};
  c.pertinence.variant_method = VariantMethod::dataset_search;
  c.pertinence.seed = pool.world.seed;
  c.question_count = pool.world.n_questions;
  return c;
}

json VerificationReport::to_json() const {
  json j;
  json exams = json::object();
  for (const auto& [kind, ids] : failed) {
    const auto it = planted.find(kind);
    const auto& expected = it == planted.end() ? std::vector<std::string>{} : it->second;
    exams[to_string(kind)] = {{"failed", ids}, {"planted", expected}, {"match", ids == expected}};
  }
  j["exams"] = exams;
  j["all_match"] = all_match;
  json candidates = json::array();
  for (const auto& r : reports) candidates.push_back(r.to_json());
  j["candidates"] = candidates;
  return j;
}

VerificationReport plant_and_verify(const PoolSpec& pool, const ExamConfig& config, int workers) {
  const World world = generate_world(pool.world);
  auto truth = std::make_shared<const SyntheticTruth>(world.truth);
  const Corpus corpus(world.questions, world.answers);

  Gateway gateway;
  std::vector<Evaluator> candidates;
  VerificationReport v;
  for (auto kind : config.enabled) {
    v.failed[kind];
    v.planted[kind];
  }
  for (const auto& m : pool.members) {
    BackendSpec spec;
    spec.id = m.profile.evaluator_id;
    spec.kind = BackendKind::scripted;
    spec.supports_logprobs = m.supports_logprobs;
    spec.max_in_flight = std::max(1, workers);
    spec.profile = m.profile.to_json();
    gateway.add_backend(std::make_shared<ScriptedBackend>(spec, m.profile, truth));
    candidates.push_back({m.profile.evaluator_id, spec.id, m.placement});
    if (!m.defect.empty()) {
      const auto kind = exam_for_defect(m.defect);
      if (config.enabled.count(kind)) v.planted[kind].push_back(m.profile.evaluator_id);
    }
  }

  JudgeContext ctx{gateway, TemplateSet::builtin(), workers};
  v.reports = run_exams(ctx, candidates, corpus, config);
  for (const auto& r : v.reports) {
    if (config.enabled.count(ExamKind::consistency) && !(r.consistency && r.consistency->passed))
      v.failed[ExamKind::consistency].push_back(r.candidate_id);
    if (config.enabled.count(ExamKind::self_confidence) && !(r.confidence && r.confidence->passed))
      v.failed[ExamKind::self_confidence].push_back(r.candidate_id);
    if (config.enabled.count(ExamKind::pertinence) && !(r.pertinence && r.pertinence->passed))
      v.failed[ExamKind::pertinence].push_back(r.candidate_id);
  }
  for (auto& [_, ids] : v.failed) std::sort(ids.begin(), ids.end());
  for (auto& [_, ids] : v.planted) std::sort(ids.begin(), ids.end());
  v.all_match = v.failed == v.planted;
  return v;
}

}  // namespace peerval
