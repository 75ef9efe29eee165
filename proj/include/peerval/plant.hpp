#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "peerval/exams.hpp"
#include "peerval/simharness.hpp"

namespace peerval {

/// Planted defect labels: "positional", "confidence", "pertinence"; empty
/// for a qualified judge.
ScriptedProfile apply_defect(ScriptedProfile profile, const std::string& defect);
/// The exam a defect is meant to trip.
ExamKind exam_for_defect(const std::string& defect);

struct PoolMember {
  ScriptedProfile profile;
  std::string defect;
  bool supports_logprobs = true;
  PromptPlacement placement = PromptPlacement::restriction_first;
};

struct PoolSpec {
  WorldSpec world;
  std::vector<PoolMember> members;
};

/// Seven judges over a 100-question, four-model world. With `planted`, three
/// of them carry one defect each.
PoolSpec default_pool(std::uint64_t seed, bool planted = true);
/// Exam settings that suit a pool's world: difficulty roster from the model
/// quality means and corpus-sourced pertinence probes.
ExamConfig default_exam_config(const PoolSpec& pool);

struct VerificationReport {
  std::map<ExamKind, std::vector<std::string>> failed;
  std::map<ExamKind, std::vector<std::string>> planted;
  bool all_match = false;
  std::vector<ExamReport> reports;

  json to_json() const;
};

VerificationReport plant_and_verify(const PoolSpec& pool, const ExamConfig& config, int workers = 4);

}  // namespace peerval
