#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "peerval/evaluation.hpp"
#include "peerval/exams.hpp"

namespace peerval {

struct CorpusPaths {
  std::filesystem::path questions;
  std::filesystem::path answers;
  std::filesystem::path annotations;  // optional
};

/// A named weighting scheme for `report`: which evaluators take part and
/// which exams gate them.
struct VariantSpec {
  std::string name;
  std::vector<std::string> evaluators;  // empty: every candidate
  /// "exam" derives weights from the exam report restricted to `exams`;
  /// "unit" gives every listed evaluator weight 1.
  std::string weighting = "exam";
  std::set<ExamKind> exams{ExamKind::consistency, ExamKind::self_confidence, ExamKind::pertinence};
};

/// Everything a subcommand needs. Relative paths are resolved against the
/// directory of the config file.
struct RunConfig {
  std::string name;
  std::filesystem::path roster;
  std::vector<Evaluator> candidates;
  CorpusPaths corpus;
  std::optional<CorpusPaths> exam_corpus;
  std::string exam_split = "disjoint";  // or "shared"; used without exam_corpus
  std::string dataset;                  // label for report rows; defaults to the task name
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> templates;
  ExamConfig exam;
  EvalFormat format = EvalFormat::pairwise;
  std::optional<PromptPlacement> placement;  // overrides every candidate's placement
  bool filtered = true;
  std::uint64_t seed = 7;
  int workers = 4;
  std::filesystem::path output_dir = "out";
  std::vector<VariantSpec> variants;

  std::string source_text;  // raw config bytes, hashed into report footers
};

/// Parses a decimal literal such as "0.55" into an exact fraction.
Rational parse_decimal_fraction(const std::string& text);

RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Evaluator list after applying the placement override.
std::vector<Evaluator> effective_candidates(const RunConfig& config);

/// Splits the main corpus for exams and evaluation. With exam_split
/// "disjoint" a seeded draw of up to half the questions (at most
/// exam.question_count) goes to the exams and the rest to evaluation;
/// "shared" hands both stages the whole corpus.
struct CorpusSplit {
  Corpus exam;
  Corpus evaluation;
};
CorpusSplit split_corpus(const Corpus& corpus, const RunConfig& config);

/// SHA-256 hex of the config text.
std::string config_hash(const RunConfig& config);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace peerval
