#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peerval/corpus.hpp"
#include "peerval/gateway.hpp"

namespace peerval {

/// Behaviour of a scripted judge. All draws come from a keyed stream over
/// (seed, prompt kind, item, order), so swap twins are independent and
/// every response is reproducible.
struct ScriptedProfile {
  std::string evaluator_id;
  double judge_accuracy = 0.8;   // chance of naming the truly better answer
  double positional_flip = 0.0;  // chance of answering "one" regardless of content
  double easy_uncertainty = 0.2;
  double hard_uncertainty = 0.5;
  double spread = 0.1;                     // half-width of the uniform jitter on uncertainty
  double pertinence_susceptibility = 0.0;  // chance the irrelevant answer wins a pertinence probe
  std::uint64_t seed = 0;
  double garbage_rate = 0.0;  // chance of an unparseable reply
  std::optional<std::int64_t> fixed_usage_tokens;

  static ScriptedProfile from_json(const json& j);
  json to_json() const;
};

struct RosterModel {
  std::string id;
  double quality_mean = 0.5;
};

struct WorldSpec {
  std::size_t n_questions = 12;
  std::vector<RosterModel> roster;
  std::uint64_t seed = 7;
  double quality_noise = 0.15;
  double annotation_flip_rate = 0.05;
  Task task = Task::qa;
  std::string id_prefix = "q";
};

/// Latent answer quality per (question, model), in [0, 1].
struct SyntheticTruth {
  std::map<std::pair<std::string, std::string>, double> quality;

  std::optional<double> quality_of(const std::string& question_id, const std::string& model_id) const;
  PreferenceMap true_preferences() const;
};

struct World {
  std::vector<QuestionRecord> questions;
  std::vector<AnswerRecord> answers;
  std::vector<HumanAnnotation> annotations;  // preference labels with flip noise
  SyntheticTruth truth;
};

World generate_world(const WorldSpec& spec);
/// questions.jsonl, answers.jsonl, annotations.jsonl and truth.jsonl.
void write_world(const World& world, const std::filesystem::path& dir);
SyntheticTruth load_truth(const std::filesystem::path& path);

/// Pure function of (profile, truth, prompt). Throws ContractViolation when
/// the prompt carries no item marker.
Completion scripted_respond(const ScriptedProfile& profile, const SyntheticTruth* truth, const std::string& prompt);

class ScriptedBackend : public Backend {
 public:
  ScriptedBackend(BackendSpec spec, ScriptedProfile profile, std::shared_ptr<const SyntheticTruth> truth);
  const BackendSpec& spec() const override { return spec_; }
  Completion generate(const std::string& prompt, bool want_logprobs) override;

 private:
  BackendSpec spec_;
  ScriptedProfile profile_;
  std::shared_ptr<const SyntheticTruth> truth_;
};

/// Builds a backend from a roster entry: scripted specs use their inline
/// profile, remote specs get a RemoteBackend.
std::shared_ptr<Backend> make_backend(const BackendSpec& spec, std::shared_ptr<const SyntheticTruth> truth);

}  // namespace peerval
