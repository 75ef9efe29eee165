#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "peerval/evaluation.hpp"
#include "peerval/simharness.hpp"

namespace peerval::testkit {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("peerval-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline BackendSpec scripted_spec(const std::string& id, bool logprobs = true, const std::string& price = "0") {
  BackendSpec s;
  s.id = id;
  s.kind = BackendKind::scripted;
  s.supports_logprobs = logprobs;
  s.price_per_million_tokens = Decimal::parse(price);
  s.max_in_flight = 4;
  return s;
}

inline void add_scripted(Gateway& g, const ScriptedProfile& p, std::shared_ptr<const SyntheticTruth> truth,
                         bool logprobs = true, const std::string& price = "0") {
  g.add_backend(std::make_shared<ScriptedBackend>(scripted_spec(p.evaluator_id, logprobs, price), p, std::move(truth)));
}

inline ScriptedProfile profile(const std::string& id, double accuracy, double flip = 0.0, std::uint64_t seed = 1) {
  ScriptedProfile p;
  p.evaluator_id = id;
  p.judge_accuracy = accuracy;
  p.positional_flip = flip;
  p.seed = seed;
  return p;
}

inline WorldSpec small_world(std::size_t n = 12, std::uint64_t seed = 7) {
  WorldSpec w;
  w.n_questions = n;
  w.seed = seed;
  w.roster = {{"strong", 0.85}, {"close", 0.8}, {"mid", 0.6}, {"weak", 0.25}};
  return w;
}

}  // namespace peerval::testkit
