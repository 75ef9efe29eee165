#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "peerval/decimal.hpp"
#include "peerval/error.hpp"
#include "peerval/jsonl.hpp"

namespace peerval {

enum class BackendKind { remote, scripted };

struct BackendSpec {
  std::string id;
  BackendKind kind = BackendKind::scripted;
  std::string endpoint_url;  // remote only
  std::string model_name;
  bool supports_logprobs = false;
  Decimal price_per_million_tokens;
  int max_in_flight = 1;
  // Scripted backends carry their behaviour profile inline; interpreted by
  // the simulation harness.
  json profile;
};

BackendSpec backend_from_json(const json& obj, std::size_t line = 0);
json to_json(const BackendSpec& spec);
/// Line-delimited roster; ids must be unique.
std::vector<BackendSpec> load_roster(const std::filesystem::path& path);

/// Environment variable carrying the credential for a backend id:
/// PEERVAL_KEY_<ID> with the id upper-cased and non-alphanumerics mapped to '_'.
std::string credential_variable(const std::string& backend_id);

struct TokenAlternative {
  std::string token;
  double logprob = 0.0;  // <= 0
  bool operator==(const TokenAlternative&) const = default;
};

struct Completion {
  std::string text;
  std::optional<std::vector<TokenAlternative>> first_token_alternatives;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t total_tokens() const { return prompt_tokens + completion_tokens; }
  bool operator==(const Completion&) const = default;
};

/// ceil(characters / 4); the fallback when a backend omits usage.
std::int64_t estimate_tokens(std::string_view text);

/// Probability of the emitted first token, which must be one of `targets`
/// after case-folding and whitespace-stripping. The emitted token is the
/// alternative with the highest log-probability.
double first_token_probability(const Completion& c, const std::set<std::string>& targets);

// Thrown by Backend::generate for failures worth retrying (transport errors,
// HTTP 429, HTTP 5xx).
class TransientFailure : public Error {
 public:
  using Error::Error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendSpec& spec() const = 0;
  /// One attempt. Implementations pin decoding to temperature 0.
  virtual Completion generate(const std::string& prompt, bool want_logprobs) = 0;
};

/// Chat-completion JSON over HTTP(S): one user message, temperature 0,
/// optional top-logprobs on the first generated token.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendSpec spec, std::chrono::seconds timeout = std::chrono::seconds(120));
  const BackendSpec& spec() const override { return spec_; }
  Completion generate(const std::string& prompt, bool want_logprobs) override;

  static json build_request(const BackendSpec& spec, const std::string& prompt, bool want_logprobs);
  static Completion parse_response(const json& body, const std::string& prompt);

 private:
  BackendSpec spec_;
  std::chrono::seconds timeout_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{1000};
  double factor = 2.0;
};

struct CostRow {
  std::string backend_id;
  std::int64_t tokens = 0;
  Decimal cost;
  std::int64_t requests = 0;
};

struct CostTable {
  std::vector<CostRow> rows;  // ordered by backend id
  std::int64_t total_tokens = 0;
  Decimal total_cost;
  std::int64_t request_count = 0;
};

/// Thread-safe token and cost accumulator.
class RunLedger {
 public:
  void record(const BackendSpec& backend, std::int64_t tokens);
  CostTable snapshot() const;
  std::int64_t request_count() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, CostRow> rows_;
  std::int64_t requests_ = 0;
};

CostTable ledger_report(const RunLedger& ledger);
/// CSV with header backend_id,tokens,cost and a final "total" row.
std::string ledger_csv(const CostTable& table);

class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(RetryPolicy policy = {}, Sleeper sleeper = {});
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void add_backend(std::shared_ptr<Backend> backend);
  bool has_backend(const std::string& id) const;
  const BackendSpec& spec(const std::string& id) const;
  std::vector<std::string> backend_ids() const;

  /// Sends `prompt` with bounded retries and records usage in the ledger.
  Completion complete(const std::string& backend_id, const std::string& prompt, bool want_logprobs);

  RunLedger& ledger() { return ledger_; }
  const RunLedger& ledger() const { return ledger_; }

 private:
  struct Slot {
    std::shared_ptr<Backend> backend;
    std::mutex mu;
    std::condition_variable cv;
    int in_flight = 0;
  };
  Slot& slot(const std::string& id) const;

  RetryPolicy policy_;
  Sleeper sleeper_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  RunLedger ledger_;
};

}  // namespace peerval
