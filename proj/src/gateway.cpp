#include "peerval/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace peerval {
namespace {

std::string fold(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(begin, end - begin + 1));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

Decimal decimal_field(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) return Decimal{};
  try {
    // A JSON number's dump() is its shortest round-trip text, which parses
    // back to the exact decimal written in the file.
    if (it->is_number()) return Decimal::parse(it->dump());
    if (it->is_string()) return Decimal::parse(it->get<std::string>());
  } catch (const ParseError&) {
  }
  throw ParseError(std::string("field '") + field + "' must be a decimal", line);
}

}  // namespace

BackendSpec backend_from_json(const json& obj, std::size_t line) {
  BackendSpec spec;
  spec.id = require_string(obj, "id", line);
  const std::string kind = optional_string(obj, "kind", "scripted");
  if (kind == "remote") {
    spec.kind = BackendKind::remote;
  } else if (kind == "scripted") {
    spec.kind = BackendKind::scripted;
  } else {
    throw ParseError("backend '" + spec.id + "': unknown kind '" + kind + "'", line);
  }
  spec.endpoint_url = optional_string(obj, "endpoint_url");
  spec.model_name = optional_string(obj, "model_name", spec.id);
  spec.supports_logprobs = obj.value("supports_logprobs", false);
  spec.price_per_million_tokens = decimal_field(obj, "price_per_million_tokens", line);
  spec.max_in_flight = obj.value("max_in_flight", 1);
  if (obj.contains("profile")) spec.profile = obj.at("profile");

  if (spec.id.empty()) throw ParseError("backend id must be non-empty", line);
  if (spec.price_per_million_tokens.is_negative())
    throw ParseError("backend '" + spec.id + "': price_per_million_tokens must be >= 0", line);
  if (spec.max_in_flight < 1) throw ParseError("backend '" + spec.id + "': max_in_flight must be >= 1", line);
  if (spec.kind == BackendKind::remote && spec.endpoint_url.empty())
    throw ParseError("backend '" + spec.id + "': remote backends need endpoint_url", line);
  return spec;
}

json to_json(const BackendSpec& spec) {
  json obj = {{"id", spec.id},
              {"kind", spec.kind == BackendKind::remote ? "remote" : "scripted"},
              {"model_name", spec.model_name},
              {"supports_logprobs", spec.supports_logprobs},
              {"price_per_million_tokens", spec.price_per_million_tokens.to_string()},
              {"max_in_flight", spec.max_in_flight}};
  if (!spec.endpoint_url.empty()) obj["endpoint_url"] = spec.endpoint_url;
  if (!spec.profile.is_null()) obj["profile"] = spec.profile;
  return obj;
}

std::vector<BackendSpec> load_roster(const std::filesystem::path& path) {
  std::vector<BackendSpec> roster;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    auto spec = backend_from_json(obj, line);
    if (!seen.insert(spec.id).second) throw IntegrityError("duplicate backend id '" + spec.id + "' at line " + std::to_string(line));
    roster.push_back(std::move(spec));
  });
  return roster;
}

std::string credential_variable(const std::string& backend_id) {
  std::string out = "PEERVAL_KEY_";
  for (unsigned char c : backend_id) out.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  return out;
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

double first_token_probability(const Completion& c, const std::set<std::string>& targets) {
  if (!c.first_token_alternatives || c.first_token_alternatives->empty())
    throw CapabilityError("completion carries no first-token alternatives");
  std::set<std::string> folded_targets;
  for (const auto& t : targets) {
    if (!folded_targets.insert(fold(t)).second) throw AmbiguityError("targets collide after case-folding: '" + t + "'");
  }
  const auto& alts = *c.first_token_alternatives;
  double best = -INFINITY;
  for (const auto& a : alts) best = std::max(best, a.logprob);

  std::optional<TokenAlternative> emitted;
  std::string emitted_target;
  bool any_non_target_at_top = false;
  for (const auto& a : alts) {
    if (a.logprob != best) continue;
    const std::string f = fold(a.token);
    if (!folded_targets.count(f)) {
      any_non_target_at_top = true;
      continue;
    }
    if (emitted && emitted_target != f)
      throw AmbiguityError("emitted token matches both '" + emitted_target + "' and '" + f + "'");
    if (!emitted) {
      emitted = a;
      emitted_target = f;
    }
  }
  if (!emitted) throw UnparseableError("emitted first token '" + alts.front().token + "' is not a target");
  if (any_non_target_at_top) throw AmbiguityError("emitted first token ties with a non-target alternative");
  return std::exp(emitted->logprob);
}

// ---------------------------------------------------------------------------
// Remote backend

RemoteBackend::RemoteBackend(BackendSpec spec, std::chrono::seconds timeout)
    : spec_(std::move(spec)), timeout_(timeout) {}

json RemoteBackend::build_request(const BackendSpec& spec, const std::string& prompt, bool want_logprobs) {
  json body = {{"model", spec.model_name},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", 0},
               {"n", 1},
               {"stream", false}};
  if (want_logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = 5;
  }
  return body;
}

Completion RemoteBackend::parse_response(const json& body, const std::string& prompt) {
  Completion c;
  try {
    const auto& choice = body.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    c.text = content.is_string() ? content.get<std::string>() : std::string{};
    auto lp = choice.find("logprobs");
    if (lp != choice.end() && lp->is_object() && lp->contains("content") && lp->at("content").is_array() &&
        !lp->at("content").empty()) {
      const auto& first = lp->at("content").at(0);
      std::vector<TokenAlternative> alts;
      if (first.contains("top_logprobs") && first.at("top_logprobs").is_array()) {
        for (const auto& alt : first.at("top_logprobs"))
          alts.push_back({alt.at("token").get<std::string>(), std::min(0.0, alt.at("logprob").get<double>())});
      }
      if (alts.empty() && first.contains("token"))
        alts.push_back({first.at("token").get<std::string>(), std::min(0.0, first.at("logprob").get<double>())});
      if (!alts.empty()) c.first_token_alternatives = std::move(alts);
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat-completion response: ") + e.what());
  }
  auto usage = body.find("usage");
  if (usage != body.end() && usage->is_object() && usage->contains("prompt_tokens")) {
    c.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
    c.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
  } else {
    c.prompt_tokens = estimate_tokens(prompt);
    c.completion_tokens = estimate_tokens(c.text);
  }
  return c;
}

Completion RemoteBackend::generate(const std::string& prompt, bool want_logprobs) {
  const auto& url = spec_.endpoint_url;
  const auto scheme_end = url.find("://");
  const auto path_begin = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string base = path_begin == std::string::npos ? url : url.substr(0, path_begin);
  const std::string path = path_begin == std::string::npos ? "/v1/chat/completions" : url.substr(path_begin);

  httplib::Client client(base);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (const char* key = std::getenv(credential_variable(spec_.id).c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  const auto body = build_request(spec_, prompt, want_logprobs).dump();
  auto res = client.Post(path, headers, body, "application/json");
  if (!res) throw TransientFailure("transport failure: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransientFailure("HTTP " + std::to_string(res->status));
  if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw TransportError(std::string("response is not JSON: ") + e.what());
  }
  return parse_response(parsed, prompt);
}

// ---------------------------------------------------------------------------
// Ledger

void RunLedger::record(const BackendSpec& backend, std::int64_t tokens) {
  const Decimal cost = (Decimal::from_int(tokens) * backend.price_per_million_tokens).shifted_down(6);
  std::lock_guard lock(mu_);
  auto& row = rows_[backend.id];
  row.backend_id = backend.id;
  row.tokens += tokens;
  row.cost += cost;
  row.requests += 1;
  requests_ += 1;
}

CostTable RunLedger::snapshot() const {
  std::lock_guard lock(mu_);
  CostTable table;
  for (const auto& [id, row] : rows_) {
    table.rows.push_back(row);
    table.total_tokens += row.tokens;
    table.total_cost += row.cost;
  }
  table.request_count = requests_;
  return table;
}

std::int64_t RunLedger::request_count() const {
  std::lock_guard lock(mu_);
  return requests_;
}

CostTable ledger_report(const RunLedger& ledger) { return ledger.snapshot(); }

std::string ledger_csv(const CostTable& table) {
  std::ostringstream out;
  out << "backend_id,tokens,cost\n";
  for (const auto& row : table.rows) out << row.backend_id << ',' << row.tokens << ',' << row.cost.to_string() << '\n';
  out << "total," << table.total_tokens << ',' << table.total_cost.to_string() << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(RetryPolicy policy, Sleeper sleeper) : policy_(policy), sleeper_(std::move(sleeper)) {
  if (policy_.max_attempts < 1) throw ContractViolation("retry policy needs at least one attempt");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

void Gateway::add_backend(std::shared_ptr<Backend> backend) {
  const auto& id = backend->spec().id;
  if (slots_.count(id)) throw IntegrityError("backend '" + id + "' registered twice");
  auto s = std::make_unique<Slot>();
  s->backend = std::move(backend);
  slots_.emplace(id, std::move(s));
}

bool Gateway::has_backend(const std::string& id) const { return slots_.count(id) > 0; }

Gateway::Slot& Gateway::slot(const std::string& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) throw IntegrityError("unknown backend '" + id + "'");
  return *it->second;
}

const BackendSpec& Gateway::spec(const std::string& id) const { return slot(id).backend->spec(); }

std::vector<std::string> Gateway::backend_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : slots_) ids.push_back(id);
  return ids;
}

Completion Gateway::complete(const std::string& backend_id, const std::string& prompt, bool want_logprobs) {
  if (prompt.empty()) throw ContractViolation("prompt must be non-empty");
  Slot& s = slot(backend_id);
  const BackendSpec& spec = s.backend->spec();
  if (want_logprobs && !spec.supports_logprobs)
    throw CapabilityError("backend '" + backend_id + "' does not expose log-probabilities");

  {
    std::unique_lock lock(s.mu);
    s.cv.wait(lock, [&] { return s.in_flight < spec.max_in_flight; });
    ++s.in_flight;
  }
  struct Release {
    Slot& s;
    ~Release() {
      {
        std::lock_guard lock(s.mu);
        --s.in_flight;
      }
      s.cv.notify_one();
    }
  } release{s};

  auto delay = policy_.initial_delay;
  std::string last_error;
  for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
    try {
      Completion c = s.backend->generate(prompt, want_logprobs);
      if (c.first_token_alternatives && !want_logprobs) c.first_token_alternatives.reset();
      ledger_.record(spec, c.total_tokens());
      return c;
    } catch (const TransientFailure& e) {
      last_error = e.what();
    }
    if (attempt < policy_.max_attempts) {
      sleeper_(delay);
      delay = std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(delay.count()) * policy_.factor));
    }
  }
  throw RetryableError("backend '" + backend_id + "': " + last_error, policy_.max_attempts);
}

}  // namespace peerval
