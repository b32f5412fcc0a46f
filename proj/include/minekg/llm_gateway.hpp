#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace minekg::llm {

struct CompletionRequest {
  std::string model_id;
  std::string prompt_text;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1024;
};

/// JSON object with keys in sorted order; prompt_text is kept byte-exact.
std::string canonical_request(const CompletionRequest& req);
/// SHA-256 hex of canonical_request().
std::string request_digest(const CompletionRequest& req);

struct CompletionRecord {
  std::string request_digest;
  std::string response_text;
  std::string model_id;
  std::string timestamp;  // ISO-8601 UTC
};

nlohmann::json to_json(const CompletionRecord& r);
CompletionRecord record_from_json(const nlohmann::json& row);

enum class Mode { Live, Record, Replay };
std::string_view to_string(Mode m) noexcept;
Mode parse_mode(std::string_view name);

/// Thrown by providers for failures worth retrying (connection errors,
/// HTTP 429 and 5xx). Anything else a provider throws is surfaced at once.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string complete(const CompletionRequest& req) = 0;
};

/// Wraps a callable; handy for scripted and simulated models.
class FunctionProvider final : public Provider {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const CompletionRequest& req) override { return fn_(req); }

 private:
  Fn fn_;
};

struct HttpProviderOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat completions endpoint: POST <base_url>/chat/completions.
class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpProviderOptions options);
  std::string complete(const CompletionRequest& req) override;

 private:
  HttpProviderOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// Reads MINEKG_API_KEY and MINEKG_API_BASE. Returns nullptr when no key is set.
std::shared_ptr<Provider> provider_from_environment();

/// Append-only JSONL of CompletionRecord. When a digest occurs more than once
/// the latest record wins.
class Cassette {
 public:
  /// A missing file yields an empty cassette bound to that path.
  explicit Cassette(std::filesystem::path path);

  std::optional<std::string> find(const std::string& digest) const;
  void append(const CompletionRecord& record);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  std::unordered_map<std::string, std::string> responses_;
  mutable std::mutex mutex_;
};

struct GatewayOptions {
  Mode mode = Mode::Replay;
  /// Greedy decoding only: temperature 0 and top_p 1.
  bool strict = true;
  std::optional<std::filesystem::path> cassette;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{250};  // doubled after every failed attempt
  std::size_t concurrency = 4;
};

class Gateway {
 public:
  /// `provider` may be null; live and record calls then raise
  /// MissingCredentials. Replay and record modes require a cassette path.
  Gateway(GatewayOptions options, std::shared_ptr<Provider> provider);

  /// Errors: ConfigViolation, MissingCredentials, CassetteMiss, ProviderError.
  std::string complete(const CompletionRequest& req);

  /// Runs requests with at most `concurrency` in flight. Results are keyed, so
  /// the outcome does not depend on completion order. If any request fails,
  /// the failure with the smallest key is rethrown after all workers finish.
  std::map<std::string, std::string> complete_all(
      const std::vector<std::pair<std::string, CompletionRequest>>& keyed);

  Mode mode() const noexcept { return options_.mode; }
  /// Calls that reached the provider (including retries).
  std::size_t provider_calls() const noexcept { return provider_calls_.load(); }

 private:
  std::string call_provider(const CompletionRequest& req);

  GatewayOptions options_;
  std::shared_ptr<Provider> provider_;
  std::unique_ptr<Cassette> cassette_;
  std::atomic<std::size_t> provider_calls_{0};
};

}  // namespace minekg::llm
