#include "minekg/llm_gateway.hpp"

#include <ctime>
#include <exception>
#include <thread>

#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/text.hpp"

namespace minekg::llm {
namespace {

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string canonical_request(const CompletionRequest& req) {
  // nlohmann::json objects keep keys sorted
  const nlohmann::json j = {{"max_tokens", req.max_tokens},
                            {"model_id", req.model_id},
                            {"prompt_text", req.prompt_text},
                            {"temperature", req.temperature},
                            {"top_p", req.top_p}};
  return io::dump(j);
}

std::string request_digest(const CompletionRequest& req) {
  return io::sha256_hex(canonical_request(req));
}

nlohmann::json to_json(const CompletionRecord& r) {
  return {{"request_digest", r.request_digest},
          {"model_id", r.model_id},
          {"response_text", r.response_text},
          {"timestamp", r.timestamp}};
}

CompletionRecord record_from_json(const nlohmann::json& row) {
  try {
    return {row.at("request_digest").get<std::string>(), row.at("response_text").get<std::string>(),
            row.value("model_id", std::string{}), row.value("timestamp", std::string{})};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedFile, std::string("cassette record: ") + e.what());
  }
}

std::string_view to_string(Mode m) noexcept {
  switch (m) {
    case Mode::Live: return "live";
    case Mode::Record: return "record";
    case Mode::Replay: return "replay";
  }
  return "replay";
}

Mode parse_mode(std::string_view name) {
  const std::string lower = text::to_lower_ascii(text::trim(name));
  if (lower == "live") return Mode::Live;
  if (lower == "record") return Mode::Record;
  if (lower == "replay") return Mode::Replay;
  throw Error(Errc::InvalidArgument, "unknown mode '" + std::string(name) + "'");
}

Cassette::Cassette(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for (const nlohmann::json& row : io::read_jsonl(path_)) {
    CompletionRecord r = record_from_json(row);
    responses_[r.request_digest] = std::move(r.response_text);
  }
}

std::optional<std::string> Cassette::find(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = responses_.find(digest);
  if (it == responses_.end()) return std::nullopt;
  return it->second;
}

void Cassette::append(const CompletionRecord& record) {
  std::lock_guard lock(mutex_);
  io::append_file(path_, io::dump(to_json(record)) + "\n");
  responses_[record.request_digest] = record.response_text;
}

std::size_t Cassette::size() const {
  std::lock_guard lock(mutex_);
  return responses_.size();
}

Gateway::Gateway(GatewayOptions options, std::shared_ptr<Provider> provider)
    : options_(std::move(options)), provider_(std::move(provider)) {
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  if (options_.concurrency < 1) options_.concurrency = 1;
  if (options_.mode != Mode::Live) {
    if (!options_.cassette)
      throw Error(Errc::InvalidArgument,
                  std::string(to_string(options_.mode)) + " mode needs a cassette path");
    cassette_ = std::make_unique<Cassette>(*options_.cassette);
  }
}

std::string Gateway::call_provider(const CompletionRequest& req) {
  if (!provider_)
    throw Error(Errc::MissingCredentials,
                "no provider configured; set MINEKG_API_KEY (and MINEKG_API_BASE)");
  std::chrono::milliseconds delay = options_.backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    ++provider_calls_;
    try {
      return provider_->complete(req);
    } catch (const TransportError& e) {
      last_error = e.what();
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(Errc::ProviderError, e.what());
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw Error(Errc::ProviderError, "giving up after " + std::to_string(options_.max_attempts) +
                                       " attempts: " + last_error);
}

std::string Gateway::complete(const CompletionRequest& req) {
  if (options_.strict && (req.temperature != 0.0 || req.top_p != 1.0))
    throw Error(Errc::ConfigViolation,
                "strict mode requires temperature = 0 and top_p = 1.0 (got temperature = " +
                    io::format_fixed(req.temperature, 3) +
                    ", top_p = " + io::format_fixed(req.top_p, 3) + ")");
  switch (options_.mode) {
    case Mode::Replay: {
      const std::string digest = request_digest(req);
      if (std::optional<std::string> hit = cassette_->find(digest)) return *hit;
      throw Error(Errc::CassetteMiss, "no recorded response for request " + digest +
                                          " (model " + req.model_id + ")");
    }
    case Mode::Record: {
      std::string response = call_provider(req);
      cassette_->append({request_digest(req), response, req.model_id, utc_timestamp()});
      return response;
    }
    case Mode::Live:
      return call_provider(req);
  }
  return {};
}

std::map<std::string, std::string> Gateway::complete_all(
    const std::vector<std::pair<std::string, CompletionRequest>>& keyed) {
  std::vector<std::string> results(keyed.size());
  std::vector<std::exception_ptr> errors(keyed.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keyed.size(); i = next++) {
      try {
        results[i] = complete(keyed[i].second);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(options_.concurrency, keyed.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::map<std::string, std::string> out;
  const std::string* first_failed_key = nullptr;
  std::exception_ptr first_error;
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    if (errors[i]) {
      if (!first_failed_key || keyed[i].first < *first_failed_key) {
        first_failed_key = &keyed[i].first;
        first_error = errors[i];
      }
      continue;
    }
    out[keyed[i].first] = std::move(results[i]);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace minekg::llm
