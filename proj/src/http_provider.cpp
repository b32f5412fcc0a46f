#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>

#include "minekg/error.hpp"
#include "minekg/io.hpp"
#include "minekg/llm_gateway.hpp"

namespace minekg::llm {

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
  const std::string& url = options_.base_url;
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(Errc::InvalidArgument, "provider base URL needs a scheme: " + url);
  const std::size_t path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpProvider::complete(const CompletionRequest& req) {
  httplib::Client client(scheme_host_port_);
  const auto seconds = static_cast<time_t>(options_.timeout.count());
  client.set_connection_timeout(seconds, 0);
  client.set_read_timeout(seconds, 0);
  client.set_bearer_token_auth(options_.api_key);

  const nlohmann::json body = {
      {"model", req.model_id},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt_text}}})},
      {"temperature", req.temperature},
      {"top_p", req.top_p},
      {"max_tokens", req.max_tokens}};
  httplib::Result res =
      client.Post(path_prefix_ + "/chat/completions", io::dump(body), "application/json");
  if (!res) throw TransportError("transport failure: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransportError("HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error(Errc::ProviderError, "HTTP " + std::to_string(res->status) + ": " + res->body);

  try {
    const nlohmann::json reply = nlohmann::json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ProviderError, std::string("unexpected response body: ") + e.what());
  }
}

std::shared_ptr<Provider> provider_from_environment() {
  const char* key = std::getenv("MINEKG_API_KEY");
  if (key == nullptr || *key == '\0') return nullptr;
  HttpProviderOptions options;
  options.api_key = key;
  if (const char* base = std::getenv("MINEKG_API_BASE"); base != nullptr && *base != '\0')
    options.base_url = base;
  return std::make_shared<HttpProvider>(std::move(options));
}

}  // namespace minekg::llm
