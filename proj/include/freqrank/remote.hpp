#pragma once

// Chat-completion wire adapter for remote models: single user message in,
// first text choice out. Transport failures, timeouts, 429 and 5xx responses
// are retried with doubling backoff up to max_retries, then surfaced.

#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "freqrank/model.hpp"

namespace freqrank {
namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // leading path prefix, possibly empty
};

inline SplitUrl split_base_url(const std::string& base_url) {
  std::size_t scheme = base_url.find("://");
  if (scheme == std::string::npos)
    throw std::invalid_argument("base_url must include a scheme: " + base_url);
  std::size_t slash = base_url.find('/', scheme + 3);
  SplitUrl out;
  if (slash == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, slash);
    out.path = base_url.substr(slash);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

inline std::string parse_chat_completion(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body);
  const auto& choices = j.at("choices");
  if (!choices.is_array() || choices.empty())
    throw std::runtime_error("response has no choices");
  const auto& first = choices.at(0);
  if (first.contains("message"))
    return first.at("message").at("content").get<std::string>();
  if (first.contains("text")) return first.at("text").get<std::string>();
  throw std::runtime_error("response choice has neither message nor text");
}

inline std::string remote_chat_completion(const RemoteSpec& spec,
                                          const std::string& input) {
  SplitUrl url = split_base_url(spec.base_url);
  nlohmann::json request = {
      {"model", spec.model},
      {"temperature", spec.temperature},
      {"messages", {{{"role", "user"}, {"content", input}}}}};
  std::string body = request.dump();

  httplib::Headers headers;
  if (!spec.api_key_env.empty()) {
    const char* key = std::getenv(spec.api_key_env.c_str());
    if (!key)
      throw std::runtime_error("API key env var not set: " + spec.api_key_env);
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_error;
  int backoff_ms = spec.backoff_ms;
  for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms = backoff_ms < 4000 ? backoff_ms * 2 : 4000;
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(spec.timeout_s, 0);
    client.set_read_timeout(spec.timeout_s, 0);
    client.set_write_timeout(spec.timeout_s, 0);
    auto res = client.Post(url.path + "/chat/completions", headers, body,
                           "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw std::runtime_error("model endpoint returned HTTP " +
                               std::to_string(res->status) + ": " + res->body);
    try {
      return parse_chat_completion(res->body);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("malformed model response: ") +
                               e.what());
    }
  }
  throw std::runtime_error("model query failed after " +
                           std::to_string(spec.max_retries) +
                           " retries; last error: " + last_error);
}

}  // namespace detail
}  // namespace freqrank
