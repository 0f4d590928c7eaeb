#include "catrag/http_util.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "catrag/error.hpp"

namespace catrag::http {

namespace {

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  if (path_begin == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_begin);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_begin), prefix};
}

}  // namespace

Response post_json(const std::string& base_url, const std::string& path,
                   const std::string& body, const PostOptions& options) {
  const auto [origin, prefix] = split_url(base_url);
  httplib::Client client(origin);
  if (!client.is_valid()) {
    throw Error(ErrorCode::ProviderUnavailable, "invalid provider url '" + base_url + "'");
  }
  const auto timeout = std::chrono::milliseconds(options.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  for (const auto& [k, v] : options.headers) headers.emplace(k, v);

  std::string last_error;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(25 * attempt));
    const std::string target = prefix + path;
    auto res = client.Post(target.empty() ? "/" : target, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return {res->status, res->body};
  }
  throw Error(ErrorCode::ProviderUnavailable,
              base_url + path + " failed after " + std::to_string(options.max_retries + 1) +
                  " attempts: " + last_error);
}

}  // namespace catrag::http
