#pragma once

// Thin JSON-over-HTTP helper shared by the provider clients.

#include <map>
#include <string>

namespace catrag::http {

struct Response {
  int status = 0;
  std::string body;
};

struct PostOptions {
  int timeout_ms = 10000;
  int max_retries = 2;
  std::map<std::string, std::string> headers;
};

/// POSTs `body` as application/json to base_url + path. Transport errors and
/// 5xx responses are retried; when retries run out the call throws
/// ProviderUnavailable. Other statuses are returned to the caller.
Response post_json(const std::string& base_url, const std::string& path,
                   const std::string& body, const PostOptions& options);

}  // namespace catrag::http
