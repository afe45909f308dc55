#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

namespace simarena {

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};  // doubled after each failure
};

struct HttpOptions {
  std::string bearer_token;
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
};

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};

// Splits an absolute http(s) URL. Throws DataError on anything else.
Url parse_url(const std::string& url);

// POSTs a JSON body and parses a JSON response. Connection failures, 429 and
// 5xx are retried per `opts.retry`; other statuses fail immediately. Throws
// EndpointError.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const HttpOptions& opts);

struct HttpResponse {
  int status = 0;
  std::string body;
};

// One plain request without retries; `method` is "GET" or "POST". Transport
// failures throw EndpointError, any HTTP status is returned.
HttpResponse http_request(const std::string& method, const std::string& url,
                          const std::string& body = {}, const HttpOptions& opts = {});

}  // namespace simarena
