#include "simarena/http.hpp"

#include <thread>

#include <httplib.h>

#include "simarena/error.hpp"

namespace simarena {

Url parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw DataError("not an absolute URL: '" + url + "'");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw DataError("unsupported URL scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == scheme_end + 3) throw DataError("URL has no host: '" + url + "'");
  Url out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  return out;
}

namespace {

httplib::Client make_client(const Url& url, const HttpOptions& opts) {
  httplib::Client cli(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  return cli;
}

nlohmann::json post_once(const Url& url, const std::string& body, const HttpOptions& opts) {
  auto cli = make_client(url, opts);
  httplib::Headers headers;
  if (!opts.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + opts.bearer_token);

  auto res = cli.Post(url.path, headers, body, "application/json");
  if (!res) {
    throw EndpointError(url.origin + url.path + ": " + httplib::to_string(res.error()),
                        /*retryable=*/true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw EndpointError(url.origin + url.path + ": HTTP " + std::to_string(res->status), true);
  }
  if (res->status < 200 || res->status >= 300) {
    throw EndpointError(url.origin + url.path + ": HTTP " + std::to_string(res->status) + " " +
                            res->body.substr(0, 200),
                        false);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw EndpointError(url.origin + url.path + ": malformed JSON response", false);
  }
}

}  // namespace

HttpResponse http_request(const std::string& method, const std::string& url,
                          const std::string& body, const HttpOptions& opts) {
  const Url parsed = parse_url(url);
  auto cli = make_client(parsed, opts);
  httplib::Result res{nullptr, httplib::Error::Unknown};
  if (method == "GET") {
    res = cli.Get(parsed.path);
  } else if (method == "POST") {
    res = cli.Post(parsed.path, body, "application/json");
  } else {
    throw DataError("unsupported HTTP method " + method);
  }
  if (!res) throw EndpointError(url + ": " + httplib::to_string(res.error()), true);
  return HttpResponse{res->status, res->body};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const HttpOptions& opts) {
  const Url parsed = parse_url(url);
  const std::string payload = body.dump();
  auto backoff = opts.retry.initial_backoff;
  const int attempts = std::max(1, opts.retry.attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      return post_once(parsed, payload, opts);
    } catch (const EndpointError& e) {
      if (!e.retryable() || attempt >= attempts) throw;
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace simarena
