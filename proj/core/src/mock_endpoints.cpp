#include "simarena/mock_endpoints.hpp"

#include <algorithm>
#include <array>

#include <httplib.h>

#include "simarena/embedding.hpp"
#include "simarena/error.hpp"
#include "simarena/hash.hpp"
#include "simarena/text.hpp"

namespace simarena {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kCanned = {
    "哈哈好的",
    "我觉得还行吧",
    "嗯嗯 我晚点说",
    "可以啊 周末再看",
    "sounds good to me",
    "不一定 看情况",
    "我也这么想",
    "ok see you then",
};

std::string message_content(const json& body, const std::string& role) {
  for (const auto& m : body.value("messages", json::array())) {
    if (m.value("role", std::string{}) == role) return m.value("content", std::string{});
  }
  return {};
}

// First "A: ..." line after the first evidence marker.
std::string first_evidence_answer(const std::string& system) {
  const auto marker = system.find("\n[1] (");
  if (marker == std::string::npos) return {};
  const auto a = system.find("\nA: ", marker);
  if (a == std::string::npos) return {};
  const auto start = a + 4;
  const auto end = system.find('\n', start);
  return system.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

json attribute_reply(const std::string& user) {
  std::vector<std::string> keywords;
  for (const auto& t : tokenize(user).tokens) {
    if (t == "q" || t == "a") continue;
    if (std::find(keywords.begin(), keywords.end(), t) == keywords.end()) keywords.push_back(t);
    if (keywords.size() == 3) break;
  }
  if (keywords.empty()) keywords.push_back("chat");
  return {{"keywords", keywords}, {"tags", {"mock"}}, {"context", "A short exchange."}};
}

}  // namespace

std::string mock_chat_reply(const json& body) {
  const std::string system = message_content(body, "system");
  const std::string user = message_content(body, "user");
  if (system.find("return JSON only") != std::string::npos) return attribute_reply(user).dump();

  const std::string model = body.value("model", std::string{});
  const std::int64_t seed = body.contains("seed") && body["seed"].is_number_integer()
                                ? body["seed"].get<std::int64_t>()
                                : 0;
  const std::uint64_t h = mix64(fnv1a64(model) ^ mix64(fnv1a64(user)) ^ static_cast<std::uint64_t>(seed));
  std::string reply = first_evidence_answer(system);
  if (reply.empty()) reply = std::string(kCanned[h % kCanned.size()]);
  // Adapted models answer in a slightly more personal register.
  if (model.find("lora") != std::string::npos || model.find("adapted") != std::string::npos) {
    reply += (h >> 8) % 2 == 0 ? " 哈哈" : " 嗯";
  }
  return reply;
}

struct MockEndpointServer::Impl {
  explicit Impl(std::size_t dim) : embedder(dim) {}

  httplib::Server server;
  HashingEmbedder embedder;
  mutable std::mutex mu;
  std::vector<CapturedRequest> captured;
  std::set<std::string> failing_models;
  int fail_next = 0;

  // Records the request; true when it must be failed.
  bool record(const httplib::Request& req, const json& body) {
    std::lock_guard lock(mu);
    captured.push_back({req.path, req.get_header_value("Authorization"), body});
    if (fail_next > 0) {
      --fail_next;
      return true;
    }
    return body.is_object() && failing_models.count(body.value("model", std::string{})) > 0;
  }
};

namespace {

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

MockEndpointServer::MockEndpointServer(std::size_t embedding_dimension)
    : impl_(std::make_unique<Impl>(embedding_dimension)) {
  auto& srv = impl_->server;
  Impl* impl = impl_.get();

  srv.Post("/v1/embeddings", [impl](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (impl->record(req, body)) return send(res, 503, {{"error", "unavailable"}});
    if (body.is_discarded() || !body.contains("input")) return send(res, 400, {{"error", "bad request"}});
    std::vector<std::string> inputs;
    if (body["input"].is_string()) {
      inputs.push_back(body["input"].get<std::string>());
    } else {
      inputs = body["input"].get<std::vector<std::string>>();
    }
    json data = json::array();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", impl->embedder.embed_one(inputs[i]).values}});
    }
    send(res, 200, {{"object", "list"}, {"model", body.value("model", std::string{})}, {"data", data}});
  });

  srv.Post("/v1/chat/completions", [impl](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (impl->record(req, body)) return send(res, 503, {{"error", "unavailable"}});
    if (body.is_discarded() || !body.contains("messages")) return send(res, 400, {{"error", "bad request"}});
    json msg{{"role", "assistant"}, {"content", mock_chat_reply(body)}};
    send(res, 200, {{"object", "chat.completion"},
                    {"model", body.value("model", std::string{})},
                    {"choices", {{{"index", 0}, {"message", msg}, {"finish_reason", "stop"}}}}});
  });
}

MockEndpointServer::~MockEndpointServer() { stop(); }

int MockEndpointServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  host_ = host;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw IoError(host + ":" + std::to_string(port), "cannot bind mock endpoint server");
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void MockEndpointServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    throw IoError(host + ":" + std::to_string(port), "cannot bind mock endpoint server");
  }
}

void MockEndpointServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockEndpointServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void MockEndpointServer::fail_model(const std::string& model) {
  std::lock_guard lock(impl_->mu);
  impl_->failing_models.insert(model);
}

void MockEndpointServer::fail_next(int n) {
  std::lock_guard lock(impl_->mu);
  impl_->fail_next = n;
}

std::vector<CapturedRequest> MockEndpointServer::captured() const {
  std::lock_guard lock(impl_->mu);
  return impl_->captured;
}

std::size_t MockEndpointServer::request_count() const {
  std::lock_guard lock(impl_->mu);
  return impl_->captured.size();
}

void MockEndpointServer::clear_captured() {
  std::lock_guard lock(impl_->mu);
  impl_->captured.clear();
}

}  // namespace simarena
