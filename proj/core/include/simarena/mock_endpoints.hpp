#pragma once

// Local stand-ins for the embedding and chat-completion services, used by the
// dry run, the tests and `simarena mock-serve`.
//
// Chat replies are a pure function of (model, messages, seed): the first
// evidence answer when the system message carries evidence, otherwise a canned
// reply picked by hash. Attribute-extraction requests get a JSON object.

#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace simarena {

struct CapturedRequest {
  std::string path;
  std::string authorization;
  nlohmann::json body;
};

// The deterministic reply for a chat-completions body.
std::string mock_chat_reply(const nlohmann::json& body);

class MockEndpointServer {
 public:
  explicit MockEndpointServer(std::size_t embedding_dimension = 256);
  ~MockEndpointServer();

  MockEndpointServer(const MockEndpointServer&) = delete;
  MockEndpointServer& operator=(const MockEndpointServer&) = delete;

  int start(const std::string& host = "127.0.0.1", int port = 0);
  void listen_blocking(const std::string& host, int port);
  void stop();

  std::string base_url() const;
  std::string chat_url() const { return base_url() + "/v1/chat/completions"; }
  std::string embeddings_url() const { return base_url() + "/v1/embeddings"; }

  // Requests naming this model are answered with 503.
  void fail_model(const std::string& model);
  // The next `n` requests of any kind are answered with 503.
  void fail_next(int n);

  std::vector<CapturedRequest> captured() const;
  std::size_t request_count() const;
  void clear_captured();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

}  // namespace simarena
