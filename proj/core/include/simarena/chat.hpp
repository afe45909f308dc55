#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simarena/http.hpp"

namespace simarena {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct DecodingConfig {
  double temperature = 0.85;
  double repetition_penalty = 1.2;
  int max_tokens = 80;
  std::optional<std::int64_t> seed;

  void validate() const;  // throws DataError
  friend bool operator==(const DecodingConfig&, const DecodingConfig&) = default;
};

void to_json(nlohmann::json& j, const DecodingConfig& d);
void from_json(const nlohmann::json& j, DecodingConfig& d);

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  DecodingConfig decoding;

  // {model, messages, temperature, max_tokens, repetition_penalty, seed?}
  nlohmann::json to_json() const;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the first choice's message content, untrimmed.
  virtual std::string complete(const ChatRequest& request) = 0;
};

// OpenAI-style chat-completions endpoint.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(std::string url, HttpOptions opts);

  std::string complete(const ChatRequest& request) override;

 private:
  std::string url_;
  HttpOptions opts_;
};

}  // namespace simarena
