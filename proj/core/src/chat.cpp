#include "simarena/chat.hpp"

#include "simarena/error.hpp"

namespace simarena {

void DecodingConfig::validate() const {
  if (!(temperature >= 0.0)) throw DataError("decoding: temperature must be >= 0");
  if (!(repetition_penalty >= 1.0)) throw DataError("decoding: repetition_penalty must be >= 1");
  if (max_tokens < 1) throw DataError("decoding: max_tokens must be >= 1");
}

void to_json(nlohmann::json& j, const DecodingConfig& d) {
  j = nlohmann::json{{"temperature", d.temperature},
                     {"repetition_penalty", d.repetition_penalty},
                     {"max_tokens", d.max_tokens}};
  if (d.seed) j["seed"] = *d.seed;
}

void from_json(const nlohmann::json& j, DecodingConfig& d) {
  d = DecodingConfig{};
  d.temperature = j.value("temperature", d.temperature);
  d.repetition_penalty = j.value("repetition_penalty", d.repetition_penalty);
  d.max_tokens = j.value("max_tokens", d.max_tokens);
  if (j.contains("seed") && !j["seed"].is_null()) d.seed = j["seed"].get<std::int64_t>();
}

nlohmann::json ChatRequest::to_json() const {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json j{{"model", model},
                   {"messages", std::move(msgs)},
                   {"temperature", decoding.temperature},
                   {"max_tokens", decoding.max_tokens},
                   {"repetition_penalty", decoding.repetition_penalty}};
  if (decoding.seed) j["seed"] = *decoding.seed;
  return j;
}

HttpChatClient::HttpChatClient(std::string url, HttpOptions opts)
    : url_(std::move(url)), opts_(std::move(opts)) {
  parse_url(url_);
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  const auto res = post_json(url_, request.to_json(), opts_);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(url_ + ": unexpected chat response shape", false);
  }
}

}  // namespace simarena
