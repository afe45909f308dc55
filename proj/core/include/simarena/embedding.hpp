#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simarena/http.hpp"

namespace simarena {

struct EmbeddingVector {
  std::vector<float> values;
  std::string model_id;

  std::size_t dimension() const { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// dot(a, b) / (|a| |b|), accumulated in double. Throws DataError on a
// dimension mismatch or a zero-norm operand.
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Throws DataError if any text is empty. Called before any network traffic.
void require_nonempty_texts(const std::vector<std::string>& texts);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string model_id() const = 0;
  // Output order matches input order.
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

inline constexpr std::string_view kDefaultEmbeddingModel = "bge-m3";

struct HttpEmbedderConfig {
  std::string url;  // full endpoint URL, e.g. http://host:8000/v1/embeddings
  std::string model{kDefaultEmbeddingModel};
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
  HttpOptions http;
};

// Client for {model, input: [...]} -> {data: [{index, embedding}]} endpoints.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(HttpEmbedderConfig cfg);

  std::string model_id() const override { return cfg_.model; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

  std::size_t requests_sent() const;

 private:
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& batch);

  HttpEmbedderConfig cfg_;
  mutable std::mutex mu_;
  std::size_t requests_ = 0;
};

// Offline embedder: L2-normalized feature hashing of tokens and character
// bigrams. Similar texts get similar vectors; identical texts identical ones.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256);

  std::string model_id() const override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  EmbeddingVector embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
};

// Memoizes another embedder, keyed by (model_id, sha256(text)). With a cache
// file, entries are loaded on construction and new ones appended as they are
// computed.
class CachedEmbedder : public Embedder {
 public:
  explicit CachedEmbedder(Embedder& inner,
                          std::optional<std::filesystem::path> cache_file = std::nullopt);

  std::string model_id() const override { return inner_.model_id(); }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

  std::size_t hits() const;
  std::size_t misses() const;
  std::size_t size() const;

 private:
  Embedder& inner_;
  std::optional<std::filesystem::path> cache_file_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<float>> cache_;  // key: model_id + '\0' + sha256
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace simarena
