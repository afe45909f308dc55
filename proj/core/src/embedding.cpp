#include "simarena/embedding.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <set>

#include "simarena/error.hpp"
#include "simarena/hash.hpp"
#include "simarena/jsonl.hpp"
#include "simarena/text.hpp"

namespace simarena {

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DataError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DataError("cosine: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(std::span<const float>(a.values), std::span<const float>(b.values));
}

void require_nonempty_texts(const std::vector<std::string>& texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (trim(texts[i]).empty()) throw DataError("embed: empty text at position " + std::to_string(i));
  }
}

HttpEmbedder::HttpEmbedder(HttpEmbedderConfig cfg) : cfg_(std::move(cfg)) {
  parse_url(cfg_.url);
  if (cfg_.batch_size == 0) cfg_.batch_size = 1;
  if (cfg_.max_in_flight == 0) cfg_.max_in_flight = 1;
}

std::size_t HttpEmbedder::requests_sent() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(const std::vector<std::string>& batch) {
  {
    std::lock_guard lock(mu_);
    ++requests_;
  }
  const json body{{"model", cfg_.model}, {"input", batch}};
  const json res = post_json(cfg_.url, body, cfg_.http);
  std::vector<EmbeddingVector> out(batch.size());
  std::vector<bool> seen(batch.size(), false);
  try {
    for (const auto& d : res.at("data")) {
      const auto idx = d.at("index").get<std::size_t>();
      if (idx >= batch.size() || seen[idx]) throw EndpointError("embedding response: bad index", false);
      seen[idx] = true;
      out[idx].values = d.at("embedding").get<std::vector<float>>();
      out[idx].model_id = cfg_.model;
    }
  } catch (const json::exception& e) {
    throw EndpointError(std::string("embedding response: ") + e.what(), false);
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!seen[i]) throw EndpointError("embedding response missing index " + std::to_string(i), false);
    if (out[i].values.size() != out[0].values.size()) {
      throw EndpointError("embedding response: inconsistent dimensions", false);
    }
    for (float v : out[i].values) {
      if (!std::isfinite(v)) throw EndpointError("embedding response: non-finite value", false);
    }
  }
  return out;
}

std::vector<EmbeddingVector> HttpEmbedder::embed(const std::vector<std::string>& texts) {
  require_nonempty_texts(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  std::vector<std::vector<std::string>> batches;
  for (std::size_t i = 0; i < texts.size(); i += cfg_.batch_size) {
    const auto end = std::min(texts.size(), i + cfg_.batch_size);
    batches.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(i),
                         texts.begin() + static_cast<std::ptrdiff_t>(end));
  }
  // Waves of at most max_in_flight concurrent requests, reassembled in order.
  for (std::size_t w = 0; w < batches.size(); w += cfg_.max_in_flight) {
    const auto wave_end = std::min(batches.size(), w + cfg_.max_in_flight);
    std::vector<std::future<std::vector<EmbeddingVector>>> inflight;
    for (std::size_t b = w; b < wave_end; ++b) {
      inflight.push_back(std::async(std::launch::async, [this, &batches, b] {
        return embed_batch(batches[b]);
      }));
    }
    for (auto& f : inflight) {
      auto part = f.get();
      for (auto& v : part) out.push_back(std::move(v));
    }
  }
  if (!out.empty()) {
    for (const auto& v : out) {
      if (v.dimension() != out.front().dimension()) {
        throw EndpointError("embedding endpoint returned mixed dimensions", false);
      }
    }
  }
  return out;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw DataError("HashingEmbedder: dimension must be > 0");
}

std::string HashingEmbedder::model_id() const {
  return "hashing-" + std::to_string(dimension_);
}

EmbeddingVector HashingEmbedder::embed_one(std::string_view text) const {
  EmbeddingVector v;
  v.model_id = model_id();
  v.values.assign(dimension_, 0.0f);
  auto bump = [&](std::string_view feature, float weight) {
    const std::uint64_t h = fnv1a64(feature);
    const std::size_t slot = h % dimension_;
    const float sign = ((h >> 63) & 1U) ? -1.0f : 1.0f;
    v.values[slot] += sign * weight;
  };
  const TokenSeq toks = tokenize(text);
  for (const auto& t : toks.tokens) bump(t, 1.0f);
  for (std::size_t i = 1; i < toks.tokens.size(); ++i) {
    bump(toks.tokens[i - 1] + "\x1f" + toks.tokens[i], 0.5f);
  }
  double norm = 0.0;
  for (float x : v.values) norm += static_cast<double>(x) * x;
  if (norm == 0.0) {
    // Texts without tokens (punctuation only) still need a usable vector.
    bump(std::string("\x1e") + std::string(text), 1.0f);
    norm = 1.0;
  }
  const auto inv = static_cast<float>(1.0 / std::sqrt(norm));
  for (float& x : v.values) x *= inv;
  return v;
}

std::vector<EmbeddingVector> HashingEmbedder::embed(const std::vector<std::string>& texts) {
  require_nonempty_texts(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

namespace {

std::string cache_key(const std::string& model, const std::string& text) {
  return model + '\0' + sha256_hex(text);
}

}  // namespace

CachedEmbedder::CachedEmbedder(Embedder& inner, std::optional<std::filesystem::path> cache_file)
    : inner_(inner), cache_file_(std::move(cache_file)) {
  if (cache_file_ && std::filesystem::exists(*cache_file_)) {
    for_each_jsonl(*cache_file_, [&](std::size_t line_no, const json& rec) {
      try {
        cache_[rec.at("model").get<std::string>() + '\0' + rec.at("key").get<std::string>()] =
            rec.at("embedding").get<std::vector<float>>();
      } catch (const json::exception& e) {
        throw ParseError(cache_file_->string(), line_no, e.what());
      }
    });
  }
}

std::vector<EmbeddingVector> CachedEmbedder::embed(const std::vector<std::string>& texts) {
  require_nonempty_texts(texts);
  const std::string model = inner_.model_id();
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::string> missing;
  std::set<std::string> missing_seen;
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto it = cache_.find(cache_key(model, texts[i]));
      if (it != cache_.end()) {
        out[i] = EmbeddingVector{it->second, model};
        ++hits_;
      } else if (missing_seen.insert(texts[i]).second) {
        missing.push_back(texts[i]);
      }
    }
  }
  if (missing.empty()) return out;

  auto fresh = inner_.embed(missing);
  if (fresh.size() != missing.size()) throw EndpointError("embedder returned wrong count", false);

  std::lock_guard lock(mu_);
  std::unique_ptr<JsonlWriter> writer;
  if (cache_file_) writer = std::make_unique<JsonlWriter>(*cache_file_, JsonlWriter::Mode::kAppend);
  for (std::size_t j = 0; j < missing.size(); ++j) {
    const std::string hash = sha256_hex(missing[j]);
    auto [it, inserted] = cache_.emplace(model + '\0' + hash, fresh[j].values);
    if (inserted) {
      ++misses_;
      if (writer) writer->write(json{{"model", model}, {"key", hash}, {"embedding", it->second}});
    }
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (out[i].values.empty()) out[i] = EmbeddingVector{cache_.at(cache_key(model, texts[i])), model};
  }
  return out;
}

std::size_t CachedEmbedder::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t CachedEmbedder::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

std::size_t CachedEmbedder::size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

}  // namespace simarena
