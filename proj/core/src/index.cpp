#include "simarena/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "simarena/error.hpp"
#include "simarena/jsonl.hpp"

namespace simarena {

std::string_view to_string(ItemKind k) { return k == ItemKind::kPair ? "pair" : "memory_note"; }

ItemKind parse_item_kind(std::string_view s) {
  if (s == "pair") return ItemKind::kPair;
  if (s == "memory_note") return ItemKind::kMemoryNote;
  throw DataError("unknown item kind '" + std::string(s) + "'");
}

void RetrievalQuery::validate() const {
  if (k < 1) throw DataError("retrieval: k must be >= 1");
  if (!(min_cosine >= 0.0 && min_cosine <= 1.0)) throw DataError("retrieval: min_cosine must be in [0, 1]");
  if (!(dedup_cosine > min_cosine && dedup_cosine <= 1.0)) {
    throw DataError("retrieval: dedup_cosine must be in (min_cosine, 1]");
  }
  if (window && window->years_back < 1) throw DataError("retrieval: window years_back must be >= 1");
}

std::size_t VectorIndex::add(std::vector<IndexedItem> items) {
  if (items.empty()) return 0;
  std::size_t dim = dimension_;
  std::string model = model_id_;
  std::set<std::string> batch_ids;
  for (const auto& it : items) {
    if (by_id_.count(it.item_id) || !batch_ids.insert(it.item_id).second) {
      throw DataError("index: duplicate item id '" + it.item_id + "'");
    }
    if (dim == 0 && model.empty()) {
      dim = it.vector.dimension();
      model = it.vector.model_id;
    }
    if (it.vector.dimension() != dim) {
      throw DataError("index: item '" + it.item_id + "' has dimension " +
                      std::to_string(it.vector.dimension()) + ", index has " + std::to_string(dim));
    }
    if (it.vector.model_id != model) {
      throw DataError("index: item '" + it.item_id + "' embedded with '" + it.vector.model_id +
                      "', index uses '" + model + "'");
    }
    double norm = 0.0;
    for (float v : it.vector.values) {
      if (!std::isfinite(v)) throw DataError("index: non-finite value in '" + it.item_id + "'");
      norm += static_cast<double>(v) * v;
    }
    if (norm == 0.0) throw DataError("index: zero vector for '" + it.item_id + "'");
  }
  dimension_ = dim;
  model_id_ = model;
  for (auto& it : items) {
    by_id_.emplace(it.item_id, items_.size());
    items_.push_back(std::move(it));
  }
  return items.size();
}

const IndexedItem* VectorIndex::find(const std::string& item_id) const {
  auto it = by_id_.find(item_id);
  return it == by_id_.end() ? nullptr : &items_[it->second];
}

std::vector<RetrievalResult> VectorIndex::search(const EmbeddingVector& query_vector,
                                                 const RetrievalQuery& q) const {
  q.validate();
  if (items_.empty()) return {};
  if (query_vector.dimension() != dimension_) {
    throw DataError("query: dimension " + std::to_string(query_vector.dimension()) +
                    " does not match index dimension " + std::to_string(dimension_));
  }

  std::optional<std::pair<Timestamp, Timestamp>> bounds;
  if (q.window) {
    Timestamp ref = 0;
    if (q.window->reference_ts) {
      ref = *q.window->reference_ts;
    } else {
      for (const auto& it : items_) ref = std::max(ref, it.timestamp);
    }
    bounds.emplace(ref - static_cast<Timestamp>(q.window->years_back) * kSecondsPerYear, ref);
  }

  struct Candidate {
    std::size_t idx;
    double score;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& it = items_[i];
    if (bounds && (it.timestamp < bounds->first || it.timestamp > bounds->second)) continue;
    const double s = cosine(query_vector, it.vector);
    if (s < q.min_cosine) continue;
    candidates.push_back({i, s});
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return items_[a.idx].item_id < items_[b.idx].item_id;
  });

  std::vector<Candidate> kept;
  for (const auto& c : candidates) {
    if (kept.size() == q.k) break;
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const Candidate& k) {
      return cosine(items_[c.idx].vector, items_[k.idx].vector) >= q.dedup_cosine;
    });
    if (!duplicate) kept.push_back(c);
  }

  std::vector<RetrievalResult> out;
  out.reserve(kept.size());
  for (const auto& c : kept) out.push_back({items_[c.idx], c.score});
  return out;
}

std::vector<RetrievalResult> VectorIndex::query(const RetrievalQuery& q, Embedder& embedder) const {
  q.validate();
  if (items_.empty()) return {};
  auto vecs = embedder.embed({q.text});
  return search(vecs.at(0), q);
}

void VectorIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  static_assert(sizeof(float) == 4);
  std::string blob;
  blob.reserve(items_.size() * dimension_ * 4);
  std::string meta;
  for (const auto& it : items_) {
    for (float v : it.vector.values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
    meta += json{{"item_id", it.item_id},
                 {"text", it.text},
                 {"timestamp", it.timestamp},
                 {"kind", to_string(it.kind)}}
                .dump();
    meta.push_back('\n');
  }
  write_file_atomic(dir / "vectors.f32", blob);
  write_file_atomic(dir / "items.jsonl", meta);
  const json manifest{{"model_id", model_id_},
                      {"dimension", dimension_},
                      {"count", items_.size()},
                      {"vector_format", "f32le"}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

VectorIndex VectorIndex::load(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw ParseError((dir / "manifest.json").string(), 1, e.what());
  }
  const auto count = manifest.at("count").get<std::size_t>();
  const auto dim = manifest.at("dimension").get<std::size_t>();
  const auto model = manifest.at("model_id").get<std::string>();
  const std::string blob = read_file(dir / "vectors.f32");
  if (blob.size() != count * dim * 4) {
    throw DataError("index: vectors.f32 size does not match manifest in " + dir.string());
  }
  std::vector<IndexedItem> items;
  for_each_jsonl(dir / "items.jsonl", [&](std::size_t line_no, const json& rec) {
    IndexedItem it;
    try {
      it.item_id = rec.at("item_id").get<std::string>();
      it.text = rec.at("text").get<std::string>();
      it.timestamp = rec.at("timestamp").get<Timestamp>();
      it.kind = parse_item_kind(rec.at("kind").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError((dir / "items.jsonl").string(), line_no, e.what());
    }
    items.push_back(std::move(it));
  });
  if (items.size() != count) throw DataError("index: items.jsonl count does not match manifest");
  for (std::size_t i = 0; i < count; ++i) {
    auto& v = items[i].vector;
    v.model_id = model;
    v.values.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t off = (i * dim + d) * 4;
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[off + b])) << (8 * b);
      }
      v.values[d] = std::bit_cast<float>(bits);
    }
  }
  VectorIndex idx;
  idx.add(std::move(items));
  return idx;
}

std::string render_pair(const ConversationPair& pair) {
  return "Q: " + pair.prompt() + "\nA: " + pair.response();
}

VectorIndex build_pair_index(const std::vector<ConversationPair>& pairs, Embedder& embedder) {
  std::vector<std::string> texts;
  texts.reserve(pairs.size());
  for (const auto& p : pairs) texts.push_back(render_pair(p));
  auto vecs = embedder.embed(texts);
  std::vector<IndexedItem> items;
  items.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    items.push_back(IndexedItem{pairs[i].pair_id, texts[i], std::move(vecs[i]), pairs[i].timestamp,
                                ItemKind::kPair});
  }
  VectorIndex idx;
  idx.add(std::move(items));
  return idx;
}

}  // namespace simarena
