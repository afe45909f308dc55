#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "simarena/corpus.hpp"
#include "simarena/embedding.hpp"

namespace simarena {

enum class ItemKind { kPair, kMemoryNote };

std::string_view to_string(ItemKind k);
ItemKind parse_item_kind(std::string_view s);

struct IndexedItem {
  std::string item_id;
  std::string text;
  EmbeddingVector vector;
  Timestamp timestamp = 0;
  ItemKind kind = ItemKind::kPair;
};

struct RetrievalQuery {
  std::string text;
  std::size_t k = 5;
  double min_cosine = 0.35;
  double dedup_cosine = 0.92;
  std::optional<TemporalWindow> window;

  void validate() const;  // throws DataError
};

struct RetrievalResult {
  IndexedItem item;
  double score = 0.0;
};

// Exact full-scan cosine index. Build by add(), then treat as read-only:
// search() and query() are const and safe to call concurrently.
class VectorIndex {
 public:
  VectorIndex() = default;

  // All-or-nothing: validates every item (unique ids, shared model and
  // dimension, finite values, nonzero norm) before inserting any.
  std::size_t add(std::vector<IndexedItem> items);

  // Pipeline: window filter, drop score < min_cosine, sort by score desc
  // (ties by item_id asc), greedy near-duplicate suppression against kept
  // results, truncate to k.
  std::vector<RetrievalResult> search(const EmbeddingVector& query_vector,
                                      const RetrievalQuery& q) const;
  std::vector<RetrievalResult> query(const RetrievalQuery& q, Embedder& embedder) const;

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t dimension() const { return dimension_; }
  const std::string& model_id() const { return model_id_; }
  const std::vector<IndexedItem>& items() const { return items_; }
  const IndexedItem* find(const std::string& item_id) const;

  // Directory layout: manifest.json, vectors.f32 (little-endian float32,
  // row-major count x dimension), items.jsonl.
  void save(const std::filesystem::path& dir) const;
  static VectorIndex load(const std::filesystem::path& dir);

 private:
  std::vector<IndexedItem> items_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t dimension_ = 0;
  std::string model_id_;
};

// "Q: <prompt>\nA: <response>", the unit indexed for retrieval.
std::string render_pair(const ConversationPair& pair);

VectorIndex build_pair_index(const std::vector<ConversationPair>& pairs, Embedder& embedder);

}  // namespace simarena
