#pragma once

// Agentic memory store: each conversation pair becomes a structured note
// (keywords, tags, a short context line) linked to its most similar
// predecessors. Notes are never rewritten after insertion apart from gaining
// back-links; there is no note evolution.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "simarena/chat.hpp"
#include "simarena/corpus.hpp"
#include "simarena/embedding.hpp"
#include "simarena/index.hpp"

namespace simarena {

struct MemoryNote {
  std::string note_id;
  std::string content;
  std::string context_summary;
  std::vector<std::string> keywords;
  std::vector<std::string> tags;
  Timestamp timestamp = 0;
  EmbeddingVector vector;
  std::vector<std::string> links;

  // Content plus keywords and context: the text handed to the generator.
  std::string render() const;
};

struct NoteConstructionConfig {
  bool use_llm_attributes = false;
  int k_link = 3;
  double link_min_cosine = 0.5;

  void validate() const;
};

struct NoteAttributes {
  std::vector<std::string> keywords;
  std::vector<std::string> tags;
  std::string context_summary;
};

// Top-3 term-frequency content words (ties by first occurrence), the first
// sentence of the response as context, and year / prompt-form tags.
NoteAttributes heuristic_attributes(const ConversationPair& pair);

class AttributeExtractor {
 public:
  virtual ~AttributeExtractor() = default;
  // Throws on failure; the store falls back to the heuristic.
  virtual NoteAttributes extract(const ConversationPair& pair) = 0;
};

// Asks a chat endpoint for {"keywords": [...], "tags": [...], "context": "..."}.
class ChatAttributeExtractor : public AttributeExtractor {
 public:
  ChatAttributeExtractor(ChatClient& client, std::string model);

  NoteAttributes extract(const ConversationPair& pair) override;

 private:
  ChatClient& client_;
  std::string model_;
};

class MemoryStore {
 public:
  MemoryStore(Embedder& embedder, NoteConstructionConfig cfg,
              AttributeExtractor* extractor = nullptr);

  const MemoryNote& add_note(const ConversationPair& pair);
  // Batch insert. Embeds all contents in one call, then links in order, so
  // the result equals calling add_note() for each pair.
  void add_notes(const std::vector<ConversationPair>& pairs);

  // Up to k_link most similar existing notes (cosine >= link_min_cosine),
  // most similar first. Does not modify the store.
  std::vector<std::string> link_candidates(const MemoryNote& note) const;

  std::vector<RetrievalResult> retrieve(const RetrievalQuery& q) const;

  std::size_t size() const { return notes_.size(); }
  const std::vector<MemoryNote>& notes() const { return notes_; }
  const MemoryNote* find(const std::string& note_id) const;
  const std::vector<std::string>& warnings() const { return warnings_; }
  const VectorIndex& index() const { return index_; }

  // notes.jsonl plus the note index directory (index/).
  void save(const std::filesystem::path& dir) const;
  static MemoryStore load(const std::filesystem::path& dir, Embedder& embedder,
                          NoteConstructionConfig cfg);

 private:
  MemoryNote make_note(const ConversationPair& pair, EmbeddingVector vec);
  void insert(MemoryNote note);

  Embedder* embedder_;
  NoteConstructionConfig cfg_;
  AttributeExtractor* extractor_;
  std::vector<MemoryNote> notes_;
  std::unordered_map<std::string, std::size_t> by_id_;
  VectorIndex index_;
  std::vector<std::string> warnings_;
};

}  // namespace simarena
