#include <gtest/gtest.h>

#include <map>

#include "simarena/chat.hpp"
#include "simarena/error.hpp"
#include "simarena/memory.hpp"
#include "temp_dir.hpp"

using namespace simarena;

namespace {

ConversationPair pair_of(std::string id, std::string prompt, std::string response, Timestamp ts = 1700000000) {
  ConversationPair p;
  p.pair_id = std::move(id);
  p.prompt_turn.text = std::move(prompt);
  p.response_turn.text = std::move(response);
  p.timestamp = ts;
  return p;
}

// Vectors chosen per response text, so link geometry is explicit.
class TableEmbedder : public Embedder {
 public:
  std::string model_id() const override { return "table"; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    for (const auto& t : texts) {
      auto it = std::find_if(table.begin(), table.end(), [&](const auto& kv) { return t.find(kv.first) != std::string::npos; });
      out.push_back({it == table.end() ? std::vector<float>{0, 0, 1} : it->second, "table"});
    }
    return out;
  }
  std::vector<std::pair<std::string, std::vector<float>>> table;
};

class ScriptedChat : public ChatClient {
 public:
  std::string complete(const ChatRequest& req) override {
    last = req;
    if (fail) throw EndpointError("down", true);
    return reply;
  }
  std::string reply;
  bool fail = false;
  ChatRequest last;
};

}  // namespace

TEST(HeuristicAttributes, KeywordsContextTags) {
  // 2023-11-14T22:13:20Z
  const auto attrs = heuristic_attributes(pair_of("p", "Do you like hiking?", "Hiking is great. Mountains and hiking trails!", 1700000000));
  EXPECT_EQ(attrs.keywords, (std::vector<std::string>{"hiking", "like", "great"}));
  EXPECT_EQ(attrs.context_summary, "Hiking is great.");
  EXPECT_EQ(attrs.tags, (std::vector<std::string>{"year:2023", "form:question"}));
}

TEST(HeuristicAttributes, CjkAndStatement) {
  const auto attrs = heuristic_attributes(pair_of("p", "今天火锅", "火锅好吃。明天再去", 0));
  EXPECT_EQ(attrs.keywords, (std::vector<std::string>{"天", "火", "锅"}));
  EXPECT_EQ(attrs.context_summary, "火锅好吃。");
  EXPECT_EQ(attrs.tags, (std::vector<std::string>{"year:1970", "form:statement"}));
}

TEST(MemoryNote, Render) {
  MemoryNote n;
  n.content = "Q: a\nA: b";
  n.keywords = {"x", "y"};
  n.context_summary = "ctx";
  EXPECT_EQ(n.render(), "Q: a\nA: b\nKeywords: x, y\nContext: ctx");
}

TEST(MemoryStore, LinksTopKAboveThresholdWithBackLinks) {
  TableEmbedder emb;
  emb.table = {{"r0", {1, 0, 0}}, {"r1", {0.9f, 0.1f, 0}}, {"r2", {0.8f, 0.2f, 0}},
               {"r3", {0.7f, 0.3f, 0}}, {"r4", {0, 1, 0}}, {"r5", {0.95f, 0.05f, 0}}};
  MemoryStore store(emb, NoteConstructionConfig{});
  store.add_notes({pair_of("0", "q", "r0"), pair_of("1", "q", "r1"), pair_of("2", "q", "r2"),
                   pair_of("3", "q", "r3"), pair_of("4", "q", "r4")});
  const auto& n5 = store.add_note(pair_of("5", "q", "r5"));
  EXPECT_EQ(n5.links.size(), 3u);
  EXPECT_EQ(n5.links, (std::vector<std::string>{"note-0", "note-1", "note-2"}));
  // r4 is orthogonal to everything before it.
  EXPECT_TRUE(store.find("note-4")->links.empty());
  // Symmetry: every link has its back-link.
  for (const auto& n : store.notes()) {
    for (const auto& l : n.links) {
      const auto& back = store.find(l)->links;
      EXPECT_NE(std::find(back.begin(), back.end(), n.note_id), back.end()) << n.note_id << " -> " << l;
    }
  }
}

TEST(MemoryStore, BatchEqualsIncremental) {
  TableEmbedder emb;
  emb.table = {{"r0", {1, 0, 0}}, {"r1", {0.9f, 0.1f, 0}}, {"r2", {0.6f, 0.8f, 0}}};
  std::vector<ConversationPair> pairs{pair_of("0", "q", "r0"), pair_of("1", "q", "r1"), pair_of("2", "q", "r2")};
  MemoryStore a(emb, {}), b(emb, {});
  a.add_notes(pairs);
  for (const auto& p : pairs) b.add_note(p);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.notes()[i].links, b.notes()[i].links);
    EXPECT_EQ(a.notes()[i].keywords, b.notes()[i].keywords);
  }
}

TEST(MemoryStore, DuplicateNoteRejected) {
  TableEmbedder emb;
  MemoryStore store(emb, {});
  store.add_note(pair_of("0", "q", "r"));
  EXPECT_THROW(store.add_note(pair_of("0", "q", "r")), DataError);
}

TEST(MemoryStore, RetrieveUsesRenderedNotes) {
  TableEmbedder emb;
  emb.table = {{"hotpot", {1, 0, 0}}, {"rain", {0, 1, 0}}};
  MemoryStore store(emb, {});
  store.add_notes({pair_of("0", "dinner?", "hotpot tonight"), pair_of("1", "weather?", "rain again")});
  RetrievalQuery q;
  q.text = "hotpot";
  const auto res = store.retrieve(q);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].item.item_id, "note-0");
  EXPECT_EQ(res[0].item.kind, ItemKind::kMemoryNote);
  EXPECT_NE(res[0].item.text.find("Keywords: "), std::string::npos);
}

TEST(MemoryStore, LlmAttributesAndFallback) {
  TableEmbedder emb;
  ScriptedChat chat;
  chat.reply = R"(Sure: {"keywords": ["dinner", "hotpot"], "tags": ["food"], "context": "Planning dinner."})";
  ChatAttributeExtractor extractor(chat, "attr-model");
  NoteConstructionConfig cfg;
  cfg.use_llm_attributes = true;
  MemoryStore store(emb, cfg, &extractor);
  const auto& n = store.add_note(pair_of("0", "dinner?", "hotpot"));
  EXPECT_EQ(n.keywords, (std::vector<std::string>{"dinner", "hotpot"}));
  EXPECT_EQ(n.tags, (std::vector<std::string>{"food"}));
  EXPECT_EQ(chat.last.model, "attr-model");
  EXPECT_TRUE(store.warnings().empty());

  chat.fail = true;
  const auto& m = store.add_note(pair_of("1", "weather?", "rain"));
  EXPECT_EQ(m.keywords, heuristic_attributes(pair_of("1", "weather?", "rain")).keywords);
  ASSERT_EQ(store.warnings().size(), 1u);
  EXPECT_NE(store.warnings()[0].find("note-1"), std::string::npos);

  chat.fail = false;
  chat.reply = "no json here";
  store.add_note(pair_of("2", "x", "y"));
  EXPECT_EQ(store.warnings().size(), 2u);
}

TEST(MemoryStore, SaveLoadRoundTrip) {
  TempDir dir;
  TableEmbedder emb;
  emb.table = {{"r0", {1, 0, 0}}, {"r1", {0.9f, 0.1f, 0}}};
  MemoryStore store(emb, {});
  store.add_notes({pair_of("0", "q", "r0"), pair_of("1", "q", "r1")});
  store.save(dir / "mem");
  const auto back = MemoryStore::load(dir / "mem", emb, {});
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.notes()[1].links, store.notes()[1].links);
  EXPECT_EQ(back.notes()[0].links, store.notes()[0].links);
  EXPECT_EQ(back.notes()[0].vector, store.notes()[0].vector);
}

TEST(NoteConstructionConfig, Validation) {
  NoteConstructionConfig cfg;
  EXPECT_EQ(cfg.k_link, 3);
  EXPECT_DOUBLE_EQ(cfg.link_min_cosine, 0.5);
  cfg.k_link = -1;
  EXPECT_THROW(cfg.validate(), DataError);
}
