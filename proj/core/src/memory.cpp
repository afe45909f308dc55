#include "simarena/memory.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <unordered_map>

#include "simarena/error.hpp"
#include "simarena/jsonl.hpp"
#include "simarena/text.hpp"

namespace simarena {

namespace {

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",     "about", "after", "again", "all",   "also",  "am",    "an",    "and",   "any",
      "are",   "as",    "at",    "be",    "been",  "but",   "by",    "can",   "could", "did",
      "do",    "does",  "don",   "for",   "from",  "get",   "got",   "had",   "has",   "have",
      "he",    "her",   "him",   "his",   "how",   "i",     "if",    "im",    "in",    "into",
      "is",    "it",    "its",   "just",  "ll",    "me",    "more",  "my",    "no",    "not",
      "now",   "of",    "oh",    "ok",    "on",    "one",   "or",    "our",   "out",   "really",
      "re",    "s",     "so",    "some",  "t",     "than",  "that",  "the",   "their", "them",
      "then",  "there", "they",  "this",  "to",    "too",   "up",    "us",    "ve",    "very",
      "was",   "we",    "well",  "were",  "what",  "when",  "where", "which", "who",   "why",
      "will",  "with",  "would", "yeah",  "yes",   "you",   "your",  "的",    "了",    "是",
      "我",    "你",    "他",    "她",    "它",    "们",    "在",    "有",    "和",    "就",
      "不",    "也",    "都",    "这",    "那",    "吗",    "呢",    "吧",    "啊",    "嗯",
      "哦",    "个",    "一",    "还",    "要",    "会",    "到",    "说",    "去",    "没"};
  return words;
}

bool is_content_word(const std::string& tok) {
  if (stopwords().count(tok)) return false;
  const std::u32string cps = utf8_decode(tok);
  if (cps.size() == 1 && !is_cjk(cps[0])) return false;
  return !std::all_of(cps.begin(), cps.end(), [](char32_t c) { return c >= U'0' && c <= U'9'; });
}

std::string first_sentence(const std::string& text) {
  const std::u32string cps = utf8_decode(trim(text));
  std::u32string out;
  for (char32_t c : cps) {
    if (c == U'\n') break;
    out.push_back(c);
    if (c == U'.' || c == U'!' || c == U'?' || c == U'。' || c == U'！' || c == U'？') break;
  }
  return trim(utf8_encode(out));
}

int year_of(Timestamp ts) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(sys_seconds{seconds{ts}});
  return static_cast<int>(year_month_day{days}.year());
}

}  // namespace

std::string MemoryNote::render() const {
  std::string out = content;
  out += "\nKeywords: ";
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    if (i) out += ", ";
    out += keywords[i];
  }
  if (!context_summary.empty()) out += "\nContext: " + context_summary;
  return out;
}

void NoteConstructionConfig::validate() const {
  if (k_link < 0) throw DataError("memory: k_link must be >= 0");
  if (!(link_min_cosine >= -1.0 && link_min_cosine <= 1.0)) {
    throw DataError("memory: link_min_cosine must be in [-1, 1]");
  }
}

NoteAttributes heuristic_attributes(const ConversationPair& pair) {
  NoteAttributes attrs;
  std::unordered_map<std::string, int> freq;
  std::vector<std::string> order;
  for (const auto* text : {&pair.prompt(), &pair.response()}) {
    for (auto& tok : tokenize(*text).tokens) {
      if (!is_content_word(tok)) continue;
      if (freq[tok]++ == 0) order.push_back(tok);
    }
  }
  // stable_sort keeps first-occurrence order among equal counts.
  std::stable_sort(order.begin(), order.end(),
                   [&](const std::string& a, const std::string& b) { return freq[a] > freq[b]; });
  for (std::size_t i = 0; i < order.size() && i < 3; ++i) attrs.keywords.push_back(order[i]);
  if (attrs.keywords.empty()) {
    const TokenSeq any = tokenize(pair.response());
    attrs.keywords.push_back(any.empty() ? std::string("misc") : any.tokens.front());
  }
  attrs.context_summary = first_sentence(pair.response());
  attrs.tags.push_back("year:" + std::to_string(year_of(pair.timestamp)));
  const std::string& p = pair.prompt();
  const bool question = p.find('?') != std::string::npos || p.find("\xEF\xBC\x9F") != std::string::npos;
  attrs.tags.push_back(question ? "form:question" : "form:statement");
  return attrs;
}

ChatAttributeExtractor::ChatAttributeExtractor(ChatClient& client, std::string model)
    : client_(client), model_(std::move(model)) {}

NoteAttributes ChatAttributeExtractor::extract(const ConversationPair& pair) {
  ChatRequest req;
  req.model = model_;
  req.decoding.temperature = 0.0;
  req.decoding.repetition_penalty = 1.0;
  req.decoding.max_tokens = 200;
  req.messages = {
      {"system",
       "You organize a personal memory archive. Given one exchange, return JSON only: "
       "{\"keywords\": [up to 5 salient words], \"tags\": [up to 3 topic tags], "
       "\"context\": \"one sentence describing the situation\"}"},
      {"user", render_pair(pair)}};
  const std::string reply = client_.complete(req);
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw DataError("attribute extraction: no JSON object in reply");
  }
  const json j = json::parse(reply.substr(open, close - open + 1));
  NoteAttributes attrs;
  attrs.keywords = j.at("keywords").get<std::vector<std::string>>();
  attrs.tags = j.value("tags", std::vector<std::string>{});
  attrs.context_summary = j.value("context", std::string{});
  attrs.keywords.erase(std::remove_if(attrs.keywords.begin(), attrs.keywords.end(),
                                      [](const std::string& k) { return trim(k).empty(); }),
                       attrs.keywords.end());
  if (attrs.keywords.empty()) throw DataError("attribute extraction: empty keyword list");
  return attrs;
}

MemoryStore::MemoryStore(Embedder& embedder, NoteConstructionConfig cfg,
                         AttributeExtractor* extractor)
    : embedder_(&embedder), cfg_(cfg), extractor_(extractor) {
  cfg_.validate();
}

MemoryNote MemoryStore::make_note(const ConversationPair& pair, EmbeddingVector vec) {
  MemoryNote note;
  note.note_id = "note-" + pair.pair_id;
  note.content = render_pair(pair);
  note.timestamp = pair.timestamp;
  note.vector = std::move(vec);

  NoteAttributes attrs;
  bool have = false;
  if (cfg_.use_llm_attributes && extractor_ != nullptr) {
    try {
      attrs = extractor_->extract(pair);
      have = true;
    } catch (const std::exception& e) {
      warnings_.push_back(note.note_id + ": attribute extraction failed (" + e.what() +
                          "); using heuristic attributes");
    }
  } else if (cfg_.use_llm_attributes) {
    warnings_.push_back(note.note_id + ": no attribute extractor configured; using heuristic attributes");
  }
  if (!have) attrs = heuristic_attributes(pair);
  note.keywords = std::move(attrs.keywords);
  note.tags = std::move(attrs.tags);
  note.context_summary = std::move(attrs.context_summary);
  return note;
}

std::vector<std::string> MemoryStore::link_candidates(const MemoryNote& note) const {
  if (cfg_.k_link == 0) return {};
  std::vector<std::pair<double, const MemoryNote*>> scored;
  for (const auto& other : notes_) {
    if (other.note_id == note.note_id) continue;
    const double s = cosine(note.vector, other.vector);
    if (s >= cfg_.link_min_cosine) scored.emplace_back(s, &other);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->note_id < b.second->note_id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < static_cast<std::size_t>(cfg_.k_link); ++i) {
    out.push_back(scored[i].second->note_id);
  }
  return out;
}

void MemoryStore::insert(MemoryNote note) {
  if (by_id_.count(note.note_id)) throw DataError("memory: duplicate note id '" + note.note_id + "'");
  note.links = link_candidates(note);
  for (const auto& target : note.links) {
    auto& back = notes_[by_id_.at(target)].links;
    if (std::find(back.begin(), back.end(), note.note_id) == back.end()) back.push_back(note.note_id);
  }
  index_.add({IndexedItem{note.note_id, note.render(), note.vector, note.timestamp,
                          ItemKind::kMemoryNote}});
  by_id_.emplace(note.note_id, notes_.size());
  notes_.push_back(std::move(note));
}

const MemoryNote& MemoryStore::add_note(const ConversationPair& pair) {
  auto vecs = embedder_->embed({render_pair(pair)});
  insert(make_note(pair, std::move(vecs.at(0))));
  return notes_.back();
}

void MemoryStore::add_notes(const std::vector<ConversationPair>& pairs) {
  if (pairs.empty()) return;
  std::vector<std::string> texts;
  texts.reserve(pairs.size());
  for (const auto& p : pairs) texts.push_back(render_pair(p));
  auto vecs = embedder_->embed(texts);
  for (std::size_t i = 0; i < pairs.size(); ++i) insert(make_note(pairs[i], std::move(vecs[i])));
}

const MemoryNote* MemoryStore::find(const std::string& note_id) const {
  auto it = by_id_.find(note_id);
  return it == by_id_.end() ? nullptr : &notes_[it->second];
}

std::vector<RetrievalResult> MemoryStore::retrieve(const RetrievalQuery& q) const {
  q.validate();
  if (notes_.empty()) return {};
  return index_.query(q, *embedder_);
}

void MemoryStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::string lines;
  for (const auto& n : notes_) {
    lines += json{{"note_id", n.note_id},
                  {"content", n.content},
                  {"context_summary", n.context_summary},
                  {"keywords", n.keywords},
                  {"tags", n.tags},
                  {"timestamp", n.timestamp},
                  {"links", n.links}}
                 .dump();
    lines.push_back('\n');
  }
  write_file_atomic(dir / "notes.jsonl", lines);
  index_.save(dir / "index");
}

MemoryStore MemoryStore::load(const std::filesystem::path& dir, Embedder& embedder,
                              NoteConstructionConfig cfg) {
  MemoryStore store(embedder, cfg);
  store.index_ = VectorIndex::load(dir / "index");
  for_each_jsonl(dir / "notes.jsonl", [&](std::size_t line_no, const json& rec) {
    MemoryNote n;
    try {
      n.note_id = rec.at("note_id").get<std::string>();
      n.content = rec.at("content").get<std::string>();
      n.context_summary = rec.at("context_summary").get<std::string>();
      n.keywords = rec.at("keywords").get<std::vector<std::string>>();
      n.tags = rec.at("tags").get<std::vector<std::string>>();
      n.timestamp = rec.at("timestamp").get<Timestamp>();
      n.links = rec.at("links").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ParseError((dir / "notes.jsonl").string(), line_no, e.what());
    }
    const IndexedItem* item = store.index_.find(n.note_id);
    if (item == nullptr) throw DataError("memory: note '" + n.note_id + "' missing from index");
    n.vector = item->vector;
    store.by_id_.emplace(n.note_id, store.notes_.size());
    store.notes_.push_back(std::move(n));
  });
  if (store.notes_.size() != store.index_.size()) {
    throw DataError("memory: notes.jsonl and index disagree on note count");
  }
  return store;
}

}  // namespace simarena
