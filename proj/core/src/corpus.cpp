#include "simarena/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "simarena/error.hpp"
#include "simarena/jsonl.hpp"
#include "simarena/text.hpp"

namespace simarena {

std::string_view to_string(Speaker s) {
  return s == Speaker::kTarget ? "target" : "interlocutor";
}

Speaker parse_speaker(std::string_view label) {
  if (label == "target") return Speaker::kTarget;
  if (label == "interlocutor") return Speaker::kInterlocutor;
  throw DataError("unknown speaker label '" + std::string(label) + "'");
}

void PipelineConfig::validate() const {
  if (merge_window <= 0) throw DataError("merge_window must be > 0");
  if (pair_window <= 0) throw DataError("pair_window must be > 0");
  if (!(coverage_threshold > 0.0 && coverage_threshold <= 1.0)) {
    throw DataError("coverage_threshold must be in (0, 1]");
  }
  if (conversation_gap <= 0) throw DataError("conversation_gap must be > 0");
}

std::vector<std::string> default_blacklist() {
  return {"ok",   "okay", "k",    "kk",   "yes",  "yeah", "yep",  "no",  "nope", "sure",
          "hmm",  "hm",   "lol",  "haha", "hahaha", "thx", "thanks", "got it", "好",  "好的",
          "嗯",   "嗯嗯", "哦",   "哈哈", "哈哈哈", "收到", "行",   "可以", "对"};
}

std::vector<std::string> default_placeholder_patterns() {
  // One or more bracketed media markers, nothing else.
  return {R"((\[(photo|image|picture|video|voice|audio|sticker|file|media|emoji|link|location|图片|语音|视频|表情|文件)\]\s*)+)"};
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.blacklist = default_blacklist();
  cfg.placeholder_patterns = default_placeholder_patterns();
  return cfg;
}

void load_blacklist_file(const std::filesystem::path& path, PipelineConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open blacklist");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.rfind("re:", 0) == 0) {
      cfg.placeholder_patterns.push_back(t.substr(3));
    } else {
      cfg.blacklist.push_back(t);
    }
  }
}

InputFormat parse_input_format(std::string_view name) {
  if (name == "jsonl") return InputFormat::kJsonl;
  if (name == "tsv") return InputFormat::kTsv;
  throw DataError("unknown input format '" + std::string(name) + "'");
}

namespace {

std::string line_event_id(std::size_t line_no) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "L%09zu", line_no);
  return buf;
}

constexpr std::string_view kMediaText = "[media]";

MessageEvent parse_json_event(const json& rec, std::size_t line_no, const std::string& source) {
  if (!rec.is_object()) throw ParseError(source, line_no, "record is not an object");
  MessageEvent ev;
  auto ts = rec.find("ts");
  if (ts == rec.end() || !ts->is_number_integer()) {
    throw ParseError(source, line_no, "missing or non-integer field 'ts'");
  }
  ev.timestamp = ts->get<std::int64_t>();
  if (ev.timestamp < 0) throw ParseError(source, line_no, "negative timestamp");

  auto sp = rec.find("speaker");
  if (sp == rec.end() || !sp->is_string()) {
    throw ParseError(source, line_no, "missing field 'speaker'");
  }
  try {
    ev.speaker = parse_speaker(sp->get<std::string>());
  } catch (const DataError& e) {
    throw ParseError(source, line_no, e.what());
  }

  if (auto m = rec.find("media"); m != rec.end()) {
    if (!m->is_boolean()) throw ParseError(source, line_no, "field 'media' must be boolean");
    ev.is_media_placeholder = m->get<bool>();
  }
  auto tx = rec.find("text");
  if (tx != rec.end() && !tx->is_null()) {
    if (!tx->is_string()) throw ParseError(source, line_no, "field 'text' must be a string");
    ev.text = tx->get<std::string>();
  } else if (!ev.is_media_placeholder) {
    throw ParseError(source, line_no, "missing field 'text'");
  }
  if (ev.text.empty()) {
    if (!ev.is_media_placeholder) throw ParseError(source, line_no, "empty text");
    ev.text = kMediaText;
  }
  if (auto c = rec.find("conv_id"); c != rec.end() && !c->is_null()) {
    ev.conversation_id = c->is_string() ? c->get<std::string>() : c->dump();
  }
  if (auto id = rec.find("id"); id != rec.end() && id->is_string()) {
    ev.event_id = id->get<std::string>();
  } else {
    ev.event_id = line_event_id(line_no);
  }
  return ev;
}

MessageEvent parse_tsv_event(const std::string& line, std::size_t line_no,
                             const std::string& source) {
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
  if (t2 == std::string::npos) throw ParseError(source, line_no, "expected ts<TAB>speaker<TAB>text");
  MessageEvent ev;
  const std::string ts = line.substr(0, t1);
  try {
    std::size_t used = 0;
    ev.timestamp = std::stoll(ts, &used);
    if (used != ts.size()) throw std::invalid_argument(ts);
  } catch (const std::exception&) {
    throw ParseError(source, line_no, "invalid timestamp '" + ts + "'");
  }
  if (ev.timestamp < 0) throw ParseError(source, line_no, "negative timestamp");
  try {
    ev.speaker = parse_speaker(line.substr(t1 + 1, t2 - t1 - 1));
  } catch (const DataError& e) {
    throw ParseError(source, line_no, e.what());
  }
  ev.text = line.substr(t2 + 1);
  if (ev.text.empty()) throw ParseError(source, line_no, "empty text");
  ev.event_id = line_event_id(line_no);
  return ev;
}

}  // namespace

std::vector<MessageEvent> parse_events(std::istream& in, InputFormat format,
                                       const std::string& source_name) {
  std::vector<MessageEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (format == InputFormat::kJsonl) {
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(source_name, line_no, std::string("malformed JSON: ") + e.what());
      }
      events.push_back(parse_json_event(rec, line_no, source_name));
    } else {
      if (line_no == 1 && line.rfind("ts\t", 0) == 0) continue;  // header
      events.push_back(parse_tsv_event(line, line_no, source_name));
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.event_id < b.event_id;
  });
  return events;
}

std::vector<MessageEvent> ingest(const std::filesystem::path& path, InputFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open input");
  return parse_events(in, format, path.string());
}

std::vector<MergedTurn> merge_turns(const std::vector<MessageEvent>& events,
                                    std::int64_t merge_window) {
  std::vector<MergedTurn> turns;
  for (const auto& ev : events) {
    if (!turns.empty()) {
      MergedTurn& cur = turns.back();
      if (cur.speaker == ev.speaker && ev.timestamp - cur.end_ts <= merge_window) {
        cur.end_ts = ev.timestamp;
        cur.text.push_back('\n');
        cur.text += ev.text;
        cur.source_event_ids.push_back(ev.event_id);
        continue;
      }
    }
    turns.push_back(MergedTurn{ev.speaker, ev.timestamp, ev.timestamp, ev.text, {ev.event_id}});
  }
  return turns;
}

std::vector<ConversationPair> pair_turns(const std::vector<MergedTurn>& turns,
                                         std::int64_t pair_window) {
  std::vector<ConversationPair> pairs;
  const MergedTurn* last_prompt = nullptr;
  bool last_prompt_used = false;
  for (const auto& turn : turns) {
    if (turn.speaker == Speaker::kInterlocutor) {
      last_prompt = &turn;
      last_prompt_used = false;
      continue;
    }
    if (last_prompt == nullptr || last_prompt_used) continue;
    const std::int64_t gap = turn.start_ts - last_prompt->end_ts;
    if (gap < 0 || gap > pair_window) continue;
    char id[24];
    std::snprintf(id, sizeof(id), "pair-%06zu", pairs.size());
    pairs.push_back(ConversationPair{id, *last_prompt, turn, gap, turn.start_ts});
    last_prompt_used = true;
  }
  return pairs;
}

double char_coverage(std::string_view response, std::string_view prompt) {
  std::map<char32_t, std::int64_t> available;
  for (char32_t cp : utf8_decode(prompt)) {
    if (!is_space(cp)) ++available[cp];
  }
  std::int64_t total = 0;
  std::int64_t hit = 0;
  for (char32_t cp : utf8_decode(response)) {
    if (is_space(cp)) continue;
    ++total;
    auto it = available.find(cp);
    if (it != available.end() && it->second > 0) {
      --it->second;
      ++hit;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

bool is_overlap_echo(const ConversationPair& pair, double coverage_threshold,
                     std::size_t short_reply_max_chars) {
  const std::string& r = pair.response();
  const std::string& p = pair.prompt();
  if (r == p) return true;
  if (p.find(r) != std::string::npos) return true;
  if (char_count(r, /*skip_space=*/true) <= short_reply_max_chars &&
      char_coverage(r, p) > coverage_threshold) {
    return true;
  }
  return false;
}

std::vector<ConversationPair> filter_overlap(const std::vector<ConversationPair>& pairs,
                                             double coverage_threshold,
                                             std::size_t short_reply_max_chars) {
  std::vector<ConversationPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!is_overlap_echo(p, coverage_threshold, short_reply_max_chars)) out.push_back(p);
  }
  return out;
}

std::string normalize_reply(std::string_view text) { return fold_case(trim(text)); }

Blacklist::Blacklist(const std::vector<std::string>& entries,
                     const std::vector<std::string>& patterns) {
  for (const auto& e : entries) entries_.push_back(normalize_reply(e));
  std::sort(entries_.begin(), entries_.end());
  entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
  for (const auto& p : patterns) {
    try {
      patterns_.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw DataError("invalid placeholder pattern '" + p + "': " + e.what());
    }
  }
}

bool Blacklist::matches(std::string_view response) const {
  const std::string norm = normalize_reply(response);
  if (std::binary_search(entries_.begin(), entries_.end(), norm)) return true;
  for (const auto& re : patterns_) {
    if (std::regex_match(norm, re)) return true;
  }
  return false;
}

std::vector<ConversationPair> filter_blacklist(const std::vector<ConversationPair>& pairs,
                                               const Blacklist& blacklist) {
  std::vector<ConversationPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!blacklist.matches(p.response())) out.push_back(p);
  }
  return out;
}

std::vector<ConversationPair> window(const std::vector<ConversationPair>& pairs,
                                     const TemporalWindow& w) {
  if (w.years_back < 1) throw DataError("years_back must be >= 1");
  if (pairs.empty()) return {};
  Timestamp ref = 0;
  if (w.reference_ts) {
    ref = *w.reference_ts;
  } else {
    for (const auto& p : pairs) ref = std::max(ref, p.timestamp);
  }
  const Timestamp lower = ref - static_cast<Timestamp>(w.years_back) * kSecondsPerYear;
  std::vector<ConversationPair> out;
  for (const auto& p : pairs) {
    if (p.timestamp >= lower && p.timestamp <= ref) out.push_back(p);
  }
  return out;
}

std::int64_t count_conversations(const std::vector<ConversationPair>& pairs,
                                 std::int64_t conversation_gap) {
  if (pairs.empty()) return 0;
  std::vector<Timestamp> ts;
  ts.reserve(pairs.size());
  for (const auto& p : pairs) ts.push_back(p.timestamp);
  std::sort(ts.begin(), ts.end());
  std::int64_t n = 1;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] - ts[i - 1] >= conversation_gap) ++n;
  }
  return n;
}

CorpusStats compute_stats(const std::vector<ConversationPair>& pairs,
                          std::int64_t conversation_gap) {
  CorpusStats s;
  s.conversation_count = count_conversations(pairs, conversation_gap);
  for (const auto& p : pairs) {
    s.message_count += static_cast<std::int64_t>(p.prompt_turn.source_event_ids.size() +
                                                 p.response_turn.source_event_ids.size());
    s.token_count += static_cast<std::int64_t>(tokenize(p.prompt()).size() +
                                               tokenize(p.response()).size());
  }
  return s;
}

CorpusStats export_pairs(const std::vector<ConversationPair>& pairs,
                         const std::filesystem::path& destination, const ExportOptions& opts) {
  std::ostringstream out;
  for (const auto& p : pairs) {
    json rec;
    if (opts.kind == ExportKind::kEvalPairs) {
      rec = json{{"pair_id", p.pair_id},
                 {"prompt", p.prompt()},
                 {"response", p.response()},
                 {"ts", p.timestamp},
                 {"gap_s", p.gap_seconds}};
    } else {
      rec = json{{"system", opts.system_persona}, {"user", p.prompt()}, {"assistant", p.response()}};
    }
    out << rec.dump() << '\n';
  }
  write_file_atomic(destination, out.str());
  return compute_stats(pairs, opts.conversation_gap);
}

std::vector<ConversationPair> read_pairs(const std::filesystem::path& path) {
  std::vector<ConversationPair> pairs;
  for_each_jsonl(path, [&](std::size_t line_no, const json& rec) {
    try {
      ConversationPair p;
      p.pair_id = rec.at("pair_id").get<std::string>();
      p.timestamp = rec.at("ts").get<Timestamp>();
      p.gap_seconds = rec.value("gap_s", std::int64_t{0});
      p.prompt_turn.speaker = Speaker::kInterlocutor;
      p.prompt_turn.text = rec.at("prompt").get<std::string>();
      p.prompt_turn.start_ts = p.prompt_turn.end_ts = p.timestamp - p.gap_seconds;
      p.response_turn.speaker = Speaker::kTarget;
      p.response_turn.text = rec.at("response").get<std::string>();
      p.response_turn.start_ts = p.response_turn.end_ts = p.timestamp;
      pairs.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  });
  return pairs;
}

std::vector<ConversationPair> build_pairs(const std::vector<MessageEvent>& events,
                                          const PipelineConfig& cfg) {
  cfg.validate();
  auto pairs = pair_turns(merge_turns(events, cfg.merge_window), cfg.pair_window);
  pairs = filter_overlap(pairs, cfg.coverage_threshold, cfg.short_reply_max_chars);
  return filter_blacklist(pairs, Blacklist(cfg.blacklist, cfg.placeholder_patterns));
}

}  // namespace simarena
