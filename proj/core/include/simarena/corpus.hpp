#pragma once

// Chat-archive ingestion and the two-stage time-window pairing pipeline:
//
//   ingest -> anonymize -> merge_turns -> pair_turns
//          -> filter_overlap -> filter_blacklist -> window -> export
//
// Every stage is a pure function over its inputs; output order is defined by
// input order so results do not depend on scheduling.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace simarena {

using Timestamp = std::int64_t;  // epoch seconds

inline constexpr Timestamp kSecondsPerYear = 365LL * 24 * 3600;

enum class Speaker { kTarget, kInterlocutor };

std::string_view to_string(Speaker s);
Speaker parse_speaker(std::string_view label);  // throws DataError

struct MessageEvent {
  std::string event_id;
  std::optional<std::string> conversation_id;
  Timestamp timestamp = 0;
  Speaker speaker = Speaker::kInterlocutor;
  std::string text;
  bool is_media_placeholder = false;
};

struct MergedTurn {
  Speaker speaker = Speaker::kInterlocutor;
  Timestamp start_ts = 0;
  Timestamp end_ts = 0;
  std::string text;
  std::vector<std::string> source_event_ids;
};

struct ConversationPair {
  std::string pair_id;
  MergedTurn prompt_turn;    // interlocutor
  MergedTurn response_turn;  // target
  std::int64_t gap_seconds = 0;
  Timestamp timestamp = 0;  // response start

  const std::string& prompt() const { return prompt_turn.text; }
  const std::string& response() const { return response_turn.text; }
};

struct PipelineConfig {
  std::int64_t merge_window = 120;
  std::int64_t pair_window = 300;
  double coverage_threshold = 0.8;
  std::size_t short_reply_max_chars = 10;
  std::vector<std::string> blacklist;             // exact match after normalization
  std::vector<std::string> placeholder_patterns;  // ECMAScript regex, full match
  std::int64_t conversation_gap = 12 * 3600;

  void validate() const;  // throws DataError
  static PipelineConfig defaults();  // includes the default blacklist
};

std::vector<std::string> default_blacklist();
std::vector<std::string> default_placeholder_patterns();

// Lines of the form `re:<regex>` are placeholder patterns; other non-blank
// lines are exact-match entries. `#` starts a comment line.
void load_blacklist_file(const std::filesystem::path& path, PipelineConfig& cfg);

struct TemporalWindow {
  int years_back = 1;
  std::optional<Timestamp> reference_ts;  // defaults to the latest pair timestamp
};

struct CorpusStats {
  std::int64_t conversation_count = 0;
  std::int64_t message_count = 0;
  std::int64_t token_count = 0;
};

enum class InputFormat { kJsonl, kTsv };
InputFormat parse_input_format(std::string_view name);

// Records: {ts, speaker, text, conv_id?, media?, id?} for jsonl;
// `ts<TAB>speaker<TAB>text` for tsv. Output is sorted by (timestamp, event_id).
std::vector<MessageEvent> ingest(const std::filesystem::path& path, InputFormat format);
std::vector<MessageEvent> parse_events(std::istream& in, InputFormat format,
                                       const std::string& source_name);

// Consecutive same-speaker events with gap <= merge_window join into one turn
// (texts separated by '\n'). Input must be sorted by timestamp.
std::vector<MergedTurn> merge_turns(const std::vector<MessageEvent>& events,
                                    std::int64_t merge_window);

// Pairs each target turn with the interlocutor turn that most recently
// precedes it, if that turn is unused and ended within pair_window seconds of
// the target turn's start. Unpaired turns are dropped.
std::vector<ConversationPair> pair_turns(const std::vector<MergedTurn>& turns,
                                         std::int64_t pair_window);

// Multiset character overlap of `response` against `prompt` divided by the
// response's character count. Whitespace is ignored on both sides.
double char_coverage(std::string_view response, std::string_view prompt);

bool is_overlap_echo(const ConversationPair& pair, double coverage_threshold,
                     std::size_t short_reply_max_chars);

std::vector<ConversationPair> filter_overlap(const std::vector<ConversationPair>& pairs,
                                             double coverage_threshold,
                                             std::size_t short_reply_max_chars);

// Trim + case fold; what blacklist entries are compared against.
std::string normalize_reply(std::string_view text);

class Blacklist {
 public:
  Blacklist(const std::vector<std::string>& entries, const std::vector<std::string>& patterns);

  bool matches(std::string_view response) const;

 private:
  std::vector<std::string> entries_;  // normalized, sorted
  std::vector<std::regex> patterns_;
};

std::vector<ConversationPair> filter_blacklist(const std::vector<ConversationPair>& pairs,
                                               const Blacklist& blacklist);

// Pairs with timestamp in [reference - years_back * 365d, reference].
std::vector<ConversationPair> window(const std::vector<ConversationPair>& pairs,
                                     const TemporalWindow& w);

// A conversation is a maximal run of pairs whose consecutive timestamps are
// less than `conversation_gap` apart.
std::int64_t count_conversations(const std::vector<ConversationPair>& pairs,
                                  std::int64_t conversation_gap);
CorpusStats compute_stats(const std::vector<ConversationPair>& pairs,
                          std::int64_t conversation_gap);

enum class ExportKind { kEvalPairs, kTrainingChat };

struct ExportOptions {
  ExportKind kind = ExportKind::kEvalPairs;
  std::string system_persona;  // training_chat only
  std::int64_t conversation_gap = 12 * 3600;
};

CorpusStats export_pairs(const std::vector<ConversationPair>& pairs,
                         const std::filesystem::path& destination, const ExportOptions& opts);

// Reads an eval_pairs export. Turn boundaries are reconstructed from ts/gap_s;
// source event ids are not part of the export and come back empty.
std::vector<ConversationPair> read_pairs(const std::filesystem::path& path);

// Full pipeline from sorted, anonymized events.
std::vector<ConversationPair> build_pairs(const std::vector<MessageEvent>& events,
                                          const PipelineConfig& cfg);

}  // namespace simarena
