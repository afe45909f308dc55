#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "simarena/corpus.hpp"
#include "simarena/error.hpp"
#include "temp_dir.hpp"

using namespace simarena;

namespace {

MessageEvent ev(std::string id, Timestamp ts, Speaker who, std::string text) {
  MessageEvent e;
  e.event_id = std::move(id);
  e.timestamp = ts;
  e.speaker = who;
  e.text = std::move(text);
  return e;
}

constexpr Speaker T = Speaker::kTarget;
constexpr Speaker I = Speaker::kInterlocutor;

MergedTurn turn(Speaker who, Timestamp start, Timestamp end, std::string text) {
  return MergedTurn{who, start, end, std::move(text), {}};
}

ConversationPair pair_of(std::string prompt, std::string response, Timestamp ts = 1000) {
  ConversationPair p;
  p.pair_id = "p";
  p.prompt_turn = turn(I, ts - 10, ts - 10, std::move(prompt));
  p.response_turn = turn(T, ts, ts, std::move(response));
  p.gap_seconds = 10;
  p.timestamp = ts;
  return p;
}

}  // namespace

TEST(MergeTurns, JoinsWithinWindow) {
  const auto turns = merge_turns({ev("a", 0, T, "x"), ev("b", 90, T, "y")}, 120);
  ASSERT_EQ(turns.size(), 1u);
  EXPECT_EQ(turns[0].start_ts, 0);
  EXPECT_EQ(turns[0].end_ts, 90);
  EXPECT_EQ(turns[0].text, "x\ny");
  EXPECT_EQ(turns[0].source_event_ids, (std::vector<std::string>{"a", "b"}));
}

TEST(MergeTurns, BoundaryIsInclusive) {
  EXPECT_EQ(merge_turns({ev("a", 0, T, "x"), ev("b", 120, T, "y")}, 120).size(), 1u);
  EXPECT_EQ(merge_turns({ev("a", 0, T, "x"), ev("b", 121, T, "y")}, 120).size(), 2u);
}

TEST(MergeTurns, AlternationNeverMerges) {
  EXPECT_EQ(merge_turns({ev("a", 0, T, "x"), ev("b", 10, I, "y"), ev("c", 20, T, "z")}, 120).size(), 3u);
}

TEST(MergeTurns, GapIsMeasuredFromPreviousMessage) {
  // 0, 100, 200: each step is within the window although the span is not.
  const auto turns = merge_turns({ev("a", 0, T, "x"), ev("b", 100, T, "y"), ev("c", 200, T, "z")}, 120);
  ASSERT_EQ(turns.size(), 1u);
  EXPECT_EQ(turns[0].end_ts, 200);
}

TEST(MergeTurns, EmptyInput) { EXPECT_TRUE(merge_turns({}, 120).empty()); }

TEST(PairTurns, WithinWindow) {
  const auto pairs = pair_turns({turn(I, 0, 0, "q"), turn(T, 240, 240, "r")}, 300);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].gap_seconds, 240);
  EXPECT_EQ(pairs[0].timestamp, 240);
  EXPECT_EQ(pairs[0].prompt(), "q");
  EXPECT_EQ(pairs[0].response(), "r");
}

TEST(PairTurns, BoundaryIsInclusive) {
  EXPECT_EQ(pair_turns({turn(I, 0, 0, "q"), turn(T, 300, 300, "r")}, 300).size(), 1u);
  EXPECT_EQ(pair_turns({turn(I, 0, 0, "q"), turn(T, 301, 301, "r")}, 300).size(), 0u);
}

TEST(PairTurns, GapCountsFromPromptEnd) {
  const auto pairs = pair_turns({turn(I, 0, 100, "q"), turn(T, 390, 400, "r")}, 300);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].gap_seconds, 290);
}

TEST(PairTurns, TargetWithoutPromptIsDropped) {
  EXPECT_TRUE(pair_turns({turn(T, 0, 0, "r")}, 300).empty());
}

TEST(PairTurns, PromptUsedOnce) {
  const auto pairs = pair_turns({turn(I, 0, 0, "q"), turn(T, 10, 10, "r1"), turn(T, 200, 200, "r2")}, 300);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].response(), "r1");
}

TEST(PairTurns, NearestPrecedingPromptWins) {
  const auto pairs = pair_turns({turn(I, 0, 0, "old"), turn(I, 200, 200, "new"), turn(T, 250, 250, "r")}, 300);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].prompt(), "new");
}

TEST(Coverage, MatchesOracleOnFixtures) {
  // 7 of 8 response characters appear in the prompt.
  const std::string prompt = "abcdefgz";
  const std::string high = "abcdefgx";
  EXPECT_DOUBLE_EQ(char_coverage(high, prompt), 0.875);
  EXPECT_DOUBLE_EQ(char_coverage(high, prompt), oracle::coverage(high, prompt));
  const std::string half = "abcdwxyq";
  EXPECT_DOUBLE_EQ(char_coverage(half, prompt), 0.5);
  EXPECT_DOUBLE_EQ(char_coverage(half, prompt), oracle::coverage(half, prompt));
}

TEST(Coverage, IsMultisetAndIgnoresWhitespace) {
  EXPECT_DOUBLE_EQ(char_coverage("aa", "a"), 0.5);
  EXPECT_DOUBLE_EQ(char_coverage("a a", "a  a"), 1.0);
  EXPECT_DOUBLE_EQ(char_coverage("哈哈哈", "哈哈"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(char_coverage("", "abc"), 0.0);
}

TEST(FilterOverlap, ShortHighCoverageRemoved) {
  const auto kept = filter_overlap({pair_of("abcdefgz", "abcdefgx"), pair_of("abcdefgz", "abcdwxyq")}, 0.8, 10);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].response(), "abcdwxyq");
}

TEST(FilterOverlap, EqualityAndSubstring) {
  EXPECT_TRUE(filter_overlap({pair_of("你在干嘛", "你在干嘛")}, 0.8, 10).empty());
  EXPECT_TRUE(filter_overlap({pair_of("what are you doing tonight", "doing tonight")}, 0.8, 10).empty());
}

TEST(FilterOverlap, LongRepliesSkipCoverage) {
  // Eleven characters, fully covered, but not short.
  EXPECT_EQ(filter_overlap({pair_of("abcdefghijk", "kjihgfedcba")}, 0.8, 10).size(), 1u);
  EXPECT_EQ(filter_overlap({pair_of("abcdefghij", "jihgfedcba")}, 0.8, 10).size(), 0u);
}

TEST(Blacklist, ExactAfterNormalization) {
  const Blacklist bl(default_blacklist(), default_placeholder_patterns());
  EXPECT_TRUE(bl.matches("ok"));
  EXPECT_TRUE(bl.matches("  OK "));
  EXPECT_TRUE(bl.matches("好的"));
  EXPECT_FALSE(bl.matches("ok, see you at 5"));
  EXPECT_TRUE(bl.matches("[图片]"));
  EXPECT_TRUE(bl.matches("[photo] [Video]"));
  EXPECT_FALSE(bl.matches("[photo] nice"));
}

TEST(Blacklist, FileSyntax) {
  TempDir dir;
  std::ofstream(dir / "bl.txt") << "# comment\nnah\n\nre:^x+$\n";
  PipelineConfig cfg;
  load_blacklist_file(dir / "bl.txt", cfg);
  EXPECT_EQ(cfg.blacklist, (std::vector<std::string>{"nah"}));
  EXPECT_EQ(cfg.placeholder_patterns, (std::vector<std::string>{"^x+$"}));
  const Blacklist bl(cfg.blacklist, cfg.placeholder_patterns);
  EXPECT_TRUE(bl.matches("XXX"));
  EXPECT_TRUE(bl.matches("Nah"));
}

TEST(Blacklist, BadPatternIsDataError) { EXPECT_THROW(Blacklist({}, {"("}), DataError); }

TEST(PipelineConfig, Validation) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.merge_window = 0;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg = PipelineConfig{};
  cfg.coverage_threshold = 1.5;
  EXPECT_THROW(cfg.validate(), DataError);
  cfg.coverage_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), DataError);
}

TEST(Window, ClosedIntervalFromLatest) {
  std::vector<ConversationPair> pairs;
  const Timestamp ref = 10 * kSecondsPerYear;
  for (Timestamp ts : {ref, ref - kSecondsPerYear, ref - kSecondsPerYear - 1, ref - 3 * kSecondsPerYear}) {
    pairs.push_back(pair_of("q", "r", ts));
  }
  EXPECT_EQ(window(pairs, {1, std::nullopt}).size(), 2u);
  EXPECT_EQ(window(pairs, {2, std::nullopt}).size(), 3u);
  EXPECT_EQ(window(pairs, {3, std::nullopt}).size(), 4u);
  EXPECT_EQ(window(pairs, {1, ref - kSecondsPerYear}).size(), 2u);
  EXPECT_THROW(window(pairs, {0, std::nullopt}), DataError);
}

TEST(Stats, ConversationsSplitAtTwelveHours) {
  const Timestamp h = 3600;
  std::vector<ConversationPair> pairs{pair_of("q", "r", 0), pair_of("q", "r", 12 * h - 1),
                                      pair_of("q", "r", 24 * h - 1), pair_of("q", "r", 100 * h)};
  EXPECT_EQ(count_conversations(pairs, 12 * h), 3);
  EXPECT_EQ(count_conversations({}, 12 * h), 0);
}

TEST(Export, EvalPairsRoundTrip) {
  TempDir dir;
  const auto events = std::vector<MessageEvent>{ev("a", 0, I, "q1"), ev("b", 5, I, "q1b"), ev("c", 60, T, "r1"),
                                                ev("d", 1000, I, "q2"), ev("e", 1100, T, "r2"),
                                                ev("f", 5000, I, "q3"), ev("g", 5001, T, "r3")};
  const auto pairs = pair_turns(merge_turns(events, 120), 300);
  ASSERT_EQ(pairs.size(), 3u);
  const auto stats = export_pairs(pairs, dir / "pairs.jsonl", {});
  EXPECT_EQ(stats.message_count, 7);
  EXPECT_EQ(stats.conversation_count, 1);

  std::ifstream in(dir / "pairs.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 3);

  const auto back = read_pairs(dir / "pairs.jsonl");
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].pair_id, pairs[i].pair_id);
    EXPECT_EQ(back[i].prompt(), pairs[i].prompt());
    EXPECT_EQ(back[i].response(), pairs[i].response());
    EXPECT_EQ(back[i].timestamp, pairs[i].timestamp);
    EXPECT_EQ(back[i].gap_seconds, pairs[i].gap_seconds);
  }
}

TEST(Export, TrainingChat) {
  TempDir dir;
  export_pairs({pair_of("q", "r")}, dir / "train.jsonl", {ExportKind::kTrainingChat, "You are Lin.", 43200});
  std::ifstream in(dir / "train.jsonl");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, R"({"assistant":"r","system":"You are Lin.","user":"q"})");
}

TEST(Ingest, JsonlAndSorting) {
  std::istringstream in(
      "{\"ts\": 20, \"speaker\": \"target\", \"text\": \"b\"}\n"
      "\n"
      "{\"ts\": 10, \"speaker\": \"interlocutor\", \"text\": \"a\", \"conv_id\": \"c1\", \"id\": \"x\"}\n"
      "{\"ts\": 30, \"speaker\": \"target\", \"text\": \"\", \"media\": true}\n");
  const auto events = parse_events(in, InputFormat::kJsonl, "mem");
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[0].event_id, "x");
  EXPECT_EQ(events[0].conversation_id, "c1");
  EXPECT_EQ(events[1].text, "b");
  EXPECT_TRUE(events[2].is_media_placeholder);
  EXPECT_EQ(events[2].text, "[media]");
}

TEST(Ingest, Tsv) {
  std::istringstream in("5\ttarget\thello there\n1\tinterlocutor\thi\n");
  const auto events = parse_events(in, InputFormat::kTsv, "mem");
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].text, "hi");
  EXPECT_EQ(events[1].speaker, Speaker::kTarget);
}

TEST(Ingest, ErrorsNameTheLine) {
  std::istringstream bad_speaker("{\"ts\": 1, \"speaker\": \"bot\", \"text\": \"x\"}\n");
  EXPECT_THROW(parse_events(bad_speaker, InputFormat::kJsonl, "f"), DataError);
  std::istringstream bad_json("{\"ts\": 1, \"speaker\": \"target\", \"text\": \"x\"}\n{oops\n");
  try {
    parse_events(bad_json, InputFormat::kJsonl, "f.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.source(), "f.jsonl");
  }
  std::istringstream no_ts("{\"speaker\": \"target\", \"text\": \"x\"}\n");
  EXPECT_THROW(parse_events(no_ts, InputFormat::kJsonl, "f"), ParseError);
}

TEST(Ingest, MissingFileNamesPath) {
  try {
    ingest("/nonexistent/events.jsonl", InputFormat::kJsonl);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/events.jsonl"), std::string::npos);
  }
}

TEST(BuildPairs, FullPipeline) {
  const std::vector<MessageEvent> events{
      ev("1", 0, I, "晚饭吃什么"),   ev("2", 30, T, "火锅吧"),        // kept
      ev("3", 1000, I, "在吗"),       ev("4", 1010, T, "好的"),        // blacklisted
      ev("5", 2000, I, "你在干嘛"),   ev("6", 2010, T, "你在干嘛"),    // echo
      ev("7", 3000, I, "看照片"),     ev("8", 3010, T, "[图片]"),      // placeholder
      ev("9", 4000, I, "周末去哪"),   ev("10", 4400, T, "不知道"),     // too late
  };
  const auto pairs = build_pairs(events, PipelineConfig::defaults());
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].response(), "火锅吧");
}
