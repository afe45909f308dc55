#pragma once

// Deterministic synthetic chat archive for dry runs: a multi-year event stream
// with the usual noise (split messages, media, acknowledgements, echoes, late
// replies), a held-out prompt set and its ground-truth replies.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "simarena/corpus.hpp"
#include "simarena/generation.hpp"

namespace simarena {

struct SynthOptions {
  int years = 10;
  int sessions_per_year = 120;
  std::uint64_t seed = 7;
  Timestamp end_ts = 1704067200;  // 2024-01-01T00:00:00Z
  std::size_t daily_prompts = 30;
  std::size_t opinion_prompts = 30;
};

struct SyntheticBundle {
  std::vector<MessageEvent> events;  // sorted by (timestamp, event_id)
  std::vector<Prompt> prompts;
  std::map<std::string, std::string> truths;
  TargetProfile profile;
};

SyntheticBundle make_synthetic(const SynthOptions& opts = {});

// {ts, speaker, text, conv_id, id, media?} lines, readable by ingest().
void write_events(const std::vector<MessageEvent>& events, const std::filesystem::path& path);
void write_truths(const std::map<std::string, std::string>& truths, const std::filesystem::path& path);

// Writes events.jsonl, prompts.jsonl, truths.jsonl and profile.json under `dir`.
void write_synthetic_bundle(const SyntheticBundle& bundle, const std::filesystem::path& dir);

}  // namespace simarena
