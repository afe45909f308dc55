#pragma once

// Pipeline orchestration shared by the CLI and the acceptance suite: config
// loading, corpus staging, index / memory builds, the generation matrix,
// metric evaluation, the temporal-window sweep and the scripted dry run.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simarena/arena.hpp"
#include "simarena/corpus.hpp"
#include "simarena/embedding.hpp"
#include "simarena/generation.hpp"
#include "simarena/index.hpp"
#include "simarena/memory.hpp"
#include "simarena/metrics.hpp"
#include "simarena/synthetic.hpp"

namespace simarena {

struct EmbeddingSettings {
  std::string url;  // empty: offline hashing embedder
  std::string model{kDefaultEmbeddingModel};
  std::size_t batch_size = 32;
  std::size_t dimension = 256;  // hashing embedder only
};

struct ExperimentConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this

  std::filesystem::path events;
  InputFormat input_format = InputFormat::kJsonl;
  std::optional<std::filesystem::path> anonymization_rules;
  std::optional<std::filesystem::path> blacklist;
  std::filesystem::path prompts;
  std::filesystem::path truths;
  std::optional<std::filesystem::path> profile;
  std::filesystem::path work_dir;
  std::optional<std::filesystem::path> ballots;

  PipelineConfig pipeline = PipelineConfig::defaults();
  RetrievalQuery retrieval;
  NoteConstructionConfig memory;
  std::string attribute_model;  // defaults to the base endpoint model
  EmbeddingSettings embedding;
  EndpointSpec base_endpoint;
  EndpointSpec adapted_endpoint;
  std::vector<MethodSpec> methods;
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  std::uint64_t seed = 0;
  int sweep_years = 10;
  std::string sweep_method = "A-Mem+LoRA";

  nlohmann::json source;  // the document as loaded
  std::string hash;       // sha256 of the canonical source document

  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  HttpOptions http_options() const;
};

TargetProfile load_profile(const ExperimentConfig& cfg);

// Owns the embedder chain: hashing or HTTP, wrapped in an on-disk cache.
struct EmbedderStack {
  std::unique_ptr<Embedder> inner;
  std::unique_ptr<CachedEmbedder> cached;

  Embedder& get() { return *cached; }
};

EmbedderStack make_embedder(const EmbeddingSettings& settings, const HttpOptions& http,
                            const std::optional<std::filesystem::path>& cache_file);

// Ingest, anonymize, pair and filter the archive, then drop pairs whose
// prompt matches a held-out prompt.
std::vector<ConversationPair> stage_corpus(const ExperimentConfig& cfg);

struct Artifacts {
  std::optional<VectorIndex> rag_index;
  std::unique_ptr<MemoryStore> memory;
};

// Builds only what `methods` need.
Artifacts build_artifacts(const std::vector<ConversationPair>& history,
                          const std::vector<MethodSpec>& methods, Embedder& embedder,
                          const NoteConstructionConfig& memory_cfg, AttributeExtractor* extractor);

struct GenerationSetup {
  ChatClientFactory factory;
  Clock clock = system_clock();
};

RunSummary generate_matrix(const ExperimentConfig& cfg, const std::vector<ConversationPair>& history,
                           const std::vector<Prompt>& prompts, Embedder& embedder,
                           const GenerationSetup& setup, const std::filesystem::path& journal);

// Same, for an explicit method subset.
RunSummary generate_methods(const ExperimentConfig& cfg, const std::vector<MethodSpec>& methods,
                            const std::vector<ConversationPair>& history, const std::vector<Prompt>& prompts,
                            Embedder& embedder, const GenerationSetup& setup,
                            const std::filesystem::path& journal);

struct SweepRow {
  int years = 0;
  std::size_t pairs = 0;
  bool empty = false;
  CorpusScores scores;
};

struct SweepResult {
  std::string method_id;
  std::vector<SweepRow> rows;
  std::vector<GenerationFailure> failures;

  nlohmann::json to_json(const std::string& config_hash) const;
  std::string table() const;  // window, pairs, BLEU-1, BLEU-2, ROUGE-L, Precision
};

// One row per window Y1..Y{cfg.sweep_years}. Each window regenerates the sweep
// method against its own history with a journal under
// work_dir/sweep/Y<i>/records.jsonl; embeddings are shared through the cache.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<ConversationPair>& pairs,
                      const std::vector<Prompt>& prompts, const std::map<std::string, std::string>& truths,
                      Embedder& embedder, const GenerationSetup& setup);

// Scripted judging and the full offline dry run.
struct ScriptedJudge {
  std::string judge_id;
  Cohort cohort = Cohort::kAcquaintance;
};

// Deterministic ranking for a pool: acquaintances favour token overlap with
// the ground truth, strangers favour overlap with the profile card; ties and
// noise come from a hash of (judge, prompt, label).
std::map<std::string, int> scripted_ranking(const ScriptedJudge& judge, const std::string& prompt_id,
                                            const std::vector<std::pair<std::string, std::string>>& entries,
                                            const std::string& truth, const std::string& profile_card);

// Runs every judge through the HTTP API at `arena_url` until each session is
// done. Returns the number of ballots accepted.
std::size_t run_scripted_judges(const std::string& arena_url, const std::string& experiment_id,
                                const std::vector<ScriptedJudge>& judges,
                                const std::map<std::string, std::string>& truths,
                                const std::string& profile_card);

// Config document for the bundled synthetic corpus in `data_dir` (as written
// by write_synthetic_bundle) against endpoints at `mock_base_url`.
nlohmann::json synthetic_config(const std::filesystem::path& data_dir, const std::filesystem::path& work_dir,
                                const std::string& mock_base_url, std::uint64_t seed);

struct DryRunOptions {
  std::filesystem::path work_dir;
  std::uint64_t seed = 2024;
  SynthOptions synth;
  std::size_t judges_per_cohort = 4;
};

struct DryRunResult {
  std::string config_hash;
  std::size_t pairs = 0;
  std::size_t records = 0;
  std::size_t pool_size = 0;
  std::size_t ballots = 0;
  std::map<std::string, MetricReport> metrics;
  nlohmann::json report;
  std::string report_tables;
};

// Synthetic archive + mock endpoints + in-process arena over HTTP + scripted
// judges of both cohorts. Starts from an empty work_dir each time.
DryRunResult run_dry_run(const DryRunOptions& opts);

}  // namespace simarena
