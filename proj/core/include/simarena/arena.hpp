#pragma once

// Ranking-based Turing test: blinded candidate pools, judge sessions for the
// acquaintance (Individual test) and stranger (General test) cohorts, an
// append-only ballot log, and selection-rate / average-rank / pairwise
// binomial statistics over the ballots.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "simarena/error.hpp"
#include "simarena/generation.hpp"
#include "simarena/jsonl.hpp"

namespace simarena {

inline constexpr std::string_view kGroundTruth = "GROUND_TRUTH";

enum class Cohort { kAcquaintance, kStranger };
std::string_view to_string(Cohort c);
Cohort parse_cohort(std::string_view s);
// "Individual Turing Test" for acquaintances, "General Turing Test" for strangers.
std::string_view test_name(Cohort c);

// Rejections carry a stable machine-readable code and the HTTP status the
// service maps them to.
class ArenaError : public DataError {
 public:
  ArenaError(std::string code, const std::string& message, int http_status = 400)
      : DataError(message), code_(std::move(code)), http_status_(http_status) {}

  const std::string& code() const { return code_; }
  int http_status() const { return http_status_; }

 private:
  std::string code_;
  int http_status_;
};

struct PoolEntry {
  std::string label;   // "A", "B", ...
  std::string source;  // method_id or kGroundTruth; never shown to judges
  std::string text;
};

struct CandidatePool {
  std::string prompt_id;
  std::vector<PoolEntry> entries;  // in label order
  std::uint64_t shuffle_seed = 0;

  const PoolEntry* by_label(std::string_view label) const;
  const PoolEntry* by_source(std::string_view source) const;
};

struct ExperimentSpec {
  std::string experiment_id;
  std::vector<Prompt> prompts;
  std::vector<std::string> method_ids;
  std::uint64_t seed = 0;
  std::optional<Cohort> cohort;  // restricts sessions when set
  std::string profile_card;      // shown to strangers
  std::size_t prompts_per_judge = 0;  // 0 = every prompt
};

std::uint64_t pool_seed(std::uint64_t experiment_seed, std::string_view prompt_id);

// Uniform permutation of 0..n-1 by Fisher-Yates over mt19937_64 with
// rejection-sampled bounded draws, so it is identical on every platform.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

// One pool per prompt: the methods' responses plus ground truth, shuffled by
// pool_seed(seed, prompt_id) and labelled A, B, C, ...
std::vector<CandidatePool> build_pools(const ExperimentSpec& experiment,
                                       const std::vector<GenerationRecord>& records,
                                       const std::map<std::string, std::string>& truths);

struct Ballot {
  std::string experiment_id;
  std::string judge_id;
  std::string prompt_id;
  Cohort cohort = Cohort::kAcquaintance;
  std::map<std::string, int> ranking;  // label -> rank, 1 = most plausible
  std::int64_t submitted_ts = 0;

  nlohmann::json to_json() const;
  static Ballot from_json(const nlohmann::json& j);
  friend bool operator==(const Ballot&, const Ballot&) = default;
};

// Throws ArenaError unless `ranking` assigns each pool label exactly one of
// the ranks 1..pool size.
void validate_ranking(const CandidatePool& pool, const std::map<std::string, int>& ranking);

struct SourceStats {
  std::int64_t first_count = 0;  // C_m
  double sr = 0.0;               // C_m / sum of C
  std::int64_t rank_sum = 0;
  std::int64_t appearances = 0;
  double avg_rank = 0.0;

  friend bool operator==(const SourceStats&, const SourceStats&) = default;
};

struct StratumStats {
  std::int64_t ballots = 0;
  std::map<std::string, std::int64_t> first_count;
  std::map<std::string, double> sr_within;  // C_{m,t} / stratum ballots
  std::map<std::string, double> sr_share;   // C_{m,t} / cohort ballots (stack segment)
  std::map<std::string, double> avg_rank;

  friend bool operator==(const StratumStats&, const StratumStats&) = default;
};

struct TallyTable {
  Cohort cohort = Cohort::kAcquaintance;
  std::int64_t ballots = 0;
  std::map<std::string, SourceStats> sources;
  std::map<PromptType, StratumStats> strata;  // only strata with ballots

  friend bool operator==(const TallyTable&, const TallyTable&) = default;
};

struct Tally {
  std::map<Cohort, TallyTable> cohorts;  // only cohorts with ballots

  friend bool operator==(const Tally&, const Tally&) = default;
};

using PoolMap = std::map<std::string, CandidatePool>;  // by prompt_id
using PromptTypes = std::map<std::string, PromptType>;

PoolMap index_pools(const std::vector<CandidatePool>& pools);
PromptTypes prompt_types(const std::vector<Prompt>& prompts);

// Recomputes every statistic from the ballots. Throws DataError("no data")
// for an empty ballot list, ArenaError if a ballot references no pool.
Tally tally(const std::vector<Ballot>& ballots, const PoolMap& pools, const PromptTypes& ptypes);

// Same statistics maintained one ballot at a time.
class TallyAccumulator {
 public:
  TallyAccumulator(PoolMap pools, PromptTypes ptypes);

  void add(const Ballot& ballot);
  std::int64_t ballots() const { return total_; }
  Tally snapshot() const;

 private:
  struct Counter {
    std::int64_t first = 0;
    std::int64_t rank_sum = 0;
    std::int64_t appearances = 0;
  };
  struct CohortCounters {
    std::int64_t ballots = 0;
    std::map<std::string, Counter> sources;
    std::map<PromptType, std::int64_t> stratum_ballots;
    std::map<std::pair<PromptType, std::string>, Counter> stratum_sources;
  };

  PoolMap pools_;
  PromptTypes ptypes_;
  std::set<std::string> all_sources_;
  std::map<Cohort, CohortCounters> cohorts_;
  std::int64_t total_ = 0;
};

struct PairwiseResult {
  std::string method_a;
  std::string method_b;
  std::int64_t wins_a = 0;
  std::int64_t n = 0;
  double win_rate = 0.0;
  double p_value = 1.0;  // one-sided, H0: P(a beats b) = 1/2
};

// a wins a ballot iff rank(a) < rank(b). Throws DataError when a == b, when a
// referenced pool lacks either source, or when there are no ballots.
PairwiseResult pairwise(const std::vector<Ballot>& ballots, const PoolMap& pools,
                        const std::string& a, const std::string& b);

// Cohort-separated report: stacked selection rates, average ranks, per-stratum
// tables and the full pairwise matrix. Empty strata are marked absent.
nlohmann::json build_report(const ExperimentSpec& experiment, const std::vector<CandidatePool>& pools,
                            const std::vector<Ballot>& ballots);
// Human-readable tables (TSV) rendered from build_report's document.
std::string render_report_tables(const nlohmann::json& report);

std::vector<Ballot> read_ballot_log(const std::filesystem::path& path);
void write_ballot_log(const std::vector<Ballot>& ballots, const std::filesystem::path& path);

struct SessionInfo {
  std::string session_id;
  std::string judge_id;
  Cohort cohort = Cohort::kAcquaintance;
  std::string experiment_id;
  std::vector<std::string> assigned;
  std::set<std::string> completed;
  bool profile_shown = false;
};

struct NextItem {
  bool done = false;
  std::string prompt_id;
  std::string prompt_text;
  std::optional<std::string> profile_card;
  std::vector<std::pair<std::string, std::string>> entries;  // (label, text)
  std::size_t completed = 0;
  std::size_t total = 0;
};

// In-process arena state. All public methods are serialized on one mutex, so
// ballot acceptance (duplicate check + log append + tally update) is atomic.
class ArenaService {
 public:
  // Existing ballots in the log are replayed; new ones are appended.
  explicit ArenaService(std::optional<std::filesystem::path> ballot_log = std::nullopt,
                        Clock clock = system_clock());

  std::string create_experiment(ExperimentSpec spec);
  void set_pools(const std::string& experiment_id, std::vector<CandidatePool> pools);
  void build_pools(const std::string& experiment_id, const std::vector<GenerationRecord>& records,
                   const std::map<std::string, std::string>& truths);

  SessionInfo create_session(const std::string& judge_id, Cohort cohort,
                             const std::string& experiment_id = {});
  SessionInfo session(const std::string& session_id) const;
  // Serving a stranger the profile card marks profile_shown.
  NextItem next(const std::string& session_id);
  SessionInfo submit(const std::string& session_id, const std::string& prompt_id,
                     const std::map<std::string, int>& ranking);

  std::vector<Ballot> ballots(const std::string& experiment_id) const;
  Tally live_tally(const std::string& experiment_id) const;
  nlohmann::json report(const std::string& experiment_id) const;
  std::vector<std::string> experiment_ids() const;
  const ExperimentSpec& experiment(const std::string& experiment_id) const;

 private:
  struct ExperimentState {
    ExperimentSpec spec;
    std::vector<CandidatePool> pools;
    PoolMap pool_map;
    std::optional<TallyAccumulator> accumulator;
  };

  ExperimentState& state(const std::string& experiment_id);
  const ExperimentState& state(const std::string& experiment_id) const;
  void seed_accumulator(ExperimentState& st);

  mutable std::mutex mu_;
  std::unique_ptr<JsonlWriter> log_;
  Clock clock_;
  std::map<std::string, ExperimentState> experiments_;
  std::map<std::string, SessionInfo> sessions_;
  std::vector<Ballot> ballots_;
  std::set<std::tuple<std::string, std::string, std::string>> ballot_keys_;
  std::size_t session_counter_ = 0;
};

}  // namespace simarena
