#include "simarena/arena.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "simarena/hash.hpp"
#include "simarena/stats.hpp"

namespace simarena {

std::string_view to_string(Cohort c) { return c == Cohort::kAcquaintance ? "acquaintance" : "stranger"; }

Cohort parse_cohort(std::string_view s) {
  if (s == "acquaintance") return Cohort::kAcquaintance;
  if (s == "stranger") return Cohort::kStranger;
  throw ArenaError("invalid_request", "unknown cohort '" + std::string(s) + "'");
}

std::string_view test_name(Cohort c) {
  return c == Cohort::kAcquaintance ? "Individual Turing Test" : "General Turing Test";
}

const PoolEntry* CandidatePool::by_label(std::string_view label) const {
  for (const auto& e : entries) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

const PoolEntry* CandidatePool::by_source(std::string_view source) const {
  for (const auto& e : entries) {
    if (e.source == source) return &e;
  }
  return nullptr;
}

std::uint64_t pool_seed(std::uint64_t experiment_seed, std::string_view prompt_id) {
  return mix64(experiment_seed ^ mix64(fnv1a64(prompt_id)));
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    // Unbiased draw in [0, i).
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = 0;
    do {
      x = rng();
    } while (x >= limit);
    std::swap(perm[i - 1], perm[x % bound]);
  }
  return perm;
}

namespace {

std::string label_for(std::size_t i) {
  if (i >= 26) throw DataError("candidate pools are limited to 26 entries");
  return std::string(1, static_cast<char>('A' + i));
}

}  // namespace

std::vector<CandidatePool> build_pools(const ExperimentSpec& experiment,
                                       const std::vector<GenerationRecord>& records,
                                       const std::map<std::string, std::string>& truths) {
  std::map<std::pair<std::string, std::string>, const GenerationRecord*> by_key;
  for (const auto& r : records) by_key[{r.method_id, r.prompt_id}] = &r;

  std::vector<CandidatePool> pools;
  pools.reserve(experiment.prompts.size());
  for (const auto& prompt : experiment.prompts) {
    std::vector<PoolEntry> sources;
    for (const auto& m : experiment.method_ids) {
      auto it = by_key.find({m, prompt.prompt_id});
      if (it == by_key.end()) {
        throw DataError("missing generation record for (" + m + ", " + prompt.prompt_id + ")");
      }
      sources.push_back({"", m, it->second->text});
    }
    auto truth = truths.find(prompt.prompt_id);
    if (truth == truths.end()) throw DataError("missing ground truth for prompt '" + prompt.prompt_id + "'");
    sources.push_back({"", std::string(kGroundTruth), truth->second});

    CandidatePool pool;
    pool.prompt_id = prompt.prompt_id;
    pool.shuffle_seed = pool_seed(experiment.seed, prompt.prompt_id);
    const auto perm = seeded_permutation(sources.size(), pool.shuffle_seed);
    for (std::size_t pos = 0; pos < perm.size(); ++pos) {
      PoolEntry e = sources[perm[pos]];
      e.label = label_for(pos);
      pool.entries.push_back(std::move(e));
    }
    pools.push_back(std::move(pool));
  }
  return pools;
}

nlohmann::json Ballot::to_json() const {
  return {{"experiment_id", experiment_id},
          {"judge_id", judge_id},
          {"prompt_id", prompt_id},
          {"cohort", to_string(cohort)},
          {"ranking", ranking},
          {"submitted_ts", submitted_ts}};
}

Ballot Ballot::from_json(const nlohmann::json& j) {
  Ballot b;
  b.experiment_id = j.at("experiment_id").get<std::string>();
  b.judge_id = j.at("judge_id").get<std::string>();
  b.prompt_id = j.at("prompt_id").get<std::string>();
  b.cohort = parse_cohort(j.at("cohort").get<std::string>());
  b.ranking = j.at("ranking").get<std::map<std::string, int>>();
  b.submitted_ts = j.at("submitted_ts").get<std::int64_t>();
  return b;
}

void validate_ranking(const CandidatePool& pool, const std::map<std::string, int>& ranking) {
  const int size = static_cast<int>(pool.entries.size());
  std::vector<bool> used(static_cast<std::size_t>(size) + 1, false);
  for (const auto& [label, rank] : ranking) {
    if (pool.by_label(label) == nullptr) {
      throw ArenaError("unknown_label", "unknown pool label '" + label + "'");
    }
    if (rank < 1 || rank > size) {
      throw ArenaError("rank_out_of_range", "rank " + std::to_string(rank) + " outside 1.." + std::to_string(size));
    }
    if (used[static_cast<std::size_t>(rank)]) {
      throw ArenaError("duplicate_rank", "rank " + std::to_string(rank) + " assigned twice");
    }
    used[static_cast<std::size_t>(rank)] = true;
  }
  if (static_cast<int>(ranking.size()) != size) {
    throw ArenaError("incomplete_ranking", "ranking must cover all " + std::to_string(size) + " entries");
  }
}

PoolMap index_pools(const std::vector<CandidatePool>& pools) {
  PoolMap out;
  for (const auto& p : pools) out.emplace(p.prompt_id, p);
  return out;
}

PromptTypes prompt_types(const std::vector<Prompt>& prompts) {
  PromptTypes out;
  for (const auto& p : prompts) out.emplace(p.prompt_id, p.ptype);
  return out;
}

namespace {

const CandidatePool& pool_for(const PoolMap& pools, const Ballot& b) {
  auto it = pools.find(b.prompt_id);
  if (it == pools.end()) {
    throw ArenaError("unknown_prompt", "ballot references unknown prompt '" + b.prompt_id + "'", 404);
  }
  return it->second;
}

PromptType ptype_for(const PromptTypes& ptypes, const std::string& prompt_id) {
  auto it = ptypes.find(prompt_id);
  if (it == ptypes.end()) throw ArenaError("unknown_prompt", "no prompt type for '" + prompt_id + "'", 404);
  return it->second;
}

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::set<std::string> pool_sources(const PoolMap& pools) {
  std::set<std::string> out;
  for (const auto& [id, p] : pools) {
    for (const auto& e : p.entries) out.insert(e.source);
  }
  return out;
}

}  // namespace

Tally tally(const std::vector<Ballot>& ballots, const PoolMap& pools, const PromptTypes& ptypes) {
  if (ballots.empty()) throw DataError("no data");
  const std::set<std::string> sources = pool_sources(pools);
  std::map<Cohort, std::vector<const Ballot*>> by_cohort;
  for (const auto& b : ballots) {
    pool_for(pools, b);
    by_cohort[b.cohort].push_back(&b);
  }

  Tally out;
  for (const auto& [cohort, group] : by_cohort) {
    TallyTable table;
    table.cohort = cohort;
    table.ballots = static_cast<std::int64_t>(group.size());
    for (const auto& source : sources) {
      SourceStats s;
      for (const Ballot* b : group) {
        const PoolEntry* e = pool_for(pools, *b).by_source(source);
        if (e == nullptr) continue;
        const int rank = b->ranking.at(e->label);
        ++s.appearances;
        s.rank_sum += rank;
        if (rank == 1) ++s.first_count;
      }
      s.sr = ratio(s.first_count, table.ballots);
      s.avg_rank = ratio(s.rank_sum, s.appearances);
      table.sources.emplace(source, s);
    }
    for (PromptType t : {PromptType::kDaily, PromptType::kOpinion}) {
      StratumStats st;
      for (const Ballot* b : group) {
        if (ptype_for(ptypes, b->prompt_id) == t) ++st.ballots;
      }
      if (st.ballots == 0) continue;
      for (const auto& source : sources) {
        std::int64_t first = 0;
        std::int64_t rank_sum = 0;
        std::int64_t seen = 0;
        for (const Ballot* b : group) {
          if (ptype_for(ptypes, b->prompt_id) != t) continue;
          const PoolEntry* e = pool_for(pools, *b).by_source(source);
          if (e == nullptr) continue;
          const int rank = b->ranking.at(e->label);
          ++seen;
          rank_sum += rank;
          if (rank == 1) ++first;
        }
        st.first_count[source] = first;
        st.sr_within[source] = ratio(first, st.ballots);
        st.sr_share[source] = ratio(first, table.ballots);
        st.avg_rank[source] = ratio(rank_sum, seen);
      }
      table.strata.emplace(t, std::move(st));
    }
    out.cohorts.emplace(cohort, std::move(table));
  }
  return out;
}

TallyAccumulator::TallyAccumulator(PoolMap pools, PromptTypes ptypes)
    : pools_(std::move(pools)), ptypes_(std::move(ptypes)), all_sources_(pool_sources(pools_)) {}

void TallyAccumulator::add(const Ballot& ballot) {
  const CandidatePool& pool = pool_for(pools_, ballot);
  const PromptType t = ptype_for(ptypes_, ballot.prompt_id);
  auto& c = cohorts_[ballot.cohort];
  ++c.ballots;
  ++c.stratum_ballots[t];
  ++total_;
  for (const auto& e : pool.entries) {
    const int rank = ballot.ranking.at(e.label);
    for (Counter* k : {&c.sources[e.source], &c.stratum_sources[{t, e.source}]}) {
      ++k->appearances;
      k->rank_sum += rank;
      if (rank == 1) ++k->first;
    }
  }
}

Tally TallyAccumulator::snapshot() const {
  if (total_ == 0) throw DataError("no data");
  Tally out;
  for (const auto& [cohort, c] : cohorts_) {
    TallyTable table;
    table.cohort = cohort;
    table.ballots = c.ballots;
    for (const auto& source : all_sources_) {
      SourceStats s;
      if (auto it = c.sources.find(source); it != c.sources.end()) {
        s.first_count = it->second.first;
        s.rank_sum = it->second.rank_sum;
        s.appearances = it->second.appearances;
      }
      s.sr = ratio(s.first_count, c.ballots);
      s.avg_rank = ratio(s.rank_sum, s.appearances);
      table.sources.emplace(source, s);
    }
    for (const auto& [t, n] : c.stratum_ballots) {
      StratumStats st;
      st.ballots = n;
      for (const auto& source : all_sources_) {
        Counter k;
        if (auto it = c.stratum_sources.find({t, source}); it != c.stratum_sources.end()) k = it->second;
        st.first_count[source] = k.first;
        st.sr_within[source] = ratio(k.first, n);
        st.sr_share[source] = ratio(k.first, c.ballots);
        st.avg_rank[source] = ratio(k.rank_sum, k.appearances);
      }
      table.strata.emplace(t, std::move(st));
    }
    out.cohorts.emplace(cohort, std::move(table));
  }
  return out;
}

PairwiseResult pairwise(const std::vector<Ballot>& ballots, const PoolMap& pools,
                        const std::string& a, const std::string& b) {
  if (a == b) throw DataError("pairwise: sources must differ");
  PairwiseResult r;
  r.method_a = a;
  r.method_b = b;
  for (const auto& ballot : ballots) {
    const CandidatePool& pool = pool_for(pools, ballot);
    const PoolEntry* ea = pool.by_source(a);
    const PoolEntry* eb = pool.by_source(b);
    if (ea == nullptr || eb == nullptr) {
      throw DataError("pairwise: pool '" + pool.prompt_id + "' lacks " + (ea ? b : a));
    }
    ++r.n;
    if (ballot.ranking.at(ea->label) < ballot.ranking.at(eb->label)) ++r.wins_a;
  }
  if (r.n == 0) throw DataError("pairwise: no ballots");
  r.win_rate = static_cast<double>(r.wins_a) / static_cast<double>(r.n);
  r.p_value = binomial_upper_tail(r.wins_a, r.n);
  return r;
}

nlohmann::json build_report(const ExperimentSpec& experiment, const std::vector<CandidatePool>& pools,
                            const std::vector<Ballot>& ballots) {
  using nlohmann::json;
  std::vector<std::string> sources = experiment.method_ids;
  sources.emplace_back(kGroundTruth);

  json doc{{"experiment_id", experiment.experiment_id},
           {"seed", experiment.seed},
           {"sources", sources},
           {"prompt_counts", {{"daily", 0}, {"opinion", 0}}},
           {"cohorts", json::object()}};
  for (const auto& p : experiment.prompts) doc["prompt_counts"][std::string(to_string(p.ptype))] =
      doc["prompt_counts"][std::string(to_string(p.ptype))].get<int>() + 1;
  if (ballots.empty()) {
    doc["status"] = "no data";
    return doc;
  }
  doc["status"] = "ok";

  const PoolMap pool_map = index_pools(pools);
  const Tally t = tally(ballots, pool_map, prompt_types(experiment.prompts));
  for (const auto& [cohort, table] : t.cohorts) {
    json c{{"test", test_name(cohort)}, {"ballots", table.ballots}};
    double sr_sum = 0.0;
    json bars = json::array();
    json ranks = json::array();
    for (const auto& s : sources) {
      const SourceStats& st = table.sources.at(s);
      sr_sum += st.sr;
      json stacks = json::object();
      for (PromptType pt : {PromptType::kDaily, PromptType::kOpinion}) {
        auto it = table.strata.find(pt);
        if (it == table.strata.end()) {
          stacks[std::string(to_string(pt))] = nullptr;
        } else {
          stacks[std::string(to_string(pt))] = {{"count", it->second.first_count.at(s)},
                                                {"share", it->second.sr_share.at(s)}};
        }
      }
      bars.push_back({{"source", s}, {"count", st.first_count}, {"sr", st.sr}, {"stacks", stacks}});
      ranks.push_back({{"source", s}, {"avg_rank", st.avg_rank}, {"appearances", st.appearances}});
    }
    c["selection_rate"] = std::move(bars);
    c["sr_sum"] = sr_sum;
    c["avg_rank"] = std::move(ranks);

    json strata = json::object();
    for (PromptType pt : {PromptType::kDaily, PromptType::kOpinion}) {
      const std::string key(to_string(pt));
      auto it = table.strata.find(pt);
      if (it == table.strata.end()) {
        strata[key] = {{"status", "absent"}};
        continue;
      }
      json rows = json::array();
      for (const auto& s : sources) {
        rows.push_back({{"source", s},
                        {"count", it->second.first_count.at(s)},
                        {"sr", it->second.sr_within.at(s)},
                        {"avg_rank", it->second.avg_rank.at(s)}});
      }
      strata[key] = {{"status", "present"}, {"ballots", it->second.ballots}, {"rows", std::move(rows)}};
    }
    c["strata"] = std::move(strata);

    std::vector<Ballot> cohort_ballots;
    for (const auto& b : ballots) {
      if (b.cohort == cohort) cohort_ballots.push_back(b);
    }
    json matrix = json::array();
    for (const auto& a : sources) {
      for (const auto& b : sources) {
        if (a == b) continue;
        const auto r = pairwise(cohort_ballots, pool_map, a, b);
        matrix.push_back({{"a", a}, {"b", b}, {"wins_a", r.wins_a}, {"n", r.n},
                          {"win_rate", r.win_rate}, {"p_value", r.p_value}});
      }
    }
    c["pairwise"] = std::move(matrix);
    doc["cohorts"][std::string(to_string(cohort))] = std::move(c);
  }
  return doc;
}

std::string render_report_tables(const nlohmann::json& report) {
  std::string out;
  char buf[160];
  out += "# experiment " + report.value("experiment_id", std::string{}) + "\n";
  if (report.value("status", std::string{}) != "ok") return out + "no ballots\n";
  for (const auto& [cohort, c] : report.at("cohorts").items()) {
    out += "\n## " + c.at("test").get<std::string>() + " (" + cohort + ", " +
           std::to_string(c.at("ballots").get<std::int64_t>()) + " ballots)\n";
    out += "source\tSR\tSR_daily\tSR_opinion\tfirst_count\tavg_rank\n";
    const auto& ranks = c.at("avg_rank");
    for (std::size_t i = 0; i < c.at("selection_rate").size(); ++i) {
      const auto& bar = c["selection_rate"][i];
      auto share = [&](const char* key) {
        const auto& s = bar.at("stacks").at(key);
        return s.is_null() ? 0.0 : s.at("share").get<double>();
      };
      std::snprintf(buf, sizeof(buf), "%s\t%.4f\t%.4f\t%.4f\t%lld\t%.3f\n",
                    bar.at("source").get<std::string>().c_str(), bar.at("sr").get<double>(),
                    share("daily"), share("opinion"),
                    static_cast<long long>(bar.at("count").get<std::int64_t>()),
                    ranks[i].at("avg_rank").get<double>());
      out += buf;
    }
    out += "\npairwise (a beats b)\ta\tb\twins_a\tn\twin_rate\tp_value\n";
    for (const auto& r : c.at("pairwise")) {
      std::snprintf(buf, sizeof(buf), "\t%s\t%s\t%lld\t%lld\t%.3f\t%.3e\n",
                    r.at("a").get<std::string>().c_str(), r.at("b").get<std::string>().c_str(),
                    static_cast<long long>(r.at("wins_a").get<std::int64_t>()),
                    static_cast<long long>(r.at("n").get<std::int64_t>()),
                    r.at("win_rate").get<double>(), r.at("p_value").get<double>());
      out += buf;
    }
  }
  return out;
}

std::vector<Ballot> read_ballot_log(const std::filesystem::path& path) {
  std::vector<Ballot> out;
  for_each_jsonl(path, [&](std::size_t line_no, const nlohmann::json& rec) {
    try {
      out.push_back(Ballot::from_json(rec));
    } catch (const std::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  });
  return out;
}

void write_ballot_log(const std::vector<Ballot>& ballots, const std::filesystem::path& path) {
  std::string out;
  for (const auto& b : ballots) out += b.to_json().dump() + "\n";
  write_file_atomic(path, out);
}

ArenaService::ArenaService(std::optional<std::filesystem::path> ballot_log, Clock clock)
    : clock_(std::move(clock)) {
  if (ballot_log) {
    if (std::filesystem::exists(*ballot_log)) {
      for (auto& b : read_ballot_log(*ballot_log)) {
        ballot_keys_.emplace(b.experiment_id, b.judge_id, b.prompt_id);
        ballots_.push_back(std::move(b));
      }
    }
    log_ = std::make_unique<JsonlWriter>(*ballot_log, JsonlWriter::Mode::kAppend);
  }
}

ArenaService::ExperimentState& ArenaService::state(const std::string& experiment_id) {
  auto it = experiments_.find(experiment_id);
  if (it == experiments_.end()) {
    throw ArenaError("unknown_experiment", "unknown experiment '" + experiment_id + "'", 404);
  }
  return it->second;
}

const ArenaService::ExperimentState& ArenaService::state(const std::string& experiment_id) const {
  return const_cast<ArenaService*>(this)->state(experiment_id);
}

std::string ArenaService::create_experiment(ExperimentSpec spec) {
  std::lock_guard lock(mu_);
  if (spec.experiment_id.empty()) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "exp-%03zu", experiments_.size() + 1);
    spec.experiment_id = buf;
  }
  if (experiments_.count(spec.experiment_id)) {
    throw ArenaError("duplicate_experiment", "experiment '" + spec.experiment_id + "' exists", 409);
  }
  if (spec.prompts.empty()) throw ArenaError("invalid_request", "experiment needs prompts");
  std::set<std::string> ids(spec.method_ids.begin(), spec.method_ids.end());
  if (ids.size() != spec.method_ids.size() || ids.count(std::string(kGroundTruth))) {
    throw ArenaError("invalid_request", "method ids must be unique and not " + std::string(kGroundTruth));
  }
  const std::string id = spec.experiment_id;
  experiments_.emplace(id, ExperimentState{std::move(spec), {}, {}, std::nullopt});
  return id;
}

void ArenaService::seed_accumulator(ExperimentState& st) {
  st.accumulator.emplace(st.pool_map, prompt_types(st.spec.prompts));
  for (const auto& b : ballots_) {
    if (b.experiment_id == st.spec.experiment_id) st.accumulator->add(b);
  }
}

void ArenaService::set_pools(const std::string& experiment_id, std::vector<CandidatePool> pools) {
  std::lock_guard lock(mu_);
  auto& st = state(experiment_id);
  if (!st.pools.empty()) throw ArenaError("pools_exist", "pools already built for '" + experiment_id + "'", 409);
  st.pool_map = index_pools(pools);
  st.pools = std::move(pools);
  seed_accumulator(st);
}

void ArenaService::build_pools(const std::string& experiment_id,
                               const std::vector<GenerationRecord>& records,
                               const std::map<std::string, std::string>& truths) {
  std::vector<CandidatePool> pools;
  {
    std::lock_guard lock(mu_);
    pools = simarena::build_pools(state(experiment_id).spec, records, truths);
  }
  set_pools(experiment_id, std::move(pools));
}

SessionInfo ArenaService::create_session(const std::string& judge_id, Cohort cohort,
                                         const std::string& experiment_id) {
  std::lock_guard lock(mu_);
  if (judge_id.empty()) throw ArenaError("invalid_request", "judge_id is required");
  std::string exp = experiment_id;
  if (exp.empty()) {
    if (experiments_.size() != 1) {
      throw ArenaError("invalid_request", "experiment_id is required when several experiments exist");
    }
    exp = experiments_.begin()->first;
  }
  const auto& st = state(exp);
  if (st.spec.cohort && *st.spec.cohort != cohort) {
    throw ArenaError("cohort_mismatch", "experiment '" + exp + "' accepts only " +
                                            std::string(to_string(*st.spec.cohort)) + " judges");
  }

  SessionInfo s;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "s-%05zu", ++session_counter_);
  s.session_id = buf;
  s.judge_id = judge_id;
  s.cohort = cohort;
  s.experiment_id = exp;
  std::vector<std::string> all;
  for (const auto& p : st.spec.prompts) all.push_back(p.prompt_id);
  if (st.spec.prompts_per_judge > 0 && st.spec.prompts_per_judge < all.size()) {
    const auto perm = seeded_permutation(all.size(), pool_seed(st.spec.seed, "judge:" + judge_id));
    std::vector<std::size_t> chosen(perm.begin(),
                                    perm.begin() + static_cast<std::ptrdiff_t>(st.spec.prompts_per_judge));
    std::sort(chosen.begin(), chosen.end());
    for (auto i : chosen) s.assigned.push_back(all[i]);
  } else {
    s.assigned = std::move(all);
  }
  for (const auto& b : ballots_) {
    if (b.experiment_id == exp && b.judge_id == judge_id) s.completed.insert(b.prompt_id);
  }
  sessions_.emplace(s.session_id, s);
  return s;
}

SessionInfo ArenaService::session(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ArenaError("unknown_session", "unknown session '" + session_id + "'", 404);
  return it->second;
}

NextItem ArenaService::next(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ArenaError("unknown_session", "unknown session '" + session_id + "'", 404);
  SessionInfo& s = it->second;
  const auto& st = state(s.experiment_id);
  if (st.pools.empty()) throw ArenaError("pools_not_built", "pools not built yet", 409);

  NextItem item;
  item.total = s.assigned.size();
  item.completed = s.completed.size();
  if (s.cohort == Cohort::kStranger) {
    item.profile_card = st.spec.profile_card;
    s.profile_shown = true;
  }
  for (const auto& pid : s.assigned) {
    if (s.completed.count(pid)) continue;
    const CandidatePool& pool = st.pool_map.at(pid);
    item.prompt_id = pid;
    for (const auto& p : st.spec.prompts) {
      if (p.prompt_id == pid) item.prompt_text = p.text;
    }
    for (const auto& e : pool.entries) item.entries.emplace_back(e.label, e.text);
    return item;
  }
  item.done = true;
  return item;
}

SessionInfo ArenaService::submit(const std::string& session_id, const std::string& prompt_id,
                                 const std::map<std::string, int>& ranking) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ArenaError("unknown_session", "unknown session '" + session_id + "'", 404);
  SessionInfo& s = it->second;
  auto& st = state(s.experiment_id);
  if (st.pools.empty()) throw ArenaError("pools_not_built", "pools not built yet", 409);
  if (s.cohort == Cohort::kStranger && !s.profile_shown) {
    throw ArenaError("profile_not_shown", "stranger judges must see the profile card first", 409);
  }
  if (std::find(s.assigned.begin(), s.assigned.end(), prompt_id) == s.assigned.end()) {
    throw ArenaError("prompt_not_assigned", "prompt '" + prompt_id + "' is not assigned to this session");
  }
  const auto key = std::make_tuple(s.experiment_id, s.judge_id, prompt_id);
  if (ballot_keys_.count(key)) {
    throw ArenaError("duplicate_ballot", "judge '" + s.judge_id + "' already ranked '" + prompt_id + "'", 409);
  }
  validate_ranking(st.pool_map.at(prompt_id), ranking);

  Ballot b{s.experiment_id, s.judge_id, prompt_id, s.cohort, ranking, clock_()};
  if (log_) log_->write(b.to_json());
  ballot_keys_.insert(key);
  ballots_.push_back(b);
  if (st.accumulator) st.accumulator->add(b);
  s.completed.insert(prompt_id);
  return s;
}

std::vector<Ballot> ArenaService::ballots(const std::string& experiment_id) const {
  std::lock_guard lock(mu_);
  std::vector<Ballot> out;
  for (const auto& b : ballots_) {
    if (b.experiment_id == experiment_id) out.push_back(b);
  }
  return out;
}

Tally ArenaService::live_tally(const std::string& experiment_id) const {
  std::lock_guard lock(mu_);
  const auto& st = state(experiment_id);
  if (!st.accumulator) throw DataError("no data");
  return st.accumulator->snapshot();
}

nlohmann::json ArenaService::report(const std::string& experiment_id) const {
  std::lock_guard lock(mu_);
  const auto& st = state(experiment_id);
  std::vector<Ballot> mine;
  for (const auto& b : ballots_) {
    if (b.experiment_id == experiment_id) mine.push_back(b);
  }
  if (st.pools.empty() && !mine.empty()) throw ArenaError("pools_not_built", "pools not built yet", 409);
  return build_report(st.spec, st.pools, mine);
}

std::vector<std::string> ArenaService::experiment_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, st] : experiments_) out.push_back(id);
  return out;
}

const ExperimentSpec& ArenaService::experiment(const std::string& experiment_id) const {
  std::lock_guard lock(mu_);
  return state(experiment_id).spec;
}

}  // namespace simarena
