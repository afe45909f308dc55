#include <gtest/gtest.h>

#include <fstream>

#include "simarena/error.hpp"
#include "simarena/experiment.hpp"
#include "simarena/mock_endpoints.hpp"
#include "simarena/synthetic.hpp"
#include "temp_dir.hpp"

using namespace simarena;
using nlohmann::json;

namespace {

SynthOptions small_synth() {
  SynthOptions o;
  o.years = 4;
  o.sessions_per_year = 30;
  o.daily_prompts = 4;
  o.opinion_prompts = 4;
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json minimal_config() {
  return {{"paths", {{"events", "events.jsonl"}, {"prompts", "prompts.jsonl"}, {"truths", "truths.jsonl"},
                     {"work_dir", "work"}}},
          {"endpoints", {{"base", {{"url", "http://127.0.0.1:9/v1/chat/completions"}, {"model", "b"}}},
                         {"adapted", {{"url", "http://127.0.0.1:9/v1/chat/completions"}, {"model", "a"}}}}}};
}

}  // namespace

TEST(Config, DefaultsAndResolution) {
  const auto cfg = ExperimentConfig::from_json(minimal_config(), "/data/run");
  EXPECT_EQ(cfg.resolve(cfg.events), std::filesystem::path("/data/run/events.jsonl"));
  EXPECT_EQ(cfg.resolve("/abs/x"), std::filesystem::path("/abs/x"));
  EXPECT_EQ(cfg.methods.size(), 5u);
  EXPECT_EQ(cfg.retrieval.k, 5u);
  EXPECT_DOUBLE_EQ(cfg.retrieval.min_cosine, 0.35);
  EXPECT_DOUBLE_EQ(cfg.retrieval.dedup_cosine, 0.92);
  EXPECT_EQ(cfg.memory.k_link, 3);
  EXPECT_EQ(cfg.pipeline.merge_window, 120);
  EXPECT_EQ(cfg.pipeline.pair_window, 300);
  EXPECT_EQ(cfg.sweep_years, 10);
  for (const auto& m : cfg.methods) EXPECT_EQ(m.decoding, DecodingConfig{});
  EXPECT_EQ(cfg.hash.size(), 64u);
  EXPECT_EQ(ExperimentConfig::from_json(minimal_config(), "/elsewhere").hash, cfg.hash);
  auto changed = minimal_config();
  changed["seed"] = 9;
  EXPECT_NE(ExperimentConfig::from_json(changed, "/data/run").hash, cfg.hash);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = minimal_config();
  j["retreival"] = json::object();
  EXPECT_THROW(ExperimentConfig::from_json(j, "/"), DataError);
  j = minimal_config();
  j["retrieval"] = {{"k", 0}};
  EXPECT_THROW(ExperimentConfig::from_json(j, "/"), DataError);
  j = minimal_config();
  j["decoding"] = {{"temperature", -1}};
  EXPECT_THROW(ExperimentConfig::from_json(j, "/"), DataError);
  j = minimal_config();
  j["sweep"] = {{"method", "nope"}};
  EXPECT_NO_THROW(ExperimentConfig::from_json(j, "/"));
  j = minimal_config();
  j["paths"].erase("events");
  EXPECT_THROW(ExperimentConfig::from_json(j, "/"), std::exception);
}

TEST(Config, MethodOverridesAndDecodingOverride) {
  auto j = minimal_config();
  j["decoding"] = {{"temperature", 0.5}};
  j["methods"] = json::array({{{"method_id", "only"}, {"endpoint", "adapted"}, {"augmentation", "rag"}}});
  const auto cfg = ExperimentConfig::from_json(j, "/");
  ASSERT_EQ(cfg.methods.size(), 1u);
  EXPECT_EQ(cfg.methods[0].augmentation, Augmentation::kRag);
  EXPECT_EQ(cfg.methods[0].endpoint.model, "a");
  EXPECT_DOUBLE_EQ(cfg.methods[0].decoding.temperature, 0.5);
}

TEST(Synthetic, DeterministicAndWellFormed) {
  const auto a = make_synthetic(small_synth());
  const auto b = make_synthetic(small_synth());
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    EXPECT_EQ(a.events[i].event_id, b.events[i].event_id);
    EXPECT_EQ(a.events[i].text, b.events[i].text);
  }
  EXPECT_EQ(a.prompts.size(), 8u);
  EXPECT_EQ(a.truths.size(), 8u);
  for (std::size_t i = 1; i < a.events.size(); ++i) {
    EXPECT_LE(a.events[i - 1].timestamp, a.events[i].timestamp);
  }
  EXPECT_LT(a.events.back().timestamp, small_synth().end_ts);
  EXPECT_GE(a.events.front().timestamp, small_synth().end_ts - 4 * 365 * 86400 - 86400);
}

TEST(Pipeline, StageCorpusDropsHeldOutPrompts) {
  TempDir dir;
  auto bundle = make_synthetic(small_synth());
  write_synthetic_bundle(bundle, dir.path());
  const auto cfg = ExperimentConfig::from_json(synthetic_config(dir.path(), dir / "work", "http://127.0.0.1:9", 1), dir.path());
  const auto pairs = stage_corpus(cfg);
  ASSERT_FALSE(pairs.empty());
  std::set<std::string> held;
  for (const auto& p : bundle.prompts) held.insert(normalize_reply(p.text));
  for (const auto& p : pairs) EXPECT_EQ(held.count(normalize_reply(p.prompt())), 0u) << p.prompt();
}

TEST(Pipeline, SweepRowsNestAndResume) {
  TempDir dir;
  auto bundle = make_synthetic(small_synth());
  write_synthetic_bundle(bundle, dir.path());
  MockEndpointServer mock;
  mock.start();
  auto doc = synthetic_config(dir.path(), dir / "work", mock.base_url(), 1);
  doc["sweep"]["years"] = 5;
  const auto cfg = ExperimentConfig::from_json(doc, dir.path());
  const auto pairs = stage_corpus(cfg);
  const auto cache = dir / "work" / "embedding_cache.jsonl";
  auto emb = make_embedder(cfg.embedding, cfg.http_options(), cache);
  GenerationSetup setup{http_chat_factory(cfg.http_options()), [] { return std::int64_t{1}; }};
  const auto first = run_sweep(cfg, pairs, bundle.prompts, bundle.truths, emb.get(), setup);
  ASSERT_EQ(first.rows.size(), 5u);
  EXPECT_TRUE(first.failures.empty());
  for (std::size_t i = 1; i < first.rows.size(); ++i) EXPECT_LE(first.rows[i - 1].pairs, first.rows[i].pairs);
  EXPECT_EQ(first.rows[4].pairs, first.rows[3].pairs);  // only four years of data
  EXPECT_EQ(first.rows[3].pairs, pairs.size());
  EXPECT_TRUE(std::filesystem::exists(dir / "work" / "sweep" / "Y3" / "records.jsonl"));
  const auto table = first.table();
  EXPECT_NE(table.find("BLEU-1"), std::string::npos);
  EXPECT_EQ(first.to_json("h")["rows"].size(), 5u);

  // A fresh process would rebuild the embedder from the on-disk cache.
  mock.clear_captured();
  auto emb2 = make_embedder(cfg.embedding, cfg.http_options(), cache);
  const auto again = run_sweep(cfg, pairs, bundle.prompts, bundle.truths, emb2.get(), setup);
  EXPECT_EQ(mock.request_count(), 0u);
  EXPECT_EQ(again.to_json("h"), first.to_json("h"));
}

TEST(ScriptedJudge, RankingIsPermutation) {
  const std::vector<std::pair<std::string, std::string>> entries = {
      {"A", "hotpot tonight"}, {"B", "no idea"}, {"C", "hotpot"}, {"D", "x"}};
  const auto r = scripted_ranking({"acq-01", Cohort::kAcquaintance}, "p", entries, "hotpot tonight", "card");
  std::set<int> ranks;
  for (const auto& [l, k] : r) ranks.insert(k);
  EXPECT_EQ(ranks, (std::set<int>{1, 2, 3, 4}));
  EXPECT_EQ(r, scripted_ranking({"acq-01", Cohort::kAcquaintance}, "p", entries, "hotpot tonight", "card"));
}

TEST(DryRun, EndToEndDeterministic) {
  TempDir dir;
  DryRunOptions opts;
  opts.synth = small_synth();
  opts.judges_per_cohort = 2;
  opts.work_dir = dir / "a";
  const auto a = run_dry_run(opts);
  opts.work_dir = dir / "b";
  const auto b = run_dry_run(opts);
  EXPECT_EQ(a.records, 5u * 8u);
  EXPECT_EQ(a.pool_size, 6u);
  EXPECT_EQ(a.ballots, 2u * 2u * 8u);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(a.report_tables, b.report_tables);
  EXPECT_EQ(slurp(dir / "a" / "ballots.jsonl"), slurp(dir / "b" / "ballots.jsonl"));
  EXPECT_TRUE(a.report["cohorts"].contains("acquaintance"));
  EXPECT_TRUE(a.report["cohorts"].contains("stranger"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "metrics.tsv"));
  EXPECT_EQ(a.metrics.size(), 5u);
}
