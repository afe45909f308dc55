// simarena: corpus, index, memory, generation, evaluation, sweep and arena
// commands over one JSON experiment config.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "simarena/anonymize.hpp"
#include "simarena/arena.hpp"
#include "simarena/arena_server.hpp"
#include "simarena/corpus.hpp"
#include "simarena/error.hpp"
#include "simarena/experiment.hpp"
#include "simarena/hash.hpp"
#include "simarena/jsonl.hpp"
#include "simarena/metrics.hpp"
#include "simarena/mock_endpoints.hpp"
#include "simarena/synthetic.hpp"

namespace fs = std::filesystem;
using namespace simarena;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kEndpoint = 3 };

void write_meta(const fs::path& artifact, const std::string& config_hash, json extra) {
  extra["config_hash"] = config_hash;
  extra["artifact"] = artifact.filename().string();
  write_file_atomic(artifact.string() + ".meta.json", extra.dump(2) + "\n");
}

fs::path work_dir(const ExperimentConfig& cfg) {
  const auto dir = cfg.resolve(cfg.work_dir);
  fs::create_directories(dir);
  return dir;
}

fs::path embedding_cache(const ExperimentConfig& cfg) { return work_dir(cfg) / "embedding_cache.jsonl"; }

std::vector<ConversationPair> staged_pairs(const ExperimentConfig& cfg) {
  auto pairs = stage_corpus(cfg);
  std::fprintf(stderr, "staged %zu pairs\n", pairs.size());
  return pairs;
}

// --- corpus ---------------------------------------------------------------

struct CorpusArgs {
  std::string config;
  std::string input;
  std::string format = "jsonl";
  std::string blacklist;
  std::string rules;
  std::string out;
  std::string kind = "eval_pairs";
  std::string persona;
  int window_years = 0;
  std::optional<std::int64_t> merge_window;
  std::optional<std::int64_t> pair_window;
  std::optional<double> coverage;
  std::optional<std::size_t> short_max;
  std::string stats_out;
};

void apply_overrides(const CorpusArgs& a, PipelineConfig& pc) {
  if (a.merge_window) pc.merge_window = *a.merge_window;
  if (a.pair_window) pc.pair_window = *a.pair_window;
  if (a.coverage) pc.coverage_threshold = *a.coverage;
  if (a.short_max) pc.short_reply_max_chars = *a.short_max;
  pc.validate();
}

int cmd_corpus(const CorpusArgs& a) {
  std::vector<ConversationPair> pairs;
  std::string hash;
  std::int64_t conversation_gap = 12 * 3600;
  if (!a.config.empty()) {
    auto cfg = ExperimentConfig::load(a.config);
    apply_overrides(a, cfg.pipeline);
    pairs = staged_pairs(cfg);
    hash = cfg.hash;
    conversation_gap = cfg.pipeline.conversation_gap;
  } else {
    PipelineConfig pc = PipelineConfig::defaults();
    if (!a.blacklist.empty()) load_blacklist_file(a.blacklist, pc);
    apply_overrides(a, pc);
    auto rules = Anonymizer::builtin_rules();
    if (!a.rules.empty()) {
      auto extra = Anonymizer::load_rules(a.rules);
      rules.insert(rules.end(), extra.begin(), extra.end());
    }
    auto events = anonymize(ingest(a.input, parse_input_format(a.format)), Anonymizer(std::move(rules)));
    pairs = build_pairs(events, pc);
    hash = sha256_hex(json{{"input", a.input},
                           {"format", a.format},
                           {"blacklist", a.blacklist},
                           {"rules", a.rules},
                           {"merge_window", pc.merge_window},
                           {"pair_window", pc.pair_window},
                           {"coverage_threshold", pc.coverage_threshold},
                           {"short_reply_max_chars", pc.short_reply_max_chars}}
                          .dump());
  }
  if (a.window_years > 0 && !pairs.empty()) pairs = window(pairs, TemporalWindow{a.window_years, std::nullopt});

  ExportOptions opts;
  opts.kind = a.kind == "training_chat" ? ExportKind::kTrainingChat : ExportKind::kEvalPairs;
  opts.system_persona = a.persona;
  opts.conversation_gap = conversation_gap;
  const auto stats = export_pairs(pairs, a.out, opts);
  const json stats_doc{{"config_hash", hash},
                       {"pairs", pairs.size()},
                       {"conversation_count", stats.conversation_count},
                       {"message_count", stats.message_count},
                       {"token_count", stats.token_count}};
  write_meta(a.out, hash, {{"kind", a.kind}, {"window_years", a.window_years}, {"stats", stats_doc}});
  if (!a.stats_out.empty()) write_file_atomic(a.stats_out, stats_doc.dump(2) + "\n");
  std::printf("pairs\t%zu\nconversations\t%lld\nmessages\t%lld\ntokens\t%lld\n", pairs.size(),
              static_cast<long long>(stats.conversation_count), static_cast<long long>(stats.message_count),
              static_cast<long long>(stats.token_count));
  return kOk;
}

// --- index / memory ----------------------------------------------------------

int cmd_index_build(const std::string& config, std::string out) {
  const auto cfg = ExperimentConfig::load(config);
  const auto pairs = staged_pairs(cfg);
  auto emb = make_embedder(cfg.embedding, cfg.http_options(), embedding_cache(cfg));
  const auto index = build_pair_index(pairs, emb.get());
  if (out.empty()) out = (work_dir(cfg) / "index").string();
  index.save(out);
  write_file_atomic(fs::path(out) / "config_hash", cfg.hash + "\n");
  std::printf("indexed %zu items (%s, dim %zu) -> %s\n", index.size(), index.model_id().c_str(), index.dimension(),
              out.c_str());
  return kOk;
}

int cmd_memory_build(const std::string& config, std::string out, bool no_llm) {
  auto cfg = ExperimentConfig::load(config);
  if (no_llm) cfg.memory.use_llm_attributes = false;
  const auto pairs = staged_pairs(cfg);
  auto emb = make_embedder(cfg.embedding, cfg.http_options(), embedding_cache(cfg));
  std::shared_ptr<ChatClient> client;
  std::unique_ptr<ChatAttributeExtractor> extractor;
  if (cfg.memory.use_llm_attributes) {
    client = http_chat_factory(cfg.http_options())(cfg.base_endpoint);
    extractor = std::make_unique<ChatAttributeExtractor>(*client, cfg.attribute_model);
  }
  MemoryStore store(emb.get(), cfg.memory, extractor.get());
  store.add_notes(pairs);
  if (out.empty()) out = (work_dir(cfg) / "memory").string();
  store.save(out);
  write_file_atomic(fs::path(out) / "config_hash", cfg.hash + "\n");
  for (const auto& w : store.warnings()) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("built %zu notes -> %s\n", store.size(), out.c_str());
  return kOk;
}

// --- generate / eval ---------------------------------------------------------

int cmd_generate(const std::string& config, std::string journal, const std::vector<std::string>& only) {
  const auto cfg = ExperimentConfig::load(config);
  const auto pairs = staged_pairs(cfg);
  const auto prompts = read_prompts(cfg.resolve(cfg.prompts));
  std::vector<MethodSpec> methods;
  for (const auto& m : cfg.methods) {
    if (only.empty() || std::find(only.begin(), only.end(), m.method_id) != only.end()) methods.push_back(m);
  }
  if (methods.empty()) throw DataError("no configured method matches --methods");
  auto emb = make_embedder(cfg.embedding, cfg.http_options(), embedding_cache(cfg));
  if (journal.empty()) journal = (work_dir(cfg) / "records.jsonl").string();
  GenerationSetup setup{http_chat_factory(cfg.http_options()), system_clock()};
  const auto summary = generate_methods(cfg, methods, pairs, prompts, emb.get(), setup, journal);
  write_meta(journal, cfg.hash, {{"records", summary.records.size()}, {"failures", summary.failures.size()}});
  std::printf("records\t%zu\ngenerated\t%zu\nreused\t%zu\nfailures\t%zu\n", summary.records.size(), summary.generated,
              summary.reused, summary.failures.size());
  for (const auto& f : summary.failures) {
    std::fprintf(stderr, "failed (%s, %s): %s\n", f.method_id.c_str(), f.prompt_id.c_str(), f.error.c_str());
  }
  return summary.complete() ? kOk : kEndpoint;
}

int cmd_eval(const std::string& records_path, const std::string& truth_path, const std::string& out,
             const std::string& config) {
  const auto records = read_records(records_path);
  const auto truths = read_truths(truth_path);
  const auto reports = evaluate(records, truths);
  std::vector<std::string> order;
  std::string hash = sha256_hex(json{{"records", records_path}, {"truth", truth_path}}.dump());
  if (!config.empty()) {
    const auto cfg = ExperimentConfig::load(config);
    for (const auto& m : cfg.methods) order.push_back(m.method_id);
    hash = cfg.hash;
  } else {
    for (const auto& r : records) {
      if (std::find(order.begin(), order.end(), r.method_id) == order.end()) order.push_back(r.method_id);
    }
  }
  json doc = metrics_document(reports);
  doc["config_hash"] = hash;
  const std::string table = metrics_table(reports, order);
  write_file_atomic(out, doc.dump(2) + "\n");
  const fs::path tsv = fs::path(out).replace_extension(".tsv");
  write_file_atomic(tsv, "# config_hash " + hash + "\n" + table);
  std::fputs(table.c_str(), stdout);
  return kOk;
}

// --- sweep -------------------------------------------------------------------

int cmd_sweep(const std::string& config, std::string out) {
  const auto cfg = ExperimentConfig::load(config);
  const auto pairs = staged_pairs(cfg);
  const auto prompts = read_prompts(cfg.resolve(cfg.prompts));
  const auto truths = read_truths(cfg.resolve(cfg.truths));
  auto emb = make_embedder(cfg.embedding, cfg.http_options(), embedding_cache(cfg));
  GenerationSetup setup{http_chat_factory(cfg.http_options()), system_clock()};
  const auto result = run_sweep(cfg, pairs, prompts, truths, emb.get(), setup);
  if (out.empty()) out = (work_dir(cfg) / "sweep").string();
  fs::create_directories(out);
  write_file_atomic(fs::path(out) / "sweep.json", result.to_json(cfg.hash).dump(2) + "\n");
  write_file_atomic(fs::path(out) / "sweep.tsv", "# config_hash " + cfg.hash + "\n" + result.table());
  std::fputs(result.table().c_str(), stdout);
  std::fprintf(stderr, "embedding cache: %zu hits, %zu misses\n", emb.cached->hits(), emb.cached->misses());
  for (const auto& f : result.failures) {
    std::fprintf(stderr, "failed (%s, %s): %s\n", f.method_id.c_str(), f.prompt_id.c_str(), f.error.c_str());
  }
  return result.failures.empty() ? kOk : kEndpoint;
}

// --- arena -------------------------------------------------------------------

ExperimentSpec spec_from_config(const ExperimentConfig& cfg, const std::string& experiment_id) {
  ExperimentSpec spec;
  spec.experiment_id = experiment_id;
  spec.prompts = read_prompts(cfg.resolve(cfg.prompts));
  for (const auto& m : cfg.methods) spec.method_ids.push_back(m.method_id);
  spec.seed = cfg.seed;
  spec.profile_card = load_profile(cfg).profile_card;
  return spec;
}

fs::path ballot_path(const ExperimentConfig& cfg) {
  return cfg.ballots ? cfg.resolve(*cfg.ballots) : work_dir(cfg) / "ballots.jsonl";
}

fs::path records_path(const ExperimentConfig& cfg, const std::string& override_path) {
  return override_path.empty() ? work_dir(cfg) / "records.jsonl" : fs::path(override_path);
}

ArenaServer* g_server = nullptr;
MockEndpointServer* g_mock = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
  if (g_mock) g_mock->stop();
}

int cmd_serve(const std::string& config, const std::string& host, int port, const std::string& experiment_id,
              const std::string& records_override) {
  ExperimentConfig cfg;
  std::optional<fs::path> log;
  if (!config.empty()) {
    cfg = ExperimentConfig::load(config);
    log = ballot_path(cfg);
  }
  ArenaService service(log);
  if (!config.empty()) {
    service.create_experiment(spec_from_config(cfg, experiment_id));
    const auto rp = records_path(cfg, records_override);
    if (fs::exists(rp)) {
      service.build_pools(experiment_id, read_records(rp), read_truths(cfg.resolve(cfg.truths)));
      std::fprintf(stderr, "pools built from %s\n", rp.string().c_str());
    }
  }
  ArenaServer server(service);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::fprintf(stderr, "arena listening on http://%s:%d\n", host.c_str(), port);
  server.listen_blocking(host, port);
  return kOk;
}

int cmd_report(const std::string& config, const std::string& experiment_id, const std::string& records_override,
               const std::string& ballots_override, std::string out) {
  const auto cfg = ExperimentConfig::load(config);
  const auto spec = spec_from_config(cfg, experiment_id);
  const auto pools = build_pools(spec, read_records(records_path(cfg, records_override)),
                                 read_truths(cfg.resolve(cfg.truths)));
  std::vector<Ballot> ballots;
  for (auto& b : read_ballot_log(ballots_override.empty() ? ballot_path(cfg) : fs::path(ballots_override))) {
    if (b.experiment_id == experiment_id) ballots.push_back(std::move(b));
  }
  json report = build_report(spec, pools, ballots);
  report["config_hash"] = cfg.hash;
  if (out.empty()) out = (work_dir(cfg) / "report").string();
  fs::create_directories(out);
  const std::string tables = render_report_tables(report);
  write_file_atomic(fs::path(out) / "report.json", report.dump(2) + "\n");
  write_file_atomic(fs::path(out) / "report.tsv", "# config_hash " + cfg.hash + "\n" + tables);
  std::fputs(tables.c_str(), stdout);
  return kOk;
}

// --- synthetic / mocks ---------------------------------------------------------

int cmd_synth(const std::string& out, const SynthOptions& opts) {
  const auto bundle = make_synthetic(opts);
  write_synthetic_bundle(bundle, out);
  std::printf("events\t%zu\nprompts\t%zu\n", bundle.events.size(), bundle.prompts.size());
  return kOk;
}

int cmd_mock_serve(const std::string& host, int port) {
  MockEndpointServer mock;
  g_mock = &mock;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::fprintf(stderr, "mock endpoints on http://%s:%d/v1/{embeddings,chat/completions}\n", host.c_str(), port);
  mock.listen_blocking(host, port);
  return kOk;
}

int cmd_dry_run(const DryRunOptions& opts) {
  const auto r = run_dry_run(opts);
  std::printf("config_hash\t%s\npairs\t%zu\nrecords\t%zu\npool_size\t%zu\nballots\t%zu\n\n", r.config_hash.c_str(),
              r.pairs, r.records, r.pool_size, r.ballots);
  std::fputs(r.report_tables.c_str(), stdout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simarena: persona simulation pipeline and ranking arena"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "simarena 0.3.0");

  CorpusArgs ca;
  auto* corpus = app.add_subcommand("corpus", "Build conversation pairs from a chat archive and export them");
  auto* src = corpus->add_option_group("source");
  src->add_option("--config", ca.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  src->add_option("--input", ca.input, "Event file (jsonl or tsv)");
  src->require_option(1);
  corpus->add_option("--format", ca.format, "Input format")->check(CLI::IsMember({"jsonl", "tsv"}));
  corpus->add_option("--blacklist", ca.blacklist, "Blacklist file (one entry per line, re:<regex> for patterns)");
  corpus->add_option("--rules", ca.rules, "Extra anonymization rules (jsonl)");
  corpus->add_option("--out", ca.out, "Destination file")->required();
  corpus->add_option("--kind", ca.kind, "Export kind")->check(CLI::IsMember({"eval_pairs", "training_chat"}));
  corpus->add_option("--persona", ca.persona, "System persona for training_chat exports");
  corpus->add_option("--merge-window", ca.merge_window, "Same-speaker merge window, seconds (default 120)");
  corpus->add_option("--pair-window", ca.pair_window, "Prompt/response pairing window, seconds (default 300)");
  corpus->add_option("--coverage", ca.coverage, "Character-coverage threshold for short replies (default 0.8)");
  corpus->add_option("--short-max", ca.short_max, "Longest reply, in characters, checked for coverage (default 10)");
  corpus->add_option("--stats-out", ca.stats_out, "Write corpus statistics (JSON) here");
  corpus->add_option("--window-years", ca.window_years, "Keep only the most recent N years")->check(CLI::PositiveNumber);

  std::string config, out, journal, records, truth, ballots, host = "127.0.0.1", experiment_id = "main";
  std::vector<std::string> only;
  bool no_llm = false;
  int port = 8080;

  auto* index = app.add_subcommand("index", "Vector index commands");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "Embed the staged pairs into a vector index");
  index_build->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  index_build->add_option("--out", out, "Index directory (default <work_dir>/index)");

  auto* memory = app.add_subcommand("memory", "Memory store commands");
  memory->require_subcommand(1);
  auto* memory_build = memory->add_subcommand("build", "Build linked memory notes from the staged pairs");
  memory_build->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  memory_build->add_option("--out", out, "Store directory (default <work_dir>/memory)");
  memory_build->add_flag("--no-llm", no_llm, "Use heuristic note attributes instead of the chat endpoint");

  auto* generate = app.add_subcommand("generate", "Run the method x prompt generation matrix");
  generate->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  generate->add_option("--journal", journal, "Record journal (default <work_dir>/records.jsonl)");
  generate->add_option("--methods", only, "Restrict to these method ids")->delimiter(',');

  auto* eval = app.add_subcommand("eval", "Score generation records against ground truth");
  eval->add_option("--records", records, "Records (jsonl)")->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", truth, "Ground truth (jsonl of {prompt_id, response})")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Metrics document (JSON); a .tsv table is written alongside")->required();
  eval->add_option("--config", config, "Experiment config, for method order and config hash")->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Temporal-window sweep Y1..YN for the configured sweep method");
  sweep->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Output directory (default <work_dir>/sweep)");

  auto* serve = app.add_subcommand("serve", "Serve the arena HTTP API");
  serve->add_option("--config", config, "Experiment config; preloads its experiment and pools")->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_option("--experiment-id", experiment_id, "Id of the preloaded experiment");
  serve->add_option("--records", records, "Records used for pools (default <work_dir>/records.jsonl)");

  auto* report = app.add_subcommand("report", "Tally a ballot log into report tables");
  report->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  report->add_option("--experiment-id", experiment_id, "Experiment id in the ballot log");
  report->add_option("--records", records, "Records used for pools (default <work_dir>/records.jsonl)");
  report->add_option("--ballots", ballots, "Ballot log (default from config)");
  report->add_option("--out", out, "Output directory (default <work_dir>/report)");

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Write the synthetic multi-year archive, prompts and truths");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--years", so.years, "Years of history")->check(CLI::PositiveNumber);
  synth->add_option("--sessions-per-year", so.sessions_per_year, "Chat sessions per year")->check(CLI::PositiveNumber);
  synth->add_option("--seed", so.seed, "Generator seed");

  auto* mock = app.add_subcommand("mock-serve", "Serve mock embedding and chat endpoints");
  mock->add_option("--host", host, "Bind address");
  mock->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));

  DryRunOptions dro;
  auto* dry = app.add_subcommand("dry-run", "Offline end-to-end run: synthetic corpus, mocks, scripted judges");
  dry->add_option("--work", dro.work_dir, "Work directory (wiped first)")->required();
  dry->add_option("--seed", dro.seed, "Experiment seed");
  dry->add_option("--judges", dro.judges_per_cohort, "Scripted judges per cohort")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*corpus) return cmd_corpus(ca);
    if (*index_build) return cmd_index_build(config, out);
    if (*memory_build) return cmd_memory_build(config, out, no_llm);
    if (*generate) return cmd_generate(config, journal, only);
    if (*eval) return cmd_eval(records, truth, out, config);
    if (*sweep) return cmd_sweep(config, out);
    if (*serve) return cmd_serve(config, host, port, experiment_id, records);
    if (*report) return cmd_report(config, experiment_id, records, ballots, out);
    if (*synth) return cmd_synth(out, so);
    if (*mock) return cmd_mock_serve(host, port);
    if (*dry) return cmd_dry_run(dro);
  } catch (const EndpointError& e) {
    std::fprintf(stderr, "endpoint error: %s\n", e.what());
    return kEndpoint;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
