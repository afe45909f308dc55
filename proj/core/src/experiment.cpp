#include "simarena/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "simarena/anonymize.hpp"
#include "simarena/arena_server.hpp"
#include "simarena/error.hpp"
#include "simarena/hash.hpp"
#include "simarena/http.hpp"
#include "simarena/jsonl.hpp"
#include "simarena/mock_endpoints.hpp"

namespace simarena {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed",   "paths",     "input_format", "pipeline", "retrieval",     "memory", "embedding",
      "endpoints", "methods", "decoding",    "retry",    "max_in_flight", "sweep",  "name"};
  return keys;
}

std::optional<std::filesystem::path> opt_path(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return std::filesystem::path(j[key].get<std::string>());
}

EndpointSpec endpoint_from_json(const json& j, EndpointKind kind) {
  EndpointSpec ep;
  ep.kind = kind;
  ep.url = j.at("url").get<std::string>();
  ep.model = j.at("model").get<std::string>();
  ep.api_key_env = j.value("api_key_env", std::string{});
  return ep;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw DataError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known_keys().count(key)) throw DataError("config: unknown key '" + key + "'");
  }
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  try {
    const json& paths = j.at("paths");
    cfg.events = paths.at("events").get<std::string>();
    cfg.prompts = paths.at("prompts").get<std::string>();
    cfg.truths = paths.at("truths").get<std::string>();
    cfg.work_dir = paths.value("work_dir", std::string("work"));
    cfg.profile = opt_path(paths, "profile");
    cfg.anonymization_rules = opt_path(paths, "anonymization_rules");
    cfg.blacklist = opt_path(paths, "blacklist");
    cfg.ballots = opt_path(paths, "ballots");
    cfg.input_format = parse_input_format(j.value("input_format", std::string("jsonl")));

    if (j.contains("pipeline")) {
      const json& p = j["pipeline"];
      cfg.pipeline.merge_window = p.value("merge_window", cfg.pipeline.merge_window);
      cfg.pipeline.pair_window = p.value("pair_window", cfg.pipeline.pair_window);
      cfg.pipeline.coverage_threshold = p.value("coverage_threshold", cfg.pipeline.coverage_threshold);
      cfg.pipeline.short_reply_max_chars = p.value("short_reply_max_chars", cfg.pipeline.short_reply_max_chars);
      cfg.pipeline.conversation_gap = p.value("conversation_gap", cfg.pipeline.conversation_gap);
      if (p.contains("blacklist")) cfg.pipeline.blacklist = p["blacklist"].get<std::vector<std::string>>();
      if (p.contains("placeholder_patterns")) {
        cfg.pipeline.placeholder_patterns = p["placeholder_patterns"].get<std::vector<std::string>>();
      }
    }
    if (j.contains("retrieval")) {
      const json& r = j["retrieval"];
      cfg.retrieval.k = r.value("k", cfg.retrieval.k);
      cfg.retrieval.min_cosine = r.value("min_cosine", cfg.retrieval.min_cosine);
      cfg.retrieval.dedup_cosine = r.value("dedup_cosine", cfg.retrieval.dedup_cosine);
    }
    if (j.contains("memory")) {
      const json& m = j["memory"];
      cfg.memory.use_llm_attributes = m.value("use_llm_attributes", cfg.memory.use_llm_attributes);
      cfg.memory.k_link = m.value("k_link", cfg.memory.k_link);
      cfg.memory.link_min_cosine = m.value("link_min_cosine", cfg.memory.link_min_cosine);
      cfg.attribute_model = m.value("attribute_model", std::string{});
    }
    if (j.contains("embedding")) {
      const json& e = j["embedding"];
      cfg.embedding.url = e.value("url", std::string{});
      cfg.embedding.model = e.value("model", cfg.embedding.model);
      cfg.embedding.batch_size = e.value("batch_size", cfg.embedding.batch_size);
      cfg.embedding.dimension = e.value("dimension", cfg.embedding.dimension);
    }
    const json& eps = j.at("endpoints");
    cfg.base_endpoint = endpoint_from_json(eps.at("base"), EndpointKind::kBase);
    cfg.adapted_endpoint = endpoint_from_json(eps.at("adapted"), EndpointKind::kAdapted);
    if (cfg.attribute_model.empty()) cfg.attribute_model = cfg.base_endpoint.model;

    const DecodingConfig decoding = j.value("decoding", DecodingConfig{});
    if (j.contains("methods")) {
      for (const auto& m : j["methods"]) {
        MethodSpec spec;
        spec.method_id = m.at("method_id").get<std::string>();
        const EndpointKind kind = parse_endpoint_kind(m.at("endpoint").get<std::string>());
        spec.endpoint = kind == EndpointKind::kBase ? cfg.base_endpoint : cfg.adapted_endpoint;
        spec.augmentation = parse_augmentation(m.value("augmentation", std::string("none")));
        spec.decoding = m.value("decoding", decoding);
        cfg.methods.push_back(std::move(spec));
      }
    } else {
      cfg.methods = default_methods(cfg.base_endpoint, cfg.adapted_endpoint);
      for (auto& m : cfg.methods) m.decoding = decoding;
    }
    if (j.contains("retry")) {
      cfg.retry.attempts = j["retry"].value("attempts", cfg.retry.attempts);
      cfg.retry.initial_backoff =
          std::chrono::milliseconds(j["retry"].value("initial_backoff_ms", cfg.retry.initial_backoff.count()));
    }
    cfg.max_in_flight = j.value("max_in_flight", cfg.max_in_flight);
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("sweep")) {
      cfg.sweep_years = j["sweep"].value("years", cfg.sweep_years);
      cfg.sweep_method = j["sweep"].value("method", cfg.sweep_method);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }

  cfg.pipeline.validate();
  cfg.retrieval.validate();
  cfg.memory.validate();
  validate_methods(cfg.methods);
  if (cfg.retry.attempts < 1) throw DataError("config: retry.attempts must be >= 1");
  if (cfg.max_in_flight < 1) throw DataError("config: max_in_flight must be >= 1");
  if (cfg.sweep_years < 1) throw DataError("config: sweep.years must be >= 1");
  cfg.source = j;
  cfg.hash = sha256_hex(j.dump());
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string(), 0, "config is not valid JSON");
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return from_json(j, base);
}

std::filesystem::path ExperimentConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

HttpOptions ExperimentConfig::http_options() const {
  HttpOptions opts;
  opts.retry = retry;
  return opts;
}

TargetProfile load_profile(const ExperimentConfig& cfg) {
  if (!cfg.profile) return TargetProfile::from_json(json::object());
  const auto path = cfg.resolve(*cfg.profile);
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string(), 0, "profile is not valid JSON");
  return TargetProfile::from_json(j);
}

EmbedderStack make_embedder(const EmbeddingSettings& settings, const HttpOptions& http,
                            const std::optional<std::filesystem::path>& cache_file) {
  EmbedderStack stack;
  if (settings.url.empty()) {
    stack.inner = std::make_unique<HashingEmbedder>(settings.dimension);
  } else {
    HttpEmbedderConfig c;
    c.url = settings.url;
    c.model = settings.model;
    c.batch_size = settings.batch_size;
    c.http = http;
    stack.inner = std::make_unique<HttpEmbedder>(c);
  }
  stack.cached = std::make_unique<CachedEmbedder>(*stack.inner, cache_file);
  return stack;
}

std::vector<ConversationPair> stage_corpus(const ExperimentConfig& cfg) {
  auto events = ingest(cfg.resolve(cfg.events), cfg.input_format);
  auto rules = Anonymizer::builtin_rules();
  if (cfg.anonymization_rules) {
    auto extra = Anonymizer::load_rules(cfg.resolve(*cfg.anonymization_rules));
    rules.insert(rules.end(), extra.begin(), extra.end());
  }
  events = anonymize(std::move(events), Anonymizer(std::move(rules)));

  PipelineConfig pc = cfg.pipeline;
  if (cfg.blacklist) load_blacklist_file(cfg.resolve(*cfg.blacklist), pc);
  auto pairs = build_pairs(events, pc);

  std::set<std::string> held_out;
  for (const auto& p : read_prompts(cfg.resolve(cfg.prompts))) held_out.insert(normalize_reply(p.text));
  pairs.erase(std::remove_if(pairs.begin(), pairs.end(),
                             [&](const ConversationPair& p) { return held_out.count(normalize_reply(p.prompt())) > 0; }),
              pairs.end());
  return pairs;
}

Artifacts build_artifacts(const std::vector<ConversationPair>& history, const std::vector<MethodSpec>& methods,
                          Embedder& embedder, const NoteConstructionConfig& memory_cfg,
                          AttributeExtractor* extractor) {
  const bool need_rag = std::any_of(methods.begin(), methods.end(),
                                    [](const MethodSpec& m) { return m.augmentation == Augmentation::kRag; });
  const bool need_memory = std::any_of(methods.begin(), methods.end(),
                                       [](const MethodSpec& m) { return m.augmentation == Augmentation::kMemory; });
  Artifacts a;
  if (need_rag) a.rag_index = build_pair_index(history, embedder);
  if (need_memory) {
    a.memory = std::make_unique<MemoryStore>(embedder, memory_cfg, extractor);
    a.memory->add_notes(history);
  }
  return a;
}

RunSummary generate_matrix(const ExperimentConfig& cfg, const std::vector<ConversationPair>& history,
                           const std::vector<Prompt>& prompts, Embedder& embedder,
                           const GenerationSetup& setup, const std::filesystem::path& journal) {
  return generate_methods(cfg, cfg.methods, history, prompts, embedder, setup, journal);
}

RunSummary generate_methods(const ExperimentConfig& cfg, const std::vector<MethodSpec>& methods,
                            const std::vector<ConversationPair>& history, const std::vector<Prompt>& prompts,
                            Embedder& embedder, const GenerationSetup& setup,
                            const std::filesystem::path& journal) {
  std::shared_ptr<ChatClient> attr_client;
  std::unique_ptr<ChatAttributeExtractor> extractor;
  if (cfg.memory.use_llm_attributes) {
    attr_client = setup.factory(cfg.base_endpoint);
    extractor = std::make_unique<ChatAttributeExtractor>(*attr_client, cfg.attribute_model);
  }
  Artifacts art = build_artifacts(history, methods, embedder, cfg.memory, extractor.get());

  EvidenceSources sources;
  sources.rag_index = art.rag_index ? &*art.rag_index : nullptr;
  sources.memory = art.memory.get();
  sources.embedder = &embedder;
  sources.query_defaults = cfg.retrieval;
  Generator gen(setup.factory, sources, load_profile(cfg), setup.clock);
  RunOptions ro;
  ro.max_in_flight = cfg.max_in_flight;
  if (!journal.parent_path().empty()) std::filesystem::create_directories(journal.parent_path());
  return run_matrix(methods, prompts, gen, journal, ro);
}

json SweepResult::to_json(const std::string& config_hash) const {
  json rows_j = json::array();
  for (const auto& r : rows) {
    json row{{"window", "Y" + std::to_string(r.years)}, {"years", r.years}, {"pairs", r.pairs}};
    if (r.empty) {
      row["status"] = "empty";
    } else {
      row["status"] = "ok";
      row["BLEU-1"] = r.scores.bleu1;
      row["BLEU-2"] = r.scores.bleu2;
      row["ROUGE-L"] = r.scores.rouge_l;
      row["Precision"] = r.scores.precision;
    }
    rows_j.push_back(std::move(row));
  }
  return {{"config_hash", config_hash}, {"method_id", method_id}, {"rows", rows_j}};
}

std::string SweepResult::table() const {
  std::string out = "window\tpairs\tBLEU-1\tBLEU-2\tROUGE-L\tPrecision\n";
  char buf[160];
  for (const auto& r : rows) {
    if (r.empty) {
      std::snprintf(buf, sizeof(buf), "Y%d\t0\tempty\tempty\tempty\tempty\n", r.years);
    } else {
      std::snprintf(buf, sizeof(buf), "Y%d\t%zu\t%.4f\t%.4f\t%.4f\t%.4f\n", r.years, r.pairs, r.scores.bleu1,
                    r.scores.bleu2, r.scores.rouge_l, r.scores.precision);
    }
    out += buf;
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<ConversationPair>& pairs,
                      const std::vector<Prompt>& prompts, const std::map<std::string, std::string>& truths,
                      Embedder& embedder, const GenerationSetup& setup) {
  auto it = std::find_if(cfg.methods.begin(), cfg.methods.end(),
                         [&](const MethodSpec& m) { return m.method_id == cfg.sweep_method; });
  if (it == cfg.methods.end()) throw DataError("sweep method '" + cfg.sweep_method + "' is not configured");

  SweepResult out;
  out.method_id = it->method_id;
  for (int i = 1; i <= cfg.sweep_years; ++i) {
    SweepRow row;
    row.years = i;
    const auto history = pairs.empty() ? std::vector<ConversationPair>{} : window(pairs, TemporalWindow{i, std::nullopt});
    row.pairs = history.size();
    if (history.empty()) {
      row.empty = true;
      out.rows.push_back(row);
      continue;
    }
    const auto journal = cfg.resolve(cfg.work_dir) / "sweep" / ("Y" + std::to_string(i)) / "records.jsonl";
    auto summary = generate_methods(cfg, {*it}, history, prompts, embedder, setup, journal);
    out.failures.insert(out.failures.end(), summary.failures.begin(), summary.failures.end());
    if (summary.records.empty()) {
      row.empty = true;
    } else {
      row.scores = evaluate_method(it->method_id, summary.records, truths).corpus;
    }
    out.rows.push_back(row);
  }
  return out;
}

std::map<std::string, int> scripted_ranking(const ScriptedJudge& judge, const std::string& prompt_id,
                                            const std::vector<std::pair<std::string, std::string>>& entries,
                                            const std::string& truth, const std::string& profile_card) {
  const TokenSeq reference = tokenize(judge.cohort == Cohort::kAcquaintance ? truth : profile_card);
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& [label, text] : entries) {
    const auto pr = token_precision_recall(tokenize(text), reference);
    const double fit = pr.precision + pr.recall == 0.0 ? 0.0 : 2 * pr.precision * pr.recall / (pr.precision + pr.recall);
    const std::uint64_t h = mix64(fnv1a64(judge.judge_id + "\n" + prompt_id + "\n" + label));
    const double noise = static_cast<double>(h % 1000) / 1000.0;
    scored.emplace_back(fit + 0.5 * noise, label);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::map<std::string, int> ranking;
  for (std::size_t i = 0; i < scored.size(); ++i) ranking[scored[i].second] = static_cast<int>(i + 1);
  return ranking;
}

namespace {

json call(const std::string& method, const std::string& url, const json& body, int expect) {
  const auto res = http_request(method, url, body.is_null() ? std::string{} : body.dump());
  if (res.status != expect) {
    throw EndpointError(method + " " + url + " returned " + std::to_string(res.status) + ": " + res.body, false);
  }
  return json::parse(res.body);
}

}  // namespace

std::size_t run_scripted_judges(const std::string& arena_url, const std::string& experiment_id,
                                const std::vector<ScriptedJudge>& judges,
                                const std::map<std::string, std::string>& truths, const std::string& profile_card) {
  std::size_t accepted = 0;
  for (const auto& judge : judges) {
    const json s = call("POST", arena_url + "/sessions",
                        {{"judge_id", judge.judge_id}, {"cohort", to_string(judge.cohort)}, {"experiment_id", experiment_id}},
                        201);
    const std::string sid = s.at("session_id").get<std::string>();
    for (;;) {
      const json next = call("GET", arena_url + "/sessions/" + sid + "/next", nullptr, 200);
      if (next.at("done").get<bool>()) break;
      std::vector<std::pair<std::string, std::string>> entries;
      for (const auto& c : next.at("candidates")) {
        entries.emplace_back(c.at("label").get<std::string>(), c.at("text").get<std::string>());
      }
      const std::string pid = next.at("prompt_id").get<std::string>();
      auto truth = truths.find(pid);
      const auto ranking = scripted_ranking(judge, pid, entries, truth == truths.end() ? std::string{} : truth->second,
                                            next.value("profile_card", profile_card));
      call("POST", arena_url + "/sessions/" + sid + "/ballots", {{"prompt_id", pid}, {"ranking", ranking}}, 201);
      ++accepted;
    }
  }
  return accepted;
}

json synthetic_config(const std::filesystem::path& data_dir, const std::filesystem::path& work_dir,
                      const std::string& mock_base_url, std::uint64_t seed) {
  return {{"name", "synthetic-dry-run"},
          {"seed", seed},
          {"paths",
           {{"events", (data_dir / "events.jsonl").string()},
            {"prompts", (data_dir / "prompts.jsonl").string()},
            {"truths", (data_dir / "truths.jsonl").string()},
            {"profile", (data_dir / "profile.json").string()},
            {"work_dir", work_dir.string()},
            {"ballots", (work_dir / "ballots.jsonl").string()}}},
          {"embedding", {{"url", mock_base_url + "/v1/embeddings"}, {"model", std::string(kDefaultEmbeddingModel)}}},
          {"endpoints",
           {{"base", {{"url", mock_base_url + "/v1/chat/completions"}, {"model", "base-chat"}}},
            {"adapted", {{"url", mock_base_url + "/v1/chat/completions"}, {"model", "target-lora"}}}}},
          {"retry", {{"attempts", 3}, {"initial_backoff_ms", 10}}},
          {"sweep", {{"years", 10}, {"method", "A-Mem+LoRA"}}}};
}

DryRunResult run_dry_run(const DryRunOptions& opts) {
  if (opts.work_dir.empty()) throw DataError("dry run needs a work directory");
  std::filesystem::remove_all(opts.work_dir);
  std::filesystem::create_directories(opts.work_dir);
  const auto data_dir = opts.work_dir / "data";
  const SyntheticBundle bundle = make_synthetic(opts.synth);
  write_synthetic_bundle(bundle, data_dir);

  MockEndpointServer mock;
  mock.start();
  const json doc = synthetic_config(data_dir, opts.work_dir, mock.base_url(), opts.seed);
  write_file_atomic(opts.work_dir / "config.json", doc.dump(2) + "\n");
  const ExperimentConfig cfg = ExperimentConfig::from_json(doc, opts.work_dir);

  DryRunResult out;
  out.config_hash = cfg.hash;
  const auto pairs = stage_corpus(cfg);
  out.pairs = pairs.size();
  export_pairs(pairs, opts.work_dir / "pairs.jsonl", ExportOptions{});

  auto embedder = make_embedder(cfg.embedding, cfg.http_options(), opts.work_dir / "embedding_cache.jsonl");
  const std::int64_t fixed_ts = opts.synth.end_ts + 86400;
  GenerationSetup setup{http_chat_factory(cfg.http_options()), [fixed_ts] { return fixed_ts; }};
  const auto summary = generate_matrix(cfg, pairs, bundle.prompts, embedder.get(), setup, opts.work_dir / "records.jsonl");
  if (!summary.complete()) {
    const auto& f = summary.failures.front();
    throw EndpointError("dry run generation failed for (" + f.method_id + ", " + f.prompt_id + "): " + f.error, false);
  }
  out.records = summary.records.size();
  out.metrics = evaluate(summary.records, bundle.truths);

  std::vector<std::string> method_ids;
  for (const auto& m : cfg.methods) method_ids.push_back(m.method_id);
  ArenaService service(*cfg.ballots, [fixed_ts] { return fixed_ts; });
  ArenaServer server(service);
  server.start();
  ExperimentSpec spec;
  spec.experiment_id = "dry-run";
  spec.prompts = bundle.prompts;
  spec.method_ids = method_ids;
  spec.seed = opts.seed;
  spec.profile_card = bundle.profile.profile_card;
  call("POST", server.base_url() + "/experiments", experiment_spec_to_json(spec), 201);
  json records = json::array();
  for (const auto& r : summary.records) records.push_back(r.to_json());
  call("POST", server.base_url() + "/experiments/dry-run/pools", {{"records", records}, {"truths", bundle.truths}}, 201);

  std::vector<ScriptedJudge> judges;
  char id[24];
  for (std::size_t i = 0; i < opts.judges_per_cohort; ++i) {
    std::snprintf(id, sizeof(id), "acq-%02zu", i + 1);
    judges.push_back({id, Cohort::kAcquaintance});
    std::snprintf(id, sizeof(id), "str-%02zu", i + 1);
    judges.push_back({id, Cohort::kStranger});
  }
  out.ballots = run_scripted_judges(server.base_url(), "dry-run", judges, bundle.truths, bundle.profile.profile_card);
  out.report = call("GET", server.base_url() + "/experiments/dry-run/report", nullptr, 200);
  out.pool_size = method_ids.size() + 1;
  out.report_tables = render_report_tables(out.report);
  server.stop();
  mock.stop();

  json saved = out.report;
  saved["config_hash"] = cfg.hash;
  write_file_atomic(opts.work_dir / "report.json", saved.dump(2) + "\n");
  write_file_atomic(opts.work_dir / "report.tsv", out.report_tables);
  write_file_atomic(opts.work_dir / "metrics.tsv", metrics_table(out.metrics, method_ids));
  return out;
}

}  // namespace simarena
