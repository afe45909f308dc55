#include "simarena/generation.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <thread>

#include "simarena/error.hpp"
#include "simarena/hash.hpp"
#include "simarena/jsonl.hpp"
#include "simarena/text.hpp"

namespace simarena {

namespace {

constexpr std::string_view kReplyInstruction =
    "Reply to the message below as yourself, in the first person and in your usual texting "
    "style. Keep it short: at most two sentences. Never mention being an AI, a model or a "
    "simulation.";

constexpr std::string_view kEvidenceHeader =
    "Things you said in past conversations, most relevant first:";

std::string iso_date(Timestamp ts) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(sys_seconds{seconds{ts}})};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

TargetProfile TargetProfile::from_json(const nlohmann::json& j) {
  TargetProfile p;
  p.display_name = j.value("display_name", std::string{});
  p.profile_card = j.value("profile_card", std::string{});
  p.persona_preamble = j.value("persona_preamble", std::string{});
  if (p.persona_preamble.empty()) {
    p.persona_preamble = "You are " + (p.display_name.empty() ? std::string("the user") : p.display_name) + ".";
  }
  return p;
}

nlohmann::json TargetProfile::to_json() const {
  return {{"display_name", display_name},
          {"profile_card", profile_card},
          {"persona_preamble", persona_preamble}};
}

std::string_view to_string(PromptType t) { return t == PromptType::kDaily ? "daily" : "opinion"; }

PromptType parse_prompt_type(std::string_view s) {
  if (s == "daily") return PromptType::kDaily;
  if (s == "opinion") return PromptType::kOpinion;
  throw DataError("unknown prompt type '" + std::string(s) + "'");
}

std::vector<Prompt> read_prompts(const std::filesystem::path& path) {
  std::vector<Prompt> out;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](std::size_t line_no, const json& rec) {
    Prompt p;
    try {
      p.prompt_id = rec.at("prompt_id").get<std::string>();
      p.text = rec.at("text").get<std::string>();
      p.ptype = parse_prompt_type(rec.at("ptype").get<std::string>());
    } catch (const std::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    if (!seen.insert(p.prompt_id).second) {
      throw ParseError(path.string(), line_no, "duplicate prompt_id '" + p.prompt_id + "'");
    }
    if (trim(p.text).empty()) throw ParseError(path.string(), line_no, "empty prompt text");
    out.push_back(std::move(p));
  });
  return out;
}

void write_prompts(const std::vector<Prompt>& prompts, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : prompts) {
    out += json{{"prompt_id", p.prompt_id}, {"text", p.text}, {"ptype", to_string(p.ptype)}}.dump();
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

std::map<std::string, std::string> read_truths(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  for_each_jsonl(path, [&](std::size_t line_no, const json& rec) {
    try {
      out[rec.at("prompt_id").get<std::string>()] = rec.at("response").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  });
  return out;
}

std::string_view to_string(EndpointKind k) { return k == EndpointKind::kBase ? "base" : "adapted"; }

std::string_view to_string(Augmentation a) {
  switch (a) {
    case Augmentation::kNone: return "none";
    case Augmentation::kRag: return "rag";
    case Augmentation::kMemory: return "memory";
  }
  return "none";
}

EndpointKind parse_endpoint_kind(std::string_view s) {
  if (s == "base" || s == "base_model") return EndpointKind::kBase;
  if (s == "adapted" || s == "adapted_model") return EndpointKind::kAdapted;
  throw DataError("unknown endpoint kind '" + std::string(s) + "'");
}

Augmentation parse_augmentation(std::string_view s) {
  if (s == "none") return Augmentation::kNone;
  if (s == "rag") return Augmentation::kRag;
  if (s == "memory") return Augmentation::kMemory;
  throw DataError("unknown augmentation '" + std::string(s) + "'");
}

std::vector<MethodSpec> default_methods(const EndpointSpec& base, const EndpointSpec& adapted) {
  return {
      {"LoRA-only", adapted, Augmentation::kNone, {}},
      {"RAG+Base", base, Augmentation::kRag, {}},
      {"A-Mem+Base", base, Augmentation::kMemory, {}},
      {"RAG+LoRA", adapted, Augmentation::kRag, {}},
      {"A-Mem+LoRA", adapted, Augmentation::kMemory, {}},
  };
}

void validate_methods(const std::vector<MethodSpec>& methods) {
  std::set<std::string> ids;
  for (const auto& m : methods) {
    if (m.method_id.empty()) throw DataError("method with empty method_id");
    if (!ids.insert(m.method_id).second) throw DataError("duplicate method_id '" + m.method_id + "'");
    m.decoding.validate();
  }
}

const std::string& template_hash() {
  static const std::string h = sha256_hex(std::string(kTemplateVersion) + "\n" +
                                          std::string(kReplyInstruction) + "\n" +
                                          std::string(kEvidenceHeader));
  return h;
}

std::vector<ChatMessage> assemble_prompt(const Prompt& question,
                                         const std::vector<RetrievalResult>& evidence,
                                         const TargetProfile& profile) {
  std::string system = profile.persona_preamble;
  if (!system.empty()) system += "\n\n";
  system += kReplyInstruction;
  if (!evidence.empty()) {
    system += "\n\n";
    system += kEvidenceHeader;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
      system += "\n[" + std::to_string(i + 1) + "] (" + iso_date(evidence[i].item.timestamp) + ") ";
      system += evidence[i].item.text;
    }
  }
  return {{"system", std::move(system)}, {"user", question.text}};
}

nlohmann::json GenerationRecord::to_json() const {
  return {{"method_id", method_id},
          {"prompt_id", prompt_id},
          {"text", text},
          {"evidence_ids", evidence_ids},
          {"created_ts", created_ts},
          {"endpoint_latency_ms", endpoint_latency_ms},
          {"template_version", template_version},
          {"template_hash", template_hash}};
}

GenerationRecord GenerationRecord::from_json(const nlohmann::json& j) {
  GenerationRecord r;
  r.method_id = j.at("method_id").get<std::string>();
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.evidence_ids = j.value("evidence_ids", std::vector<std::string>{});
  r.created_ts = j.value("created_ts", std::int64_t{0});
  r.endpoint_latency_ms = j.value("endpoint_latency_ms", std::int64_t{0});
  r.template_version = j.value("template_version", std::string(kTemplateVersion));
  r.template_hash = j.value("template_hash", std::string{});
  return r;
}

std::vector<GenerationRecord> read_records(const std::filesystem::path& path) {
  std::vector<GenerationRecord> out;
  for_each_jsonl(path, [&](std::size_t line_no, const json& rec) {
    if (rec.value("type", std::string("record")) != "record") return;
    try {
      out.push_back(GenerationRecord::from_json(rec));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  });
  return out;
}

ChatClientFactory http_chat_factory(HttpOptions base_options) {
  return [base_options](const EndpointSpec& ep) -> std::shared_ptr<ChatClient> {
    HttpOptions opts = base_options;
    if (!ep.api_key_env.empty()) {
      if (const char* key = std::getenv(ep.api_key_env.c_str())) opts.bearer_token = key;
    }
    return std::make_shared<HttpChatClient>(ep.url, opts);
  };
}

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

Generator::Generator(ChatClientFactory factory, EvidenceSources sources, TargetProfile profile,
                     Clock clock)
    : factory_(std::move(factory)),
      sources_(std::move(sources)),
      profile_(std::move(profile)),
      clock_(std::move(clock)) {}

std::shared_ptr<ChatClient> Generator::client_for(const EndpointSpec& ep) {
  const std::string key = ep.url + "\n" + ep.model + "\n" + ep.api_key_env;
  std::lock_guard lock(mu_);
  auto it = clients_.find(key);
  if (it == clients_.end()) it = clients_.emplace(key, factory_(ep)).first;
  return it->second;
}

std::vector<RetrievalResult> Generator::retrieve(const MethodSpec& method,
                                                 const Prompt& question) const {
  RetrievalQuery q = sources_.query_defaults;
  q.text = question.text;
  switch (method.augmentation) {
    case Augmentation::kNone:
      return {};
    case Augmentation::kRag:
      if (sources_.rag_index == nullptr || sources_.embedder == nullptr) {
        throw DataError("method '" + method.method_id + "' needs a retrieval index");
      }
      return sources_.rag_index->query(q, *sources_.embedder);
    case Augmentation::kMemory:
      if (sources_.memory == nullptr) {
        throw DataError("method '" + method.method_id + "' needs a memory store");
      }
      return sources_.memory->retrieve(q);
  }
  return {};
}

GenerationRecord Generator::generate(const MethodSpec& method, const Prompt& question) {
  if (trim(question.text).empty()) throw DataError("prompt '" + question.prompt_id + "' is empty");
  method.decoding.validate();
  const auto evidence = retrieve(method, question);

  ChatRequest req;
  req.model = method.endpoint.model;
  req.messages = assemble_prompt(question, evidence, profile_);
  req.decoding = method.decoding;

  auto client = client_for(method.endpoint);
  const auto t0 = std::chrono::steady_clock::now();
  ++calls_;
  const std::string raw = client->complete(req);
  const auto t1 = std::chrono::steady_clock::now();

  GenerationRecord rec;
  rec.method_id = method.method_id;
  rec.prompt_id = question.prompt_id;
  rec.text = trim(raw);
  if (rec.text.empty()) {
    throw EndpointError("empty completion for (" + method.method_id + ", " + question.prompt_id + ")",
                        false);
  }
  for (const auto& e : evidence) rec.evidence_ids.push_back(e.item.item_id);
  rec.created_ts = clock_();
  rec.endpoint_latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
  rec.template_hash = template_hash();
  return rec;
}

RunSummary run_matrix(const std::vector<MethodSpec>& methods, const std::vector<Prompt>& prompts,
                      Generator& generator, const std::filesystem::path& journal,
                      const RunOptions& opts) {
  validate_methods(methods);
  std::map<std::pair<std::string, std::string>, GenerationRecord> done;
  if (std::filesystem::exists(journal)) {
    for (auto& r : read_records(journal)) {
      auto key = std::make_pair(r.method_id, r.prompt_id);
      done.emplace(std::move(key), std::move(r));
    }
  }

  RunSummary summary;
  JsonlWriter writer(journal, JsonlWriter::Mode::kAppend);
  std::mutex mu;

  for (const auto& method : methods) {
    std::vector<const Prompt*> todo;
    for (const auto& p : prompts) {
      if (done.count({method.method_id, p.prompt_id})) {
        ++summary.reused;
      } else {
        todo.push_back(&p);
      }
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < todo.size(); i = next++) {
        const Prompt& p = *todo[i];
        try {
          GenerationRecord rec = generator.generate(method, p);
          json line = rec.to_json();
          line["type"] = "record";
          writer.write(line);
          std::lock_guard lock(mu);
          ++summary.generated;
          done.emplace(std::make_pair(method.method_id, p.prompt_id), std::move(rec));
        } catch (const std::exception& e) {
          writer.write(json{{"type", "failure"},
                            {"method_id", method.method_id},
                            {"prompt_id", p.prompt_id},
                            {"error", e.what()}});
          std::lock_guard lock(mu);
          summary.failures.push_back({method.method_id, p.prompt_id, e.what()});
        }
      }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(opts.max_in_flight, todo.size()));
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
  }

  for (const auto& method : methods) {
    for (const auto& p : prompts) {
      auto it = done.find({method.method_id, p.prompt_id});
      if (it != done.end()) summary.records.push_back(it->second);
    }
  }
  std::sort(summary.failures.begin(), summary.failures.end(), [&](const auto& a, const auto& b) {
    return std::tie(a.method_id, a.prompt_id) < std::tie(b.method_id, b.prompt_id);
  });
  return summary;
}

}  // namespace simarena
