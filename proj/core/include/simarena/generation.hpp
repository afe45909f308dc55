#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "simarena/chat.hpp"
#include "simarena/index.hpp"
#include "simarena/memory.hpp"

namespace simarena {

struct TargetProfile {
  std::string display_name;
  std::string profile_card;      // shown to stranger judges
  std::string persona_preamble;  // system prompt lead-in

  static TargetProfile from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

enum class PromptType { kDaily, kOpinion };
std::string_view to_string(PromptType t);
PromptType parse_prompt_type(std::string_view s);

struct Prompt {
  std::string prompt_id;
  std::string text;
  PromptType ptype = PromptType::kDaily;
};

std::vector<Prompt> read_prompts(const std::filesystem::path& path);
void write_prompts(const std::vector<Prompt>& prompts, const std::filesystem::path& path);
// {prompt_id, response} lines -> prompt_id -> ground-truth text.
std::map<std::string, std::string> read_truths(const std::filesystem::path& path);

enum class EndpointKind { kBase, kAdapted };
enum class Augmentation { kNone, kRag, kMemory };
std::string_view to_string(EndpointKind k);
std::string_view to_string(Augmentation a);
EndpointKind parse_endpoint_kind(std::string_view s);
Augmentation parse_augmentation(std::string_view s);

struct EndpointSpec {
  EndpointKind kind = EndpointKind::kBase;
  std::string url;
  std::string model;
  std::string api_key_env;  // name of the env var holding the bearer token
};

struct MethodSpec {
  std::string method_id;
  EndpointSpec endpoint;
  Augmentation augmentation = Augmentation::kNone;
  DecodingConfig decoding;
};

// The five simulation conditions: adapted x none, base x {rag, memory},
// adapted x {rag, memory}. Ground truth is added by the arena.
std::vector<MethodSpec> default_methods(const EndpointSpec& base, const EndpointSpec& adapted);
void validate_methods(const std::vector<MethodSpec>& methods);

inline constexpr std::string_view kTemplateVersion = "persona-reply/v1";
// SHA-256 of the template strings; recorded with every generation.
const std::string& template_hash();

// System message: persona preamble, reply instructions and, when evidence is
// non-empty, an evidence block in the given (score-descending) order with
// dates. User message: the prompt text.
std::vector<ChatMessage> assemble_prompt(const Prompt& question,
                                         const std::vector<RetrievalResult>& evidence,
                                         const TargetProfile& profile);

struct GenerationRecord {
  std::string method_id;
  std::string prompt_id;
  std::string text;
  std::vector<std::string> evidence_ids;
  std::int64_t created_ts = 0;
  std::int64_t endpoint_latency_ms = 0;
  std::string template_version{kTemplateVersion};
  std::string template_hash;

  nlohmann::json to_json() const;
  static GenerationRecord from_json(const nlohmann::json& j);
};

std::vector<GenerationRecord> read_records(const std::filesystem::path& path);

// Where retrieval evidence comes from. Either pointer may be null when no
// method needs it; generate() treats a missing source as an error.
struct EvidenceSources {
  const VectorIndex* rag_index = nullptr;
  const MemoryStore* memory = nullptr;
  Embedder* embedder = nullptr;  // embeds queries against rag_index
  RetrievalQuery query_defaults;
};

using ChatClientFactory = std::function<std::shared_ptr<ChatClient>(const EndpointSpec&)>;
using Clock = std::function<std::int64_t()>;  // epoch seconds

ChatClientFactory http_chat_factory(HttpOptions base_options);
Clock system_clock();

class Generator {
 public:
  Generator(ChatClientFactory factory, EvidenceSources sources, TargetProfile profile,
            Clock clock = system_clock());

  std::vector<RetrievalResult> retrieve(const MethodSpec& method, const Prompt& question) const;

  // Throws EndpointError on transport failure (after retries) or an empty
  // completion.
  GenerationRecord generate(const MethodSpec& method, const Prompt& question);

  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<ChatClient> client_for(const EndpointSpec& ep);

  ChatClientFactory factory_;
  EvidenceSources sources_;
  TargetProfile profile_;
  Clock clock_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<ChatClient>> clients_;
  std::atomic<std::size_t> calls_{0};
};

struct GenerationFailure {
  std::string method_id;
  std::string prompt_id;
  std::string error;
};

struct RunOptions {
  std::size_t max_in_flight = 4;  // per method
};

struct RunSummary {
  std::vector<GenerationRecord> records;  // method order, then prompt order
  std::vector<GenerationFailure> failures;
  std::size_t generated = 0;  // new records produced by this run
  std::size_t reused = 0;     // records already present in the journal

  bool complete() const { return failures.empty(); }
};

// One record per (method, prompt). Existing successful records in the journal
// are reused, never regenerated; failures are journaled and retried on the
// next run. Journal lines are {"type": "record"|"failure", ...}.
RunSummary run_matrix(const std::vector<MethodSpec>& methods, const std::vector<Prompt>& prompts,
                      Generator& generator, const std::filesystem::path& journal,
                      const RunOptions& opts = {});

}  // namespace simarena
