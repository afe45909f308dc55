#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "simarena/generation.hpp"
#include "simarena/text.hpp"

namespace simarena {

inline constexpr double kBleuEpsilon = 1e-9;

// Sentence BLEU with clipped i-gram precisions for i = 1..n, geometric mean,
// brevity penalty min(1, exp(1 - |ref|/|cand|)). A zero precision is replaced
// by kBleuEpsilon before the log. Empty candidate scores 0.
double bleu(const TokenSeq& candidate, const TokenSeq& reference, int n);

// LCS-based F1 (beta = 1); 0 when either side is empty or LCS is 0.
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference);
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Clipped multiset overlap m; precision = m/|cand|, recall = m/|ref|.
PrecisionRecall token_precision_recall(const TokenSeq& candidate, const TokenSeq& reference);

// Distinct bigrams / total bigrams, pooled over all sequences.
double distinct_2(const std::vector<TokenSeq>& corpus);

struct PromptScores {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double rouge_l = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct CorpusScores {
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double rouge_l = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double distinct2 = 0.0;
};

struct MetricReport {
  std::string method_id;
  std::string tokenizer_id{kTokenizerId};
  std::map<std::string, PromptScores> per_prompt;
  CorpusScores corpus;

  nlohmann::json to_json() const;
};

// Report column names, in order.
const std::vector<std::string>& metric_columns();

// Per-prompt scores plus unweighted means over prompts (Distinct-2 is pooled).
MetricReport evaluate_method(const std::string& method_id,
                             const std::vector<GenerationRecord>& records,
                             const std::map<std::string, std::string>& truths);

// One report per method_id, keyed by method_id. Throws DataError naming the
// prompt_id when a record has no ground truth.
std::map<std::string, MetricReport> evaluate(const std::vector<GenerationRecord>& records,
                                             const std::map<std::string, std::string>& truths);

// Tab-separated table: method, BLEU-1, ..., Distinct-2. Rows follow
// `method_order` first, then any remaining methods alphabetically.
std::string metrics_table(const std::map<std::string, MetricReport>& reports,
                          const std::vector<std::string>& method_order = {});
nlohmann::json metrics_document(const std::map<std::string, MetricReport>& reports);

}  // namespace simarena
