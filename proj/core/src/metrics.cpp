#include "simarena/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "simarena/error.hpp"

namespace simarena {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, int n) {
  std::map<Ngram, std::size_t> counts;
  if (toks.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[Ngram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                   toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double bleu(const TokenSeq& candidate, const TokenSeq& reference, int n) {
  if (n != 1 && n != 2) throw DataError("bleu: n must be 1 or 2");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int i = 1; i <= n; ++i) {
    const auto cand = ngram_counts(candidate.tokens, i);
    const auto ref = ngram_counts(reference.tokens, i);
    std::size_t total = 0;
    std::size_t clipped = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(c, it->second);
    }
    double p = total == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(total);
    if (p == 0.0) p = kBleuEpsilon;
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = std::min(1.0, std::exp(1.0 - r / c));
  return bp * std::exp(log_sum / n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate.tokens, reference.tokens));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

PrecisionRecall token_precision_recall(const TokenSeq& candidate, const TokenSeq& reference) {
  const auto cand = ngram_counts(candidate.tokens, 1);
  const auto ref = ngram_counts(reference.tokens, 1);
  std::size_t m = 0;
  for (const auto& [tok, c] : cand) {
    auto it = ref.find(tok);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  PrecisionRecall pr;
  if (!candidate.empty()) pr.precision = static_cast<double>(m) / static_cast<double>(candidate.size());
  if (!reference.empty()) pr.recall = static_cast<double>(m) / static_cast<double>(reference.size());
  return pr;
}

double distinct_2(const std::vector<TokenSeq>& corpus) {
  std::set<std::pair<std::string, std::string>> distinct;
  std::size_t total = 0;
  for (const auto& seq : corpus) {
    for (std::size_t i = 1; i < seq.tokens.size(); ++i) {
      distinct.emplace(seq.tokens[i - 1], seq.tokens[i]);
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(total);
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {"BLEU-1",    "BLEU-2", "ROUGE-L",
                                                "Precision", "Recall", "Distinct-2"};
  return cols;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json pp = nlohmann::json::object();
  for (const auto& [id, s] : per_prompt) {
    pp[id] = {{"BLEU-1", s.bleu1},
              {"BLEU-2", s.bleu2},
              {"ROUGE-L", s.rouge_l},
              {"Precision", s.precision},
              {"Recall", s.recall}};
  }
  return {{"method_id", method_id},
          {"tokenizer_id", tokenizer_id},
          {"corpus",
           {{"BLEU-1", corpus.bleu1},
            {"BLEU-2", corpus.bleu2},
            {"ROUGE-L", corpus.rouge_l},
            {"Precision", corpus.precision},
            {"Recall", corpus.recall},
            {"Distinct-2", corpus.distinct2}}},
          {"per_prompt", std::move(pp)}};
}

MetricReport evaluate_method(const std::string& method_id,
                             const std::vector<GenerationRecord>& records,
                             const std::map<std::string, std::string>& truths) {
  MetricReport report;
  report.method_id = method_id;
  std::vector<TokenSeq> outputs;
  for (const auto& rec : records) {
    if (rec.method_id != method_id) continue;
    auto truth = truths.find(rec.prompt_id);
    if (truth == truths.end()) throw DataError("no ground truth for prompt_id '" + rec.prompt_id + "'");
    const TokenSeq cand = tokenize(rec.text);
    const TokenSeq ref = tokenize(truth->second);
    const auto pr = token_precision_recall(cand, ref);
    report.per_prompt[rec.prompt_id] =
        PromptScores{bleu(cand, ref, 1), bleu(cand, ref, 2), rouge_l(cand, ref), pr.precision, pr.recall};
    outputs.push_back(cand);
  }
  if (!report.per_prompt.empty()) {
    const double n = static_cast<double>(report.per_prompt.size());
    for (const auto& [id, s] : report.per_prompt) {
      report.corpus.bleu1 += s.bleu1;
      report.corpus.bleu2 += s.bleu2;
      report.corpus.rouge_l += s.rouge_l;
      report.corpus.precision += s.precision;
      report.corpus.recall += s.recall;
    }
    report.corpus.bleu1 /= n;
    report.corpus.bleu2 /= n;
    report.corpus.rouge_l /= n;
    report.corpus.precision /= n;
    report.corpus.recall /= n;
  }
  report.corpus.distinct2 = distinct_2(outputs);
  return report;
}

std::map<std::string, MetricReport> evaluate(const std::vector<GenerationRecord>& records,
                                             const std::map<std::string, std::string>& truths) {
  std::set<std::string> methods;
  for (const auto& r : records) {
    if (!truths.count(r.prompt_id)) throw DataError("no ground truth for prompt_id '" + r.prompt_id + "'");
    methods.insert(r.method_id);
  }
  std::map<std::string, MetricReport> out;
  for (const auto& m : methods) out.emplace(m, evaluate_method(m, records, truths));
  return out;
}

std::string metrics_table(const std::map<std::string, MetricReport>& reports,
                          const std::vector<std::string>& method_order) {
  std::vector<std::string> order;
  for (const auto& m : method_order) {
    if (reports.count(m)) order.push_back(m);
  }
  for (const auto& [m, r] : reports) {
    if (std::find(order.begin(), order.end(), m) == order.end()) order.push_back(m);
  }
  std::string out = "method";
  for (const auto& c : metric_columns()) out += "\t" + c;
  out += "\n";
  char buf[32];
  for (const auto& m : order) {
    const auto& c = reports.at(m).corpus;
    out += m;
    for (double v : {c.bleu1, c.bleu2, c.rouge_l, c.precision, c.recall, c.distinct2}) {
      std::snprintf(buf, sizeof(buf), "\t%.4f", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

nlohmann::json metrics_document(const std::map<std::string, MetricReport>& reports) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [m, r] : reports) doc[m] = r.to_json();
  return {{"columns", metric_columns()}, {"tokenizer_id", kTokenizerId}, {"methods", std::move(doc)}};
}

}  // namespace simarena
