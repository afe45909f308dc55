#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "simarena/error.hpp"
#include "simarena/metrics.hpp"

using namespace simarena;

namespace {

TokenSeq T(std::string_view s) { return tokenize(s); }
TokenSeq V(std::vector<std::string> v) { return TokenSeq{std::move(v)}; }

GenerationRecord rec(std::string method, std::string prompt, std::string text) {
  GenerationRecord r;
  r.method_id = std::move(method);
  r.prompt_id = std::move(prompt);
  r.text = std::move(text);
  return r;
}

}  // namespace

TEST(Metrics, Fixtures) {
  EXPECT_NEAR(bleu(T("the cat"), T("the cat sat"), 1), 0.60653, 1e-5);
  EXPECT_NEAR(rouge_l(T("a b c d"), T("a c d")), 0.85714, 1e-5);
  const auto pr = token_precision_recall(T("a b b"), T("a b"));
  EXPECT_NEAR(pr.precision, 0.66667, 1e-5);
  EXPECT_NEAR(pr.recall, 1.0, 1e-5);
  EXPECT_NEAR(distinct_2({T("a b a b")}), 0.66667, 1e-5);
}

TEST(Metrics, EdgeCases) {
  EXPECT_DOUBLE_EQ(bleu(T("a b c"), T("a b c"), 1), 1.0);
  EXPECT_DOUBLE_EQ(bleu(T("a b c"), T("a b c"), 2), 1.0);
  EXPECT_LE(bleu(T("x y"), T("a b"), 1), 1e-6);
  EXPECT_LE(bleu(T("x y"), T("a b"), 2), 1e-6);
  EXPECT_DOUBLE_EQ(bleu(T(""), T("a"), 1), 0.0);
  EXPECT_THROW(bleu(T("a"), T("a"), 3), DataError);
  EXPECT_DOUBLE_EQ(rouge_l(T("a"), T("")), 0.0);
  EXPECT_DOUBLE_EQ(rouge_l(T("x"), T("a")), 0.0);
  EXPECT_DOUBLE_EQ(rouge_l(T("a b"), T("a b")), 1.0);
  const auto empty_c = token_precision_recall(T(""), T("a"));
  EXPECT_DOUBLE_EQ(empty_c.precision, 0.0);
  const auto empty_r = token_precision_recall(T("a"), T(""));
  EXPECT_DOUBLE_EQ(empty_r.recall, 0.0);
  EXPECT_DOUBLE_EQ(distinct_2({T("a"), T("b")}), 0.0);
  EXPECT_DOUBLE_EQ(distinct_2({T("a b c"), T("d e")}), 1.0);
  EXPECT_EQ(tokenize("ok ok").tokens, (std::vector<std::string>{"ok", "ok"}));
  EXPECT_EQ(tokenize("吃饭了").size(), 3u);
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Metrics, OracleEquivalenceProperty) {
  gen::Rng rng(20240601);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = gen::token_list(rng, 12, 6);
    const auto r = gen::token_list(rng, 12, 6);
    SCOPED_TRACE(gen::join(c) + " | " + gen::join(r));
    EXPECT_NEAR(bleu(V(c), V(r), 1), oracle::bleu(c, r, 1), 1e-9);
    EXPECT_NEAR(bleu(V(c), V(r), 2), oracle::bleu(c, r, 2), 1e-9);
    EXPECT_NEAR(rouge_l(V(c), V(r)), oracle::rouge_l(c, r), 1e-9);
    const auto pr = token_precision_recall(V(c), V(r));
    EXPECT_NEAR(pr.precision, oracle::precision(c, r), 1e-9);
    EXPECT_NEAR(pr.recall, oracle::recall(c, r), 1e-9);
    EXPECT_EQ(lcs_length(c, r), oracle::lcs(c, r));
    EXPECT_NEAR(distinct_2({V(c), V(r)}), oracle::distinct_2({c, r}), 1e-9);
  }
}

TEST(Metrics, RangeSymmetryMonotonicity) {
  gen::Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    auto c = gen::token_list(rng, 15, 5);
    const auto r = gen::token_list(rng, 15, 5);
    for (double v : {bleu(V(c), V(r), 1), bleu(V(c), V(r), 2), rouge_l(V(c), V(r)),
                     token_precision_recall(V(c), V(r)).precision, token_precision_recall(V(c), V(r)).recall}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_DOUBLE_EQ(token_precision_recall(V(c), V(r)).precision, token_precision_recall(V(r), V(c)).recall);
    const double before = token_precision_recall(V(c), V(r)).precision;
    c.push_back("unmatched");
    EXPECT_LE(token_precision_recall(V(c), V(r)).precision, before);
    if (!r.empty()) {
      EXPECT_DOUBLE_EQ(bleu(V(r), V(r), 1), 1.0);
      EXPECT_DOUBLE_EQ(rouge_l(V(r), V(r)), 1.0);
      EXPECT_DOUBLE_EQ(token_precision_recall(V(r), V(r)).precision, 1.0);
    }
  }
}

TEST(Evaluate, IdentityAndMeanAggregation) {
  const std::map<std::string, std::string> truths{{"p1", "the cat sat"}, {"p2", "a b c d e"}};
  const auto reports = evaluate({rec("echo", "p1", "the cat sat"), rec("echo", "p2", "a b c d e"),
                                 rec("half", "p1", "the cat"), rec("half", "p2", "a b c d e")},
                                truths);
  ASSERT_EQ(reports.size(), 2u);
  const auto& echo = reports.at("echo").corpus;
  for (double v : {echo.bleu1, echo.bleu2, echo.rouge_l, echo.precision, echo.recall}) EXPECT_DOUBLE_EQ(v, 1.0);
  const auto& half = reports.at("half");
  EXPECT_NEAR(half.corpus.bleu1, (half.per_prompt.at("p1").bleu1 + 1.0) / 2, 1e-12);
  EXPECT_EQ(half.tokenizer_id, kTokenizerId);
}

TEST(Evaluate, MissingTruthNamesPrompt) {
  try {
    evaluate({rec("m", "ghost", "x")}, {{"p1", "y"}});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Evaluate, TableColumns) {
  EXPECT_EQ(metric_columns(),
            (std::vector<std::string>{"BLEU-1", "BLEU-2", "ROUGE-L", "Precision", "Recall", "Distinct-2"}));
  const auto reports = evaluate({rec("b", "p", "x"), rec("a", "p", "y")}, {{"p", "x"}});
  const auto table = metrics_table(reports, {"b"});
  EXPECT_EQ(table.rfind("method\tBLEU-1\tBLEU-2\tROUGE-L\tPrecision\tRecall\tDistinct-2\n", 0), 0u);
  EXPECT_LT(table.find("\nb\t"), table.find("\na\t"));
  const auto doc = metrics_document(reports);
  EXPECT_TRUE(doc.dump().find("Distinct-2") != std::string::npos);
}
