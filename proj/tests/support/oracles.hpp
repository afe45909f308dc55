#pragma once

// Slow, obviously-correct reference implementations. Nothing here shares code
// with the library beyond the plain data types.

#include <cstdint>
#include <string>
#include <vector>

#include "simarena/corpus.hpp"
#include "simarena/index.hpp"

namespace oracle {

struct Pair {
  std::vector<std::string> prompt_ids;
  std::vector<std::string> response_ids;
  std::string prompt;
  std::string response;
  std::int64_t gap = 0;
  std::int64_t ts = 0;

  friend bool operator==(const Pair&, const Pair&) = default;
};

// Turns are the connected components of the "joins its predecessor" relation;
// a target turn pairs with the latest interlocutor turn before it when that
// turn is unused and the gap is within the window.
std::vector<Pair> pairs(const std::vector<simarena::MessageEvent>& events, std::int64_t merge_window,
                        std::int64_t pair_window);
std::vector<Pair> from_library(const std::vector<simarena::ConversationPair>& pairs);

// Each response character claims one unused equal prompt character.
double coverage(const std::string& response, const std::string& prompt);

// Tokens here are already tokenized strings.
double bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n);
// Longest common subsequence by enumerating subsets of the shorter side.
std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b);
double rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& ref);
double precision(const std::vector<std::string>& cand, const std::vector<std::string>& ref);
double recall(const std::vector<std::string>& cand, const std::vector<std::string>& ref);
double distinct_2(const std::vector<std::vector<std::string>>& corpus);

struct Hit {
  std::string item_id;
  double score = 0.0;
};

// Score every item, window, floor, order, suppress near duplicates, cut.
std::vector<Hit> retrieve(const std::vector<simarena::IndexedItem>& items, const std::vector<float>& query,
                          std::size_t k, double min_cosine, double dedup_cosine,
                          std::int64_t window_lo, std::int64_t window_hi);
double cosine(const std::vector<float>& a, const std::vector<float>& b);

// P(X >= wins), X ~ Bin(n, 1/2), by enumerating all 2^n outcome sequences.
double binomial_tail(int wins, int n);

// Leftmost-longest literal replacement, ties to the earlier rule.
std::string replace_literals(const std::string& text,
                             const std::vector<std::pair<std::string, std::string>>& rules);

}  // namespace oracle
