#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace simarena {

// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD so that
// every byte of input is accounted for.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
void utf8_append(std::string& out, char32_t cp);

bool is_space(char32_t cp);
bool is_cjk(char32_t cp);
// Letters and digits that form multi-character word tokens.
bool is_word_char(char32_t cp);
char32_t fold_case(char32_t cp);

std::string trim(std::string_view s);
std::string fold_case(std::string_view s);
// Number of code points, optionally excluding whitespace.
std::size_t char_count(std::string_view s, bool skip_space = false);

inline constexpr std::string_view kTokenizerId = "cjk-char+latin-run/v1";

struct TokenSeq {
  std::vector<std::string> tokens;
  std::string tokenizer_id{kTokenizerId};

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

// CJK code points become single-character tokens, contiguous letter/digit
// runs become one token, everything else separates tokens and is dropped.
// Output is case-folded.
TokenSeq tokenize(std::string_view text);

}  // namespace simarena
