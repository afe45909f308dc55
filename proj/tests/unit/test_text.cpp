#include <gtest/gtest.h>

#include "simarena/hash.hpp"
#include "simarena/text.hpp"

using namespace simarena;

TEST(Utf8, RoundTrip) {
  const std::string s = "héllo 世界 🙂";
  EXPECT_EQ(utf8_encode(utf8_decode(s)), s);
  EXPECT_EQ(utf8_decode(s).size(), 10u);
}

TEST(Utf8, InvalidBytesBecomeReplacement) {
  const auto cps = utf8_decode(std::string("a\xff" "b"));
  ASSERT_EQ(cps.size(), 3u);
  EXPECT_EQ(cps[1], U'�');
  const auto truncated = utf8_decode(std::string("\xe4\xb8"));
  EXPECT_EQ(truncated.size(), 2u);
}

TEST(Text, TrimAndCount) {
  EXPECT_EQ(trim("  \t hi there \n"), "hi there");
  EXPECT_EQ(trim("　好　"), "好");
  EXPECT_EQ(char_count("a b  c"), 6u);
  EXPECT_EQ(char_count("a b  c", true), 3u);
  EXPECT_EQ(char_count("你 好", true), 2u);
}

TEST(Text, FoldCase) {
  EXPECT_EQ(fold_case(std::string_view("HeLLo ÀÉ")), "hello àé");
  EXPECT_EQ(fold_case(std::string_view("中文")), "中文");
}

TEST(Tokenize, CjkPerCharacterLatinRuns) {
  const auto t = tokenize("我爱 NLP2024, really!");
  EXPECT_EQ(t.tokens, (std::vector<std::string>{"我", "爱", "nlp2024", "really"}));
  EXPECT_EQ(t.tokenizer_id, kTokenizerId);
}

TEST(Tokenize, MixedScriptBoundaries) {
  EXPECT_EQ(tokenize("ok好的ok").tokens, (std::vector<std::string>{"ok", "好", "的", "ok"}));
  EXPECT_EQ(tokenize("the cat sat").tokens, (std::vector<std::string>{"the", "cat", "sat"}));
  EXPECT_TRUE(tokenize("  ...!!  ").empty());
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Hash, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Hash, Fnv1aKnownVector) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}
