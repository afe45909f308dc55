#pragma once

#include <filesystem>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "simarena/corpus.hpp"

namespace simarena {

struct AnonymizationRule {
  enum class Kind { kLiteral, kPattern };
  Kind kind = Kind::kLiteral;
  std::string match;        // literal text or ECMAScript regex
  std::string placeholder;  // e.g. "[PHONE]"
};

// Single left-to-right scan. At each position every rule is tried and the
// longest match wins (ties go to the earlier rule); scanning resumes after the
// replaced span. Placeholders are never rescanned.
class Anonymizer {
 public:
  Anonymizer() = default;
  explicit Anonymizer(std::vector<AnonymizationRule> rules);

  // Phone numbers, e-mail addresses and national id / SSN-style numbers.
  static std::vector<AnonymizationRule> builtin_rules();
  // JSON lines {"literal"|"pattern": str, "placeholder": str}, or
  // {"class": "phone"|"email"|"id"} for a built-in class.
  static std::vector<AnonymizationRule> load_rules(const std::filesystem::path& path);

  std::string apply(std::string_view text) const;
  bool empty() const { return rules_.empty(); }

 private:
  struct Compiled {
    AnonymizationRule rule;
    std::regex re;
  };
  std::vector<Compiled> rules_;
};

std::vector<MessageEvent> anonymize(std::vector<MessageEvent> events, const Anonymizer& rules);

}  // namespace simarena
