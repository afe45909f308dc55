#include "simarena/anonymize.hpp"

#include <limits>

#include "simarena/error.hpp"
#include "simarena/jsonl.hpp"

namespace simarena {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

const std::vector<AnonymizationRule>& phone_rules() {
  static const std::vector<AnonymizationRule> rules = {
      {AnonymizationRule::Kind::kPattern, R"(1[3-9]\d{9})", "[PHONE]"},
      {AnonymizationRule::Kind::kPattern, R"((\+\d{1,3}[ -])?(\(\d{3}\) ?|\d{3}[ -])?\d{3}[ -]\d{4})",
       "[PHONE]"},
  };
  return rules;
}

const std::vector<AnonymizationRule>& email_rules() {
  static const std::vector<AnonymizationRule> rules = {
      {AnonymizationRule::Kind::kPattern, R"([A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,})",
       "[EMAIL]"},
  };
  return rules;
}

const std::vector<AnonymizationRule>& id_rules() {
  static const std::vector<AnonymizationRule> rules = {
      {AnonymizationRule::Kind::kPattern, R"(\d{17}[\dXx])", "[ID]"},
      {AnonymizationRule::Kind::kPattern, R"(\d{3}-\d{2}-\d{4})", "[ID]"},
  };
  return rules;
}

}  // namespace

Anonymizer::Anonymizer(std::vector<AnonymizationRule> rules) {
  for (auto& r : rules) {
    if (r.match.empty()) throw DataError("anonymization rule with empty match");
    std::regex re;
    if (r.kind == AnonymizationRule::Kind::kPattern) {
      try {
        re = std::regex(r.match, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw DataError("invalid anonymization pattern '" + r.match + "': " + e.what());
      }
    }
    rules_.push_back(Compiled{std::move(r), std::move(re)});
  }
}

std::vector<AnonymizationRule> Anonymizer::builtin_rules() {
  std::vector<AnonymizationRule> out;
  for (const auto* group : {&phone_rules(), &email_rules(), &id_rules()}) {
    out.insert(out.end(), group->begin(), group->end());
  }
  return out;
}

std::vector<AnonymizationRule> Anonymizer::load_rules(const std::filesystem::path& path) {
  std::vector<AnonymizationRule> out;
  for_each_jsonl(path, [&](std::size_t line_no, const json& rec) {
    if (auto c = rec.find("class"); c != rec.end()) {
      const std::string cls = c->get<std::string>();
      const std::vector<AnonymizationRule>* group = nullptr;
      if (cls == "phone") group = &phone_rules();
      if (cls == "email") group = &email_rules();
      if (cls == "id") group = &id_rules();
      if (group == nullptr) throw ParseError(path.string(), line_no, "unknown rule class '" + cls + "'");
      out.insert(out.end(), group->begin(), group->end());
      return;
    }
    AnonymizationRule r;
    if (rec.contains("literal")) {
      r.kind = AnonymizationRule::Kind::kLiteral;
      r.match = rec["literal"].get<std::string>();
    } else if (rec.contains("pattern")) {
      r.kind = AnonymizationRule::Kind::kPattern;
      r.match = rec["pattern"].get<std::string>();
    } else {
      throw ParseError(path.string(), line_no, "rule needs 'literal', 'pattern' or 'class'");
    }
    r.placeholder = rec.value("placeholder", std::string("[REDACTED]"));
    out.push_back(std::move(r));
  });
  return out;
}

std::string Anonymizer::apply(std::string_view text) const {
  if (rules_.empty()) return std::string(text);

  // Per rule, the next match at or after the scan position (start, length).
  struct Next {
    std::size_t start = 0;
    std::size_t len = 0;
  };
  std::vector<Next> next(rules_.size());

  auto find_from = [&](std::size_t i, std::size_t pos) -> Next {
    const auto& c = rules_[i];
    if (c.rule.kind == AnonymizationRule::Kind::kLiteral) {
      const auto at = text.find(c.rule.match, pos);
      return at == std::string_view::npos ? Next{kNone, 0} : Next{at, c.rule.match.size()};
    }
    std::match_results<std::string_view::const_iterator> m;
    auto begin = text.begin() + static_cast<std::ptrdiff_t>(pos);
    while (std::regex_search(begin, text.end(), m, c.re)) {
      if (m.length(0) > 0) {
        return {static_cast<std::size_t>(m[0].first - text.begin()),
                static_cast<std::size_t>(m.length(0))};
      }
      if (m[0].first == text.end()) break;
      begin = m[0].first + 1;  // skip empty matches
    }
    return {kNone, 0};
  };

  for (std::size_t i = 0; i < rules_.size(); ++i) next[i] = find_from(i, 0);

  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t earliest = kNone;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      if (next[i].start != kNone && next[i].start < pos) next[i] = find_from(i, pos);
      earliest = std::min(earliest, next[i].start);
    }
    if (earliest == kNone) break;

    // Any rule that can match at `earliest` has its leftmost match there.
    std::size_t best = kNone;
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      if (next[i].start == earliest && next[i].len > best_len) {
        best = i;
        best_len = next[i].len;
      }
    }
    out.append(text.substr(pos, earliest - pos));
    out += rules_[best].rule.placeholder;
    pos = earliest + best_len;
  }
  if (pos < text.size()) out.append(text.substr(pos));
  return out;
}

std::vector<MessageEvent> anonymize(std::vector<MessageEvent> events, const Anonymizer& rules) {
  if (rules.empty()) return events;
  for (auto& ev : events) ev.text = rules.apply(ev.text);
  return events;
}

}  // namespace simarena
