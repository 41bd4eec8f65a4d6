#pragma once

#include <array>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "negobelief/domain.hpp"
#include "negobelief/lexicon.hpp"

namespace negobelief {

namespace offer_detail {

inline std::optional<int> quantity(const std::string& word, int packages) {
  static const std::array<const char*, 11> names = {"zero", "one", "two", "three", "four", "five",
                                                   "six",  "seven", "eight", "nine", "ten"};
  if (word == "all" || word == "everything") return packages;
  if (word == "none" || word == "no") return 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (word == names[i]) return static_cast<int>(i);
  }
  if (!word.empty() && word.size() < 4 &&
      std::all_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::stoi(word);
  }
  return std::nullopt;
}

inline std::vector<std::string> clauses(const std::string& text) {
  static const std::regex sep(R"([,.;!?]|\band\b|\bbut\b|\bwhile\b|\bthen\b)");
  std::vector<std::string> out;
  std::sregex_token_iterator it(text.begin(), text.end(), sep, -1), end;
  for (; it != end; ++it) {
    if (!it->str().empty()) out.push_back(it->str());
  }
  return out;
}

enum class Party { unknown, self, other };

inline Party subject_of(const std::string& clause) {
  static const std::regex other(R"(\b(?:you|your|yours|you'll|you'd)\b)");
  static const std::regex self(R"(\b(?:i|me|my|mine|i'll|i'd|we|us|our)\b)");
  std::smatch mo, ms;
  const bool has_other = std::regex_search(clause, mo, other);
  const bool has_self = std::regex_search(clause, ms, self);
  if (has_other && has_self) {
    // "I will give you 2 water": the recipient is the object; "you give me"
    // mirrors it. The first pronoun names the actor.
    const bool self_first = ms.position(0) < mo.position(0);
    static const std::regex giving(R"(\b(?:give|giving|leave|leaving|offer|offering|let)\b)");
    const bool gives = std::regex_search(clause, giving);
    if (self_first) return gives ? Party::other : Party::self;
    return gives ? Party::self : Party::other;
  }
  if (has_other) return Party::other;
  if (has_self) return Party::self;
  return Party::unknown;
}

}  // namespace offer_detail

// Parses free-text offers such as "I take 3 food, 1 water, 0 firewood" or
// "you get all the water and I keep the rest" into the speaker's share.
// Returns nullopt unless every issue resolves to one consistent count.
inline std::optional<Allocation> canonicalize_offer(const std::string& text, const IssueDomain& domain) {
  using namespace offer_detail;
  const std::string lowered = detail::lower(text);
  std::array<std::optional<int>, kIssueCount> self_counts;
  Party party = Party::self;
  const std::string qty = R"((\d+|zero|one|two|three|four|five|six|seven|eight|nine|ten|all|none|no)\s+(?:of\s+)?(?:the\s+|your\s+|my\s+)?(?:packages?\s+of\s+|units?\s+of\s+)?)";
  std::vector<std::regex> issue_res;
  for (const auto& issue : domain.issues) {
    issue_res.emplace_back(qty + detail::issue_word_regex(issue.display_name) + R"(\b)");
  }
  for (const auto& clause : clauses(lowered)) {
    if (auto p = subject_of(clause); p != Party::unknown) party = p;
    for (IssueId i = 0; i < kIssueCount; ++i) {
      for (auto it = std::sregex_iterator(clause.begin(), clause.end(), issue_res[i]); it != std::sregex_iterator();
           ++it) {
        auto q = quantity((*it)[1].str(), domain.packages_per_issue);
        if (!q || *q < 0 || *q > domain.packages_per_issue) return std::nullopt;
        const int mine = party == Party::other ? domain.packages_per_issue - *q : *q;
        if (self_counts[i] && *self_counts[i] != mine) return std::nullopt;
        self_counts[i] = mine;
      }
    }
  }
  Allocation a;
  for (IssueId i = 0; i < kIssueCount; ++i) {
    if (!self_counts[i]) return std::nullopt;
    a.self_counts[i] = *self_counts[i];
  }
  return a;
}

}  // namespace negobelief
