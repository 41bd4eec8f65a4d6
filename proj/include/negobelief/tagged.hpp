#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "negobelief/domain.hpp"
#include "negobelief/planner.hpp"
#include "negobelief/posterior.hpp"

namespace negobelief {

// Tagged model output:
//   <posterior>...</posterior>
//   <selected_intent>...</selected_intent>
//   <selected_content>...</selected_content>
//   <utterance>...</utterance>
// Tag names are case-insensitive and may appear in any order, surrounded by
// arbitrary prose.

enum class DiagnosticKind { error, repair };

struct ParseDiagnostic {
  std::string tag;
  DiagnosticKind kind = DiagnosticKind::error;
  std::string reason;
};

struct TaggedOutput {
  std::optional<Posterior> posterior;
  std::optional<Intent> intent;
  std::optional<Allocation> content;
  std::optional<std::string> utterance;
  std::vector<ParseDiagnostic> parse_errors;

  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& d : parse_errors) n += d.kind == DiagnosticKind::error ? 1 : 0;
    return n;
  }

  std::optional<AgentAction> action() const {
    if (!intent) return std::nullopt;
    AgentAction a{*intent, std::nullopt, utterance};
    if (*intent == Intent::submit || *intent == Intent::reject) a.content = content;
    return a;
  }
};

namespace tagged_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline char lower_char(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

// Case-insensitive find of `needle` in `hay` from `from`.
inline std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from = 0) {
  if (needle.empty() || hay.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    std::size_t k = 0;
    while (k < needle.size() && lower_char(hay[i + k]) == needle[k]) ++k;
    if (k == needle.size()) return i;
  }
  return std::string_view::npos;
}

enum class TagStatus { found, missing, unterminated };

struct TagBody {
  TagStatus status = TagStatus::missing;
  std::string_view body;
  int occurrences = 0;
};

inline TagBody extract(std::string_view text, std::string_view name) {
  const std::string open = "<" + std::string(name) + ">";
  const std::string close = "</" + std::string(name) + ">";
  TagBody out;
  std::size_t pos = ifind(text, open);
  if (pos == std::string_view::npos) return out;
  const std::size_t start = pos + open.size();
  const std::size_t end = ifind(text, close, start);
  if (end == std::string_view::npos) {
    out.status = TagStatus::unterminated;
    return out;
  }
  out.status = TagStatus::found;
  out.body = text.substr(start, end - start);
  for (std::size_t p = pos; p != std::string_view::npos; p = ifind(text, open, p + 1)) ++out.occurrences;
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  while (!s.empty() && (s.front() == '"' || s.front() == '\'')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == '"' || s.back() == '\'')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline bool is_number_char(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E';
}

// Every maximal numeric-looking run in `s` that parses as a number.
inline std::vector<double> bare_numbers(std::string_view s) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (std::isdigit(static_cast<unsigned char>(s[i])) || ((s[i] == '-' || s[i] == '.') && i + 1 < s.size() &&
                                                         (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '.'))) {
      std::size_t j = i;
      while (j < s.size() && is_number_char(s[j])) ++j;
      if (auto v = parse_number(s.substr(i, j - i))) out.push_back(*v);
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

// Splits "k: v, k2 = v2 ..." style content into (key, value) pairs.
inline std::vector<std::pair<std::string_view, std::string_view>> key_values(std::string_view s) {
  std::vector<std::pair<std::string_view, std::string_view>> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    std::string_view item = trim(s.substr(start, end - start));
    std::size_t sep = item.find_last_of(":=");
    if (sep != std::string_view::npos) {
      std::string_view key = trim(item.substr(0, sep));
      while (!key.empty() && (key.front() == '"' || key.front() == '\'')) key.remove_prefix(1);
      while (!key.empty() && (key.back() == '"' || key.back() == '\'')) key.remove_suffix(1);
      out.emplace_back(trim(key), trim(item.substr(sep + 1)));
    }
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == ',' || c == ';' || c == '\n' || c == '{' || c == '}') {
      flush(i);
      start = i + 1;
    }
  }
  flush(s.size());
  return out;
}

inline void add(TaggedOutput& out, std::string tag, DiagnosticKind kind, std::string reason) {
  out.parse_errors.push_back(ParseDiagnostic{std::move(tag), kind, std::move(reason)});
}

inline void parse_posterior(std::string_view body, const IssueDomain& domain, TaggedOutput& out) {
  static constexpr const char* kTag = "posterior";
  std::array<double, kOrderingCount> values{};
  std::array<bool, kOrderingCount> seen{};
  std::size_t labeled = 0;
  for (const auto& [key, value] : key_values(body)) {
    auto o = Ordering::parse_label(key, domain);
    if (!o) continue;
    auto v = parse_number(value);
    if (!v) {
      add(out, kTag, DiagnosticKind::error, "non-numeric probability for " + std::string(key));
      continue;
    }
    const auto idx = o->index();
    if (seen[idx]) add(out, kTag, DiagnosticKind::repair, "duplicate label " + o->label(domain) + "; last value kept");
    seen[idx] = true;
    values[idx] = *v;
    ++labeled;
  }
  if (labeled == 0) {
    const auto nums = bare_numbers(body);
    if (nums.size() != kOrderingCount) {
      add(out, kTag, DiagnosticKind::error,
          "expected 6 labeled or positional probabilities, found " + std::to_string(nums.size()) + " numbers");
      return;
    }
    for (std::size_t i = 0; i < kOrderingCount; ++i) values[i] = nums[i];
  } else if (labeled < kOrderingCount) {
    std::size_t missing = 0;
    for (bool s : seen) missing += s ? 0 : 1;
    if (missing > 0) {
      add(out, kTag, DiagnosticKind::repair, std::to_string(missing) + " ordering label(s) missing; treated as 0");
    }
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      add(out, kTag, DiagnosticKind::error, "non-finite probability");
      return;
    }
  }
  bool clipped = false;
  for (double& v : values) {
    if (v < 0.0) {
      v = 0.0;
      clipped = true;
    }
  }
  if (clipped) add(out, kTag, DiagnosticKind::repair, "negative probabilities clipped to 0");
  double total = 0.0;
  for (double v : values) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    add(out, kTag, DiagnosticKind::error, "posterior has no positive mass; treated as missing");
    return;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "posterior sums to " << total << "; renormalized";
    add(out, kTag, DiagnosticKind::repair, os.str());
  }
  out.posterior = Posterior::normalize(values);
}

inline std::optional<Allocation> parse_allocation_text(std::string_view body, const IssueDomain& domain,
                                                       std::string& why) {
  std::array<int, kIssueCount> counts{};
  std::array<bool, kIssueCount> seen{};
  std::size_t named = 0;
  for (const auto& [key, value] : key_values(body)) {
    auto id = domain.find(key);
    if (!id) continue;
    auto v = parse_number(value);
    if (!v || *v != std::floor(*v) || std::abs(*v) > 1e6) {
      why = "non-integer count for " + std::string(key);
      return std::nullopt;
    }
    counts[*id] = static_cast<int>(*v);
    seen[*id] = true;
    ++named;
  }
  if (named == 0) {
    const auto nums = bare_numbers(body);
    if (nums.size() != kIssueCount) {
      why = "content is neither null nor a 3-issue allocation";
      return std::nullopt;
    }
    for (std::size_t i = 0; i < kIssueCount; ++i) {
      if (nums[i] != std::floor(nums[i]) || std::abs(nums[i]) > 1e6) {
        why = "non-integer count";
        return std::nullopt;
      }
      counts[i] = static_cast<int>(nums[i]);
      seen[i] = true;
    }
  }
  for (bool s : seen) {
    if (!s) {
      why = "allocation does not name every issue";
      return std::nullopt;
    }
  }
  Allocation a{counts};
  if (!a.valid_for(domain)) {
    why = "allocation violates the per-issue package limit";
    return std::nullopt;
  }
  return a;
}

}  // namespace tagged_detail

// Defensive parser for tagged model output. Never throws on malformed text;
// every problem lands in parse_errors.
inline TaggedOutput parse_tagged(std::string_view text, const IssueDomain& domain = IssueDomain::casino()) {
  using namespace tagged_detail;
  TaggedOutput out;
  auto fetch = [&](std::string_view name) -> std::optional<std::string_view> {
    auto tag = extract(text, name);
    if (tag.status == TagStatus::missing) {
      add(out, std::string(name), DiagnosticKind::error, "missing tag");
      return std::nullopt;
    }
    if (tag.status == TagStatus::unterminated) {
      add(out, std::string(name), DiagnosticKind::error, "unterminated tag");
      return std::nullopt;
    }
    if (tag.occurrences > 1) add(out, std::string(name), DiagnosticKind::repair, "repeated tag; first kept");
    return tag.body;
  };

  try {
    if (auto body = fetch("posterior")) parse_posterior(*body, domain, out);
    if (auto body = fetch("selected_intent")) {
      auto t = trim(*body);
      if (auto intent = parse_intent(t)) {
        out.intent = intent;
      } else {
        add(out, "selected_intent", DiagnosticKind::error, "unknown intent '" + std::string(t.substr(0, 40)) + "'");
      }
    }
    if (auto body = fetch("selected_content")) {
      auto t = trim(*body);
      if (!(t.empty() || detail::iequals(t, "null") || detail::iequals(t, "none"))) {
        std::string why;
        out.content = parse_allocation_text(t, domain, why);
        if (!out.content) add(out, "selected_content", DiagnosticKind::error, why);
      }
    }
    if (auto body = fetch("utterance")) out.utterance = std::string(trim(*body));
    if (out.intent == Intent::submit && !out.content) {
      add(out, "selected_content", DiagnosticKind::error, "submit intent without allocation content");
    }
  } catch (const std::exception& e) {
    add(out, "", DiagnosticKind::error, std::string("internal parse failure: ") + e.what());
  }
  return out;
}

inline std::string render_allocation(const Allocation& a, const IssueDomain& domain) {
  std::ostringstream os;
  os << "{";
  for (IssueId i = 0; i < kIssueCount; ++i) {
    os << (i ? ", " : "") << '"' << domain.name(i) << "\": " << a.self_counts[i];
  }
  os << "}";
  return os.str();
}

// Canonical tagged rendering of a belief and an action.
inline std::string render_tagged(const std::optional<Posterior>& posterior, const AgentAction& action,
                                 const IssueDomain& domain = IssueDomain::casino()) {
  std::ostringstream os;
  os << "<posterior>";
  if (posterior) {
    os << "{";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < kOrderingCount; ++i) {
      os << (i ? ", " : "") << '"' << Ordering::from_index(i).label(domain) << "\": " << (*posterior)[i];
    }
    os << "}";
  }
  os << "</posterior>\n<selected_intent>" << to_string(action.intent) << "</selected_intent>\n<selected_content>";
  os << (action.content ? render_allocation(*action.content, domain) : std::string("null"));
  os << "</selected_content>\n<utterance>" << action.utterance.value_or("") << "</utterance>";
  return os.str();
}

}  // namespace negobelief
