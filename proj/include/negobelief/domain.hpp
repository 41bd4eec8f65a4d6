#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "negobelief/error.hpp"
#include "negobelief/posterior.hpp"

namespace negobelief {

inline constexpr std::size_t kIssueCount = 3;

// Position of an issue inside its IssueDomain.
using IssueId = std::size_t;

enum class Side { self, opponent };

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

}  // namespace detail

struct Issue {
  IssueId id = 0;
  std::string display_name;

  friend bool operator==(const Issue&, const Issue&) = default;
};

// Three issues, a package count per issue and the (high, medium, low) point
// values a participant assigns by rank.
struct IssueDomain {
  std::array<Issue, kIssueCount> issues;
  int packages_per_issue = 3;
  std::array<int, kIssueCount> point_scale{5, 4, 3};

  static IssueDomain make(const std::array<std::string, kIssueCount>& names,
                          int packages = 3,
                          std::array<int, kIssueCount> scale = {5, 4, 3}) {
    IssueDomain d;
    for (std::size_t i = 0; i < kIssueCount; ++i) d.issues[i] = Issue{i, names[i]};
    d.packages_per_issue = packages;
    d.point_scale = scale;
    d.validate();
    return d;
  }

  // Food, Water, Firewood with 3 packages each worth 5/4/3 by rank.
  static IssueDomain casino() { return make({"Food", "Water", "Firewood"}); }

  void validate() const {
    if (packages_per_issue < 1) throw ValidationError("packages_per_issue must be >= 1");
    if (!(point_scale[0] > point_scale[1] && point_scale[1] > point_scale[2])) {
      throw ValidationError("point_scale must be strictly decreasing");
    }
    for (std::size_t i = 0; i < kIssueCount; ++i) {
      if (issues[i].id != i) throw ValidationError("issue ids must equal their position");
      if (issues[i].display_name.empty()) throw ValidationError("issue names must be nonempty");
      for (std::size_t j = 0; j < i; ++j) {
        if (detail::iequals(issues[i].display_name, issues[j].display_name)) {
          throw ValidationError("duplicate issue name '" + issues[i].display_name + "'");
        }
      }
    }
  }

  // Points a participant gets for taking every package of every issue.
  int max_points() const {
    return packages_per_issue * (point_scale[0] + point_scale[1] + point_scale[2]);
  }

  std::optional<IssueId> find(std::string_view name) const {
    for (const auto& issue : issues) {
      if (detail::iequals(issue.display_name, name)) return issue.id;
    }
    return std::nullopt;
  }

  const std::string& name(IssueId id) const { return issues.at(id).display_name; }

  friend bool operator==(const IssueDomain&, const IssueDomain&) = default;
};

// Strict priority ranking of the three issues, highest first. The canonical
// index enumerates rank sequences of issue ids lexicographically.
class Ordering {
 public:
  using Ranks = std::array<IssueId, kIssueCount>;

  Ordering() : ranks_{0, 1, 2} {}

  static Ordering from_ranks(const Ranks& ranks) {
    std::array<bool, kIssueCount> seen{};
    for (IssueId id : ranks) {
      if (id >= kIssueCount || seen[id]) {
        throw ValidationError("ordering ranks must be a permutation of the issue ids");
      }
      seen[id] = true;
    }
    return Ordering(ranks);
  }

  static Ordering from_index(std::size_t index) {
    if (index >= kOrderingCount) throw ValidationError("ordering index out of range");
    Ranks r{0, 1, 2};
    for (std::size_t i = 0; i < index; ++i) std::next_permutation(r.begin(), r.end());
    return Ordering(r);
  }

  // Parses "Food>Water>Firewood" (case-insensitive names, optional spaces).
  static std::optional<Ordering> parse_label(std::string_view label, const IssueDomain& domain) {
    Ranks r{};
    std::size_t n = 0;
    std::size_t start = 0;
    while (start <= label.size()) {
      std::size_t end = label.find('>', start);
      if (end == std::string_view::npos) end = label.size();
      std::string_view part = label.substr(start, end - start);
      while (!part.empty() && std::isspace(static_cast<unsigned char>(part.front()))) part.remove_prefix(1);
      while (!part.empty() && std::isspace(static_cast<unsigned char>(part.back()))) part.remove_suffix(1);
      if (n >= kIssueCount) return std::nullopt;
      auto id = domain.find(part);
      if (!id) return std::nullopt;
      r[n++] = *id;
      start = end + 1;
    }
    if (n != kIssueCount) return std::nullopt;
    try {
      return from_ranks(r);
    } catch (const ValidationError&) {
      return std::nullopt;
    }
  }

  // Lexicographic rank of a permutation of {0,1,2}.
  std::size_t index() const {
    const std::size_t second = ranks_[1] - (ranks_[1] > ranks_[0] ? 1 : 0);
    return ranks_[0] * 2 + second;
  }

  const Ranks& ranks() const noexcept { return ranks_; }
  IssueId at_rank(std::size_t rank) const { return ranks_.at(rank); }

  std::size_t rank_of(IssueId id) const {
    for (std::size_t i = 0; i < kIssueCount; ++i) {
      if (ranks_[i] == id) return i;
    }
    throw ValidationError("issue id not in ordering");
  }

  int points(IssueId id, const IssueDomain& domain) const { return domain.point_scale[rank_of(id)]; }

  std::string label(const IssueDomain& domain) const {
    return domain.name(ranks_[0]) + ">" + domain.name(ranks_[1]) + ">" + domain.name(ranks_[2]);
  }

  Ordering reversed() const { return Ordering(Ranks{ranks_[2], ranks_[1], ranks_[0]}); }

  friend bool operator==(const Ordering&, const Ordering&) = default;
  friend auto operator<=>(const Ordering&, const Ordering&) = default;

 private:
  explicit Ordering(const Ranks& r) : ranks_(r) {}
  Ranks ranks_;
};

inline std::vector<Ordering> enumerate_orderings(const IssueDomain& domain) {
  domain.validate();
  std::vector<Ordering> out;
  out.reserve(kOrderingCount);
  for (std::size_t i = 0; i < kOrderingCount; ++i) out.push_back(Ordering::from_index(i));
  return out;
}

inline std::vector<std::string> ordering_labels(const IssueDomain& domain) {
  std::vector<std::string> out;
  for (const auto& o : enumerate_orderings(domain)) out.push_back(o.label(domain));
  return out;
}

// Number of adjacent transpositions separating two orderings (0..3).
inline int kendall_tau_distance(const Ordering& a, const Ordering& b) {
  int d = 0;
  for (std::size_t i = 0; i < kIssueCount; ++i) {
    for (std::size_t j = i + 1; j < kIssueCount; ++j) {
      // a puts ranks_[i] above ranks_[j]; count pairs b disagrees on
      if (b.rank_of(a.at_rank(i)) > b.rank_of(a.at_rank(j))) ++d;
    }
  }
  return d;
}

// Packages the self side takes per issue. The opponent implicitly receives
// packages_per_issue - self_counts[i].
struct Allocation {
  std::array<int, kIssueCount> self_counts{};

  int opponent_count(IssueId id, const IssueDomain& domain) const {
    return domain.packages_per_issue - self_counts.at(id);
  }

  int count(IssueId id, Side side, const IssueDomain& domain) const {
    return side == Side::self ? self_counts.at(id) : opponent_count(id, domain);
  }

  // The same split seen from the other participant.
  Allocation mirrored(const IssueDomain& domain) const {
    Allocation m;
    for (std::size_t i = 0; i < kIssueCount; ++i) m.self_counts[i] = opponent_count(i, domain);
    return m;
  }

  bool valid_for(const IssueDomain& domain) const {
    return std::all_of(self_counts.begin(), self_counts.end(),
                       [&](int c) { return c >= 0 && c <= domain.packages_per_issue; });
  }

  void validate(const IssueDomain& domain) const {
    if (!valid_for(domain)) {
      throw ValidationError("allocation count out of range [0, " +
                            std::to_string(domain.packages_per_issue) + "]");
    }
  }

  std::string to_string() const {
    return "(" + std::to_string(self_counts[0]) + "," + std::to_string(self_counts[1]) + "," +
           std::to_string(self_counts[2]) + ")";
  }

  friend bool operator==(const Allocation&, const Allocation&) = default;
  friend auto operator<=>(const Allocation&, const Allocation&) = default;
};

inline int utility(const Allocation& alloc, const Ordering& ordering, Side side,
                   const IssueDomain& domain) {
  alloc.validate(domain);
  int total = 0;
  for (IssueId i = 0; i < kIssueCount; ++i) {
    total += alloc.count(i, side, domain) * ordering.points(i, domain);
  }
  return total;
}

// Opponent utility marginalized over the posterior's six orderings.
inline double expected_opponent_utility(const Allocation& alloc, const Posterior& posterior,
                                        const IssueDomain& domain) {
  double total = 0.0;
  for (std::size_t k = 0; k < kOrderingCount; ++k) {
    if (posterior[k] == 0.0) continue;
    total += posterior[k] * utility(alloc, Ordering::from_index(k), Side::opponent, domain);
  }
  return total;
}

}  // namespace negobelief
