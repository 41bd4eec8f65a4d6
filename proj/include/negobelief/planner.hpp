#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "negobelief/belief.hpp"
#include "negobelief/domain.hpp"
#include "negobelief/error.hpp"

namespace negobelief {

enum class Intent { submit, accept, reject, walkaway, utter };

inline std::string_view to_string(Intent intent) {
  switch (intent) {
    case Intent::submit: return "submit";
    case Intent::accept: return "accept";
    case Intent::reject: return "reject";
    case Intent::walkaway: return "walkaway";
    case Intent::utter: return "utter";
  }
  return "utter";
}

inline std::optional<Intent> parse_intent(std::string_view text) {
  for (Intent i : {Intent::submit, Intent::accept, Intent::reject, Intent::walkaway, Intent::utter}) {
    if (detail::iequals(text, to_string(i))) return i;
  }
  return std::nullopt;
}

// Intent plus optional allocation (the acting side's own share).
struct AgentAction {
  Intent intent = Intent::utter;
  std::optional<Allocation> content;
  std::optional<std::string> utterance;

  void validate(const IssueDomain& domain) const {
    const bool may_carry = intent == Intent::submit || intent == Intent::reject;
    if (content && !may_carry) {
      throw ValidationError("only submit or reject actions may carry allocation content");
    }
    if (intent == Intent::submit && !content) throw ValidationError("submit requires allocation content");
    if (content) content->validate(domain);
  }

  // Equal intent and equal content; utterance text is ignored.
  bool same_decision(const AgentAction& other) const {
    return intent == other.intent && content == other.content;
  }

  friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

struct SvoMapping {
  double proself_lambda = 0.2;
  double prosocial_lambda = 0.6;

  static SvoMapping rescaled() { return {0.2, 0.6}; }
  static SvoMapping legacy() { return {1.0, 2.0}; }
};

enum class SvoLabel { proself, prosocial };

struct PlannerConfig {
  double lambda = 1.0;
  double accept_margin = 5.0;
  double accept_floor = 0.5;
  std::optional<SvoMapping> svo_mapping;

  void validate() const {
    if (!std::isfinite(lambda) || lambda < 0.0) throw ValidationError("lambda must be finite and >= 0");
    if (!std::isfinite(accept_margin)) throw ValidationError("accept_margin must be finite");
    if (!(accept_floor >= 0.0 && accept_floor <= 1.0)) throw ValidationError("accept_floor must lie in [0,1]");
  }

  // Copy with lambda taken from the SVO mapping; unchanged without a mapping.
  PlannerConfig for_svo(SvoLabel label) const {
    PlannerConfig c = *this;
    if (svo_mapping) {
      c.lambda = label == SvoLabel::proself ? svo_mapping->proself_lambda : svo_mapping->prosocial_lambda;
    }
    return c;
  }
};

struct MenuEntry {
  Allocation alloc;
  int self_utility = 0;
  double expected_opp_utility = 0.0;
  double score = 0.0;
};

// All (packages+1)^3 allocations in lexicographic order of self counts.
inline std::vector<Allocation> enumerate_allocations(const IssueDomain& domain) {
  domain.validate();
  const int n = domain.packages_per_issue;
  std::vector<Allocation> out;
  out.reserve(static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)));
  for (int a = 0; a <= n; ++a) {
    for (int b = 0; b <= n; ++b) {
      for (int c = 0; c <= n; ++c) out.push_back(Allocation{{a, b, c}});
    }
  }
  return out;
}

// Scores are compared on a 1e-9 grid so that mathematically equal scores
// reached through different rounding paths still fall to the tie-breaks.
inline double score_key(double score) { return std::round(score * 1e9); }

// Orders menu entries: score desc, then self utility desc, then allocation asc.
inline bool menu_before(const MenuEntry& a, const MenuEntry& b) {
  const double ka = score_key(a.score), kb = score_key(b.score);
  if (ka != kb) return ka > kb;
  if (a.self_utility != b.self_utility) return a.self_utility > b.self_utility;
  return a.alloc < b.alloc;
}

inline MenuEntry score_allocation(const Allocation& alloc, const Posterior& posterior,
                                  const Ordering& self_ordering, double lambda, const IssueDomain& domain) {
  MenuEntry e;
  e.alloc = alloc;
  e.self_utility = utility(alloc, self_ordering, Side::self, domain);
  e.expected_opp_utility = expected_opponent_utility(alloc, posterior, domain);
  e.score = static_cast<double>(e.self_utility) + lambda * e.expected_opp_utility;
  return e;
}

// Every allocation scored as U_self + lambda * E_p[U_opp], best first.
inline std::vector<MenuEntry> score_menu(const Posterior& posterior, const Ordering& self_ordering,
                                         const PlannerConfig& config, const IssueDomain& domain) {
  config.validate();
  std::vector<MenuEntry> menu;
  for (const auto& a : enumerate_allocations(domain)) {
    menu.push_back(score_allocation(a, posterior, self_ordering, config.lambda, domain));
  }
  std::sort(menu.begin(), menu.end(), menu_before);
  return menu;
}

// Turns a pending offer (self's share under it) and a belief into an action.
// Accepts only when the offer is within accept_margin of the best menu score
// and clears the accept_floor fraction of the maximum self utility; otherwise
// counters with the top menu allocation. Never walks away on its own.
inline AgentAction decide(const std::optional<Allocation>& pending_offer, const Posterior& posterior,
                          const Ordering& self_ordering, const PlannerConfig& config,
                          const IssueDomain& domain) {
  if (pending_offer) pending_offer->validate(domain);
  const auto menu = score_menu(posterior, self_ordering, config, domain);
  const MenuEntry& top = menu.front();
  if (!pending_offer) return AgentAction{Intent::submit, top.alloc, std::nullopt};

  const MenuEntry offer = score_allocation(*pending_offer, posterior, self_ordering, config.lambda, domain);
  const bool within_margin = offer.score >= top.score - config.accept_margin - 1e-9;
  const bool above_floor =
      static_cast<double>(offer.self_utility) / static_cast<double>(domain.max_points()) >= config.accept_floor;
  if (within_margin && above_floor) return AgentAction{Intent::accept, std::nullopt, std::nullopt};
  return AgentAction{Intent::reject, top.alloc, std::nullopt};
}

// True when `action` makes the same decision the menu would make under
// `posterior`.
inline bool menu_recommendation_alignment(const AgentAction& action, const Posterior& posterior,
                                          const std::optional<Allocation>& pending_offer,
                                          const Ordering& self_ordering, const PlannerConfig& config,
                                          const IssueDomain& domain) {
  return action.same_decision(decide(pending_offer, posterior, self_ordering, config, domain));
}

struct ConsistencyCheck {
  bool strict = false;
  bool loose = false;
};

// strict: offer equals the top lambda=1 split under a one-hot belief on
// map_ranking. loose: the opponent's counts, read from map_ranking's top
// issue down, never increase and drop at least once.
inline ConsistencyCheck baseline_consistency(const Allocation& offer, const Ordering& map_ranking,
                                             const Ordering& self_ordering, const IssueDomain& domain) {
  offer.validate(domain);
  PlannerConfig unit;
  unit.lambda = 1.0;
  const auto menu = score_menu(Posterior::one_hot(map_ranking.index()), self_ordering, unit, domain);
  ConsistencyCheck c;
  c.strict = menu.front().alloc == offer;
  std::array<int, kIssueCount> opp{};
  for (std::size_t r = 0; r < kIssueCount; ++r) opp[r] = offer.opponent_count(map_ranking.at_rank(r), domain);
  bool strict_drop = false;
  bool monotone = true;
  for (std::size_t r = 0; r + 1 < kIssueCount; ++r) {
    if (opp[r] < opp[r + 1]) monotone = false;
    if (opp[r] > opp[r + 1]) strict_drop = true;
  }
  c.loose = monotone && strict_drop;
  return c;
}

}  // namespace negobelief
