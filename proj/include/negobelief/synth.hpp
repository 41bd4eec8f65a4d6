#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "negobelief/corpus.hpp"
#include "negobelief/domain.hpp"
#include "negobelief/planner.hpp"

namespace negobelief {

inline constexpr const char* kAgentOne = "mturk_agent_1";
inline constexpr const char* kAgentTwo = "mturk_agent_2";

// Seeded helpers that do not depend on <random> distribution internals, so
// synthetic corpora are identical across standard libraries.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

namespace synth_detail {

inline std::string cap(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string need_sentence(const std::string& issue, SplitRng& rng) {
  static const std::vector<std::string> t = {"I really need more {}.", "{} is really important to me.",
                                            "We are running low on {}.", "My family will need extra {}."};
  std::string s = t[rng.below(t.size())];
  const std::string w = detail::lower(issue);
  s.replace(s.find("{}"), 2, w);
  return cap(s);
}

inline std::string no_need_sentence(const std::string& issue, SplitRng& rng) {
  static const std::vector<std::string> t = {"We have plenty of {} already.", "I don't really need {}.",
                                            "{} is not that important for us.", "We brought extra {} on this trip."};
  std::string s = t[rng.below(t.size())];
  const std::string w = detail::lower(issue);
  s.replace(s.find("{}"), 2, w);
  return cap(s);
}

inline std::string small_talk(SplitRng& rng) {
  static const std::vector<std::string> t = {"Hello! How are you doing today?", "Sounds good, let's work this out.",
                                            "I hope you enjoy your camping trip.", "Thanks for being so reasonable."};
  return t[rng.below(t.size())];
}

inline IntegrativePotential potential(const Ordering& a, const Ordering& b) {
  const int d = kendall_tau_distance(a, b);
  if (d <= 1) return IntegrativePotential::low;
  if (d == 2) return IntegrativePotential::mid;
  return IntegrativePotential::high;
}

}  // namespace synth_detail

// Scripted dialogue between mturk_agent_1 (the evaluated side) and
// mturk_agent_2, whose priorities are `truth`. Agent 2 speaks on even turns;
// each of its turns voices a need for one issue and indifference to another,
// agreeing with `truth` (need top, no need bottom) with probability
// cue_strength per cue and contradicting it otherwise. The dialogue closes
// with a structured bid from agent 1, a structured offer from agent 2 and
// agent 1's accept or reject decision. `length` is rounded up to an even
// number of at least 4.
inline DialogueRecord synthesize_dialogue(const Ordering& truth, double cue_strength, std::size_t length,
                                          std::uint64_t seed, const IssueDomain& domain = IssueDomain::casino(),
                                          const std::string& dialogue_id = "") {
  using namespace synth_detail;
  if (!(cue_strength >= 0.0 && cue_strength <= 1.0)) throw ValidationError("cue_strength must lie in [0, 1]");
  SplitRng rng(seed);
  if (length < 4) length = 4;
  if (length % 2) ++length;

  DialogueRecord r;
  r.dialogue_id = dialogue_id.empty() ? "synth-" + std::to_string(seed) : dialogue_id;
  const Ordering own = Ordering::from_index(rng.below(kOrderingCount));
  r.participants[0] = Participant{kAgentOne, own, std::nullopt, rng.chance(0.5) ? SvoLabel::proself : SvoLabel::prosocial};
  r.participants[1] = Participant{kAgentTwo, truth, std::nullopt, rng.chance(0.5) ? SvoLabel::proself : SvoLabel::prosocial};
  r.integrative_potential = potential(own, truth);

  const IssueId top = truth.at_rank(0);
  const IssueId bottom = truth.at_rank(kIssueCount - 1);
  const int n = domain.packages_per_issue;

  for (std::size_t t = 0; t + 2 < length; ++t) {
    DialogueTurn turn;
    if (t % 2 == 0) {
      turn.speaker = kAgentTwo;
      const bool need_ok = rng.chance(cue_strength);
      const bool no_need_ok = rng.chance(cue_strength);
      turn.utterance = need_sentence(domain.name(need_ok ? top : bottom), rng) + " " +
                       no_need_sentence(domain.name(no_need_ok ? bottom : top), rng);
      turn.strategy_labels = {"self-need", "no-need"};
    } else {
      turn.speaker = kAgentOne;
      if (t + 3 == length) {
        // agent 1's own bid: all of its top issue, most of the middle one
        Allocation bid;
        bid.self_counts[own.at_rank(0)] = n;
        bid.self_counts[own.at_rank(1)] = std::max(0, n - 1 - static_cast<int>(rng.below(2)));
        bid.self_counts[own.at_rank(2)] = static_cast<int>(rng.below(2));
        turn.offer = bid;
        turn.utterance = "How about this split?";
        turn.strategy_labels = {"non-strategic"};
      } else {
        turn.utterance = small_talk(rng);
        turn.strategy_labels = {"small-talk"};
      }
    }
    r.turns.push_back(std::move(turn));
  }

  // agent 2's closing offer (its own share)
  Allocation offer;
  offer.self_counts[top] = n - static_cast<int>(rng.below(2));
  offer.self_counts[truth.at_rank(1)] = static_cast<int>(rng.below(static_cast<std::size_t>(n) + 1));
  offer.self_counts[bottom] = static_cast<int>(rng.below(2));
  r.turns.push_back(DialogueTurn{kAgentTwo, "Here is my final offer.", {"non-strategic"}, offer, std::nullopt});

  const Allocation agent_one_share = offer.mirrored(domain);
  const int one_points = utility(agent_one_share, own, Side::self, domain);
  const bool accept = 2 * one_points >= domain.max_points();
  r.turns.push_back(DialogueTurn{kAgentOne, accept ? "Deal." : "No, that does not work for me.", {"non-strategic"},
                                 std::nullopt, accept ? Decision::accept : Decision::reject});
  if (accept) {
    r.outcome = Outcome{agent_one_share, {one_points, utility(offer, truth, Side::self, domain)}};
  }
  return r;
}

struct SynthOptions {
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  IssueDomain domain = IssueDomain::casino();
};

// `count` dialogues with seeded truths and lengths; ids synth-<seed>-<i>.
inline std::vector<DialogueRecord> synthesize_corpus(std::size_t count, double cue_strength, std::uint64_t seed,
                                                     const SynthOptions& options = {}) {
  SplitRng rng(seed);
  std::vector<DialogueRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Ordering truth = Ordering::from_index(rng.below(kOrderingCount));
    const std::size_t span = options.max_length >= options.min_length ? options.max_length - options.min_length + 1 : 1;
    const std::size_t length = options.min_length + rng.below(span);
    out.push_back(synthesize_dialogue(truth, cue_strength, length, rng.next(), options.domain,
                                      "synth-" + std::to_string(seed) + "-" + std::to_string(i)));
  }
  return out;
}

}  // namespace negobelief
