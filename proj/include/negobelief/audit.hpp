#pragma once

#include <array>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "negobelief/agent.hpp"
#include "negobelief/planner.hpp"
#include "negobelief/replay.hpp"

namespace negobelief {

// A decision turn: the human made a formal accept/reject/bid, either side
// produced a structured bid, or an opponent offer was pending.
inline bool is_audit_turn(const TurnRecord& r) {
  return r.human_decision.has_value() || r.human_bid.has_value() || r.pending_offer.has_value() ||
         r.action.content.has_value() || r.action.intent == Intent::accept || r.action.intent == Intent::reject ||
         r.action.intent == Intent::walkaway;
}

inline std::vector<TurnRecord> select_audit_turns(const std::vector<TurnRecord>& records) {
  std::vector<TurnRecord> out;
  for (const auto& r : records) {
    if (is_audit_turn(r)) out.push_back(r);
  }
  return out;
}

struct AuditCell {
  bool map_correct = false;
  bool menu_aligned = false;
  std::size_t count = 0;
};

struct AuditCase {
  std::string key;
  bool map_correct = false;
  bool menu_aligned = false;
  AgentAction action;
  AgentAction menu_own;      // menu decision under the record's own posterior
  AgentAction menu_correct;  // menu decision under the true one-hot posterior
  std::string interpretation;
};

struct AuditTable {
  // cells[map_correct][menu_aligned]
  std::array<std::array<std::size_t, 2>, 2> cells{};
  std::size_t supported = 0;
  std::vector<std::string> excluded;  // keys of audit turns without a posterior
  std::vector<AuditCase> cases;

  std::size_t total() const { return cells[0][0] + cells[0][1] + cells[1][0] + cells[1][1]; }
  std::size_t cell(bool map_correct, bool menu_aligned) const { return cells[map_correct][menu_aligned]; }
};

// 2x2 belief-policy decomposition over the audit turns of `records`.
inline AuditTable decompose(const std::vector<TurnRecord>& records, const PlannerConfig& planner,
                            const IssueDomain& domain = IssueDomain::casino()) {
  AuditTable t;
  for (const auto& r : records) {
    if (!is_audit_turn(r)) continue;
    ++t.supported;
    if (!r.posterior) {
      t.excluded.push_back(r.key());
      continue;
    }
    AuditCase c;
    c.key = r.key();
    c.map_correct = map_ordering(*r.posterior).ordering == r.truth;
    c.action = r.action;
    c.menu_own = decide(r.pending_offer, *r.posterior, r.self_priorities, planner, domain);
    c.menu_correct = decide(r.pending_offer, Posterior::one_hot(r.truth.index()), r.self_priorities, planner, domain);
    c.menu_aligned = r.action.same_decision(c.menu_own);
    if (c.map_correct) {
      c.interpretation = c.menu_aligned ? "belief correct; action follows the menu"
                                        : "belief correct; action departs from the menu (policy error)";
    } else if (c.menu_aligned) {
      c.interpretation = c.menu_own.same_decision(c.menu_correct)
                             ? "belief wrong; action follows the menu, which the error did not change"
                             : "belief wrong; action follows the menu the error changed (belief error)";
    } else {
      c.interpretation = "belief wrong; action departs from the menu";
    }
    ++t.cells[c.map_correct][c.menu_aligned];
    t.cases.push_back(std::move(c));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Posterior-prefix interventions

enum class PrefixMode { none, correct, adversarial };

inline std::string_view to_string(PrefixMode m) {
  switch (m) {
    case PrefixMode::none: return "none";
    case PrefixMode::correct: return "correct";
    case PrefixMode::adversarial: return "adversarial";
  }
  return "none";
}

// Correct: one-hot on the truth. Adversarial: one-hot on the ordering with
// the largest Kendall-tau distance from the truth, i.e. its reversal.
inline Posterior injected_posterior(PrefixMode mode, const Ordering& truth) {
  switch (mode) {
    case PrefixMode::correct: return Posterior::one_hot(truth.index());
    case PrefixMode::adversarial: return Posterior::one_hot(truth.reversed().index());
    case PrefixMode::none: break;
  }
  throw ValidationError("prefix mode none has no injected posterior");
}

struct InterventionResult {
  std::string key;
  PrefixMode mode = PrefixMode::none;
  std::optional<Posterior> injected;
  AgentAction baseline_action;
  AgentAction injected_action;
  bool changed = false;
  // +1 the injection made the action agree with the human decision, -1 it
  // broke agreement, 0 otherwise or when no human decision exists.
  int human_agreement_delta = 0;
};

inline int agreement_delta(const AgentAction& baseline, const AgentAction& injected,
                           const std::optional<Decision>& human) {
  if (!human) return 0;
  const bool human_accepts = *human == Decision::accept;
  const bool before = (baseline.intent == Intent::accept) == human_accepts;
  const bool after = (injected.intent == Intent::accept) == human_accepts;
  return static_cast<int>(after) - static_cast<int>(before);
}

// Runs one turn with the injected posterior in place of the agent's own.
inline InterventionResult intervene(const Agent& agent, const TurnInput& input, const Ordering& truth, PrefixMode mode,
                                    const std::optional<Decision>& human_decision = std::nullopt) {
  InterventionResult r;
  r.key = input.context.cache_key();
  r.mode = mode;
  const AgentOutput base = agent.act(input);
  r.baseline_action = base.action;
  if (mode == PrefixMode::none) {
    r.injected_action = base.action;
  } else {
    if (!agent.supports_posterior_prefix()) {
      throw CapabilityError("agent '" + agent.name() + "' does not support posterior prefixes");
    }
    r.injected = injected_posterior(mode, truth);
    r.injected_action = agent.act_with_posterior(input, *r.injected).action;
  }
  r.changed = !r.baseline_action.same_decision(r.injected_action);
  r.human_agreement_delta = agreement_delta(r.baseline_action, r.injected_action, human_decision);
  return r;
}

// Records produced under a posterior prefix: the posterior field holds the
// injected belief and the action is the agent's response to it.
inline std::vector<TurnRecord> replay_with_prefix(const std::vector<DialogueRecord>& corpus, const Agent& agent,
                                                  const std::string& perspective, PrefixMode mode,
                                                  const ReplayConfig& config = {}) {
  if (mode == PrefixMode::none) return replay_protocol3(corpus, agent, perspective, config);
  if (!agent.supports_posterior_prefix()) {
    throw CapabilityError("agent '" + agent.name() + "' does not support posterior prefixes");
  }
  return replay_protocol3(corpus, agent, perspective, config,
                          [mode](const Agent& a, const TurnInput& in, const Ordering& truth) {
                            return a.act_with_posterior(in, injected_posterior(mode, truth));
                          });
}

// Pairs a baseline replay with a prefix replay of the same turns.
inline std::vector<InterventionResult> interventions_from_records(const std::vector<TurnRecord>& baseline,
                                                                  const std::vector<TurnRecord>& injected,
                                                                  PrefixMode mode) {
  if (baseline.size() != injected.size()) throw ValidationError("baseline and injected runs cover different turns");
  std::vector<InterventionResult> out;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (baseline[i].key() != injected[i].key()) throw ValidationError("baseline and injected runs cover different turns");
    InterventionResult r;
    r.key = baseline[i].key();
    r.mode = mode;
    r.injected = injected[i].posterior;
    r.baseline_action = baseline[i].action;
    r.injected_action = injected[i].action;
    r.changed = !r.baseline_action.same_decision(r.injected_action);
    r.human_agreement_delta = agreement_delta(r.baseline_action, r.injected_action, baseline[i].human_decision);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<InterventionResult> intervene_corpus(const std::vector<DialogueRecord>& corpus, const Agent& agent,
                                                        const std::string& perspective, PrefixMode mode,
                                                        const ReplayConfig& config = {}) {
  const auto baseline = replay_protocol3(corpus, agent, perspective, config);
  const auto injected = replay_with_prefix(corpus, agent, perspective, mode, config);
  return interventions_from_records(baseline, injected, mode);
}

struct CouplingReport {
  double change_rate_correct = 0.0;
  double change_rate_adversarial = 0.0;
  std::size_t turns = 0;
  std::size_t improved = 0;  // correct-prefix agreement deltas of +1
  std::size_t worsened = 0;  // and of -1
};

inline CouplingReport coupling_report(const std::vector<InterventionResult>& correct,
                                      const std::vector<InterventionResult>& adversarial) {
  if (correct.size() != adversarial.size()) throw ValidationError("intervention runs cover different turn sets");
  std::set<std::string> a, b;
  for (const auto& r : correct) a.insert(r.key);
  for (const auto& r : adversarial) b.insert(r.key);
  if (a != b) throw ValidationError("intervention runs cover different turn sets");
  CouplingReport rep;
  rep.turns = correct.size();
  if (rep.turns == 0) return rep;
  std::size_t cc = 0, ca = 0;
  for (const auto& r : correct) {
    cc += r.changed ? 1 : 0;
    if (r.human_agreement_delta > 0) ++rep.improved;
    if (r.human_agreement_delta < 0) ++rep.worsened;
  }
  for (const auto& r : adversarial) ca += r.changed ? 1 : 0;
  rep.change_rate_correct = static_cast<double>(cc) / static_cast<double>(rep.turns);
  rep.change_rate_adversarial = static_cast<double>(ca) / static_cast<double>(rep.turns);
  return rep;
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryRow {
  std::size_t turn_index = 0;
  Posterior posterior;
  std::size_t map_index = 0;
  std::size_t truth_index = 0;
};

using Trajectories = std::map<std::string, std::vector<TrajectoryRow>>;

inline Trajectories export_trajectories(const std::vector<TurnRecord>& records,
                                        const std::vector<std::string>& dialogue_ids) {
  std::map<std::string, std::vector<TrajectoryRow>> all;
  for (const auto& r : records) {
    auto& rows = all[r.dialogue_id];
    if (!r.posterior) continue;
    rows.push_back({r.turn_index, *r.posterior, map_ordering(*r.posterior).ordering.index(), r.truth.index()});
  }
  Trajectories out;
  for (const auto& id : dialogue_ids) {
    auto it = all.find(id);
    if (it == all.end()) {
      std::string avail;
      for (const auto& [k, _] : all) avail += (avail.empty() ? "" : ", ") + k;
      throw ValidationError("unknown dialogue id '" + id + "'; available: " + avail);
    }
    out[id] = it->second;
  }
  return out;
}

// Tab-separated: dialogue_id, turn_index, six probabilities (canonical
// order), map index, truth index.
inline void write_trajectories(std::ostream& out, const Trajectories& t, const IssueDomain& domain) {
  out << "dialogue_id\tturn_index";
  for (const auto& label : ordering_labels(domain)) out << '\t' << label;
  out << "\tmap\ttruth\n";
  out << std::setprecision(17);
  for (const auto& [id, rows] : t) {
    for (const auto& r : rows) {
      out << id << '\t' << r.turn_index;
      for (double p : r.posterior.probs()) out << '\t' << p;
      out << '\t' << r.map_index << '\t' << r.truth_index << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Audit report

inline nlohmann::json action_json(const AgentAction& a) {
  return nlohmann::json{{"intent", std::string(to_string(a.intent))},
                        {"content", a.content ? nlohmann::json(a.content->self_counts) : nlohmann::json(nullptr)}};
}

inline nlohmann::json audit_report_json(const AuditTable& table, const std::optional<CouplingReport>& coupling = {}) {
  nlohmann::json j;
  j["supported_turns"] = table.supported;
  j["cells"] = {{"map_correct_aligned", table.cell(true, true)},
                {"map_correct_misaligned", table.cell(true, false)},
                {"map_wrong_aligned", table.cell(false, true)},
                {"map_wrong_misaligned", table.cell(false, false)}};
  const std::size_t scored = table.total();
  j["alignment_rate"] =
      scored ? nlohmann::json(static_cast<double>(table.cell(true, true) + table.cell(false, true)) /
                              static_cast<double>(scored))
             : nlohmann::json(nullptr);
  j["excluded_missing_posterior"] = table.excluded;
  if (coupling) {
    j["coupling"] = {{"turns", coupling->turns},
                     {"change_rate_correct", coupling->change_rate_correct},
                     {"change_rate_adversarial", coupling->change_rate_adversarial},
                     {"agreement_improved", coupling->improved},
                     {"agreement_worsened", coupling->worsened}};
  }
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : table.cases) {
    cases.push_back({{"key", c.key},
                     {"belief", c.map_correct ? "correct" : "wrong"},
                     {"menu_aligned", c.menu_aligned},
                     {"action", action_json(c.action)},
                     {"menu_own_posterior", action_json(c.menu_own)},
                     {"menu_correct_posterior", action_json(c.menu_correct)},
                     {"interpretation", c.interpretation}});
  }
  j["cases"] = cases;
  return j;
}

}  // namespace negobelief
