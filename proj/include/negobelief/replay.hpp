#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "negobelief/agent.hpp"
#include "negobelief/corpus.hpp"

namespace negobelief {

struct TurnRecord {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  std::string perspective;
  std::optional<Posterior> posterior;
  AgentAction action;
  std::optional<Allocation> pending_offer;
  Ordering truth;
  Ordering self_priorities;
  std::optional<Decision> human_decision;
  std::optional<Allocation> human_bid;
  bool accept_eligible = false;
  bool native_bid = false;
  std::optional<std::vector<std::string>> strategy_labels_pred;
  std::optional<std::vector<std::string>> strategy_labels_gold;
  std::vector<std::string> errors;

  std::string key() const { return dialogue_id + ":" + std::to_string(turn_index) + ":" + perspective; }
};

// Self's share under the opponent's outstanding offer before `turn_index`:
// the latest structured offer, if the opponent made it and no decision
// followed it.
inline std::optional<Allocation> pending_offer_at(const DialogueRecord& d, std::size_t turn_index,
                                                  const std::string& perspective, const IssueDomain& domain) {
  for (std::size_t t = std::min(turn_index, d.turns.size()); t-- > 0;) {
    const auto& turn = d.turns[t];
    if (turn.decision) return std::nullopt;
    if (turn.offer) {
      if (turn.speaker == perspective) return std::nullopt;
      return turn.offer->mirrored(domain);
    }
  }
  return std::nullopt;
}

struct ReplayConfig {
  IssueDomain domain = IssueDomain::casino();
  unsigned threads = 1;
};

// How one turn is evaluated; the default asks the agent for its own
// posterior and action.
using TurnRunner = std::function<AgentOutput(const Agent&, const TurnInput&, const Ordering& truth)>;

inline AgentOutput run_native(const Agent& agent, const TurnInput& input, const Ordering&) { return agent.act(input); }

namespace replay_detail {

inline std::vector<TurnRecord> replay_dialogue(const DialogueRecord& d, const Agent& agent,
                                               const std::string& perspective, const ReplayConfig& config,
                                               const TurnRunner& runner) {
  std::vector<TurnRecord> out;
  const auto self_idx = d.participant_index(perspective);
  if (!self_idx) return out;
  const Participant& self = d.participants[*self_idx];
  const Participant& other = d.participants[1 - *self_idx];
  for (std::size_t t = 0; t < d.turns.size(); ++t) {
    const auto& turn = d.turns[t];
    if (turn.speaker != perspective) continue;
    TurnRecord rec;
    rec.dialogue_id = d.dialogue_id;
    rec.turn_index = t;
    rec.perspective = perspective;
    rec.truth = other.priorities;
    rec.self_priorities = self.priorities;
    rec.pending_offer = pending_offer_at(d, t, perspective, config.domain);
    if (turn.decision == Decision::accept || turn.decision == Decision::reject) rec.human_decision = turn.decision;
    rec.human_bid = turn.offer;
    rec.accept_eligible = rec.pending_offer.has_value() && rec.human_decision.has_value();
    if (!turn.strategy_labels.empty()) rec.strategy_labels_gold = turn.strategy_labels;

    TurnInput input{d.context(t, perspective), self.priorities, rec.pending_offer, config.domain};
    try {
      AgentOutput o = runner(agent, input, rec.truth);
      rec.posterior = o.posterior;
      rec.action = o.action;
      rec.native_bid = o.native_bid;
      for (const auto& diag : o.diagnostics) {
        if (diag.kind == DiagnosticKind::error) rec.errors.push_back(diag.tag + ": " + diag.reason);
      }
    } catch (const std::exception& e) {
      rec.errors.push_back(std::string("agent failure: ") + e.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace replay_detail

// Turn-level replay: every turn spoken by `perspective` becomes one record,
// the agent seeing the history before that turn. Output order is corpus
// order then turn order, independent of the worker count.
inline std::vector<TurnRecord> replay_protocol3(const std::vector<DialogueRecord>& corpus, const Agent& agent,
                                                const std::string& perspective, const ReplayConfig& config = {},
                                                const TurnRunner& runner = run_native) {
  std::vector<std::vector<TurnRecord>> per_dialogue(corpus.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(corpus.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      per_dialogue[i] = replay_detail::replay_dialogue(corpus[i], agent, perspective, config, runner);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < corpus.size(); i = next++) {
          per_dialogue[i] = replay_detail::replay_dialogue(corpus[i], agent, perspective, config, runner);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  std::vector<TurnRecord> out;
  for (auto& v : per_dialogue) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TurnRecord log: one JSON object per line.

namespace record_json {

using nlohmann::json;

inline json opt_alloc(const std::optional<Allocation>& a) {
  return a ? json(a->self_counts) : json(nullptr);
}

inline std::optional<Allocation> read_alloc(const json& j) {
  if (j.is_null()) return std::nullopt;
  Allocation a;
  a.self_counts = j.get<std::array<int, kIssueCount>>();
  return a;
}

inline json to_json(const TurnRecord& r) {
  json j;
  j["dialogue_id"] = r.dialogue_id;
  j["turn_index"] = r.turn_index;
  j["perspective"] = r.perspective;
  j["posterior"] = r.posterior ? json(r.posterior->probs()) : json(nullptr);
  j["intent"] = std::string(to_string(r.action.intent));
  j["content"] = opt_alloc(r.action.content);
  j["utterance"] = r.action.utterance ? json(*r.action.utterance) : json(nullptr);
  j["pending_offer"] = opt_alloc(r.pending_offer);
  j["truth"] = r.truth.index();
  j["self_priorities"] = r.self_priorities.index();
  j["human_decision"] = r.human_decision ? json(std::string(to_string(*r.human_decision))) : json(nullptr);
  j["human_bid"] = opt_alloc(r.human_bid);
  j["accept_eligible"] = r.accept_eligible;
  j["native_bid"] = r.native_bid;
  j["strategy_pred"] = r.strategy_labels_pred ? json(*r.strategy_labels_pred) : json(nullptr);
  j["strategy_gold"] = r.strategy_labels_gold ? json(*r.strategy_labels_gold) : json(nullptr);
  j["errors"] = r.errors;
  return j;
}

inline TurnRecord from_json(const json& j) {
  TurnRecord r;
  r.dialogue_id = j.at("dialogue_id").get<std::string>();
  r.turn_index = j.at("turn_index").get<std::size_t>();
  r.perspective = j.at("perspective").get<std::string>();
  if (!j.at("posterior").is_null()) r.posterior = Posterior::from_probs(j["posterior"].get<Posterior::Array>());
  auto intent = parse_intent(j.at("intent").get<std::string>());
  if (!intent) throw ValidationError("unknown intent in record log");
  r.action.intent = *intent;
  r.action.content = read_alloc(j.at("content"));
  if (j.contains("utterance") && !j["utterance"].is_null()) r.action.utterance = j["utterance"].get<std::string>();
  r.pending_offer = read_alloc(j.at("pending_offer"));
  r.truth = Ordering::from_index(j.at("truth").get<std::size_t>());
  r.self_priorities = Ordering::from_index(j.at("self_priorities").get<std::size_t>());
  if (!j.at("human_decision").is_null()) r.human_decision = parse_decision(j["human_decision"].get<std::string>());
  r.human_bid = read_alloc(j.at("human_bid"));
  r.accept_eligible = j.at("accept_eligible").get<bool>();
  r.native_bid = j.value("native_bid", false);
  if (j.contains("strategy_pred") && !j["strategy_pred"].is_null())
    r.strategy_labels_pred = j["strategy_pred"].get<std::vector<std::string>>();
  if (j.contains("strategy_gold") && !j["strategy_gold"].is_null())
    r.strategy_labels_gold = j["strategy_gold"].get<std::vector<std::string>>();
  if (j.contains("errors")) r.errors = j["errors"].get<std::vector<std::string>>();
  return r;
}

}  // namespace record_json

inline void write_records(std::ostream& out, const std::vector<TurnRecord>& records) {
  for (const auto& r : records) out << record_json::to_json(r).dump() << '\n';
}

inline std::vector<TurnRecord> read_records(std::istream& in) {
  std::vector<TurnRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_json::from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ValidationError("record log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TurnRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open record log " + path);
  return read_records(in);
}

}  // namespace negobelief
