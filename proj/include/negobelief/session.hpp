#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "negobelief/audit.hpp"
#include "negobelief/planner.hpp"
#include "negobelief/providers.hpp"
#include "negobelief/synth.hpp"
#include "negobelief/tagged.hpp"

namespace negobelief {

enum class Phase { open, pending_offer, closed_accepted, closed_walkaway };

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::open: return "open";
    case Phase::pending_offer: return "pending_offer";
    case Phase::closed_accepted: return "closed(accepted)";
    case Phase::closed_walkaway: return "closed(walkaway)";
  }
  return "open";
}

inline bool is_closed(Phase p) { return p == Phase::closed_accepted || p == Phase::closed_walkaway; }

enum class EventKind { utter, offer, accept, reject, walkaway };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::utter: return "utter";
    case EventKind::offer: return "offer";
    case EventKind::accept: return "accept";
    case EventKind::reject: return "reject";
    case EventKind::walkaway: return "walkaway";
  }
  return "utter";
}

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (EventKind k : {EventKind::utter, EventKind::offer, EventKind::accept, EventKind::reject, EventKind::walkaway}) {
    if (detail::iequals(s, to_string(k))) return k;
  }
  return std::nullopt;
}

// One human move. `offer` is the human's own share; `text` is optional
// free text accompanying any event.
struct HumanEvent {
  EventKind kind = EventKind::utter;
  std::string text;
  std::optional<Allocation> offer;

  static HumanEvent utter(std::string t) { return {EventKind::utter, std::move(t), std::nullopt}; }
  static HumanEvent make_offer(Allocation a, std::string t = {}) { return {EventKind::offer, std::move(t), a}; }
  static HumanEvent accept() { return {EventKind::accept, {}, std::nullopt}; }
  static HumanEvent reject(std::string t = {}) { return {EventKind::reject, std::move(t), std::nullopt}; }
  static HumanEvent walkaway() { return {EventKind::walkaway, {}, std::nullopt}; }

  friend bool operator==(const HumanEvent&, const HumanEvent&) = default;
};

struct SessionConfig {
  std::string session_id = "session";
  IssueDomain domain = IssueDomain::casino();
  Ordering agent_priorities;
  // Only the scorer reads this; the agent path never sees it.
  std::optional<Ordering> human_priorities;
  PlannerConfig planner;
  BeliefConfig belief;
  double retention = 1.0;
  std::uint64_t seed = 0;
  // Defaults to the rule provider over the generic lexicon.
  std::shared_ptr<const LikelihoodProvider> provider;

  void validate() const {
    domain.validate();
    planner.validate();
    belief.validate();
    if (!(retention >= 0.0 && retention <= 1.0)) throw ValidationError("retention must lie in [0, 1]");
    if (session_id.empty()) throw ValidationError("session_id must be nonempty");
  }
};

// Append-only log entry: the human event, the belief the agent acted on and
// the agent's reply (absent after terminal events).
struct SessionStep {
  HumanEvent event;
  Posterior belief;
  std::optional<AgentAction> reply;
  Phase phase_after = Phase::open;
};

struct Session {
  SessionConfig config;
  std::string provider_tag;
  Posterior belief;
  Phase phase = Phase::open;
  std::vector<ContextTurn> history;  // self = agent, opponent = human
  std::vector<SessionStep> log;
  // Agent's own share under its standing offer.
  std::optional<Allocation> agent_offer;
  std::optional<Allocation> final_allocation;  // agent's share once accepted
  std::shared_ptr<const BeliefTracker> tracker;
  SplitRng rng{0};

  std::size_t version() const noexcept { return log.size(); }
};

namespace session_detail {

inline std::shared_ptr<const LikelihoodProvider> default_provider(const IssueDomain& domain) {
  return std::make_shared<RuleProvider>(CueLexicon::generic(domain), domain);
}

inline std::string agent_utterance(const AgentAction& a, const IssueDomain& domain, SplitRng& rng) {
  static const std::array<const char*, 3> submit = {"How about this split: I take ", "I would propose I take ",
                                                    "Could we settle on me taking "};
  static const std::array<const char*, 2> accept = {"That works for me, deal.", "Sounds fair, I accept."};
  static const std::array<const char*, 2> reject = {"I can't do that one. Instead I'd take ",
                                                    "That doesn't work for me. What if I take "};
  auto share = [&](const Allocation& x) {
    std::string s;
    for (IssueId i = 0; i < kIssueCount; ++i) {
      s += (i ? (i + 1 == kIssueCount ? " and " : ", ") : "") + std::to_string(x.self_counts[i]) + " " +
           detail::lower(domain.name(i));
    }
    return s + ".";
  };
  switch (a.intent) {
    case Intent::submit: return submit[rng.below(submit.size())] + share(*a.content);
    case Intent::accept: return accept[rng.below(accept.size())];
    case Intent::reject: return reject[rng.below(reject.size())] + share(*a.content);
    case Intent::walkaway: return "I'm going to walk away.";
    case Intent::utter: break;
  }
  return "Let's keep talking.";
}

inline DialogueContext context_of(const Session& s) {
  return DialogueContext{s.config.session_id, "agent", s.history.size(), s.history};
}

inline void legal_or_throw(const Session& s, EventKind kind) {
  if (is_closed(s.phase)) {
    throw ProtocolError("event '" + std::string(to_string(kind)) + "' is illegal in phase " +
                        std::string(to_string(s.phase)));
  }
  if ((kind == EventKind::accept || kind == EventKind::reject) && s.phase != Phase::pending_offer) {
    throw ProtocolError("event '" + std::string(to_string(kind)) + "' needs a pending agent offer; phase is " +
                        std::string(to_string(s.phase)));
  }
}

}  // namespace session_detail

inline Session create_session(SessionConfig config) {
  if (!config.provider) config.provider = session_detail::default_provider(config.domain);
  config.validate();
  Session s;
  s.tracker = std::make_shared<const BeliefTracker>(config.provider, config.belief, config.retention);
  s.provider_tag = config.provider->tag();
  s.belief = config.belief.prior;
  s.rng = SplitRng(config.seed);
  s.config = std::move(config);
  return s;
}

// Applies one human event and returns the agent's reply (none after accept
// or walkaway). The session is unchanged when this throws.
inline std::optional<AgentAction> human_event(Session& s, const HumanEvent& ev) {
  session_detail::legal_or_throw(s, ev.kind);
  const IssueDomain& domain = s.config.domain;
  if (ev.offer) {
    if (ev.kind != EventKind::offer) throw ValidationError("only offer events carry an allocation");
    ev.offer->validate(domain);
  } else if (ev.kind == EventKind::offer) {
    throw ValidationError("offer event needs an allocation");
  }

  Session next = s;
  if (ev.kind == EventKind::walkaway) {
    next.history.push_back({Speaker::opponent, ev.text.empty() ? "I'm walking away." : ev.text, std::nullopt});
    next.phase = Phase::closed_walkaway;
    next.agent_offer.reset();
    next.log.push_back({ev, next.belief, std::nullopt, next.phase});
    s = std::move(next);
    return std::nullopt;
  }
  if (ev.kind == EventKind::accept) {
    next.history.push_back({Speaker::opponent, ev.text.empty() ? "Deal." : ev.text, std::nullopt});
    next.phase = Phase::closed_accepted;
    next.final_allocation = next.agent_offer;
    next.log.push_back({ev, next.belief, std::nullopt, next.phase});
    s = std::move(next);
    return std::nullopt;
  }

  std::string text = ev.text;
  if (text.empty() && ev.kind == EventKind::offer) text = "I propose I take " + ev.offer->to_string() + ".";
  if (text.empty() && ev.kind == EventKind::reject) text = "No, that doesn't work for me.";
  next.history.push_back({Speaker::opponent, text, ev.offer});

  next.belief = next.tracker->posterior(session_detail::context_of(next));
  std::optional<Allocation> pending;
  if (ev.kind == EventKind::offer) pending = ev.offer->mirrored(domain);
  AgentAction reply = decide(pending, next.belief, next.config.agent_priorities, next.config.planner, domain);
  reply.utterance = session_detail::agent_utterance(reply, domain, next.rng);
  next.history.push_back({Speaker::self, *reply.utterance, reply.content});

  if (reply.intent == Intent::accept) {
    next.phase = Phase::closed_accepted;
    next.agent_offer.reset();
    next.final_allocation = pending;
  } else {
    next.phase = Phase::pending_offer;
    next.agent_offer = reply.content;
  }
  next.log.push_back({ev, next.belief, reply, next.phase});
  s = std::move(next);
  return reply;
}

// Rebuilds a session from its config and event log.
inline Session replay_session(const SessionConfig& config, const std::vector<HumanEvent>& events) {
  Session s = create_session(config);
  for (const auto& e : events) human_event(s, e);
  return s;
}

struct Hypothetical {
  std::optional<Posterior> posterior;
  std::optional<double> lambda;
  // Human's own share under a hypothetical human offer.
  std::optional<Allocation> offer;
};

struct WhatIfPreview {
  std::vector<MenuEntry> menu;
  AgentAction action;
};

// Menu and decision under a hypothetical, leaving the session untouched.
// Without a hypothetical offer the preview is what the agent would submit
// next.
inline WhatIfPreview whatif(const Session& s, const Hypothetical& h, std::size_t top_k = 64) {
  if (is_closed(s.phase)) throw ProtocolError("whatif is illegal in phase " + std::string(to_string(s.phase)));
  PlannerConfig planner = s.config.planner;
  if (h.lambda) planner.lambda = *h.lambda;
  planner.validate();
  const Posterior& p = h.posterior ? *h.posterior : s.belief;
  std::optional<Allocation> pending;
  if (h.offer) {
    h.offer->validate(s.config.domain);
    pending = h.offer->mirrored(s.config.domain);
  }
  WhatIfPreview out;
  out.menu = score_menu(p, s.config.agent_priorities, planner, s.config.domain);
  if (out.menu.size() > top_k) out.menu.resize(top_k);
  out.action = decide(pending, p, s.config.agent_priorities, planner, s.config.domain);
  return out;
}

struct SessionScore {
  bool deal = false;
  std::optional<Allocation> agent_share;
  std::optional<int> agent_points;
  std::optional<int> human_points;  // needs the human's priorities
  std::optional<int> joint_points;
};

inline SessionScore score_session(const Session& s) {
  if (!is_closed(s.phase)) throw ProtocolError("score_session needs a closed session; phase is " +
                                               std::string(to_string(s.phase)));
  SessionScore sc;
  if (s.phase == Phase::closed_walkaway || !s.final_allocation) return sc;
  const IssueDomain& d = s.config.domain;
  sc.deal = true;
  sc.agent_share = s.final_allocation;
  sc.agent_points = utility(*s.final_allocation, s.config.agent_priorities, Side::self, d);
  if (s.config.human_priorities) {
    sc.human_points = utility(*s.final_allocation, *s.config.human_priorities, Side::opponent, d);
    sc.joint_points = *sc.agent_points + *sc.human_points;
  }
  return sc;
}

// Belief after each event, starting from the prior.
inline std::vector<Posterior> session_trajectory(const Session& s) {
  std::vector<Posterior> out{s.config.belief.prior};
  for (const auto& step : s.log) out.push_back(step.belief);
  return out;
}

// ---------------------------------------------------------------------------
// JSON payloads

namespace session_json {

using nlohmann::json;

inline json belief(const Posterior& p, const IssueDomain& d) {
  json labeled = json::object();
  for (std::size_t i = 0; i < kOrderingCount; ++i) labeled[Ordering::from_index(i).label(d)] = p[i];
  return labeled;
}

inline json allocation(const std::optional<Allocation>& a, const IssueDomain& d) {
  return a ? corpus_json::allocation_to_json(*a, d) : json(nullptr);
}

inline json action(const std::optional<AgentAction>& a, const IssueDomain& d) {
  if (!a) return nullptr;
  return {{"intent", std::string(to_string(a->intent))},
          {"content", allocation(a->content, d)},
          {"utterance", a->utterance ? json(*a->utterance) : json(nullptr)}};
}

inline json event(const HumanEvent& e, const IssueDomain& d) {
  json j{{"kind", std::string(to_string(e.kind))}};
  if (!e.text.empty()) j["text"] = e.text;
  if (e.offer) j["offer"] = corpus_json::allocation_to_json(*e.offer, d);
  return j;
}

inline HumanEvent event_from(const json& j, const IssueDomain& d) {
  if (!j.is_object()) throw ValidationError("event must be a JSON object");
  const auto kind = parse_event_kind(j.at("kind").get<std::string>());
  if (!kind) throw ValidationError("unknown event kind");
  HumanEvent e;
  e.kind = *kind;
  e.text = j.value("text", std::string());
  if (j.contains("offer") && !j["offer"].is_null()) e.offer = corpus_json::allocation_from_json(j["offer"], d);
  return e;
}

inline json state(const Session& s) {
  const IssueDomain& d = s.config.domain;
  json j;
  j["version"] = 1;
  j["session_id"] = s.config.session_id;
  j["revision"] = s.version();
  j["phase"] = std::string(to_string(s.phase));
  j["provider_tag"] = s.provider_tag;
  j["agent_priorities"] = s.config.agent_priorities.label(d);
  j["belief"] = belief(s.belief, d);
  j["belief_vector"] = s.belief.probs();
  j["labels"] = ordering_labels(d);
  j["map"] = map_ordering(s.belief).ordering.label(d);
  j["agent_offer"] = allocation(s.agent_offer, d);
  j["final_allocation"] = allocation(s.final_allocation, d);
  j["last_reply"] = s.log.empty() ? json(nullptr) : action(s.log.back().reply, d);
  json hist = json::array();
  for (const auto& t : s.history) {
    hist.push_back({{"speaker", t.speaker == Speaker::self ? "agent" : "human"},
                    {"utterance", t.utterance},
                    {"offer", allocation(t.offer, d)}});
  }
  j["history"] = hist;
  j["planner"] = {{"lambda", s.config.planner.lambda},
                  {"accept_margin", s.config.planner.accept_margin},
                  {"accept_floor", s.config.planner.accept_floor}};
  return j;
}

inline json log(const Session& s) {
  json arr = json::array();
  for (const auto& step : s.log) {
    arr.push_back({{"event", event(step.event, s.config.domain)},
                   {"belief", step.belief.probs()},
                   {"reply", action(step.reply, s.config.domain)},
                   {"phase", std::string(to_string(step.phase_after))}});
  }
  return arr;
}

inline json menu(const std::vector<MenuEntry>& entries, const IssueDomain& d) {
  json arr = json::array();
  for (const auto& e : entries) {
    arr.push_back({{"allocation", corpus_json::allocation_to_json(e.alloc, d)},
                   {"score", e.score},
                   {"self_utility", e.self_utility},
                   {"expected_opponent_utility", e.expected_opp_utility}});
  }
  return arr;
}

inline json score(const SessionScore& sc, const IssueDomain& d) {
  json j{{"deal", sc.deal}};
  if (!sc.deal) {
    j["outcome"] = "no_deal";
    return j;
  }
  j["outcome"] = "accepted";
  j["agent_share"] = allocation(sc.agent_share, d);
  j["agent_points"] = *sc.agent_points;
  j["human_points"] = sc.human_points ? json(*sc.human_points) : json(nullptr);
  j["joint_points"] = sc.joint_points ? json(*sc.joint_points) : json(nullptr);
  return j;
}

inline json trajectory(const Session& s) {
  json rows = json::array();
  const auto t = session_trajectory(s);
  for (std::size_t i = 0; i < t.size(); ++i) {
    rows.push_back({{"step", i}, {"belief", t[i].probs()}, {"map", map_ordering(t[i]).ordering.index()}});
  }
  return {{"labels", ordering_labels(s.config.domain)}, {"rows", rows}};
}

}  // namespace session_json

// ---------------------------------------------------------------------------
// Many sessions, one writer per session.

class SessionManager {
 public:
  // With a log directory, every applied event is appended to
  // <dir>/<session_id>.jsonl.
  explicit SessionManager(SessionConfig defaults = {}, std::optional<std::filesystem::path> log_dir = std::nullopt)
      : defaults_(std::move(defaults)), log_dir_(std::move(log_dir)) {}

  const SessionConfig& defaults() const noexcept { return defaults_; }

  std::string create(SessionConfig config) {
    std::string id;
    {
      std::lock_guard lock(map_mutex_);
      if (config.session_id.empty() || config.session_id == "session") {
        config.session_id = "s" + std::to_string(++counter_);
      }
      id = config.session_id;
      if (sessions_.count(id)) throw ValidationError("session '" + id + "' already exists");
    }
    auto entry = std::make_shared<Entry>();
    entry->session = create_session(std::move(config));
    std::lock_guard lock(map_mutex_);
    if (sessions_.count(id)) throw ValidationError("session '" + id + "' already exists");
    sessions_[id] = entry;
    return id;
  }

  std::optional<AgentAction> post(const std::string& id, const HumanEvent& ev) {
    auto e = entry(id);
    std::optional<AgentAction> reply;
    {
      std::unique_lock lock(e->mutex);
      reply = human_event(e->session, ev);
      if (log_dir_) {
        std::ofstream out(*log_dir_ / (id + ".jsonl"), std::ios::app);
        out << session_json::event(ev, e->session.config.domain).dump() << '\n';
      }
    }
    { std::lock_guard w(e->wait_mutex); }
    e->changed.notify_all();
    return reply;
  }

  // Consistent copy of the session state.
  Session snapshot(const std::string& id) const {
    auto e = entry(id);
    std::shared_lock lock(e->mutex);
    return e->session;
  }

  // Blocks until the session revision exceeds `after` or the timeout passes.
  std::optional<Session> wait_for_change(const std::string& id, std::size_t after,
                                         std::chrono::milliseconds timeout) const {
    auto e = entry(id);
    std::unique_lock lock(e->wait_mutex);
    const bool changed = e->changed.wait_for(lock, timeout, [&] {
      std::shared_lock s(e->mutex);
      return e->session.version() > after;
    });
    if (!changed) return std::nullopt;
    return snapshot(id);
  }

  bool contains(const std::string& id) const {
    std::lock_guard lock(map_mutex_);
    return sessions_.count(id) > 0;
  }

  std::size_t size() const {
    std::lock_guard lock(map_mutex_);
    return sessions_.size();
  }

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    mutable std::mutex wait_mutex;
    mutable std::condition_variable changed;
    Session session;
  };

  std::shared_ptr<Entry> entry(const std::string& id) const {
    std::lock_guard lock(map_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ValidationError("unknown session '" + id + "'");
    return it->second;
  }

  SessionConfig defaults_;
  std::optional<std::filesystem::path> log_dir_;
  mutable std::mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::size_t counter_ = 0;
};

}  // namespace negobelief
