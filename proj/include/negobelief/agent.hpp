#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "negobelief/belief.hpp"
#include "negobelief/context.hpp"
#include "negobelief/planner.hpp"
#include "negobelief/providers.hpp"
#include "negobelief/tagged.hpp"

namespace negobelief {

// Everything an agent may see at one decision point. The opponent's true
// priorities are deliberately absent.
struct TurnInput {
  DialogueContext context;
  Ordering self_priorities;
  // Self's share under the opponent's outstanding structured offer.
  std::optional<Allocation> pending_offer;
  IssueDomain domain = IssueDomain::casino();
};

struct AgentOutput {
  std::optional<Posterior> posterior;
  AgentAction action;
  std::vector<ParseDiagnostic> diagnostics;
  // True when the allocation content was emitted as structured output.
  bool native_bid = false;
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentOutput act(const TurnInput& input) const = 0;
  virtual std::string name() const = 0;

  // Agents that can condition their action on an externally fixed posterior
  // (the posterior-prefix intervention) override both of these.
  virtual bool supports_posterior_prefix() const { return false; }
  virtual AgentOutput act_with_posterior(const TurnInput& /*input*/, const Posterior& /*injected*/) const {
    throw CapabilityError("agent '" + name() + "' cannot act on an injected posterior");
  }
};

// Belief tracker feeding the menu planner directly.
class EngineAgent final : public Agent {
 public:
  EngineAgent(BeliefTracker tracker, PlannerConfig planner) : tracker_(std::move(tracker)), planner_(planner) {
    planner_.validate();
  }

  AgentOutput act(const TurnInput& input) const override {
    return act_with_posterior(input, tracker_.posterior(input.context));
  }

  bool supports_posterior_prefix() const override { return true; }

  AgentOutput act_with_posterior(const TurnInput& input, const Posterior& posterior) const override {
    AgentOutput out;
    out.posterior = posterior;
    out.action = decide(input.pending_offer, posterior, input.self_priorities, planner_, input.domain);
    out.native_bid = out.action.content.has_value();
    return out;
  }

  std::string name() const override { return "engine+" + tracker_.provider().tag(); }

  const PlannerConfig& planner() const noexcept { return planner_; }
  const BeliefTracker& tracker() const noexcept { return tracker_; }

 private:
  BeliefTracker tracker_;
  PlannerConfig planner_;
};

// Ignores the dialogue: uniform belief, menu decision on top of it.
class UniformAgent final : public Agent {
 public:
  explicit UniformAgent(PlannerConfig planner = {}) : planner_(planner) { planner_.validate(); }

  AgentOutput act(const TurnInput& input) const override { return act_with_posterior(input, Posterior::uniform()); }

  bool supports_posterior_prefix() const override { return true; }

  AgentOutput act_with_posterior(const TurnInput& input, const Posterior& posterior) const override {
    AgentOutput out;
    out.posterior = posterior;
    out.action = decide(input.pending_offer, posterior, input.self_priorities, planner_, input.domain);
    out.native_bid = out.action.content.has_value();
    return out;
  }

  std::string name() const override { return "uniform"; }

 private:
  PlannerConfig planner_;
};

// Replays logged tagged outputs keyed by dialogue_id:turn_index:perspective.
// File format: JSON lines {"key": ..., "output": "<posterior>...</utterance>"}.
class TaggedLogAgent final : public Agent {
 public:
  TaggedLogAgent() = default;
  explicit TaggedLogAgent(std::map<std::string, std::string> outputs) : outputs_(std::move(outputs)) {}

  static TaggedLogAgent parse(std::istream& in) {
    std::map<std::string, std::string> outputs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        outputs[j.at("key").get<std::string>()] = j.at("output").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("tagged log line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    return TaggedLogAgent(std::move(outputs));
  }

  static TaggedLogAgent load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open tagged log " + path);
    return parse(in);
  }

  void write(std::ostream& out) const {
    for (const auto& [key, text] : outputs_) out << nlohmann::json{{"key", key}, {"output", text}}.dump() << '\n';
  }

  void put(const std::string& key, std::string output) { outputs_[key] = std::move(output); }

  AgentOutput act(const TurnInput& input) const override {
    AgentOutput out;
    auto it = outputs_.find(input.context.cache_key());
    if (it == outputs_.end()) {
      out.diagnostics.push_back({"", DiagnosticKind::error, "no logged output for " + input.context.cache_key()});
      return out;
    }
    auto parsed = parse_tagged(it->second, input.domain);
    out.posterior = parsed.posterior;
    if (auto action = parsed.action()) {
      out.action = *action;
      out.native_bid = out.action.content.has_value();
    }
    out.diagnostics = std::move(parsed.parse_errors);
    return out;
  }

  std::string name() const override { return "tagged-log"; }
  std::size_t size() const noexcept { return outputs_.size(); }

 private:
  std::map<std::string, std::string> outputs_;
};

}  // namespace negobelief
