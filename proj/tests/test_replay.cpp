#include <gtest/gtest.h>

#include <sstream>

#include "negobelief/replay.hpp"
#include "negobelief/synth.hpp"

using namespace negobelief;

namespace {

class ThrowingAgent final : public Agent {
 public:
  AgentOutput act(const TurnInput& input) const override {
    if (input.context.turn_index % 4 == 1) throw ValidationError("boom");
    return UniformAgent().act(input);
  }
  std::string name() const override { return "throwing"; }
};

// Records what the agent was shown.
class SpyAgent final : public Agent {
 public:
  AgentOutput act(const TurnInput& input) const override {
    seen.push_back(input);
    return UniformAgent().act(input);
  }
  std::string name() const override { return "spy"; }
  mutable std::vector<TurnInput> seen;
};

}  // namespace

TEST(Replay, OneRecordPerPerspectiveTurn) {
  const auto corpus = synthesize_corpus(20, 0.8, 1);
  const auto records = replay_protocol3(corpus, UniformAgent(), kAgentOne);
  std::size_t expected = 0;
  for (const auto& d : corpus)
    for (const auto& t : d.turns) expected += t.speaker == kAgentOne;
  ASSERT_EQ(records.size(), expected);
  for (const auto& r : records) {
    EXPECT_EQ(r.perspective, kAgentOne);
    EXPECT_TRUE(r.errors.empty());
    ASSERT_TRUE(r.posterior);
    EXPECT_EQ(*r.posterior, Posterior::uniform());
  }
}

TEST(Replay, AgentSeesOnlyEarlierTurns) {
  const auto corpus = synthesize_corpus(5, 0.8, 2);
  SpyAgent spy;
  replay_protocol3(corpus, spy, kAgentOne);
  std::size_t i = 0;
  for (const auto& d : corpus) {
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      if (d.turns[t].speaker != kAgentOne) continue;
      const auto& in = spy.seen.at(i++);
      EXPECT_EQ(in.context.turns.size(), t);
      EXPECT_EQ(in.self_priorities, d.participants[0].priorities);
    }
  }
  EXPECT_EQ(i, spy.seen.size());
}

TEST(Replay, TruthPendingOfferAndEligibility) {
  const auto corpus = synthesize_corpus(30, 0.8, 3);
  const auto records = replay_protocol3(corpus, UniformAgent(), kAgentOne);
  std::size_t i = 0;
  for (const auto& d : corpus) {
    const auto n = std::count_if(d.turns.begin(), d.turns.end(), [](const auto& t) { return t.speaker == kAgentOne; });
    for (long k = 0; k < n; ++k, ++i) {
      const auto& r = records[i];
      EXPECT_EQ(r.truth, d.participants[1].priorities);
      const bool last = k + 1 == n;
      EXPECT_EQ(r.accept_eligible, last);
      if (last) {
        EXPECT_EQ(r.pending_offer, d.turns[d.turns.size() - 2].offer->mirrored(IssueDomain::casino()));
        EXPECT_EQ(r.human_decision, d.turns.back().decision);
      } else {
        EXPECT_FALSE(r.pending_offer);
      }
    }
  }
}

TEST(Replay, PendingOfferRules) {
  DialogueRecord d;
  d.participants = {Participant{"a", Ordering::from_index(0)}, Participant{"b", Ordering::from_index(5)}};
  d.turns = {{"b", "", {}, Allocation{{3, 0, 0}}, std::nullopt},
             {"a", "", {}, std::nullopt, std::nullopt},
             {"a", "", {}, Allocation{{1, 1, 1}}, std::nullopt},
             {"b", "", {}, std::nullopt, Decision::reject},
             {"b", "", {}, Allocation{{2, 2, 2}}, std::nullopt}};
  const auto dom = IssueDomain::casino();
  EXPECT_EQ(pending_offer_at(d, 1, "a", dom), Allocation({{0, 3, 3}}));
  EXPECT_EQ(pending_offer_at(d, 2, "a", dom), Allocation({{0, 3, 3}}));
  EXPECT_FALSE(pending_offer_at(d, 3, "a", dom));  // own offer outstanding
  EXPECT_FALSE(pending_offer_at(d, 4, "a", dom));  // decision closes it
  EXPECT_EQ(pending_offer_at(d, 5, "a", dom), Allocation({{1, 1, 1}}));
}

TEST(Replay, ThreadCountDoesNotChangeOutput) {
  const auto corpus = synthesize_corpus(60, 0.7, 4);
  auto provider = std::make_shared<RuleProvider>(CueLexicon::generic(IssueDomain::casino()), IssueDomain::casino());
  EngineAgent agent(BeliefTracker(provider, BeliefConfig{}), PlannerConfig{});
  ReplayConfig one, many;
  many.threads = 8;
  std::stringstream a, b;
  write_records(a, replay_protocol3(corpus, agent, kAgentOne, one));
  write_records(b, replay_protocol3(corpus, agent, kAgentOne, many));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Replay, AgentFailuresBecomeRecordErrors) {
  const auto corpus = synthesize_corpus(10, 0.7, 5);
  const auto records = replay_protocol3(corpus, ThrowingAgent(), kAgentOne);
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (r.turn_index % 4 == 1) {
      ++failed;
      ASSERT_EQ(r.errors.size(), 1u);
      EXPECT_NE(r.errors[0].find("boom"), std::string::npos);
      EXPECT_FALSE(r.posterior);
    } else {
      EXPECT_TRUE(r.errors.empty());
    }
  }
  EXPECT_GT(failed, 0u);
}

TEST(Replay, TaggedLogMissingKeyIsAnError) {
  const auto corpus = synthesize_corpus(2, 0.7, 6);
  TaggedLogAgent log;
  const std::string key = corpus[0].dialogue_id + ":1:" + kAgentOne;
  log.put(key, render_tagged(Posterior::one_hot(2), {Intent::submit, Allocation{{1, 2, 3}}, "hi"}));
  const auto records = replay_protocol3(corpus, log, kAgentOne);
  for (const auto& r : records) {
    if (r.key() == key) {
      EXPECT_TRUE(r.errors.empty());
      EXPECT_EQ(r.posterior, Posterior::one_hot(2));
      EXPECT_EQ(r.action.content, Allocation({{1, 2, 3}}));
      EXPECT_TRUE(r.native_bid);
    } else {
      EXPECT_FALSE(r.errors.empty());
      EXPECT_FALSE(r.posterior);
    }
  }
}

TEST(Replay, UnknownPerspectiveYieldsNothing) {
  EXPECT_TRUE(replay_protocol3(synthesize_corpus(3, 0.5, 7), UniformAgent(), "nobody").empty());
}

TEST(RecordLog, RoundTrip) {
  const auto corpus = synthesize_corpus(15, 0.7, 8);
  auto provider = std::make_shared<RuleProvider>(CueLexicon::generic(IssueDomain::casino()), IssueDomain::casino());
  EngineAgent agent(BeliefTracker(provider, BeliefConfig{}), PlannerConfig{});
  auto records = replay_protocol3(corpus, agent, kAgentOne);
  records[0].errors = {"x: y"};
  records[1].strategy_labels_pred = std::vector<std::string>{"self-need"};
  std::stringstream ss;
  write_records(ss, records);
  const auto back = read_records(ss);
  ASSERT_EQ(back.size(), records.size());
  std::stringstream again;
  write_records(again, back);
  std::stringstream first;
  write_records(first, records);
  EXPECT_EQ(first.str(), again.str());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i].posterior, records[i].posterior);
}

TEST(RecordLog, BadLineNamesLineNumber) {
  std::istringstream in("\n{\"dialogue_id\": 1}\n");
  try {
    read_records(in);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}
