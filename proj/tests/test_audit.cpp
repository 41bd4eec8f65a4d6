#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "negobelief/audit.hpp"
#include "negobelief/synth.hpp"
#include "oracles.hpp"

using namespace negobelief;

namespace {

const IssueDomain kCasino = IssueDomain::casino();
const std::string kFixtures = NEGOBELIEF_FIXTURES;

EngineAgent rule_agent() {
  auto provider = std::make_shared<RuleProvider>(CueLexicon::generic(kCasino), kCasino);
  return EngineAgent(BeliefTracker(provider, BeliefConfig{}), PlannerConfig{});
}

std::vector<TurnRecord> audit_fixture_records() {
  const auto corpus = import_corpus(kFixtures + "/audit_fixture_corpus.jsonl", "jsonl");
  EXPECT_EQ(corpus.rejected, 0u);
  const auto agent = TaggedLogAgent::load(kFixtures + "/audit_fixture_tagged.jsonl");
  return replay_protocol3(corpus.records, agent, kAgentOne);
}

}  // namespace

TEST(AuditTurns, Definition) {
  TurnRecord r;
  EXPECT_FALSE(is_audit_turn(r));  // utterance only
  r.action = {Intent::submit, Allocation{{1, 1, 1}}, std::nullopt};
  EXPECT_TRUE(is_audit_turn(r));
  r = TurnRecord{};
  r.pending_offer = Allocation{{1, 1, 1}};
  EXPECT_TRUE(is_audit_turn(r));
  r = TurnRecord{};
  r.human_decision = Decision::reject;
  EXPECT_TRUE(is_audit_turn(r));
  r = TurnRecord{};
  r.human_bid = Allocation{{0, 0, 0}};
  EXPECT_TRUE(is_audit_turn(r));
  r = TurnRecord{};
  r.action.intent = Intent::accept;
  EXPECT_TRUE(is_audit_turn(r));
}

TEST(Decompose, ReproducesTableFixture) {
  const auto records = audit_fixture_records();
  ASSERT_EQ(records.size(), 193u);
  for (const auto& r : records) ASSERT_TRUE(r.errors.empty()) << r.key() << " " << r.errors[0];
  EXPECT_EQ(select_audit_turns(records).size(), 181u);
  const auto t = decompose(records, PlannerConfig{});
  EXPECT_EQ(t.cell(true, true), 49u);
  EXPECT_EQ(t.cell(true, false), 67u);
  EXPECT_EQ(t.cell(false, true), 27u);
  EXPECT_EQ(t.cell(false, false), 38u);
  EXPECT_EQ(t.total(), 181u);
  EXPECT_TRUE(t.excluded.empty());
}

TEST(Decompose, CellsPartitionAuditTurns) {
  auto records = replay_protocol3(synthesize_corpus(80, 0.6, 9), rule_agent(), kAgentOne);
  records[0].posterior.reset();
  records[5].action = {Intent::accept, std::nullopt, std::nullopt};
  const auto t = decompose(records, PlannerConfig{});
  EXPECT_EQ(t.supported, select_audit_turns(records).size());
  EXPECT_EQ(t.total() + t.excluded.size(), t.supported);
  ASSERT_EQ(t.excluded.size(), 1u);
  EXPECT_EQ(t.excluded[0], records[0].key());
  EXPECT_EQ(t.cases.size(), t.total());
  std::size_t correct = 0;
  for (const auto& c : t.cases) {
    correct += c.map_correct;
    EXPECT_FALSE(c.interpretation.empty());
  }
  EXPECT_EQ(correct, t.cell(true, true) + t.cell(true, false));
}

TEST(Decompose, EngineAgentIsAlwaysAligned) {
  const auto records = replay_protocol3(synthesize_corpus(80, 0.6, 10), rule_agent(), kAgentOne);
  const auto t = decompose(records, PlannerConfig{});
  ASSERT_GT(t.total(), 0u);
  EXPECT_EQ(t.cell(true, false) + t.cell(false, false), 0u);
  EXPECT_EQ(audit_report_json(t)["alignment_rate"], 1.0);
}

TEST(Interventions, InjectedPosteriors) {
  const auto truth = Ordering::from_index(1);
  EXPECT_EQ(injected_posterior(PrefixMode::correct, truth), Posterior::one_hot(1));
  EXPECT_EQ(injected_posterior(PrefixMode::adversarial, truth), Posterior::one_hot(truth.reversed().index()));
  EXPECT_EQ(kendall_tau_distance(truth, truth.reversed()), 3);
  EXPECT_THROW(injected_posterior(PrefixMode::none, truth), ValidationError);
}

TEST(Interventions, AdversarialChangeRateMatchesOracleFlipRate) {
  const auto corpus = synthesize_corpus(60, 0.8, 11);
  const auto agent = rule_agent();
  const auto baseline = replay_protocol3(corpus, agent, kAgentOne);
  const auto adv = intervene_corpus(corpus, agent, kAgentOne, PrefixMode::adversarial);
  const auto cor = intervene_corpus(corpus, agent, kAgentOne, PrefixMode::correct);
  ASSERT_EQ(adv.size(), baseline.size());
  std::size_t flips_adv = 0, flips_cor = 0;
  for (const auto& r : baseline) {
    const auto own = oracle::decide(r.pending_offer, *r.posterior, r.self_priorities);
    const auto bad = oracle::decide(r.pending_offer, Posterior::one_hot(r.truth.reversed().index()), r.self_priorities);
    const auto good = oracle::decide(r.pending_offer, Posterior::one_hot(r.truth.index()), r.self_priorities);
    flips_adv += !own.same_decision(bad);
    flips_cor += !own.same_decision(good);
  }
  const auto rep = coupling_report(cor, adv);
  EXPECT_EQ(rep.turns, baseline.size());
  EXPECT_DOUBLE_EQ(rep.change_rate_adversarial, double(flips_adv) / baseline.size());
  EXPECT_DOUBLE_EQ(rep.change_rate_correct, double(flips_cor) / baseline.size());
  EXPECT_GT(flips_adv, 0u);
}

TEST(Interventions, NoneModeNeverChanges) {
  const auto res = intervene_corpus(synthesize_corpus(10, 0.8, 12), rule_agent(), kAgentOne, PrefixMode::none);
  for (const auto& r : res) EXPECT_FALSE(r.changed);
}

TEST(Interventions, AgreementDelta) {
  const AgentAction acc{Intent::accept, std::nullopt, std::nullopt};
  const AgentAction rej{Intent::reject, Allocation{{3, 3, 0}}, std::nullopt};
  EXPECT_EQ(agreement_delta(rej, acc, Decision::accept), 1);
  EXPECT_EQ(agreement_delta(acc, rej, Decision::accept), -1);
  EXPECT_EQ(agreement_delta(acc, acc, Decision::accept), 0);
  EXPECT_EQ(agreement_delta(rej, acc, std::nullopt), 0);
}

TEST(Interventions, UnsupportedAgent) {
  const auto corpus = synthesize_corpus(3, 0.8, 13);
  const TaggedLogAgent log;
  EXPECT_THROW(replay_with_prefix(corpus, log, kAgentOne, PrefixMode::correct), CapabilityError);
  const TurnInput in{corpus[0].context(1, kAgentOne), Ordering::from_index(0), std::nullopt, kCasino};
  EXPECT_THROW(intervene(log, in, Ordering::from_index(1), PrefixMode::adversarial), CapabilityError);
  EXPECT_NO_THROW(intervene(log, in, Ordering::from_index(1), PrefixMode::none));
}

TEST(Interventions, MismatchedRuns) {
  const auto a = replay_protocol3(synthesize_corpus(3, 0.8, 14), UniformAgent(), kAgentOne);
  auto b = a;
  b.pop_back();
  EXPECT_THROW(interventions_from_records(a, b, PrefixMode::correct), ValidationError);
  b = a;
  b[0].turn_index += 100;
  EXPECT_THROW(interventions_from_records(a, b, PrefixMode::correct), ValidationError);
}

TEST(Trajectories, ExportAndWrite) {
  const auto records = replay_protocol3(synthesize_corpus(4, 0.8, 15), rule_agent(), kAgentOne);
  const auto id = records[0].dialogue_id;
  const auto t = export_trajectories(records, {id});
  ASSERT_EQ(t.size(), 1u);
  std::size_t n = 0;
  for (const auto& r : records) n += r.dialogue_id == id;
  EXPECT_EQ(t.at(id).size(), n);
  std::ostringstream os;
  write_trajectories(os, t, kCasino);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "dialogue_id\tturn_index\tFood>Water>Firewood\tFood>Firewood>Water\tWater>Food>Firewood\t"
            "Water>Firewood>Food\tFirewood>Food>Water\tFirewood>Water>Food\tmap\ttruth");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), static_cast<long>(n + 1));
  try {
    export_trajectories(records, {"nope"});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(id), std::string::npos);
  }
}

TEST(AuditReport, Fields) {
  const auto records = audit_fixture_records();
  const auto j = audit_report_json(decompose(records, PlannerConfig{}), CouplingReport{0.25, 0.5, 4, 1, 0});
  EXPECT_EQ(j["supported_turns"], 181);
  EXPECT_EQ(j["cells"]["map_wrong_misaligned"], 38);
  EXPECT_NEAR(j["alignment_rate"].get<double>(), 76.0 / 181.0, 1e-12);
  EXPECT_EQ(j["coupling"]["change_rate_adversarial"], 0.5);
  EXPECT_EQ(j["cases"].size(), 181u);
}
