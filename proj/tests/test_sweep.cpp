#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "negobelief/sweep.hpp"
#include "negobelief/synth.hpp"

using namespace negobelief;

namespace {

const IssueDomain kCasino = IssueDomain::casino();

// Each opponent turn carries two cues worth 1 each, so per-turn raw scores
// stay within [-2, 2] under the incremental provider.
std::shared_ptr<const LikelihoodProvider> incremental_rule() {
  return std::make_shared<RuleProvider>(CueLexicon::generic(kCasino), kCasino, ProviderMode::incremental);
}

class FailingProvider final : public LikelihoodProvider {
 public:
  ProviderContract contract() const override { return {ProviderMode::full_context, false}; }
  std::vector<LikelihoodScores> score(const DialogueContext&, int) const override {
    throw TransportError("scorer offline", 1);
  }
  std::string tag() const override { return "failing"; }
};

}  // namespace

TEST(Sweep, StandardGridShape) {
  const auto g = SweepGrid::standard();
  EXPECT_EQ(g.temperatures.size() * g.clips.size(), 30u);
  const auto corpus = synthesize_corpus(10, 0.9, 4);
  const auto rows = sensitivity_sweep(incremental_rule(), g, corpus);
  ASSERT_EQ(rows.size(), 30u);
  EXPECT_EQ(rows[0].temperature, 1.0);
  EXPECT_EQ(rows[0].clip, std::optional<double>(1.0));
  EXPECT_FALSE(rows[4].clip);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.error);
    EXPECT_TRUE(std::isfinite(r.brier));
  }
}

TEST(Sweep, ClipAboveScoreRangeIsInert) {
  const auto corpus = synthesize_corpus(30, 0.8, 12);
  SweepGrid g{{1, 25}, {3.0, 5.0, 10.0, std::nullopt}};
  const auto rows = sensitivity_sweep(incremental_rule(), g, corpus);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& first = rows[t * 4];
    for (std::size_t c = 1; c < 4; ++c) {
      EXPECT_EQ(rows[t * 4 + c].brier, first.brier);
      EXPECT_EQ(rows[t * 4 + c].map, first.map);
      EXPECT_EQ(rows[t * 4 + c].entropy, first.entropy);
    }
  }
}

TEST(Sweep, HotterLikelihoodApproachesUniform) {
  const auto corpus = synthesize_corpus(40, 1.0, 8);
  SweepGrid g{{1, 5, 10, 25, 50, 100}, {std::nullopt}};
  const auto rows = sensitivity_sweep(incremental_rule(), g, corpus);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LE(std::abs(rows[i].brier - 5.0 / 36.0), std::abs(rows[i - 1].brier - 5.0 / 36.0) + 1e-6);
  }
  EXPECT_LT(rows.front().brier, 5.0 / 36.0);
}

TEST(Sweep, FailingCellRecordsErrorAndContinues) {
  const auto corpus = synthesize_corpus(3, 1.0, 1);
  const auto rows = sensitivity_sweep(std::make_shared<FailingProvider>(), SweepGrid{{1, 25}, {3.0}}, corpus);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    ASSERT_TRUE(r.error);
    EXPECT_NE(r.error->find("scorer offline"), std::string::npos);
    EXPECT_TRUE(std::isnan(r.brier));
  }
}

TEST(Sweep, EmptyGridRejected) {
  EXPECT_THROW(sensitivity_sweep(incremental_rule(), SweepGrid{{}, {3.0}}, {}), ValidationError);
}

TEST(Sweep, TableFormat) {
  std::vector<SweepRow> rows(1);
  rows[0].temperature = 25;
  rows[0].clip = 3.0;
  rows[0].brier = 0.125;
  rows[0].map = 0.5;
  rows[0].entropy = 1.0;
  std::ostringstream os;
  write_sweep_table(os, rows);
  EXPECT_EQ(os.str(), "temperature\tclip\tbrier\tmap\tentropy\taccept_f1\terror\n25\t3\t0.125\t0.5\t1\tnan\t\n");
  EXPECT_EQ(clip_label(std::nullopt), "none");
}
