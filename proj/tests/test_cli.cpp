#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(NEGOBELIEF_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("negobelief-cli-" + std::to_string(::getpid()) + "-" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("replay --out " + path("x")).code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, SynthIsDeterministic) {
  ASSERT_EQ(run("synth -n 25 --seed 3 --out " + path("a.jsonl")).code, 0);
  ASSERT_EQ(run("--seed 3 synth -n 25 --out " + path("b.jsonl")).code, 0);
  ASSERT_EQ(run("synth -n 25 --seed 4 --out " + path("c.jsonl")).code, 0);
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  EXPECT_NE(slurp(path("a.jsonl")), slurp(path("c.jsonl")));
  const auto stdout_run = run("synth -n 25 --seed 3");
  EXPECT_EQ(stdout_run.out, slurp(path("a.jsonl")));
}

TEST_F(CliTest, ReplayUniformReferenceValues) {
  ASSERT_EQ(run("synth -n 30 --seed 1 --out " + path("c.jsonl")).code, 0);
  const auto r = run("replay --corpus " + path("c.jsonl") + " --agent uniform --out " + path("run") + " --json");
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(slurp(path("run/report.json")));
  EXPECT_NEAR(rep["brier"]["value"].get<double>(), 5.0 / 36.0, 1e-9);
  EXPECT_NEAR(rep["map_accuracy_expected"]["value"].get<double>(), 1.0 / 6.0, 1e-9);
  EXPECT_TRUE(fs::exists(path("run/records.jsonl")));
  EXPECT_EQ(slurp(path("run/brier_by_turn.tsv")).rfind("turn_index\t", 0), 0u);
}

TEST_F(CliTest, MissingCorpusWritesNothing) {
  const auto r = run("replay --corpus " + path("absent.jsonl") + " --out " + path("run"));
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("run/records.jsonl")));
  EXPECT_FALSE(fs::exists(path("run/report.json")));
}

TEST_F(CliTest, BadFlagValuesAreInputErrors) {
  ASSERT_EQ(run("synth -n 5 --out " + path("c.jsonl")).code, 0);
  EXPECT_EQ(run("replay --corpus " + path("c.jsonl") + " --out " + path("r") + " --retention 3").code, 1);
  EXPECT_EQ(run("replay --corpus " + path("c.jsonl") + " --out " + path("r") + " --agent wizard").code, 1);
  EXPECT_EQ(run("replay --corpus " + path("c.jsonl") + " --out " + path("r") + " --format csv").code, 1);
}

TEST_F(CliTest, AuditOfEngineAgentIsFullyAligned) {
  ASSERT_EQ(run("synth -n 40 --seed 2 --out " + path("c.jsonl")).code, 0);
  ASSERT_EQ(run("replay --corpus " + path("c.jsonl") + " --out " + path("run")).code, 0);
  const auto r = run("audit --records " + path("run/records.jsonl") + " --corpus " + path("c.jsonl") +
                     " --agent provider:rule --out " + path("audit.json") + " --json");
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(slurp(path("audit.json")));
  EXPECT_EQ(rep["alignment_rate"], 1.0);
  EXPECT_EQ(rep["cells"]["map_correct_misaligned"], 0);
  EXPECT_EQ(rep["cells"]["map_wrong_misaligned"], 0);
  EXPECT_GT(rep["coupling"]["change_rate_adversarial"].get<double>(), 0.0);
  EXPECT_EQ(json::parse(r.out), rep);
}

TEST_F(CliTest, AuditReproducesTableFixture) {
  const std::string fx = NEGOBELIEF_FIXTURES;
  ASSERT_EQ(run("replay --corpus " + fx + "/audit_fixture_corpus.jsonl --agent log:" + fx + "/audit_fixture_tagged.jsonl --out " +
                path("run"))
                .code,
            0);
  const auto r = run("audit --records " + path("run/records.jsonl") + " --json");
  ASSERT_EQ(r.code, 0);
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep["cells"]["map_correct_aligned"], 49);
  EXPECT_EQ(rep["cells"]["map_correct_misaligned"], 67);
  EXPECT_EQ(rep["cells"]["map_wrong_aligned"], 27);
  EXPECT_EQ(rep["cells"]["map_wrong_misaligned"], 38);
}

TEST_F(CliTest, ConvertCasino) {
  const std::string fx = NEGOBELIEF_FIXTURES;
  const auto r = run("convert --in " + fx + "/casino_sample.json --out " + path("c.jsonl") + " --json");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["kept"], 2);
  EXPECT_EQ(j["rejected"], 1);
  EXPECT_EQ(j["diagnostics"][0]["dialogue_id"], "2");
  std::ifstream in(path("c.jsonl"));
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 2);
  EXPECT_EQ(run("convert --in " + path("nope.json") + " --out " + path("d.jsonl")).code, 1);
  EXPECT_FALSE(fs::exists(path("d.jsonl")));
}

TEST_F(CliTest, SweepTable) {
  const auto r = run("sweep --synth 20 --temperatures 1 25 --clips 3 none --out " + path("sweep.tsv"));
  ASSERT_EQ(r.code, 0);
  std::ifstream in(path("sweep.tsv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "temperature\tclip\tbrier\tmap\tentropy\taccept_f1\terror");
}

TEST_F(CliTest, Trajectories) {
  ASSERT_EQ(run("synth -n 5 --seed 9 --out " + path("c.jsonl")).code, 0);
  ASSERT_EQ(run("replay --corpus " + path("c.jsonl") + " --out " + path("run")).code, 0);
  const auto ok = run("trajectories --records " + path("run/records.jsonl") + " --ids synth-9-0 synth-9-1 --out " +
                      path("t.tsv"));
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(slurp(path("t.tsv")).find("synth-9-1\t"), std::string::npos);
  EXPECT_EQ(run("trajectories --records " + path("run/records.jsonl") + " --ids ghost").code, 1);
}
