#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "rlac/config.hpp"
#include "support.hpp"

using namespace rlac;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int exit_code = -1;
  std::string out;
  std::string err;
};

Outcome cli(const std::string& args, const fs::path& work, const std::string& env = "") {
  const auto out = work / "stdout.txt", err = work / "stderr.txt";
  const std::string cmd = "cd '" + work.string() + "' && " + env + " '" RLAC_CLI "' " + args + " >'" + out.string() + "' 2>'" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, rlac::testing::slurp(out), rlac::testing::slurp(err)};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// Small factual setup generated in memory; two rounds finish in well under a second.
const char* kSmallConfig = R"({
  "name": "small", "seed": 2,
  "factual": {"generate": {"train": 20, "test": 10}},
  "training": {"rounds": 2, "batch": 20},
  "optimizer": {"generator": {"learning_rate": 0.01}, "critic": {"learning_rate": 0.03}}
})";

std::string last_line(const std::string& text) {
  auto t = text;
  while (!t.empty() && t.back() == '\n') t.pop_back();
  return t.substr(t.rfind('\n') + 1);
}

}  // namespace

TEST(Config, UnknownKeyRejected) {
  try {
    load_config_text(R"({"seed": 1, "training": {"roudns": 3}})", ".");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
    EXPECT_NE(std::string(e.what()).find("training.roudns"), std::string::npos);
  }
}

TEST(Config, TypeErrorsRejected) {
  EXPECT_THROW(load_config_text(R"({"seed": 1, "training": {"rounds": "many"}})", "."), Error);
  EXPECT_THROW(load_config_text(R"({"seed": 1, "training": {"critic_phase": 1}})", "."), Error);
  EXPECT_THROW(load_config_text(R"({"seed": -1})", "."), Error);
  EXPECT_THROW(load_config_text(R"({"seed": 1, "training": 4})", "."), Error);
}

TEST(Config, SeedIsMandatory) {
  try {
    load_config_text("{}", ".");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("seed"), std::string::npos);
  }
}

TEST(Config, OverridesApplyAfterFile) {
  const auto c = load_config_text(R"({"seed": 1, "training": {"rounds": 3}})", ".",
                                  {"training.rounds=7", "training.mode=Enumerative", "optimizer.critic.beta=0.2"});
  const auto exp = to_experiment(c);
  EXPECT_EQ(exp.training.rounds, 7u);
  EXPECT_EQ(exp.training.mode, Mode::Enumerative);
  EXPECT_DOUBLE_EQ(exp.training.critic_optimizer.beta, 0.2);
  EXPECT_THROW(load_config_text(R"({"seed": 1})", ".", {"training.nope=1"}), Error);
  EXPECT_THROW(load_config_text(R"({"seed": 1})", ".", {"training"}), Error);
  EXPECT_THROW(to_experiment(load_config_text(R"({"seed": 1})", ".", {"training.mode=Greedy"})), Error);
}

TEST(Config, OutDirFromEnvironment) {
  ::setenv("RLAC_OUT_DIR", "/tmp/elsewhere", 1);
  const auto c = load_config_text(R"({"seed": 1})", ".");
  ::unsetenv("RLAC_OUT_DIR");
  EXPECT_EQ(output_root(c), fs::path("/tmp/elsewhere"));
  EXPECT_EQ(output_root(load_config_text(R"({"seed": 1})", ".")), fs::path("runs"));
}

TEST(Config, EchoMatchesResolvedValues) {
  const auto c = load_config_text(R"({"seed": 9, "training": {"rounds": 5}})", ".");
  const auto echoed = load_config_text(config_echo(c.resolved), ".");
  EXPECT_EQ(echoed.resolved, c.resolved);
  EXPECT_EQ(to_experiment(c).config_echo, config_echo(c.resolved));
}

TEST(Config, FixturePathRelativeToConfigFile) {
  const auto c = load_config_file(fs::path(RLAC_SOURCE_DIR) / "configs/factual.json");
  const auto exp = to_experiment(c);
  EXPECT_TRUE(fs::exists(exp.task.fixture));
}

TEST(Cli, MissingConfigExitsTwoAndNamesIt) {
  const auto dir = rlac::testing::scratch("cli-missing");
  const auto o = cli("run -c /no/such/config.json", dir);
  EXPECT_EQ(o.exit_code, 2);
  EXPECT_NE(o.err.find("/no/such/config.json"), std::string::npos);
}

TEST(Cli, ParseErrorExitsTwo) {
  const auto dir = rlac::testing::scratch("cli-parse");
  EXPECT_EQ(cli("run", dir).exit_code, 2);
  EXPECT_EQ(cli("frobnicate", dir).exit_code, 2);
}

TEST(Cli, RunIsDeterministicAndSeparatesStreams) {
  const auto dir = rlac::testing::scratch("cli-run");
  write(dir / "small.json", kSmallConfig);
  const auto a = cli("run -c small.json --run-dir a", dir);
  const auto b = cli("run -c small.json --run-dir b", dir);
  ASSERT_EQ(a.exit_code, 0) << a.err;
  ASSERT_EQ(b.exit_code, 0) << b.err;
  EXPECT_EQ(a.out, "a\n");
  EXPECT_NE(a.err.find("round 2 precision"), std::string::npos);
  for (const char* f : {"rounds.csv", "rounds.jsonl", "config.json", "generator.ckpt", "critic.ckpt"})
    EXPECT_EQ(rlac::testing::slurp(dir / "a" / f), rlac::testing::slurp(dir / "b" / f)) << f;
}

TEST(Cli, DefaultRunDirIsTimestampedUnderOutDir) {
  const auto dir = rlac::testing::scratch("cli-stamp");
  write(dir / "small.json", kSmallConfig);
  const auto first = cli("run -c small.json --set training.rounds=0", dir);
  ASSERT_EQ(first.exit_code, 0) << first.err;
  const fs::path p(last_line(first.out));
  EXPECT_EQ(p.parent_path(), fs::path("runs"));
  EXPECT_NE(p.filename().string().find("-seed2"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / p / "rounds.csv"));

  const auto moved = cli("run -c small.json --set training.rounds=0", dir, "RLAC_OUT_DIR='" + (dir / "out").string() + "'");
  ASSERT_EQ(moved.exit_code, 0) << moved.err;
  EXPECT_EQ(fs::path(last_line(moved.out)).parent_path(), dir / "out");
}

TEST(Cli, SetSwitchesMode) {
  const auto dir = rlac::testing::scratch("cli-set");
  write(dir / "small.json", kSmallConfig);
  const auto o = cli("run -c small.json --run-dir e --set training.mode=Enumerative training.rounds=1", dir);
  ASSERT_EQ(o.exit_code, 0) << o.err;
  const auto csv = rlac::testing::slurp(dir / "e/rounds.csv");
  EXPECT_NE(csv.find("mode=Enumerative"), std::string::npos);
  EXPECT_NE(csv.find(",1600,"), std::string::npos);  // 20 prompts x 10 outputs x 8 claims
}

TEST(Cli, BadOverrideExitsTwo) {
  const auto dir = rlac::testing::scratch("cli-badset");
  write(dir / "small.json", kSmallConfig);
  EXPECT_EQ(cli("run -c small.json --set training.mode=Greedy", dir).exit_code, 2);
  EXPECT_EQ(cli("run -c small.json --set training.rounds=-3", dir).exit_code, 2);
}

TEST(Cli, OracleCheck) {
  const auto dir = rlac::testing::scratch("cli-oracle");
  write(dir / "small.json", kSmallConfig);
  const auto ok = cli("oracle-check -c small.json", dir);
  EXPECT_EQ(ok.exit_code, 0) << ok.out << ok.err;
  EXPECT_EQ(last_line(ok.out), "ok");
  const auto bad = cli("oracle-check -c small.json --corrupt-validator", dir);
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_NE(bad.out.find("mismatch instruction="), std::string::npos);

  write(dir / "empty_kb.txt", "!kb 8 8 0\n");
  write(dir / "empty.json", R"({"seed": 1, "task": {"fixture": "empty_kb.txt"}})");
  const auto empty = cli("oracle-check -c empty.json", dir);
  EXPECT_EQ(empty.exit_code, 2) << empty.err;
}

TEST(Cli, PrintConfig) {
  const auto dir = rlac::testing::scratch("cli-print");
  const auto o = cli("print-config", dir);
  ASSERT_EQ(o.exit_code, 0);
  EXPECT_EQ(o.out, config_echo(default_config()));
  const auto s = cli("print-config --set training.rounds=3", dir);
  EXPECT_EQ(nlohmann::json::parse(s.out)["training"]["rounds"], 3);
}

TEST(Cli, AblateWritesFourRunsAndSummary) {
  const auto dir = rlac::testing::scratch("cli-ablate");
  write(dir / "small.json", kSmallConfig);
  const auto o = cli("ablate -c small.json --run-dir abl", dir);
  EXPECT_TRUE(o.exit_code == 0 || o.exit_code == 1) << o.err;
  for (const char* m : {"RLAC", "StaticCritic", "NoisyValidator", "RewardModel"})
    EXPECT_TRUE(fs::exists(dir / "abl" / m / "rounds.csv")) << m;
  const auto summary = rlac::testing::slurp(dir / "abl/summary.tsv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 5);
  EXPECT_EQ(std::count(o.out.begin(), o.out.end(), '\n'), 5);
  const auto checks = rlac::testing::slurp(dir / "abl/checks.tsv");
  EXPECT_EQ(std::count(checks.begin(), checks.end(), '\n'), 4);
  EXPECT_EQ(o.exit_code == 0, checks.find("FAIL") == std::string::npos);
}
