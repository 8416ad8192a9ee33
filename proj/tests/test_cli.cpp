#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "coalsense/cli.hpp"

using namespace coalsense;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "coalsense_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::parse_and_run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("coalsense_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(dir_ / name) << content;
    return path(name);
  }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, MmaxPrintsBound) {
  auto r = run({"mmax", "--alpha", "0.1", "--pf", "0.01"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "10\n");
  r = run({"mmax", "--pf", "0.099"});
  EXPECT_EQ(r.out, "1\n");
  EXPECT_EQ(run({"mmax", "--pf", "1.5"}).code, 1);
}

TEST_F(CliTest, MalformedJsonFailsWithoutOutput) {
  const auto cfg = write("bad.json", "{\"n_sus\": 5,");
  const auto r = run({"sweep-n", "--config", cfg, "--out", path("o.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("malformed"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("o.csv")));
}

TEST_F(CliTest, UnknownKeyIsNamed) {
  const auto cfg = write("typo.json", R"({"n_suss": 5})");
  const auto r = run({"sweep-n", "--config", cfg, "--out", path("o.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("n_suss"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("o.csv")));
}

TEST_F(CliTest, BadValuesAreConfigErrors) {
  EXPECT_EQ(run({"sweep-n", "--out", path("o.csv"), "--set", "alpha=1.5"}).code, 1);
  EXPECT_EQ(run({"sweep-n", "--out", path("o.csv"), "--set", "n_sus=-3"}).code, 1);
  EXPECT_EQ(run({"sweep-n", "--out", path("o.csv"), "--set", "pf_grid=[0.2]"}).code, 1);
  EXPECT_EQ(run({"sweep-n", "--out", path("o.csv"), "--set", "drops=lots"}).code, 1);
  EXPECT_EQ(run({"sweep-n"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_FALSE(fs::exists(path("o.csv")));
}

TEST_F(CliTest, CapacityErrorExitCode) {
  auto r = run({"snapshot", "--n", "13", "--out", path("snap")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--no-centralized"), std::string::npos);
  EXPECT_EQ(run({"sweep-n", "--centralized-cap", "15", "--out", path("o.csv")}).code, 2);
}

TEST_F(CliTest, SweepNWritesOneRowPerN) {
  const auto r = run({"sweep-n", "--drops", "3", "--threads", "1", "--set", "n_list=[3,6,13]", "--set",
                      "pf_grid=[0.01,0.04]", "--out", path("n.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(path("n.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kSweepCsvHeader);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].rfind("3,,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("13,,", 0), 0u);
  // no centralized columns above the cap
  EXPECT_NE(rows[2].find(",,"), rows[2].rfind(",,"));
}

TEST_F(CliTest, SweepPfWritesOneRowPerTarget) {
  const auto r = run({"sweep-pf", "--drops", "2", "--n", "6", "--set", "pf_grid=[0.01,0.05,0.09]", "--out",
                      path("pf.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(path("pf.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("\n6,0.050000000000000003,"), std::string::npos);
}

TEST_F(CliTest, SweepIsReproducible) {
  const std::vector<std::string> common{"--drops", "3", "--seed", "9", "--set", "n_list=[4,8]", "--set",
                                        "pf_grid=[0.02]"};
  auto a = common, b = common;
  a.insert(a.begin(), "sweep-n");
  b.insert(b.begin(), "sweep-n");
  a.insert(a.end(), {"--out", path("a.csv"), "--threads", "1"});
  b.insert(b.end(), {"--out", path("b.csv"), "--threads", "2"});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(CliTest, SnapshotWritesFiles) {
  const auto r = run({"snapshot", "--n", "6", "--seed", "4", "--out", path("snap")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* ext : {".distributed.txt", ".centralized.txt", ".trace.log", ".report.txt"})
    EXPECT_TRUE(fs::exists(path(std::string("snap") + ext))) << ext;
  EXPECT_NE(r.out.find("distributed"), std::string::npos);
  EXPECT_NE(r.out.find("centralized"), std::string::npos);
}

TEST_F(CliTest, SnapshotSingleSu) {
  const auto cfg = write("one.json", R"({"su_positions": [[100, 200]], "pu_x": 0, "pu_y": 0})");
  const auto r = run({"snapshot", "--config", cfg, "--out", path("one")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("one.distributed.txt")), "1:1\n");
  EXPECT_EQ(slurp(path("one.centralized.txt")), "1:1\n");
  EXPECT_EQ(slurp(path("one.trace.log")), "");
}

TEST_F(CliTest, SnapshotWithoutCentralizedAboveCap) {
  const auto r = run({"snapshot", "--n", "20", "--no-centralized", "--out", path("big")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("big.distributed.txt")));
  EXPECT_FALSE(fs::exists(path("big.centralized.txt")));
}

TEST_F(CliTest, MobilityWritesCsvAndLog) {
  const auto cfg = write("mob.json", R"({
    "pu_x": 0, "pu_y": 0, "pf": 0.01,
    "su_positions": [[1500,0],[1550,60],[0,1500],[1480,-70],[60,1560],[1560,-40],[4500,200]],
    "mover": 1, "dir_x": 1, "dir_y": 0, "step_m": 25, "n_steps": 130, "theta_steps": 1})");
  const auto r = run({"mobility", "--config", cfg, "--out", path("m.csv"), "--trace-log", path("m.log")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(path("m.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 131 * 7);
  const auto log = slurp(path("m.log"));
  EXPECT_NE(log.find("SPLIT [1,2,4,6]"), std::string::npos);
  EXPECT_NE(log.find("MERGE [1]|[7] -> [1,7]"), std::string::npos);
}

TEST_F(CliTest, ValidateReportsAgreement) {
  const auto r = run({"validate", "--set", "mc_trials=20000", "--set", "mc_coalitions=5", "--out", path("v.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("/5 coalitions"), std::string::npos);
  const auto csv = slurp(path("v.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(CliConfig, JsonRoundTrip) {
  cli::CliConfig c;
  EXPECT_EQ(cli::config_from_json(cli::to_json(c)), c);
  c.scenario.pu_position = Position{10, 20};
  c.scenario.seed = 77;
  c.scenario.pf_grid = {0.02};
  c.su_positions = {{1, 2}, {3, 4}};
  c.scenario.n_sus = 2;
  c.trajectory = {2, 0.0, 1.0, 5.0, 9};
  EXPECT_EQ(cli::config_from_json(cli::to_json(c)), c);
  EXPECT_EQ(cli::config_from_json(nlohmann::json::object()), cli::CliConfig{});
}

TEST(CliConfig, ErrorsNameTheKey) {
  try {
    cli::config_from_json(nlohmann::json::parse(R"({"alpha": "high"})"));
    FAIL();
  } catch (const cli::ConfigError& e) {
    EXPECT_EQ(e.key(), "alpha");
  }
  try {
    cli::config_from_json(nlohmann::json::parse(R"({"pu_x": 3})"));
    FAIL();
  } catch (const cli::ConfigError& e) {
    EXPECT_EQ(e.key(), "pu_y");
  }
}
